//! Off-policy evaluation for slate recommendation.
//!
//! A policy proposes an ordered slate of K items per context; logged data
//! hold the slates and rewards realized under a logging policy, and the
//! task is to estimate the expected reward of a target policy. Kernel
//! policy evaluation treats the problem as counterfactual embedding
//! estimation over joint (context, slate) inputs; the direct, wIPS,
//! doubly-robust, and slate estimators are the standard baselines.

use nalgebra::{DMatrix, DVector};

use crate::cme::CmeModel;
use crate::embedding::WeightedEmbedding;
use crate::kernels::{self, KernelSpec};
use crate::modelsel;
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Eigenvalues below this are dropped when pseudo-inverting the slot-item
/// second-moment matrix.
const GAMMA_EIG_CLIP: f64 = 1e-10;

/// Relative residual of q outside the range of Γ above which the slate
/// estimator refuses to project.
const GAMMA_CONSISTENCY_TOL: f64 = 0.25;

/// One logged round: context, realized slate, reward, and the logging
/// policy's probability of that slate.
#[derive(Debug, Clone)]
pub struct LoggedInteraction {
    pub user: usize,
    pub context: Vec<f64>,
    pub slate: Vec<usize>,
    pub reward: f64,
    pub logging_propensity: f64,
}

/// A context-slate pair drawn from the target policy.
#[derive(Debug, Clone)]
pub struct TargetInteraction {
    pub user: usize,
    pub context: Vec<f64>,
    pub slate: Vec<usize>,
}

/// A conditional distribution over ordered slates given a context.
///
/// Contexts are user indices into a shared pool, which is how the
/// simulator pairs logging and target draws user by user.
pub trait SlatePolicy: Sync {
    fn num_items(&self) -> usize;
    fn slate_size(&self) -> usize;
    fn item_features(&self) -> &[Vec<f64>];
    /// Probability of an ordered slate given the context.
    fn slate_pmf(&self, user: usize, slate: &[usize]) -> f64;
    fn sample_slate(&self, user: usize, rng: &mut Rng) -> Vec<usize>;
}

/// Softmax item preferences turned into a slate distribution by
/// sequential sampling without replacement: the probability of a slate is
/// the product of renormalized item probabilities slot by slot.
#[derive(Debug, Clone)]
pub struct SoftmaxSlatePolicy {
    item_features: Vec<Vec<f64>>,
    user_params: Vec<Vec<f64>>,
    slate_size: usize,
}

impl SoftmaxSlatePolicy {
    pub fn new(
        item_features: Vec<Vec<f64>>,
        user_params: Vec<Vec<f64>>,
        slate_size: usize,
    ) -> Result<Self> {
        if item_features.is_empty() {
            return Err(Error::EmptyInput("policy item features"));
        }
        if slate_size == 0 || slate_size > item_features.len() {
            return Err(Error::InvalidParameter(format!(
                "slate size {slate_size} outside 1..={}",
                item_features.len()
            )));
        }
        Ok(Self {
            item_features,
            user_params,
            slate_size,
        })
    }

    /// Unnormalized item weights exp(b_u . v_l), stabilized.
    fn item_weights(&self, user: usize) -> Vec<f64> {
        let params = &self.user_params[user];
        let scores: Vec<f64> = self
            .item_features
            .iter()
            .map(|v| params.iter().zip(v).map(|(b, x)| b * x).sum())
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        scores.iter().map(|s| (s - max).exp()).collect()
    }
}

impl SlatePolicy for SoftmaxSlatePolicy {
    fn num_items(&self) -> usize {
        self.item_features.len()
    }

    fn slate_size(&self) -> usize {
        self.slate_size
    }

    fn item_features(&self) -> &[Vec<f64>] {
        &self.item_features
    }

    fn slate_pmf(&self, user: usize, slate: &[usize]) -> f64 {
        let weights = self.item_weights(user);
        let mut remaining: f64 = weights.iter().sum();
        let mut pmf = 1.0;
        for &item in slate {
            pmf *= weights[item] / remaining;
            remaining -= weights[item];
        }
        pmf
    }

    fn sample_slate(&self, user: usize, rng: &mut Rng) -> Vec<usize> {
        use rand::Rng as _;
        let weights = self.item_weights(user);
        let mut available: Vec<usize> = (0..weights.len()).collect();
        let mut slate = Vec::with_capacity(self.slate_size);
        for _ in 0..self.slate_size {
            let total: f64 = available.iter().map(|&l| weights[l]).sum();
            let mut draw = rng.gen_range(0.0..total);
            let mut chosen = available.len() - 1;
            for (pos, &l) in available.iter().enumerate() {
                draw -= weights[l];
                if draw < 0.0 {
                    chosen = pos;
                    break;
                }
            }
            slate.push(available.remove(chosen));
        }
        slate
    }
}

/// Slot-major indicator of a slate: entry k*M + m is 1 iff slot k holds
/// item m. Exactly K ones, one per slot block.
pub fn slate_indicator(slate: &[usize], num_items: usize) -> Vec<f64> {
    let mut indicator = vec![0.0; slate.len() * num_items];
    for (slot, &item) in slate.iter().enumerate() {
        indicator[slot * num_items + item] = 1.0;
    }
    indicator
}

/// Concatenation of the slate's item feature vectors in slot order.
pub fn slate_features(slate: &[usize], item_features: &[Vec<f64>]) -> Vec<f64> {
    let mut features = Vec::with_capacity(slate.len() * item_features[0].len());
    for &item in slate {
        features.extend_from_slice(&item_features[item]);
    }
    features
}

/// All ordered slates of `slate_size` distinct items out of `num_items`.
pub fn enumerate_slates(num_items: usize, slate_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(slate_size);
    let mut used = vec![false; num_items];
    fn recurse(
        num_items: usize,
        slate_size: usize,
        current: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == slate_size {
            out.push(current.clone());
            return;
        }
        for item in 0..num_items {
            if !used[item] {
                used[item] = true;
                current.push(item);
                recurse(num_items, slate_size, current, used, out);
                current.pop();
                used[item] = false;
            }
        }
    }
    recurse(num_items, slate_size, &mut current, &mut used, &mut out);
    out
}

/// Number of ordered slates, saturating.
fn slate_space_size(num_items: usize, slate_size: usize) -> usize {
    let mut size: usize = 1;
    for i in 0..slate_size {
        size = size.saturating_mul(num_items - i);
    }
    size
}

/// How per-context expectations over slates are computed.
#[derive(Debug, Clone)]
pub struct SlateExpectationConfig {
    /// Slate spaces up to this many slates are enumerated exactly.
    pub enumeration_limit: usize,
    /// Monte-Carlo draws per context above the limit.
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for SlateExpectationConfig {
    fn default() -> Self {
        Self {
            enumeration_limit: 10_000,
            mc_draws: 1000,
            seed: 0,
        }
    }
}

/// Reward model interface for the direct and doubly-robust estimators.
pub trait RewardRegressor: Sync {
    /// Predict the reward for a context and the slate's concatenated
    /// feature vector.
    fn predict(&self, context: &[f64], slate_features: &[f64]) -> f64;
}

/// Linear ridge model on the concatenated (context, slate features)
/// vector, augmented with context-times-mean-item interaction terms when
/// the item and context dimensions agree. Click-style rewards depend on
/// the alignment between the context and the slate, which no purely
/// additive design can express; the interaction block makes that
/// alignment a linear feature. Richer regressors plug in through
/// [`RewardRegressor`].
#[derive(Debug, Clone)]
pub struct RidgeRegressor {
    weights: Vec<f64>,
    intercept: f64,
    item_dim: usize,
    pub penalty: f64,
}

/// Design vector: context, slot features, and (when dimensions agree)
/// the elementwise product of the context with the mean item vector.
fn regression_features(context: &[f64], slate_features: &[f64], item_dim: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(context.len() + slate_features.len() + item_dim);
    row.extend_from_slice(context);
    row.extend_from_slice(slate_features);
    if context.len() == item_dim && !slate_features.is_empty() {
        let slots = slate_features.len() / item_dim;
        for j in 0..item_dim {
            let mean_j = (0..slots)
                .map(|slot| slate_features[slot * item_dim + j])
                .sum::<f64>()
                / slots as f64;
            row.push(context[j] * mean_j);
        }
    }
    row
}

impl RewardRegressor for RidgeRegressor {
    fn predict(&self, context: &[f64], slate_features: &[f64]) -> f64 {
        let features = regression_features(context, slate_features, self.item_dim);
        self.intercept
            + self
                .weights
                .iter()
                .zip(&features)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

/// Ridge CV configuration.
#[derive(Debug, Clone)]
pub struct RidgeConfig {
    pub penalties: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            penalties: vec![1e-6, 1e-4, 1e-2, 1.0, 1e2],
            folds: 5,
            seed: 0,
        }
    }
}

fn design_row(interaction: &LoggedInteraction, item_features: &[Vec<f64>]) -> Vec<f64> {
    regression_features(
        &interaction.context,
        &slate_features(&interaction.slate, item_features),
        item_features[0].len(),
    )
}

fn ridge_solve(rows: &[Vec<f64>], targets: &[f64], penalty: f64) -> Result<(Vec<f64>, f64)> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean_x = vec![0.0; d];
    for row in rows {
        for (m, v) in mean_x.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let mean_y: f64 = targets.iter().sum::<f64>() / n as f64;

    let mut gram = DMatrix::zeros(d, d);
    let mut moment = DVector::zeros(d);
    for (row, &y) in rows.iter().zip(targets) {
        let centered: Vec<f64> = row.iter().zip(&mean_x).map(|(v, m)| v - m).collect();
        for a in 0..d {
            moment[a] += centered[a] * (y - mean_y);
            for b in a..d {
                gram[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += penalty;
    }
    let weights = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge normal equations not SPD".into()))?
        .solve(&moment);
    let intercept = mean_y
        - weights
            .iter()
            .zip(&mean_x)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    Ok((weights.data.into(), intercept))
}

/// Fit the ridge reward model, selecting the L2 penalty by K-fold CV on
/// mean squared prediction error.
pub fn fit_reward_regressor(
    logged: &[LoggedInteraction],
    item_features: &[Vec<f64>],
    config: &RidgeConfig,
) -> Result<RidgeRegressor> {
    if logged.is_empty() {
        return Err(Error::EmptyInput("regressor training set"));
    }
    let rows: Vec<Vec<f64>> = logged
        .iter()
        .map(|it| design_row(it, item_features))
        .collect();
    let targets: Vec<f64> = logged.iter().map(|it| it.reward).collect();

    let mut best: Option<(f64, f64)> = None; // (cv mse, penalty)
    if logged.len() >= 2 * config.folds && config.penalties.len() > 1 {
        let labels = modelsel::fold_assignment(config.seed, rows.len(), config.folds);
        for &penalty in &config.penalties {
            let mut total = 0.0;
            let mut count = 0usize;
            for fold in 0..config.folds {
                let train: Vec<usize> =
                    (0..rows.len()).filter(|&i| labels[i] != fold).collect();
                let val: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == fold).collect();
                let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
                let train_y: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
                let (w, b) = ridge_solve(&train_rows, &train_y, penalty)?;
                for &i in &val {
                    let pred: f64 =
                        b + w.iter().zip(&rows[i]).map(|(wj, xj)| wj * xj).sum::<f64>();
                    let err = pred - targets[i];
                    total += err * err;
                    count += 1;
                }
            }
            let mse = total / count as f64;
            let better = match best {
                None => true,
                Some((err, pen)) => mse < err || (mse == err && penalty > pen),
            };
            if better {
                best = Some((mse, penalty));
            }
        }
    }
    let penalty = best.map(|(_, p)| p).unwrap_or_else(|| {
        config
            .penalties
            .first()
            .copied()
            .unwrap_or(1e-6)
    });
    let (weights, intercept) = ridge_solve(&rows, &targets, penalty)?;
    Ok(RidgeRegressor {
        weights,
        intercept,
        item_dim: item_features[0].len(),
        penalty,
    })
}

/// Expected regressor value over the target policy's slates for one
/// context: exact enumeration when the slate space is small, otherwise
/// Monte Carlo with a per-user substream.
fn expected_prediction(
    user: usize,
    context: &[f64],
    target: &dyn SlatePolicy,
    regressor: &dyn RewardRegressor,
    config: &SlateExpectationConfig,
) -> f64 {
    let items = target.item_features();
    if slate_space_size(target.num_items(), target.slate_size()) <= config.enumeration_limit {
        enumerate_slates(target.num_items(), target.slate_size())
            .iter()
            .map(|slate| {
                target.slate_pmf(user, slate)
                    * regressor.predict(context, &slate_features(slate, items))
            })
            .sum()
    } else {
        let mut stream = rng::substream(config.seed, user as u64);
        let mut total = 0.0;
        for _ in 0..config.mc_draws {
            let slate = target.sample_slate(user, &mut stream);
            total += regressor.predict(context, &slate_features(&slate, items));
        }
        total / config.mc_draws as f64
    }
}

/// Direct method: average the regressor's expected value under the target
/// policy over logged contexts.
pub fn dm(
    logged: &[LoggedInteraction],
    target: &dyn SlatePolicy,
    regressor: &dyn RewardRegressor,
    config: &SlateExpectationConfig,
) -> Result<f64> {
    if logged.is_empty() {
        return Err(Error::EmptyInput("logged data"));
    }
    let mut cache: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut total = 0.0;
    for it in logged {
        let value = *cache.entry(it.user).or_insert_with(|| {
            expected_prediction(it.user, &it.context, target, regressor, config)
        });
        total += value;
    }
    Ok(total / logged.len() as f64)
}

fn propensity_ratios(
    logged: &[LoggedInteraction],
    target: &dyn SlatePolicy,
) -> Result<Vec<f64>> {
    logged
        .iter()
        .map(|it| {
            if it.logging_propensity <= 0.0 || it.logging_propensity.is_nan() {
                return Err(Error::InvalidPropensity(it.logging_propensity));
            }
            Ok(target.slate_pmf(it.user, &it.slate) / it.logging_propensity)
        })
        .collect()
}

/// Weighted inverse propensity scoring: `Σ w_i r_i / Σ w_i` with
/// `w_i = π*(a_i|u_i) / π0(a_i|u_i)`.
pub fn wips(logged: &[LoggedInteraction], target: &dyn SlatePolicy) -> Result<f64> {
    if logged.is_empty() {
        return Err(Error::EmptyInput("logged data"));
    }
    let ratios = propensity_ratios(logged, target)?;
    let total: f64 = ratios.iter().sum();
    if total == 0.0 {
        return Err(Error::Degenerate(
            "all propensity ratios are zero; the target policy never matches the logs".into(),
        ));
    }
    Ok(ratios
        .iter()
        .zip(logged)
        .map(|(w, it)| w * it.reward)
        .sum::<f64>()
        / total)
}

/// Doubly robust: direct-method value plus importance-weighted residuals.
pub fn dr(
    logged: &[LoggedInteraction],
    target: &dyn SlatePolicy,
    regressor: &dyn RewardRegressor,
    config: &SlateExpectationConfig,
) -> Result<f64> {
    if logged.is_empty() {
        return Err(Error::EmptyInput("logged data"));
    }
    let ratios = propensity_ratios(logged, target)?;
    let items = target.item_features();
    let mut cache: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut total = 0.0;
    for (it, &w) in logged.iter().zip(&ratios) {
        let expected = *cache.entry(it.user).or_insert_with(|| {
            expected_prediction(it.user, &it.context, target, regressor, config)
        });
        let fitted = regressor.predict(&it.context, &slate_features(&it.slate, items));
        total += expected + w * (it.reward - fitted);
    }
    Ok(total / logged.len() as f64)
}

/// Per-user slot-item moments for the slate estimator.
struct SlateMoments {
    /// Γ_u = E_{π0}[1_a 1_aᵀ | u]
    gamma: DMatrix<f64>,
    /// q_u = E_{π*}[1_a | u]
    q: DVector<f64>,
}

fn slate_moments(
    user: usize,
    logging: &dyn SlatePolicy,
    target: &dyn SlatePolicy,
    config: &SlateExpectationConfig,
) -> SlateMoments {
    let num_items = logging.num_items();
    let k = logging.slate_size();
    let dim = num_items * k;
    let mut gamma = DMatrix::zeros(dim, dim);
    let mut q = DVector::zeros(dim);

    if slate_space_size(num_items, k) <= config.enumeration_limit {
        for slate in enumerate_slates(num_items, k) {
            let indicator = slate_indicator(&slate, num_items);
            let p0 = logging.slate_pmf(user, &slate);
            let pt = target.slate_pmf(user, &slate);
            for (a, &ia) in indicator.iter().enumerate() {
                if ia == 0.0 {
                    continue;
                }
                q[a] += pt;
                for (b, &ib) in indicator.iter().enumerate() {
                    if ib != 0.0 {
                        gamma[(a, b)] += p0;
                    }
                }
            }
        }
    } else {
        let mut stream = rng::substream(config.seed, user as u64);
        let scale = 1.0 / config.mc_draws as f64;
        for _ in 0..config.mc_draws {
            let slate = logging.sample_slate(user, &mut stream);
            for (slot_a, &item_a) in slate.iter().enumerate() {
                let a = slot_a * num_items + item_a;
                for (slot_b, &item_b) in slate.iter().enumerate() {
                    gamma[(a, slot_b * num_items + item_b)] += scale;
                }
            }
            let slate = target.sample_slate(user, &mut stream);
            for (slot, &item) in slate.iter().enumerate() {
                q[slot * num_items + item] += scale;
            }
        }
    }
    SlateMoments { gamma, q }
}

/// Slate estimator: `(1/n) Σ r_i q_{u_i}ᵀ Γ⁺_{u_i} 1_{a_i}`, assuming
/// rewards linear in the slot-item indicator.
///
/// Γ⁺ is the eigenvalue-clipped pseudo-inverse. When Γ is singular and q
/// has substantial mass outside its range, the estimate would silently
/// discard target mass, so that case is an error instead.
pub fn slate_estimator(
    logged: &[LoggedInteraction],
    logging: &dyn SlatePolicy,
    target: &dyn SlatePolicy,
    config: &SlateExpectationConfig,
) -> Result<f64> {
    if logged.is_empty() {
        return Err(Error::EmptyInput("logged data"));
    }
    let num_items = logging.num_items();
    let mut cache: std::collections::HashMap<usize, DVector<f64>> =
        std::collections::HashMap::new();
    let mut total = 0.0;
    for it in logged {
        let weights = match cache.get(&it.user) {
            Some(w) => w.clone(),
            None => {
                let moments = slate_moments(it.user, logging, target, config);
                let eig = moments.gamma.clone().symmetric_eigen();
                let mut pinv_q = DVector::zeros(moments.q.len());
                for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
                    if lambda > GAMMA_EIG_CLIP {
                        let u = eig.eigenvectors.column(idx);
                        pinv_q += u * (u.dot(&moments.q) / lambda);
                    }
                }
                let projected = &moments.gamma * &pinv_q;
                let residual = (&projected - &moments.q).norm();
                let scale = moments.q.norm().max(f64::MIN_POSITIVE);
                if residual / scale > GAMMA_CONSISTENCY_TOL {
                    return Err(Error::Degenerate(format!(
                        "target slate mass outside the logging moment range \
                         (relative residual {:.3})",
                        residual / scale
                    )));
                }
                cache.insert(it.user, pinv_q.clone());
                pinv_q
            }
        };
        // q' Γ⁺ 1_a reduces to summing the slot-item entries of Γ⁺ q.
        let weight: f64 = it
            .slate
            .iter()
            .enumerate()
            .map(|(slot, &item)| weights[slot * num_items + item])
            .sum();
        total += it.reward * weight;
    }
    Ok(total / logged.len() as f64)
}

/// Kernel policy evaluation configuration. The joint input kernel is the
/// product of a context kernel and a slate kernel on the concatenated
/// slot features.
#[derive(Debug, Clone)]
pub struct KpeConfig {
    pub context_kernel: KernelSpec,
    pub slate_kernel: KernelSpec,
    pub reward_kernel: KernelSpec,
    pub epsilon: f64,
    pub nystrom_rank: Option<usize>,
}

/// KPE output: the reward embedding, its coefficients, and the scalar
/// expected-reward estimate when the reward kernel is linear.
#[derive(Debug, Clone)]
pub struct KpeEstimate {
    pub embedding: WeightedEmbedding,
    pub weights: Vec<f64>,
    pub scalar: Option<f64>,
}

/// Kernel policy evaluation: counterfactual embedding of the reward
/// distribution under the target policy.
///
/// Logged (context, slate) pairs are the training inputs, rewards the
/// outputs, and the target sample plays the target-covariate role; the
/// coefficients are exactly the conditional-embedding weights of that
/// system.
pub fn kpe(
    logged: &[LoggedInteraction],
    targets: &[TargetInteraction],
    item_features: &[Vec<f64>],
    config: &KpeConfig,
    rng: &mut Rng,
) -> Result<KpeEstimate> {
    if logged.is_empty() {
        return Err(Error::EmptyInput("logged data"));
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput("target sample"));
    }
    let context_dim = logged[0].context.len();
    let joint = |context: &[f64], slate: &[usize]| -> Vec<f64> {
        let mut z = context.to_vec();
        z.extend(slate_features(slate, item_features));
        z
    };
    let inputs: Vec<Vec<f64>> = logged.iter().map(|it| joint(&it.context, &it.slate)).collect();
    let rewards: Vec<Vec<f64>> = logged.iter().map(|it| vec![it.reward]).collect();
    let target_inputs: Vec<Vec<f64>> = targets
        .iter()
        .map(|it| joint(&it.context, &it.slate))
        .collect();

    let kernel = KernelSpec::product(
        config.context_kernel.clone(),
        config.slate_kernel.clone(),
        context_dim,
    );
    let model = match config.nystrom_rank {
        None => CmeModel::new(
            inputs,
            rewards,
            kernel,
            config.reward_kernel.clone(),
            config.epsilon,
        )?,
        Some(rank) => CmeModel::with_nystrom(
            inputs,
            rewards,
            kernel,
            config.reward_kernel.clone(),
            config.epsilon,
            rank,
            rng,
        )?,
    };
    let weights = model.cme_weights(&target_inputs)?;
    let embedding = WeightedEmbedding::new(
        model.outcomes().to_vec(),
        weights.clone(),
        config.reward_kernel.clone(),
    )?;
    let scalar = if config.reward_kernel == KernelSpec::Linear {
        Some(
            weights
                .iter()
                .zip(logged)
                .map(|(b, it)| b * it.reward)
                .sum(),
        )
    } else {
        None
    };
    Ok(KpeEstimate {
        embedding,
        weights,
        scalar,
    })
}

/// Median-heuristic bandwidths over the logged contexts and slate
/// features, the defaults for the KPE product kernel.
pub fn kpe_median_bandwidths(
    logged: &[LoggedInteraction],
    item_features: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let contexts: Vec<Vec<f64>> = logged.iter().map(|it| it.context.clone()).collect();
    let slates: Vec<Vec<f64>> = logged
        .iter()
        .map(|it| slate_features(&it.slate, item_features))
        .collect();
    Ok((
        kernels::median_heuristic(&contexts)?,
        kernels::median_heuristic(&slates)?,
    ))
}
