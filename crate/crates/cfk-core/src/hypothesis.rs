//! Bootstrap two-sample testing and power studies.
//!
//! The null distribution comes from merging both samples and randomly
//! resplitting them into two disjoint subsets of the original sizes. The
//! kernel bandwidth is resolved from the pooled sample once, before any
//! resampling, and held fixed across replicates; re-estimating it per
//! replicate would break exchangeability of the statistic.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cme::{self, CmeModel, KrrCvConfig};
use crate::herding::{self, CandidateSearch};
use crate::kernels::{self, KernelSpec};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Which MMD statistic drives the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatisticKind {
    /// U-statistic; signed.
    MmdUnbiased,
    /// V-statistic (plug-in); clamped at zero.
    MmdBiased,
}

/// Kernel selection rule for a test, resolved on the pooled sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum KernelChoice {
    Linear,
    /// Gaussian with the bandwidth set by the median heuristic.
    GaussianMedian,
    /// Gaussian with a fixed bandwidth.
    GaussianFixed(f64),
}

impl KernelChoice {
    pub fn resolve(&self, pooled: &[Vec<f64>]) -> Result<KernelSpec> {
        match self {
            KernelChoice::Linear => Ok(KernelSpec::Linear),
            KernelChoice::GaussianMedian => {
                Ok(KernelSpec::gaussian(kernels::median_heuristic(pooled)?))
            }
            KernelChoice::GaussianFixed(bandwidth) => Ok(KernelSpec::gaussian(*bandwidth)),
        }
    }
}

/// Two-sample test configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestConfig {
    pub kernel: KernelChoice,
    pub statistic: StatisticKind,
    pub bootstrap: usize,
    pub alpha: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::GaussianMedian,
            statistic: StatisticKind::MmdUnbiased,
            bootstrap: 1000,
            alpha: 0.01,
        }
    }
}

/// Outcome of a bootstrap test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// `(1 + #{null >= statistic}) / (B + 1)`; the add-one smoothing
    /// avoids zero p-values at finite B.
    pub p_value: f64,
    pub reject: bool,
    pub null_samples: Vec<f64>,
    pub alpha: f64,
}

/// Test H0: both samples share a distribution.
///
/// The statistic is computed on the original pair; the null distribution
/// from `bootstrap` merge-and-resplit replicates that preserve the
/// original sizes. Rejects iff `p_value <= alpha`.
pub fn bootstrap_two_sample_test(
    sample_a: &[Vec<f64>],
    sample_b: &[Vec<f64>],
    spec: &KernelSpec,
    statistic: StatisticKind,
    bootstrap: usize,
    alpha: f64,
    rng: &mut Rng,
) -> Result<TestResult> {
    let n = sample_a.len();
    let m = sample_b.len();
    if n < 2 || m < 2 {
        return Err(Error::Degenerate(
            "two-sample test needs at least 2 points per sample".into(),
        ));
    }
    if bootstrap < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 bootstrap replicates, got {bootstrap}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }

    // One Gram over the pooled sample; every replicate is an index
    // partition, so resampling costs additions only.
    let mut pooled = sample_a.to_vec();
    pooled.extend_from_slice(sample_b);
    let gram = kernels::gram(spec, &pooled, &pooled)?;

    let mut order: Vec<usize> = (0..n + m).collect();
    let observed = partition_statistic(&gram, &order, n, statistic);
    let mut null_samples = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        order.shuffle(rng);
        null_samples.push(partition_statistic(&gram, &order, n, statistic));
    }

    let exceeding = null_samples.iter().filter(|&&v| v >= observed).count();
    let p_value = (1 + exceeding) as f64 / (bootstrap + 1) as f64;
    Ok(TestResult {
        statistic: observed,
        p_value,
        reject: p_value <= alpha,
        null_samples,
        alpha,
    })
}

/// Statistic for the split `order[..n]` vs `order[n..]` of the pooled
/// Gram matrix.
fn partition_statistic(
    gram: &DMatrix<f64>,
    order: &[usize],
    n: usize,
    statistic: StatisticKind,
) -> f64 {
    let (a_idx, b_idx) = order.split_at(n);
    let m = b_idx.len();
    let mut within_a = 0.0;
    let mut diag_a = 0.0;
    for &i in a_idx {
        diag_a += gram[(i, i)];
        for &j in a_idx {
            within_a += gram[(i, j)];
        }
    }
    let mut within_b = 0.0;
    let mut diag_b = 0.0;
    for &i in b_idx {
        diag_b += gram[(i, i)];
        for &j in b_idx {
            within_b += gram[(i, j)];
        }
    }
    let mut cross = 0.0;
    for &i in a_idx {
        for &j in b_idx {
            cross += gram[(i, j)];
        }
    }
    let nf = n as f64;
    let mf = m as f64;
    match statistic {
        StatisticKind::MmdUnbiased => {
            (within_a - diag_a) / (nf * (nf - 1.0)) - 2.0 * cross / (nf * mf)
                + (within_b - diag_b) / (mf * (mf - 1.0))
        }
        StatisticKind::MmdBiased => {
            (within_a / (nf * nf) - 2.0 * cross / (nf * mf) + within_b / (mf * mf)).max(0.0)
        }
    }
}

/// Test for a distributional treatment effect from observational rows.
///
/// The statistic is the squared RKHS distance between the
/// inverse-propensity-weighted outcome embeddings of the two arms; the
/// null distribution permutes the treatment labels against the rows
/// (each row keeps its own propensity), which is exact under the
/// label-exchangeable null. Self-normalized weights keep the statistic
/// scale-stable across permutations.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_date_test(
    outcomes: &[Vec<f64>],
    treatments: &[bool],
    propensities: &[f64],
    spec: &KernelSpec,
    statistic: StatisticKind,
    normalization: crate::kte::Normalization,
    bootstrap: usize,
    alpha: f64,
    rng: &mut Rng,
) -> Result<TestResult> {
    let n = outcomes.len();
    if n != treatments.len() || n != propensities.len() {
        return Err(Error::DimensionMismatch(n, treatments.len()));
    }
    let treated = treatments.iter().filter(|&&t| t).count();
    if treated < 2 || n - treated < 2 {
        return Err(Error::Degenerate(
            "weighted test needs at least 2 rows per arm".into(),
        ));
    }
    if bootstrap < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 bootstrap replicates, got {bootstrap}"
        )));
    }
    for &e in propensities {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidPropensity(e));
        }
    }
    let gram = kernels::gram(spec, outcomes, outcomes)?;

    let mut labels = treatments.to_vec();
    let observed =
        weighted_date_statistic(&gram, &labels, propensities, statistic, normalization);
    let mut null_samples = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        labels.shuffle(rng);
        null_samples.push(weighted_date_statistic(
            &gram,
            &labels,
            propensities,
            statistic,
            normalization,
        ));
    }
    let exceeding = null_samples.iter().filter(|&&v| v >= observed).count();
    let p_value = (1 + exceeding) as f64 / (bootstrap + 1) as f64;
    Ok(TestResult {
        statistic: observed,
        p_value,
        reject: p_value <= alpha,
        null_samples,
        alpha,
    })
}

fn weighted_date_statistic(
    gram: &DMatrix<f64>,
    labels: &[bool],
    propensities: &[f64],
    statistic: StatisticKind,
    normalization: crate::kte::Normalization,
) -> f64 {
    let n = labels.len();
    let mut weights = vec![0.0f64; n];
    let mut treated_total = 0.0;
    let mut control_total = 0.0;
    for i in 0..n {
        if labels[i] {
            weights[i] = 1.0 / propensities[i];
            treated_total += weights[i];
        } else {
            weights[i] = 1.0 / (1.0 - propensities[i]);
            control_total += weights[i];
        }
    }
    match normalization {
        crate::kte::Normalization::SelfNormalized => {
            for i in 0..n {
                weights[i] /= if labels[i] { treated_total } else { control_total };
            }
        }
        crate::kte::Normalization::Raw => {
            for w in weights.iter_mut() {
                *w /= n as f64;
            }
        }
    }
    let mut within_t = 0.0;
    let mut within_c = 0.0;
    let mut cross = 0.0;
    let mut diag_t = 0.0;
    let mut diag_c = 0.0;
    for i in 0..n {
        let row_w = weights[i];
        if labels[i] {
            diag_t += row_w * row_w * gram[(i, i)];
        } else {
            diag_c += row_w * row_w * gram[(i, i)];
        }
        for j in 0..n {
            let pair = row_w * weights[j] * gram[(i, j)];
            match (labels[i], labels[j]) {
                (true, true) => within_t += pair,
                (false, false) => within_c += pair,
                (true, false) => cross += pair,
                (false, true) => {}
            }
        }
    }
    match statistic {
        StatisticKind::MmdBiased => (within_t - 2.0 * cross + within_c).max(0.0),
        StatisticKind::MmdUnbiased => (within_t - diag_t) - 2.0 * cross + (within_c - diag_c),
    }
}

/// Rejection-rate estimate with its binomial standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub power: f64,
    pub std_error: f64,
    pub rejections: usize,
    pub repetitions: usize,
}

/// Fraction of independent trials that reject.
///
/// `trial(rep, rng)` receives its own substream derived from the root
/// seed, so trials are independent, reproducible, and the result does not
/// depend on execution order. Trials run in parallel.
pub fn power_study<T>(repetitions: usize, seed: u64, trial: T) -> Result<PowerEstimate>
where
    T: Fn(u64, &mut Rng) -> Result<bool> + Sync,
{
    if repetitions == 0 {
        return Err(Error::InvalidParameter("need at least one repetition".into()));
    }
    let outcomes: Vec<bool> = (0..repetitions as u64)
        .into_par_iter()
        .map(|rep| {
            let mut stream = rng::substream(seed, rep);
            trial(rep, &mut stream)
        })
        .collect::<Result<_>>()?;
    let rejections = outcomes.iter().filter(|&&r| r).count();
    let power = rejections as f64 / repetitions as f64;
    let std_error = (power * (1.0 - power) / repetitions as f64).sqrt();
    Ok(PowerEstimate {
        power,
        std_error,
        rejections,
        repetitions,
    })
}

/// Power of the bootstrap two-sample test against a dataset generator.
///
/// Per repetition the generator draws a fresh sample pair, the kernel is
/// resolved on that repetition's pooled sample, and the test runs at the
/// configured size.
pub fn two_sample_power<G>(
    generator: G,
    config: &TestConfig,
    repetitions: usize,
    seed: u64,
) -> Result<PowerEstimate>
where
    G: Fn(&mut Rng) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> + Sync,
{
    power_study(repetitions, seed, |_, rng| {
        let (a, b) = generator(rng)?;
        let mut pooled = a.clone();
        pooled.extend_from_slice(&b);
        let spec = config.kernel.resolve(&pooled)?;
        let result = bootstrap_two_sample_test(
            &a,
            &b,
            &spec,
            config.statistic,
            config.bootstrap,
            config.alpha,
            rng,
        )?;
        Ok(result.reject)
    })
}

/// Parameter selection for the assignment-effect pipeline.
#[derive(Debug, Clone)]
pub enum CmeParams {
    /// Covariate bandwidth from the median heuristic on the pooled
    /// covariates; the given regularization constant.
    MedianWithEpsilon(f64),
    /// Bandwidth and regularization from K-fold CV, treating the model as
    /// kernel ridge regression on scalar outcomes.
    CrossValidated(KrrCvConfig),
}

/// Configuration for [`test_assignment_effect`].
#[derive(Debug, Clone)]
pub struct AssignmentEffectConfig {
    pub params: CmeParams,
    /// Herded sample size; defaults to the control sample size.
    pub herd_count: Option<usize>,
    pub test: TestConfig,
}

/// Assignment-effect test outcome.
///
/// `heuristic` is always true: the herded points approximate the
/// counterfactual distribution deterministically rather than being drawn
/// from it, so the test is a pragmatic device, not an exact one.
#[derive(Debug, Clone)]
pub struct AssignmentTestResult {
    pub test: TestResult,
    pub heuristic: bool,
    pub herded: Vec<Vec<f64>>,
}

/// Test whether the treatment assignment mechanism shifts the control
/// outcome distribution.
///
/// Pipeline: estimate the counterfactual embedding from control pairs and
/// treated covariates, herd a sample from it, then bootstrap-test the
/// observed control outcomes against the herded sample.
pub fn test_assignment_effect(
    control_covariates: &[Vec<f64>],
    control_outcomes: &[Vec<f64>],
    treated_covariates: &[Vec<f64>],
    config: &AssignmentEffectConfig,
    rng: &mut Rng,
) -> Result<AssignmentTestResult> {
    if control_covariates.len() != control_outcomes.len() {
        return Err(Error::DimensionMismatch(
            control_covariates.len(),
            control_outcomes.len(),
        ));
    }
    let (bandwidth, epsilon) = match &config.params {
        CmeParams::MedianWithEpsilon(epsilon) => {
            let mut pooled = control_covariates.to_vec();
            pooled.extend_from_slice(treated_covariates);
            (kernels::median_heuristic(&pooled)?, *epsilon)
        }
        CmeParams::CrossValidated(cv) => {
            if control_outcomes[0].len() != 1 {
                return Err(Error::InvalidParameter(
                    "CV parameter selection needs scalar outcomes".into(),
                ));
            }
            let scalars: Vec<f64> = control_outcomes.iter().map(|y| y[0]).collect();
            cme::select_krr_params(control_covariates, &scalars, cv)?
        }
    };
    let outcome_kernel = KernelSpec::gaussian(kernels::median_heuristic(control_outcomes)?);

    let model = CmeModel::new(
        control_covariates.to_vec(),
        control_outcomes.to_vec(),
        KernelSpec::gaussian(bandwidth),
        outcome_kernel,
        epsilon,
    )?;
    let estimate = model.counterfactual_embedding(treated_covariates)?;
    let herd_count = config.herd_count.unwrap_or(control_outcomes.len());
    let search: CandidateSearch = herding::default_search(&estimate);
    let herded = herding::herd(&estimate, herd_count, &search)?;

    let mut pooled = control_outcomes.to_vec();
    pooled.extend_from_slice(&herded);
    let spec = config.test.kernel.resolve(&pooled)?;
    let test = bootstrap_two_sample_test(
        control_outcomes,
        &herded,
        &spec,
        config.test.statistic,
        config.test.bootstrap,
        config.test.alpha,
        rng,
    )?;
    Ok(AssignmentTestResult {
        test,
        heuristic: true,
        herded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_sample(count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| vec![StandardNormal.sample(rng)])
            .collect()
    }

    #[test]
    fn statistics_match_direct_estimators() {
        let mut r = rng::root(2);
        let a = normal_sample(9, &mut r);
        let b = normal_sample(7, &mut r);
        let spec = KernelSpec::gaussian(0.9);
        let mut pooled = a.clone();
        pooled.extend_from_slice(&b);
        let gram = kernels::gram(&spec, &pooled, &pooled).unwrap();
        let order: Vec<usize> = (0..16).collect();

        let u = partition_statistic(&gram, &order, 9, StatisticKind::MmdUnbiased);
        let u_direct = embedding::squared_mmd_unbiased(&a, &b, &spec).unwrap();
        assert!((u - u_direct).abs() <= 1e-12);

        let v = partition_statistic(&gram, &order, 9, StatisticKind::MmdBiased);
        let ea = embedding::WeightedEmbedding::empirical(spec.clone(), &a).unwrap();
        let eb = embedding::WeightedEmbedding::empirical(spec, &b).unwrap();
        let v_direct = embedding::squared_mmd_biased(&ea, &eb).unwrap();
        assert!((v - v_direct).abs() <= 1e-12);
    }

    #[test]
    fn size_is_controlled_under_the_null() {
        let config = TestConfig {
            bootstrap: 300,
            ..TestConfig::default()
        };
        let estimate = two_sample_power(
            |rng| Ok((normal_sample(60, rng), normal_sample(60, rng))),
            &config,
            150,
            7,
        )
        .unwrap();
        assert!(
            estimate.power <= 0.03,
            "null rejection rate {}",
            estimate.power
        );
    }

    #[test]
    fn separated_samples_always_reject() {
        let mut r = rng::root(5);
        let a = normal_sample(40, &mut r);
        let b: Vec<Vec<f64>> = normal_sample(40, &mut r)
            .into_iter()
            .map(|mut p| {
                p[0] += 10.0;
                p
            })
            .collect();
        let spec = KernelSpec::gaussian(1.0);
        let result = bootstrap_two_sample_test(
            &a,
            &b,
            &spec,
            StatisticKind::MmdUnbiased,
            200,
            0.01,
            &mut r,
        )
        .unwrap();
        assert!(result.reject);
        assert!(result.p_value <= 0.01);
    }

    #[test]
    fn always_rejecting_trial_has_unit_power() {
        let estimate = power_study(25, 3, |_, _| Ok(true)).unwrap();
        assert_eq!(estimate.power, 1.0);
        assert_eq!(estimate.rejections, 25);
        assert_eq!(estimate.std_error, 0.0);
    }

    #[test]
    fn power_study_is_order_independent_and_seeded() {
        let trial = |rep: u64, rng: &mut Rng| {
            let a = normal_sample(12, rng);
            let _ = rep;
            Ok(a[0][0] > 0.0)
        };
        let first = power_study(64, 11, trial).unwrap();
        let second = power_study(64, 11, trial).unwrap();
        assert_eq!(first.rejections, second.rejections);
    }

    #[test]
    fn null_p_values_are_super_uniform() {
        // Empirical CDF of the p-value at 0.05 stays at or below 0.08.
        let below: Vec<bool> = (0..500u64)
            .map(|rep| {
                let mut r = rng::substream(23, rep);
                let a = normal_sample(25, &mut r);
                let b = normal_sample(25, &mut r);
                let result = bootstrap_two_sample_test(
                    &a,
                    &b,
                    &KernelSpec::gaussian(1.0),
                    StatisticKind::MmdUnbiased,
                    120,
                    0.05,
                    &mut r,
                )
                .unwrap();
                result.p_value <= 0.05
            })
            .collect();
        let rate = below.iter().filter(|&&x| x).count() as f64 / 500.0;
        assert!(rate <= 0.08, "CDF at 0.05 was {rate}");
    }

    #[test]
    fn small_samples_and_small_bootstrap_are_rejected() {
        let mut r = rng::root(1);
        let a = normal_sample(1, &mut r);
        let b = normal_sample(5, &mut r);
        let spec = KernelSpec::gaussian(1.0);
        assert!(bootstrap_two_sample_test(
            &a,
            &b,
            &spec,
            StatisticKind::MmdUnbiased,
            200,
            0.05,
            &mut r
        )
        .is_err());
        let a = normal_sample(5, &mut r);
        assert!(bootstrap_two_sample_test(
            &a,
            &b,
            &spec,
            StatisticKind::MmdUnbiased,
            50,
            0.05,
            &mut r
        )
        .is_err());
    }

    #[test]
    fn weighted_statistic_matches_date_expansion() {
        use crate::kte::{kte_date_squared, Normalization, ObservationalDataset, PropensityModel};
        let mut r = rng::root(3);
        let n = 16;
        let covariates: Vec<Vec<f64>> = (0..n).map(|_| vec![StandardNormal.sample(&mut r)]).collect();
        let treatments: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let outcomes: Vec<Vec<f64>> = (0..n).map(|_| vec![StandardNormal.sample(&mut r)]).collect();
        let model = PropensityModel::Logistic {
            coefficients: vec![0.7],
            intercept: 0.1,
        };
        let propensities: Vec<f64> = covariates.iter().map(|x| model.eval(x)).collect();
        let spec = KernelSpec::gaussian(0.9);
        let gram = kernels::gram(&spec, &outcomes, &outcomes).unwrap();
        for norm in [Normalization::Raw, Normalization::SelfNormalized] {
            let direct = weighted_date_statistic(
                &gram,
                &treatments,
                &propensities,
                StatisticKind::MmdBiased,
                norm,
            );
            let data = ObservationalDataset::new(
                covariates.clone(),
                treatments.clone(),
                outcomes.clone(),
            )
            .unwrap();
            let expansion = kte_date_squared(&data, &model, &spec, norm).unwrap();
            assert!(
                (direct - expansion).abs() <= 1e-12,
                "{norm:?}: {direct} vs {expansion}"
            );
        }
    }

    #[test]
    fn weighted_test_controls_size_under_confounded_assignment() {
        use crate::kte::Normalization;
        // Outcomes depend on x, treatment depends on x: the arms differ in
        // distribution, but weighting by the true propensity restores the
        // exchangeable null.
        let trials = 60u64;
        let mut rejections = 0;
        for rep in 0..trials {
            let mut r = rng::substream(77, rep);
            let n = 60;
            let mut outcomes = Vec::with_capacity(n);
            let mut treatments = Vec::with_capacity(n);
            let mut propensities = Vec::with_capacity(n);
            for _ in 0..n {
                let x: f64 = StandardNormal.sample(&mut r);
                let e = 1.0 / (1.0 + (-x).exp());
                let noise: f64 = StandardNormal.sample(&mut r);
                outcomes.push(vec![x + 0.3 * noise]);
                treatments.push(r.gen_range(0.0..1.0) < e);
                propensities.push(e);
            }
            let treated = treatments.iter().filter(|&&t| t).count();
            if treated < 2 || n - treated < 2 {
                continue;
            }
            let result = bootstrap_date_test(
                &outcomes,
                &treatments,
                &propensities,
                &KernelSpec::gaussian(1.0),
                StatisticKind::MmdUnbiased,
                Normalization::SelfNormalized,
                150,
                0.05,
                &mut r,
            )
            .unwrap();
            if result.reject {
                rejections += 1;
            }
        }
        assert!(rejections <= 8, "{rejections}/{trials} null rejections");
    }

    #[test]
    fn assignment_effect_null_rarely_rejects() {
        // Same covariate law in both arms and a null outcome model: the
        // herded sample should look like the controls.
        let trial = |rep: u64| {
            let mut r = rng::substream(31, rep);
            let xs = normal_sample(60, &mut r);
            let ys: Vec<Vec<f64>> = xs
                .iter()
                .map(|x| {
                    let noise: f64 = StandardNormal.sample(&mut r);
                    vec![0.5 * x[0] + 0.3 * noise]
                })
                .collect();
            let treated = normal_sample(60, &mut r);
            let config = AssignmentEffectConfig {
                params: CmeParams::MedianWithEpsilon(0.1),
                herd_count: None,
                test: TestConfig {
                    bootstrap: 150,
                    ..TestConfig::default()
                },
            };
            let result =
                test_assignment_effect(&xs, &ys, &treated, &config, &mut r).unwrap();
            assert!(result.heuristic);
            result.test.reject
        };
        let rejections = (0..40u64).filter(|&rep| trial(rep)).count();
        assert!(rejections <= 4, "{rejections}/40 null rejections");
    }
}
