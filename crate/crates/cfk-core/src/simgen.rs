//! Synthetic data generators with oracle channels.
//!
//! Each generator draws from a known model and keeps the quantities a
//! real dataset would hide: both potential outcomes, the true propensity,
//! and counterfactual rewards. Same seed, same dataset, bit for bit.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::kte::{ObservationalDataset, PropensityModel};
use crate::ope::{LoggedInteraction, SlatePolicy, SoftmaxSlatePolicy, TargetInteraction};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Treatment-effect shape for the parametric outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// No effect: b = 0.
    I,
    /// Mean shift: b = 2.
    II,
    /// Higher-order effect: b = 2z - 1 with z ~ Bernoulli(1/2) per row,
    /// so means match but the treated outcome is bimodal.
    III,
}

/// Configuration for the parametric outcome model
/// `Y*_t = beta . X + b t + eps`, `T ~ Bernoulli(sigmoid(alpha . X + alpha0))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha0: f64,
    /// Variance of the outcome noise.
    pub noise_var: f64,
    /// Per-coordinate variance of the covariates.
    pub covariate_var: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        Self {
            scenario,
            n,
            beta: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            alpha: vec![0.5, 0.4, 0.3, 0.2, 0.1],
            alpha0: 0.05,
            noise_var: 0.1,
            covariate_var: 0.5,
            seed,
        }
    }

    /// The true treatment-assignment model for this configuration.
    pub fn propensity_model(&self) -> PropensityModel {
        PropensityModel::Logistic {
            coefficients: self.alpha.clone(),
            intercept: self.alpha0,
        }
    }
}

/// Observed rows plus the oracle channels of the generator.
#[derive(Debug, Clone)]
pub struct ScenarioDataset {
    pub observed: ObservationalDataset,
    pub y0_star: Vec<f64>,
    pub y1_star: Vec<f64>,
    /// True propensity per row.
    pub propensity: Vec<f64>,
}

/// Draw a dataset from the parametric outcome model.
pub fn gen_scenario(config: &ScenarioConfig) -> Result<ScenarioDataset> {
    gen_scenario_with(config, &mut rng::root(config.seed))
}

/// Seedless variant for callers that manage their own substreams.
pub fn gen_scenario_with(config: &ScenarioConfig, rng: &mut Rng) -> Result<ScenarioDataset> {
    if config.n == 0 {
        return Err(Error::EmptyInput("scenario sample size"));
    }
    if config.beta.len() != config.alpha.len() {
        return Err(Error::DimensionMismatch(
            config.beta.len(),
            config.alpha.len(),
        ));
    }
    let dim = config.beta.len();
    let x_sd = config.covariate_var.sqrt();
    let noise_sd = config.noise_var.sqrt();

    let mut covariates = Vec::with_capacity(config.n);
    let mut treatments = Vec::with_capacity(config.n);
    let mut outcomes = Vec::with_capacity(config.n);
    let mut y0_star = Vec::with_capacity(config.n);
    let mut y1_star = Vec::with_capacity(config.n);
    let mut propensity = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let x: Vec<f64> = (0..dim).map(|_| x_sd * draw_normal(rng)).collect();
        let noise = noise_sd * draw_normal(rng);
        let b = match config.scenario {
            Scenario::I => 0.0,
            Scenario::II => 2.0,
            Scenario::III => {
                let z = rng.gen_bool(0.5);
                2.0 * (z as u8 as f64) - 1.0
            }
        };
        let signal: f64 = config.beta.iter().zip(&x).map(|(b, v)| b * v).sum();
        let y0 = signal + noise;
        let y1 = signal + b + noise;
        let z: f64 = config.alpha.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + config.alpha0;
        let e = 1.0 / (1.0 + (-z).exp());
        let t = rng.gen_bool(e);

        covariates.push(x);
        treatments.push(t);
        outcomes.push(vec![if t { y1 } else { y0 }]);
        y0_star.push(y0);
        y1_star.push(y1);
        propensity.push(e);
    }
    Ok(ScenarioDataset {
        observed: ObservationalDataset::new(covariates, treatments, outcomes)?,
        y0_star,
        y1_star,
        propensity,
    })
}

fn draw_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Covariate-shift model: control covariates are a centered Gaussian,
/// treated covariates a three-component Gaussian mixture, and outcomes
/// follow the same linear map in both arms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureShiftConfig {
    /// Rows per arm.
    pub n: usize,
    pub mixture_weights: Vec<f64>,
    pub mixture_means: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub covariate_var: f64,
    pub noise_var: f64,
    /// Size of the direct-sampling oracle for the counterfactual outcome.
    pub oracle_size: usize,
    pub seed: u64,
}

impl MixtureShiftConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            mixture_weights: vec![1.0 / 3.0; 3],
            mixture_means: vec![
                vec![-5.0, 2.5, 0.0, 0.0, 2.5],
                vec![2.5, 2.5, 0.0, 0.0, -5.0],
                vec![2.5, -5.0, 0.0, 0.0, 2.5],
            ],
            beta: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            covariate_var: 5.0,
            noise_var: 0.1,
            oracle_size: 5000,
            seed,
        }
    }
}

/// Mixture-shift draw: control pairs, treated covariates, and a direct
/// sample from the counterfactual outcome distribution for evaluation.
#[derive(Debug, Clone)]
pub struct MixtureShiftDataset {
    pub control_covariates: Vec<Vec<f64>>,
    pub control_outcomes: Vec<f64>,
    pub treated_covariates: Vec<Vec<f64>>,
    pub oracle_outcomes: Vec<f64>,
}

pub fn gen_mixture_shift(config: &MixtureShiftConfig) -> Result<MixtureShiftDataset> {
    gen_mixture_shift_with(config, &mut rng::root(config.seed))
}

pub fn gen_mixture_shift_with(
    config: &MixtureShiftConfig,
    rng: &mut Rng,
) -> Result<MixtureShiftDataset> {
    if config.n == 0 {
        return Err(Error::EmptyInput("mixture-shift sample size"));
    }
    if config.mixture_weights.len() != config.mixture_means.len() {
        return Err(Error::DimensionMismatch(
            config.mixture_weights.len(),
            config.mixture_means.len(),
        ));
    }
    let weight_total: f64 = config.mixture_weights.iter().sum();
    if (weight_total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {weight_total}, expected 1"
        )));
    }
    let dim = config.beta.len();
    let x_sd = config.covariate_var.sqrt();
    let noise_sd = config.noise_var.sqrt();

    let mut control_covariates = Vec::with_capacity(config.n);
    let mut control_outcomes = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let x: Vec<f64> = (0..dim).map(|_| x_sd * draw_normal(rng)).collect();
        let y = config.beta.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>()
            + noise_sd * draw_normal(rng);
        control_covariates.push(x);
        control_outcomes.push(y);
    }

    let draw_treated = |rng: &mut Rng| -> Vec<f64> {
        let mut pick = rng.gen_range(0.0..1.0);
        let mut component = config.mixture_weights.len() - 1;
        for (idx, &w) in config.mixture_weights.iter().enumerate() {
            pick -= w;
            if pick < 0.0 {
                component = idx;
                break;
            }
        }
        config.mixture_means[component]
            .iter()
            .map(|&mu| mu + x_sd * draw_normal(rng))
            .collect()
    };

    let treated_covariates: Vec<Vec<f64>> =
        (0..config.n).map(|_| draw_treated(rng)).collect();
    let oracle_outcomes: Vec<f64> = (0..config.oracle_size)
        .map(|_| {
            let x = draw_treated(rng);
            config.beta.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>()
                + noise_sd * draw_normal(rng)
        })
        .collect();

    Ok(MixtureShiftDataset {
        control_covariates,
        control_outcomes,
        treated_covariates,
        oracle_outcomes,
    })
}

/// Recommendation simulator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecSysConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub slate_size: usize,
    pub dim: usize,
    pub item_var: f64,
    pub user_var: f64,
    /// Logging policy parameters are `alpha_shift` times the target's; 1
    /// makes the policies identical, -1 maximally different.
    pub alpha_shift: f64,
    /// Standard deviation of the noise inside the click probability.
    pub click_noise_sd: f64,
    pub n_logged: usize,
    pub seed: u64,
}

impl RecSysConfig {
    /// Defaults: 50 users, 20 items, 4 slots, 10 feature dimensions,
    /// 1000 logged rows. Feature variances of 0.25 keep the softmax
    /// policies temperate and the click signal moderate, so the policy
    /// shift has a real but estimable effect.
    pub fn new(seed: u64) -> Self {
        Self {
            n_users: 50,
            n_items: 20,
            slate_size: 4,
            dim: 10,
            item_var: 0.25,
            user_var: 0.25,
            alpha_shift: -1.0,
            click_noise_sd: 0.1,
            n_logged: 1000,
            seed,
        }
    }
}

/// Logged rounds under the logging policy, a paired target sample over
/// the same users, and the counterfactual rewards the target draws would
/// have produced.
#[derive(Debug, Clone)]
pub struct RecSysDataset {
    pub logged: Vec<LoggedInteraction>,
    pub target_sample: Vec<TargetInteraction>,
    pub counterfactual_rewards: Vec<f64>,
    pub logging_policy: SoftmaxSlatePolicy,
    pub target_policy: SoftmaxSlatePolicy,
    pub users: Vec<Vec<f64>>,
}

pub fn gen_recsys(config: &RecSysConfig) -> Result<RecSysDataset> {
    gen_recsys_with(config, &mut rng::root(config.seed))
}

pub fn gen_recsys_with(config: &RecSysConfig, rng: &mut Rng) -> Result<RecSysDataset> {
    if config.slate_size > config.n_items {
        return Err(Error::InvalidParameter(format!(
            "slate size {} exceeds item count {}",
            config.slate_size, config.n_items
        )));
    }
    if config.n_logged == 0 || config.n_users == 0 {
        return Err(Error::EmptyInput("recsys sample size"));
    }
    let item_sd = config.item_var.sqrt();
    let user_sd = config.user_var.sqrt();
    let items: Vec<Vec<f64>> = (0..config.n_items)
        .map(|_| (0..config.dim).map(|_| item_sd * draw_normal(rng)).collect())
        .collect();
    let users: Vec<Vec<f64>> = (0..config.n_users)
        .map(|_| (0..config.dim).map(|_| user_sd * draw_normal(rng)).collect())
        .collect();

    // Target parameters: the user vector with half its entries masked.
    let target_params: Vec<Vec<f64>> = users
        .iter()
        .map(|u| {
            u.iter()
                .map(|&v| if rng.gen_bool(0.5) { v } else { 0.0 })
                .collect()
        })
        .collect();
    let logging_params: Vec<Vec<f64>> = target_params
        .iter()
        .map(|b| b.iter().map(|&v| config.alpha_shift * v).collect())
        .collect();

    let logging_policy =
        SoftmaxSlatePolicy::new(items.clone(), logging_params, config.slate_size)?;
    let target_policy = SoftmaxSlatePolicy::new(items.clone(), target_params, config.slate_size)?;

    let click = |user: &[f64], slate: &[usize], rng: &mut Rng| -> f64 {
        let mut mean_item = vec![0.0; config.dim];
        for &item in slate {
            for (m, v) in mean_item.iter_mut().zip(&items[item]) {
                *m += v / slate.len() as f64;
            }
        }
        let score: f64 = mean_item.iter().zip(user).map(|(a, u)| a * u).sum();
        let noise = config.click_noise_sd * draw_normal(rng);
        let theta = 1.0 / (1.0 + (-score + noise).exp());
        f64::from(rng.gen_bool(theta))
    };

    let mut logged = Vec::with_capacity(config.n_logged);
    let mut target_sample = Vec::with_capacity(config.n_logged);
    let mut counterfactual_rewards = Vec::with_capacity(config.n_logged);
    for _ in 0..config.n_logged {
        let user = rng.gen_range(0..config.n_users);
        let context = users[user].clone();

        let slate = logging_policy.sample_slate(user, rng);
        let propensity = logging_policy.slate_pmf(user, &slate);
        let reward = click(&context, &slate, rng);
        logged.push(LoggedInteraction {
            user,
            context: context.clone(),
            slate,
            reward,
            logging_propensity: propensity,
        });

        // Same user under the target policy: the counterfactual round.
        let target_slate = target_policy.sample_slate(user, rng);
        counterfactual_rewards.push(click(&context, &target_slate, rng));
        target_sample.push(TargetInteraction {
            user,
            context,
            slate: target_slate,
        });
    }

    Ok(RecSysDataset {
        logged,
        target_sample,
        counterfactual_rewards,
        logging_policy,
        target_policy,
        users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ope::enumerate_slates;
    use approx::assert_abs_diff_eq;

    fn mean(values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    fn variance(values: &[f64]) -> f64 {
        let m = mean(values);
        values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
    }

    #[test]
    fn scenario_one_outcomes_coincide() {
        let data = gen_scenario(&ScenarioConfig::new(Scenario::I, 200, 3)).unwrap();
        for (y0, y1) in data.y0_star.iter().zip(&data.y1_star) {
            assert_eq!(y0, y1);
        }
    }

    #[test]
    fn scenario_two_mean_shift_is_two() {
        let n = 20_000;
        let data = gen_scenario(&ScenarioConfig::new(Scenario::II, n, 5)).unwrap();
        let shift = mean(&data.y1_star) - mean(&data.y0_star);
        assert_abs_diff_eq!(shift, 2.0, epsilon = 0.01);
    }

    #[test]
    fn scenario_three_matches_moments() {
        let n = 40_000;
        let data = gen_scenario(&ScenarioConfig::new(Scenario::III, n, 7)).unwrap();
        let diff = mean(&data.y1_star) - mean(&data.y0_star);
        // Var(Y1*) - Var(Y0*) = Var(b) = 1 for b = 2z - 1.
        let se = (2.0 / n as f64).sqrt();
        assert!(diff.abs() <= 3.0 * se, "mean difference {diff}");
        let var_gap = variance(&data.y1_star) - variance(&data.y0_star);
        assert!((var_gap - 1.0).abs() <= 0.05, "variance gap {var_gap}");
    }

    #[test]
    fn generators_are_reproducible() {
        let config = ScenarioConfig::new(Scenario::III, 64, 11);
        let a = gen_scenario(&config).unwrap();
        let b = gen_scenario(&config).unwrap();
        assert_eq!(a.observed.covariates, b.observed.covariates);
        assert_eq!(a.observed.treatments, b.observed.treatments);
        assert_eq!(a.y0_star, b.y0_star);
        assert_eq!(a.y1_star, b.y1_star);

        let mix = MixtureShiftConfig::new(32, 4);
        assert_eq!(
            gen_mixture_shift(&mix).unwrap().oracle_outcomes,
            gen_mixture_shift(&mix).unwrap().oracle_outcomes
        );

        let rec = RecSysConfig {
            n_users: 4,
            n_items: 5,
            slate_size: 2,
            dim: 3,
            n_logged: 20,
            ..RecSysConfig::new(9)
        };
        let r1 = gen_recsys(&rec).unwrap();
        let r2 = gen_recsys(&rec).unwrap();
        assert_eq!(
            r1.logged.iter().map(|l| l.reward).collect::<Vec<_>>(),
            r2.logged.iter().map(|l| l.reward).collect::<Vec<_>>()
        );
        assert_eq!(
            r1.logged.iter().map(|l| l.slate.clone()).collect::<Vec<_>>(),
            r2.logged.iter().map(|l| l.slate.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn treatment_depends_on_covariates_only() {
        // Within narrow propensity bins, the treatment indicator and the
        // outcome-noise residual are uncorrelated.
        let n = 10_000;
        let config = ScenarioConfig::new(Scenario::II, n, 13);
        let data = gen_scenario(&config).unwrap();
        let residuals: Vec<f64> = (0..n)
            .map(|i| {
                let signal: f64 = config
                    .beta
                    .iter()
                    .zip(&data.observed.covariates[i])
                    .map(|(b, v)| b * v)
                    .sum();
                data.y0_star[i] - signal
            })
            .collect();

        let bins = 20;
        let mut weighted = 0.0;
        let mut total = 0usize;
        for bin in 0..bins {
            let lo = 0.3 + 0.4 * bin as f64 / bins as f64;
            let hi = 0.3 + 0.4 * (bin + 1) as f64 / bins as f64;
            let rows: Vec<usize> = (0..n)
                .filter(|&i| data.propensity[i] >= lo && data.propensity[i] < hi)
                .collect();
            if rows.len() < 30 {
                continue;
            }
            let t: Vec<f64> = rows
                .iter()
                .map(|&i| data.observed.treatments[i] as u8 as f64)
                .collect();
            let r: Vec<f64> = rows.iter().map(|&i| residuals[i]).collect();
            let (mt, mr) = (mean(&t), mean(&r));
            let cov: f64 = t
                .iter()
                .zip(&r)
                .map(|(a, b)| (a - mt) * (b - mr))
                .sum::<f64>()
                / (rows.len() - 1) as f64;
            let denom = (variance(&t) * variance(&r)).sqrt();
            if denom > 0.0 {
                weighted += (cov / denom).abs() * rows.len() as f64;
                total += rows.len();
            }
        }
        let avg_corr = weighted / total as f64;
        assert!(avg_corr <= 0.1, "within-bin |correlation| {avg_corr}");
    }

    #[test]
    fn mixture_oracle_moments() {
        let config = MixtureShiftConfig {
            oracle_size: 60_000,
            ..MixtureShiftConfig::new(2000, 17)
        };
        let data = gen_mixture_shift(&config).unwrap();

        // beta . mean(nu) = 0 for the default constants.
        let oracle_mean = mean(&data.oracle_outcomes);
        let oracle_sd = variance(&data.oracle_outcomes).sqrt();
        let se = oracle_sd / (config.oracle_size as f64).sqrt();
        assert!(oracle_mean.abs() <= 3.0 * se, "oracle mean {oracle_mean}");

        let control_mean = mean(&data.control_outcomes);
        let control_se =
            variance(&data.control_outcomes).sqrt() / (config.n as f64).sqrt();
        assert!(control_mean.abs() <= 3.0 * control_se);
    }

    #[test]
    fn recsys_propensities_match_enumeration() {
        let config = RecSysConfig {
            n_users: 3,
            n_items: 4,
            slate_size: 2,
            dim: 3,
            n_logged: 40,
            alpha_shift: 0.5,
            ..RecSysConfig::new(23)
        };
        let data = gen_recsys(&config).unwrap();
        // The recorded propensity is the policy pmf of the realized slate,
        // and the pmf normalizes over the enumerated slate space.
        for row in &data.logged {
            let direct = data.logging_policy.slate_pmf(row.user, &row.slate);
            assert_abs_diff_eq!(row.logging_propensity, direct, epsilon = 1e-15);
        }
        for user in 0..config.n_users {
            let total: f64 = enumerate_slates(4, 2)
                .iter()
                .map(|s| data.logging_policy.slate_pmf(user, s))
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_slates_still_normalize() {
        let config = RecSysConfig {
            n_users: 2,
            n_items: 3,
            slate_size: 3,
            dim: 2,
            n_logged: 10,
            ..RecSysConfig::new(31)
        };
        let data = gen_recsys(&config).unwrap();
        for row in &data.logged {
            assert_eq!(row.slate.len(), 3);
        }
        let total: f64 = enumerate_slates(3, 3)
            .iter()
            .map(|s| data.target_policy.slate_pmf(0, s))
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oversized_slates_are_rejected() {
        let config = RecSysConfig {
            n_users: 2,
            n_items: 3,
            slate_size: 4,
            dim: 2,
            n_logged: 4,
            ..RecSysConfig::new(1)
        };
        assert!(gen_recsys(&config).is_err());
    }
}
