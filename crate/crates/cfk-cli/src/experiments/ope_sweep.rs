//! Off-policy estimator comparison across policy-shift multipliers:
//! squared error of each estimator against the counterfactual reward
//! mean, per repetition, on the recommendation simulator.

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use cfk_core::kernels::KernelSpec;
use cfk_core::modelsel::{counterfactual_cv, WeightSource};
use cfk_core::ope::{
    self, dm, dr, fit_reward_regressor, slate_estimator, wips, KpeConfig, LoggedInteraction,
    RidgeConfig, SlateExpectationConfig, SlatePolicy, TargetInteraction,
};
use cfk_core::rng;
use cfk_core::simgen::{gen_recsys_with, RecSysConfig};

use super::stream_id;
use crate::output::{write_csv, write_summary};
use crate::{EpsilonArg, ExperimentConfig};

/// Grid for the regularization constant of the kernel estimator when
/// cross-validated.
const EPSILON_GRID: [f64; 9] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0];

#[derive(Debug, Clone, Serialize)]
pub struct OpeTrialRow {
    pub alpha_shift: f64,
    pub rep: u64,
    pub estimator: String,
    pub estimate: f64,
    pub truth: f64,
    pub squared_error: f64,
    pub logged_mean_reward: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OpeSummaryRow {
    pub alpha_shift: f64,
    pub estimator: String,
    pub mse: f64,
    pub std_error: f64,
    pub failures: usize,
    pub repetitions: usize,
}

#[allow(clippy::too_many_arguments)]
fn kpe_scalar(
    logged: &[LoggedInteraction],
    targets: &[TargetInteraction],
    item_features: &[Vec<f64>],
    sigma_u: f64,
    sigma_a: f64,
    epsilon: f64,
    nystrom_rank: Option<usize>,
    seed: u64,
) -> Result<f64> {
    let config = KpeConfig {
        context_kernel: KernelSpec::gaussian(sigma_u),
        slate_kernel: KernelSpec::gaussian(sigma_a),
        reward_kernel: KernelSpec::Linear,
        epsilon,
        nystrom_rank,
    };
    let estimate = ope::kpe(
        logged,
        targets,
        item_features,
        &config,
        &mut rng::substream(seed, 62),
    )?;
    Ok(estimate.scalar.expect("linear reward kernel"))
}

/// One repetition: dataset, all five estimates, and the oracle truth.
fn evaluate_once(
    config: &ExperimentConfig,
    alpha_shift: f64,
    alpha_idx: usize,
    rep: u64,
) -> Result<Vec<OpeTrialRow>> {
    let sim_config = RecSysConfig {
        alpha_shift,
        n_logged: config.n,
        ..RecSysConfig::new(0)
    };
    let trial_stream = stream_id(rep, alpha_idx as u64);
    let mut data_rng = rng::substream(config.seed, trial_stream);
    let data = gen_recsys_with(&sim_config, &mut data_rng)?;
    let item_features = data.target_policy.item_features().to_vec();

    let truth = data.counterfactual_rewards.iter().sum::<f64>()
        / data.counterfactual_rewards.len() as f64;
    let logged_mean = data.logged.iter().map(|it| it.reward).sum::<f64>()
        / data.logged.len() as f64;

    let expectation = SlateExpectationConfig {
        seed: config.seed ^ (trial_stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        ..SlateExpectationConfig::default()
    };

    let mut rows = Vec::new();
    let mut push = |name: &str, value: Result<f64>| {
        let estimate = value.unwrap_or(f64::NAN);
        let err = estimate - truth;
        rows.push(OpeTrialRow {
            alpha_shift,
            rep,
            estimator: name.to_string(),
            estimate,
            truth,
            squared_error: err * err,
            logged_mean_reward: logged_mean,
        });
    };

    // Kernel policy evaluation with median-heuristic bandwidths and the
    // configured regularization rule.
    let kpe_result = (|| -> Result<f64> {
        let (sigma_u, sigma_a) = ope::kpe_median_bandwidths(&data.logged, &item_features)?;
        let epsilon = match config.epsilon {
            EpsilonArg::Fixed(v) => v,
            EpsilonArg::Schedule => (data.logged.len() as f64).powf(-1.0 / 3.0),
            EpsilonArg::Cv => {
                let rewards: Vec<f64> = data.logged.iter().map(|it| it.reward).collect();
                let ratios: Vec<f64> = data
                    .logged
                    .iter()
                    .map(|it| {
                        data.target_policy.slate_pmf(it.user, &it.slate)
                            / it.logging_propensity
                    })
                    .collect();
                let selection = counterfactual_cv(
                    &rewards,
                    &EPSILON_GRID,
                    5,
                    &WeightSource::Propensity(ratios),
                    config.seed ^ trial_stream,
                    |epsilon, train, validation| {
                        let train_logged: Vec<LoggedInteraction> =
                            train.iter().map(|&i| data.logged[i].clone()).collect();
                        let val_targets: Vec<TargetInteraction> = validation
                            .iter()
                            .map(|&i| data.target_sample[i].clone())
                            .collect();
                        kpe_scalar(
                            &train_logged,
                            &val_targets,
                            &item_features,
                            sigma_u,
                            sigma_a,
                            epsilon,
                            config.nystrom_rank,
                            config.seed ^ trial_stream,
                        )
                        .map_err(|e| {
                            cfk_core::Error::Numerical(format!("kpe fold failed: {e}"))
                        })
                    },
                )?;
                selection.best
            }
        };
        kpe_scalar(
            &data.logged,
            &data.target_sample,
            &item_features,
            sigma_u,
            sigma_a,
            epsilon,
            config.nystrom_rank,
            config.seed ^ trial_stream,
        )
    })();
    push("kpe", kpe_result);

    let regressor = fit_reward_regressor(
        &data.logged,
        &item_features,
        &RidgeConfig {
            seed: config.seed ^ trial_stream,
            ..RidgeConfig::default()
        },
    );
    match &regressor {
        Ok(model) => {
            push(
                "dm",
                dm(&data.logged, &data.target_policy, model, &expectation)
                    .map_err(Into::into),
            );
            push(
                "dr",
                dr(&data.logged, &data.target_policy, model, &expectation)
                    .map_err(Into::into),
            );
        }
        Err(e) => {
            push("dm", Err(anyhow::anyhow!("regressor failed: {e}")));
            push("dr", Err(anyhow::anyhow!("regressor failed: {e}")));
        }
    }
    push(
        "wips",
        wips(&data.logged, &data.target_policy).map_err(Into::into),
    );
    push(
        "slate",
        slate_estimator(
            &data.logged,
            &data.logging_policy,
            &data.target_policy,
            &expectation,
        )
        .map_err(Into::into),
    );
    Ok(rows)
}

/// All trial rows for the configured sweep.
pub fn sweep_rows(config: &ExperimentConfig) -> Result<Vec<OpeTrialRow>> {
    let mut rows = Vec::new();
    for (alpha_idx, &alpha_shift) in config.alphas.iter().enumerate() {
        let per_rep: Vec<Vec<OpeTrialRow>> = (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| evaluate_once(config, alpha_shift, alpha_idx, rep))
            .collect::<Result<_>>()?;
        rows.extend(per_rep.into_iter().flatten());
    }
    Ok(rows)
}

/// Per (alpha, estimator) mean squared error over the repetitions that
/// produced a finite estimate.
pub fn summarize(config: &ExperimentConfig, rows: &[OpeTrialRow]) -> Vec<OpeSummaryRow> {
    let mut out = Vec::new();
    for &alpha_shift in &config.alphas {
        for estimator in ["kpe", "dm", "wips", "dr", "slate"] {
            let errors: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    r.alpha_shift == alpha_shift
                        && r.estimator == estimator
                        && r.squared_error.is_finite()
                })
                .map(|r| r.squared_error)
                .collect();
            let failures = rows
                .iter()
                .filter(|r| {
                    r.alpha_shift == alpha_shift
                        && r.estimator == estimator
                        && !r.squared_error.is_finite()
                })
                .count();
            let count = errors.len().max(1) as f64;
            let mse = errors.iter().sum::<f64>() / count;
            let var = errors.iter().map(|e| (e - mse) * (e - mse)).sum::<f64>()
                / (count - 1.0).max(1.0);
            out.push(OpeSummaryRow {
                alpha_shift,
                estimator: estimator.to_string(),
                mse,
                std_error: (var / count).sqrt(),
                failures,
                repetitions: config.reps,
            });
        }
    }
    out
}

pub fn run(config: &ExperimentConfig) -> Result<()> {
    let rows = sweep_rows(config)?;
    let summary = summarize(config, &rows);
    write_csv(&config.out.join("ope_trials.csv"), config, &rows)?;
    write_csv(&config.out.join("mse_vs_alpha.csv"), config, &summary)?;
    write_summary(&config.out.join("ope_summary.json"), config, &summary)?;
    Ok(())
}
