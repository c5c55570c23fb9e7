//! Monte-Carlo checks of the propensity-weighted embedding's
//! unbiasedness and its error decay rate.

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use cfk_core::column;
use cfk_core::kernels::{self, KernelSpec};
use cfk_core::kte::{ipw_embeddings, Normalization, PropensityModel};
use cfk_core::rng;
use cfk_core::simgen::{gen_scenario_with, Scenario, ScenarioConfig};

use super::stream_id;
use crate::output::{write_csv, write_summary};
use crate::{BandwidthArg, ExperimentConfig};

/// Test outcomes at which embeddings are compared against the truth.
const TEST_POINTS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Direct-sampling size for the ground-truth embedding.
const ORACLE_DRAWS: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Row {
    pub test_point: f64,
    pub mc_mean: f64,
    pub truth: f64,
    pub std_error: f64,
    pub deviation_sigmas: f64,
}

/// Unbiasedness check: the Monte-Carlo mean of the raw treated embedding,
/// evaluated at fixed test outcomes, against a direct-sampling estimate
/// of the true embedding.
pub fn theorem3_rows(config: &ExperimentConfig) -> Result<Vec<Theorem3Row>> {
    let scenario = ScenarioConfig::new(Scenario::III, config.n, 0);
    let propensity = scenario.propensity_model();

    // Ground truth by sampling the treated potential outcome directly.
    let mut oracle_rng = rng::substream(config.seed, 1);
    let oracle_config = ScenarioConfig {
        n: ORACLE_DRAWS,
        ..scenario.clone()
    };
    let oracle = gen_scenario_with(&oracle_config, &mut oracle_rng)?.y1_star;

    let bandwidth = match config.bandwidth {
        BandwidthArg::Fixed(v) => v,
        BandwidthArg::Median => kernels::median_heuristic(&column(&oracle[..500]))?,
    };
    let kernel = KernelSpec::gaussian(bandwidth);

    let mut truth = [0.0f64; 5];
    let mut truth_var = [0.0f64; 5];
    for (idx, z) in TEST_POINTS.iter().enumerate() {
        let values: Vec<f64> = oracle
            .iter()
            .map(|y| kernel.eval(&[*y], &[*z]).expect("scalar eval"))
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        truth[idx] = mean;
        truth_var[idx] = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (values.len() - 1) as f64
            / values.len() as f64;
    }

    let evaluations: Vec<[f64; 5]> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<[f64; 5]> {
            let mut data_rng = rng::substream(config.seed, stream_id(rep, 8));
            let data = gen_scenario_with(&scenario, &mut data_rng)?;
            let arms = ipw_embeddings(
                &data.observed,
                &propensity,
                &kernel,
                Normalization::Raw,
            )?;
            let mut values = [0.0f64; 5];
            for (idx, z) in TEST_POINTS.iter().enumerate() {
                values[idx] = arms.treated.evaluate(&[*z])?;
            }
            Ok(values)
        })
        .collect::<Result<_>>()?;

    let reps = evaluations.len() as f64;
    let mut rows = Vec::with_capacity(TEST_POINTS.len());
    for (idx, z) in TEST_POINTS.iter().enumerate() {
        let mean = evaluations.iter().map(|v| v[idx]).sum::<f64>() / reps;
        let var = evaluations
            .iter()
            .map(|v| (v[idx] - mean) * (v[idx] - mean))
            .sum::<f64>()
            / (reps - 1.0);
        let std_error = (var / reps + truth_var[idx]).sqrt();
        rows.push(Theorem3Row {
            test_point: *z,
            mc_mean: mean,
            truth: truth[idx],
            std_error,
            deviation_sigmas: (mean - truth[idx]).abs() / std_error,
        });
    }
    Ok(rows)
}

pub fn run_theorem3(config: &ExperimentConfig) -> Result<()> {
    let rows = theorem3_rows(config)?;
    write_csv(&config.out.join("theorem3_trials.csv"), config, &rows)?;
    write_summary(&config.out.join("theorem3_summary.json"), config, &rows)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub mse: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub rows: Vec<RateRow>,
    /// mse(2n) / mse(n) along the sweep; 0.5 under the expected O(1/n).
    pub ratios: Vec<f64>,
}

/// Expected kernel value between a point and a Gaussian distribution.
fn gaussian_smoothed(kernel_bw: f64, y: f64, mean: f64, var: f64) -> f64 {
    let total = kernel_bw * kernel_bw + var;
    (kernel_bw / total.sqrt()) * (-(y - mean) * (y - mean) / (2.0 * total)).exp()
}

/// Rate check on the randomized design: squared embedding error against
/// the exactly Gaussian truth, averaged over replications per sample
/// size.
pub fn theorem4_rows(config: &ExperimentConfig) -> Result<RateSummary> {
    // Randomized assignment: zero propensity coefficients give e = 1/2.
    let base = ScenarioConfig {
        alpha: vec![0.0; 5],
        alpha0: 0.0,
        ..ScenarioConfig::new(Scenario::II, config.n, 0)
    };
    let propensity = PropensityModel::Constant(0.5);
    // Y1* ~ N(2, beta'beta * var_x + var_eps), exactly Gaussian.
    let outcome_var =
        base.covariate_var * base.beta.iter().map(|b| b * b).sum::<f64>() + base.noise_var;
    let outcome_mean = 2.0;

    let bandwidth = match config.bandwidth {
        BandwidthArg::Fixed(v) => v,
        BandwidthArg::Median => {
            let mut reference_rng = rng::substream(config.seed, 2);
            let reference = gen_scenario_with(
                &ScenarioConfig { n: 500, ..base.clone() },
                &mut reference_rng,
            )?;
            kernels::median_heuristic(&column(&reference.y1_star))?
        }
    };
    let kernel = KernelSpec::gaussian(bandwidth);
    // <mu, mu> for two independent copies of the outcome law.
    let norm_sq = gaussian_smoothed(bandwidth, 0.0, 0.0, 2.0 * outcome_var);

    let mut rows = Vec::new();
    for (n_idx, &n) in config.ns.iter().enumerate() {
        let errors: Vec<f64> = (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let mut data_rng =
                    rng::substream(config.seed, stream_id(rep, 16 + n_idx as u64));
                let data = gen_scenario_with(
                    &ScenarioConfig { n, ..base.clone() },
                    &mut data_rng,
                )?;
                let arms =
                    ipw_embeddings(&data.observed, &propensity, &kernel, Normalization::Raw)?;
                let points = arms.treated.points();
                let weights = arms.treated.weights();
                let mut quad = 0.0;
                for (pi, &wi) in points.iter().zip(weights) {
                    for (pj, &wj) in points.iter().zip(weights) {
                        quad += wi * wj * kernel.eval(pi, pj).expect("outcome eval");
                    }
                }
                let cross: f64 = points
                    .iter()
                    .zip(weights)
                    .map(|(p, &w)| {
                        w * gaussian_smoothed(bandwidth, p[0], outcome_mean, outcome_var)
                    })
                    .sum();
                Ok(quad - 2.0 * cross + norm_sq)
            })
            .collect::<Result<_>>()?;
        let reps = errors.len() as f64;
        let mse = errors.iter().sum::<f64>() / reps;
        let var = errors.iter().map(|e| (e - mse) * (e - mse)).sum::<f64>() / (reps - 1.0);
        rows.push(RateRow {
            n,
            mse,
            std_error: (var / reps).sqrt(),
        });
    }
    let ratios = rows.windows(2).map(|w| w[1].mse / w[0].mse).collect();
    Ok(RateSummary { rows, ratios })
}

pub fn run_theorem4(config: &ExperimentConfig) -> Result<()> {
    let summary = theorem4_rows(config)?;
    write_csv(&config.out.join("rate_vs_n.csv"), config, &summary.rows)?;
    write_summary(&config.out.join("theorem4_summary.json"), config, &summary)?;
    Ok(())
}
