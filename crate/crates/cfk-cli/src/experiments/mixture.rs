//! Covariate-shift experiments: counterfactual embedding consistency
//! against a direct-sampling oracle, and tests driven by herded
//! counterfactual samples.

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use cfk_core::cme::{self, CmeModel, KrrCvConfig};
use cfk_core::column;
use cfk_core::embedding::{squared_mmd_biased, WeightedEmbedding};
use cfk_core::herding;
use cfk_core::hypothesis::{bootstrap_two_sample_test, KernelChoice, StatisticKind};
use cfk_core::kernels::{self, KernelSpec};
use cfk_core::rng::{self, Rng};
use cfk_core::simgen::{gen_mixture_shift_with, MixtureShiftConfig, MixtureShiftDataset};

use super::stream_id;
use crate::output::{write_csv, write_summary};
use crate::{EpsilonArg, ExperimentConfig};

use fit_counterfactual_public as fit_counterfactual;

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRow {
    pub seed_index: u64,
    pub n: usize,
    pub epsilon: f64,
    pub covariate_bandwidth: f64,
    pub outcome_bandwidth: f64,
    pub squared_mmd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencySummary {
    pub n: usize,
    pub median_squared_mmd: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Resolve the model parameters for one draw: covariate bandwidth from
/// the pooled covariates (or CV), regularization from the configured
/// rule.
fn resolve_params(
    data: &MixtureShiftDataset,
    epsilon_arg: EpsilonArg,
    cv_seed: u64,
) -> Result<(f64, f64)> {
    let n = data.control_covariates.len();
    match epsilon_arg.resolve(n) {
        Some(eps) => {
            let mut pooled = data.control_covariates.clone();
            pooled.extend_from_slice(&data.treated_covariates);
            Ok((kernels::median_heuristic(&pooled)?, eps))
        }
        None => {
            let cv = KrrCvConfig {
                seed: cv_seed,
                ..KrrCvConfig::default()
            };
            Ok(cme::select_krr_params(
                &data.control_covariates,
                &data.control_outcomes,
                &cv,
            )?)
        }
    }
}

/// A fitted counterfactual embedding with the parameters that produced
/// it.
pub struct FittedCounterfactual {
    pub embedding: WeightedEmbedding,
    pub covariate_bandwidth: f64,
    pub epsilon: f64,
}

/// Fit the embedding-regression model on the control arm and return the
/// counterfactual embedding for the treated covariates.
pub fn fit_counterfactual_public(
    data: &MixtureShiftDataset,
    outcome_kernel: &KernelSpec,
    epsilon_arg: EpsilonArg,
    cv_seed: u64,
    nystrom_rank: Option<usize>,
) -> Result<FittedCounterfactual> {
    let (bandwidth, epsilon) = resolve_params(data, epsilon_arg, cv_seed)?;
    let model = match nystrom_rank {
        None => CmeModel::new(
            data.control_covariates.clone(),
            column(&data.control_outcomes),
            KernelSpec::gaussian(bandwidth),
            outcome_kernel.clone(),
            epsilon,
        )?,
        Some(rank) => CmeModel::with_nystrom(
            data.control_covariates.clone(),
            column(&data.control_outcomes),
            KernelSpec::gaussian(bandwidth),
            outcome_kernel.clone(),
            epsilon,
            rank,
            &mut rng::substream(cv_seed, 63),
        )?,
    };
    Ok(FittedCounterfactual {
        embedding: model.counterfactual_embedding(&data.treated_covariates)?,
        covariate_bandwidth: bandwidth,
        epsilon,
    })
}


/// Squared MMD between the embedding estimate and the oracle embedding,
/// per seed and sample size. The outcome bandwidth is fixed per seed
/// (median heuristic on the first oracle sample) so values are
/// comparable across n.
pub fn consistency_rows(config: &ExperimentConfig) -> Result<Vec<ConsistencyRow>> {
    let rows: Vec<Vec<ConsistencyRow>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|seed_index| -> Result<Vec<ConsistencyRow>> {
            let mut out = Vec::new();
            let mut outcome_bandwidth = None;
            for (n_idx, &n) in config.ns.iter().enumerate() {
                let mut data_rng =
                    rng::substream(config.seed, stream_id(seed_index, n_idx as u64));
                let data = gen_mixture_shift_with(
                    &MixtureShiftConfig::new(n, 0),
                    &mut data_rng,
                )?;
                let bandwidth = match outcome_bandwidth {
                    Some(b) => b,
                    None => {
                        let reference: Vec<f64> =
                            data.oracle_outcomes.iter().take(1000).copied().collect();
                        let b = kernels::median_heuristic(&column(&reference))?;
                        outcome_bandwidth = Some(b);
                        b
                    }
                };
                let outcome_kernel = KernelSpec::gaussian(bandwidth);
                let epsilon = config
                    .epsilon
                    .resolve(n)
                    .unwrap_or_else(|| (n as f64).powf(-1.0 / 3.0));
                let fitted = fit_counterfactual(
                    &data,
                    &outcome_kernel,
                    EpsilonArg::Fixed(epsilon),
                    config.seed,
                    None,
                )?;
                let oracle = WeightedEmbedding::empirical(
                    outcome_kernel.clone(),
                    &column(&data.oracle_outcomes),
                )?;
                out.push(ConsistencyRow {
                    seed_index,
                    n,
                    epsilon: fitted.epsilon,
                    covariate_bandwidth: fitted.covariate_bandwidth,
                    outcome_bandwidth: bandwidth,
                    squared_mmd: squared_mmd_biased(&fitted.embedding, &oracle)?,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Per-n medians and quartiles of the consistency rows.
pub fn consistency_summary(
    config: &ExperimentConfig,
    rows: &[ConsistencyRow],
) -> Vec<ConsistencySummary> {
    config
        .ns
        .iter()
        .map(|&n| {
            let mut values: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.squared_mmd)
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let quantile = |q: f64| values[((values.len() - 1) as f64 * q).round() as usize];
            ConsistencySummary {
                n,
                median_squared_mmd: quantile(0.5),
                q25: quantile(0.25),
                q75: quantile(0.75),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HerdedTestRow {
    pub seed_index: u64,
    pub n: usize,
    /// Mean-level test (linear kernel) rejected control vs herded.
    pub reject_linear: bool,
    /// Distributional test (Gaussian kernel) rejected control vs herded.
    pub reject_gaussian: bool,
    /// Herded sample passed (was not rejected against) a fresh oracle
    /// counterfactual sample.
    pub fidelity_pass: bool,
    pub p_linear: f64,
    pub p_gaussian: f64,
    pub p_fidelity: f64,
}

/// Herd a counterfactual sample per seed, then test it against the
/// observed control outcomes (effect detection, both kernels) and against
/// a fresh oracle counterfactual sample (fidelity).
pub fn herded_test_rows(config: &ExperimentConfig) -> Result<Vec<HerdedTestRow>> {
    let n = config.n;
    (0..config.reps as u64)
        .into_par_iter()
        .map(|seed_index| -> Result<HerdedTestRow> {
            let mut data_rng = rng::substream(config.seed, stream_id(seed_index, 32));
            let data =
                gen_mixture_shift_with(&MixtureShiftConfig::new(n, 0), &mut data_rng)?;
            let outcome_bandwidth =
                kernels::median_heuristic(&column(&data.control_outcomes))?;
            let fitted = fit_counterfactual(
                &data,
                &KernelSpec::gaussian(outcome_bandwidth),
                config.epsilon,
                config.seed ^ seed_index,
                None,
            )?;
            let estimate = fitted.embedding;
            let herded = herding::herd(&estimate, n, &herding::default_search(&estimate))?;

            let control = column(&data.control_outcomes);
            let oracle_fresh = column(&data.oracle_outcomes[..n.min(data.oracle_outcomes.len())]);

            let mut test_rng = rng::substream(config.seed, stream_id(seed_index, 33));
            let run_test =
                |a: &[Vec<f64>], b: &[Vec<f64>], choice: &KernelChoice, rng: &mut Rng| {
                    let mut pooled = a.to_vec();
                    pooled.extend_from_slice(b);
                    let spec = choice.resolve(&pooled)?;
                    bootstrap_two_sample_test(
                        a,
                        b,
                        &spec,
                        StatisticKind::MmdUnbiased,
                        config.bootstrap,
                        config.alpha,
                        rng,
                    )
                    .map_err(anyhow::Error::from)
                };
            let linear = run_test(&control, &herded, &KernelChoice::Linear, &mut test_rng)?;
            let gaussian =
                run_test(&control, &herded, &KernelChoice::GaussianMedian, &mut test_rng)?;
            let fidelity = run_test(
                &oracle_fresh,
                &herded,
                &KernelChoice::GaussianMedian,
                &mut test_rng,
            )?;
            Ok(HerdedTestRow {
                seed_index,
                n,
                reject_linear: linear.reject,
                reject_gaussian: gaussian.reject,
                fidelity_pass: !fidelity.reject,
                p_linear: linear.p_value,
                p_gaussian: gaussian.p_value,
                p_fidelity: fidelity.p_value,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MixtureSummary {
    pub consistency: Vec<ConsistencySummary>,
    pub herded_power_linear: f64,
    pub herded_power_gaussian: f64,
    pub fidelity_rate: f64,
}

pub fn run(config: &ExperimentConfig) -> Result<()> {
    let rows = consistency_rows(config)?;
    let summary = consistency_summary(config, &rows);
    write_csv(&config.out.join("mixture_consistency_trials.csv"), config, &rows)?;
    write_csv(&config.out.join("mmd_vs_n.csv"), config, &summary)?;

    let herded = herded_test_rows(config)?;
    write_csv(&config.out.join("mixture_herded_trials.csv"), config, &herded)?;

    let count = herded.len().max(1) as f64;
    let mixture_summary = MixtureSummary {
        consistency: summary,
        herded_power_linear: herded.iter().filter(|r| r.reject_linear).count() as f64 / count,
        herded_power_gaussian: herded.iter().filter(|r| r.reject_gaussian).count() as f64
            / count,
        fidelity_rate: herded.iter().filter(|r| r.fidelity_pass).count() as f64 / count,
    };
    write_summary(
        &config.out.join("mixture_summary.json"),
        config,
        &mixture_summary,
    )?;
    Ok(())
}
