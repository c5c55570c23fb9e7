//! Experiment runner: configuration, seeding, dataset IO, and result
//! emission for the counterfactual kernel toolkit.
//!
//! Every experiment writes three kinds of file into the output directory:
//! a row-per-trial CSV of raw results, a JSON summary with point
//! estimates and standard errors, and plot-ready CSVs. Each file embeds
//! the fully resolved configuration and seed, and a rerun with the same
//! seed produces byte-identical output.

use std::path::PathBuf;
use std::sync::Once;

use serde::{Deserialize, Serialize};

pub mod experiments;
pub mod output;

pub use output::write_dataset_csv;

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Rejection rates of the mean-level and distributional tests on the
    /// three synthetic scenarios.
    Table1,
    /// Counterfactual embedding consistency and herded-sample test power
    /// on the covariate-shift generator.
    MixtureShift,
    /// Herded counterfactual sample next to the oracle sample, for
    /// histogram plots.
    HerdingDemo,
    /// Off-policy estimator MSE across policy-shift multipliers.
    OpeSweep,
    /// Monte-Carlo unbiasedness check of the raw propensity-weighted
    /// embedding.
    Theorem3Check,
    /// Error decay rate of the propensity-weighted embedding as the
    /// sample doubles.
    Theorem4Rate,
}

impl Experiment {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "table1" => Some(Self::Table1),
            "mixture_shift" => Some(Self::MixtureShift),
            "herding_demo" => Some(Self::HerdingDemo),
            "ope_sweep" => Some(Self::OpeSweep),
            "theorem3_check" => Some(Self::Theorem3Check),
            "theorem4_rate" => Some(Self::Theorem4Rate),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Table1 => "table1",
            Self::MixtureShift => "mixture_shift",
            Self::HerdingDemo => "herding_demo",
            Self::OpeSweep => "ope_sweep",
            Self::Theorem3Check => "theorem3_check",
            Self::Theorem4Rate => "theorem4_rate",
        }
    }
}

/// Which test kernels to run where an experiment compares them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelArg {
    Linear,
    Gaussian,
    Both,
}

/// Bandwidth rule: the median heuristic or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthArg {
    Median,
    Fixed(f64),
}

/// Regularization rule: cross-validated, fixed, or the experiment's
/// default decay schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonArg {
    Cv,
    Fixed(f64),
    /// n^(-1/3), the default consistency schedule.
    Schedule,
}

impl EpsilonArg {
    pub fn resolve(&self, n: usize) -> Option<f64> {
        match self {
            EpsilonArg::Cv => None,
            EpsilonArg::Fixed(v) => Some(*v),
            EpsilonArg::Schedule => Some((n as f64).powf(-1.0 / 3.0)),
        }
    }
}

/// Fully resolved experiment configuration; echoed into every output
/// file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub kernel: KernelArg,
    pub bandwidth: BandwidthArg,
    pub epsilon: EpsilonArg,
    pub bootstrap: usize,
    pub nystrom_rank: Option<usize>,
    /// Sample-size sweep for experiments with an n axis.
    pub ns: Vec<usize>,
    /// Policy-shift sweep for the off-policy experiment.
    pub alphas: Vec<f64>,
    /// Output directory; not part of the echoed configuration so that
    /// identical runs produce identical bytes wherever they are written.
    #[serde(skip, default)]
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for an experiment. Axis defaults: the scenario tests run
    /// at n in {50, 100}; the consistency sweep at {50, 200, 800}; the
    /// rate check at {250, 500, 1000}; policy shifts at
    /// {-1, -0.5, 0, 0.5, 1}.
    pub fn new(experiment: Experiment, out: PathBuf) -> Self {
        let (n, reps, ns) = match experiment {
            Experiment::Table1 => (100, 200, vec![50, 100]),
            Experiment::MixtureShift => (500, 20, vec![50, 200, 800]),
            Experiment::HerdingDemo => (500, 1, vec![]),
            Experiment::OpeSweep => (1000, 30, vec![]),
            Experiment::Theorem3Check => (200, 2000, vec![]),
            Experiment::Theorem4Rate => (250, 200, vec![250, 500, 1000]),
        };
        let epsilon = match experiment {
            Experiment::OpeSweep | Experiment::HerdingDemo => EpsilonArg::Cv,
            _ => EpsilonArg::Schedule,
        };
        Self {
            experiment,
            n,
            reps,
            seed: 0,
            alpha: 0.01,
            kernel: KernelArg::Both,
            bandwidth: BandwidthArg::Median,
            epsilon,
            bootstrap: 1000,
            nystrom_rank: None,
            ns,
            alphas: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            out,
        }
    }
}

static THREAD_POOL: Once = Once::new();

/// Cap the worker pool from `CFK_THREADS` once per process. A no-op when
/// the pool is already built (tests, embedding callers).
pub fn init_thread_pool() {
    THREAD_POOL.call_once(|| {
        if let Ok(value) = std::env::var("CFK_THREADS") {
            if let Ok(threads) = value.parse::<usize>() {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads.max(1))
                    .build_global();
            }
        }
    });
}

/// Run an experiment, writing its result files under `config.out`.
pub fn run(config: &ExperimentConfig) -> anyhow::Result<()> {
    init_thread_pool();
    std::fs::create_dir_all(&config.out)?;
    match config.experiment {
        Experiment::Table1 => experiments::table1::run(config),
        Experiment::MixtureShift => experiments::mixture::run(config),
        Experiment::HerdingDemo => experiments::herding_demo::run(config),
        Experiment::OpeSweep => experiments::ope_sweep::run(config),
        Experiment::Theorem3Check => experiments::theorems::run_theorem3(config),
        Experiment::Theorem4Rate => experiments::theorems::run_theorem4(config),
    }
}
