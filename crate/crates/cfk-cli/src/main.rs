use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cfk_cli::{BandwidthArg, EpsilonArg, Experiment, ExperimentConfig, KernelArg};

/// Counterfactual kernel toolkit experiment runner.
///
/// Results are written as CSV/JSON files under --out; every file embeds
/// the resolved configuration and seed, and reruns with the same seed are
/// byte-identical.
#[derive(Debug, Parser)]
#[command(name = "cfk", version, about)]
struct Args {
    /// Experiment: table1 | mixture_shift | herding_demo | ope_sweep |
    /// theorem3_check | theorem4_rate
    #[arg(long)]
    experiment: String,

    /// Sample size (per dataset, or logged rows for ope_sweep).
    #[arg(long)]
    n: Option<usize>,

    /// Repetitions / seeds per configuration.
    #[arg(long)]
    reps: Option<usize>,

    /// Root seed; repetitions derive independent substreams from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Test significance level.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,

    /// Test kernel: linear | gaussian | both
    #[arg(long, default_value = "both")]
    kernel: String,

    /// Kernel bandwidth: "median" or a fixed value.
    #[arg(long, default_value = "median")]
    bandwidth: String,

    /// Regularization: "cv", a fixed value, or "schedule" (n^(-1/3)).
    #[arg(long)]
    epsilon: Option<String>,

    /// Output directory.
    #[arg(long, default_value = "cfk-out")]
    out: PathBuf,

    /// Bootstrap replicates per test.
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,

    /// Low-rank approximation rank for the kernel systems.
    #[arg(long)]
    nystrom_rank: Option<usize>,

    /// Comma-separated sample-size sweep (experiments with an n axis).
    #[arg(long)]
    ns: Option<String>,

    /// Comma-separated policy-shift multipliers (ope_sweep).
    #[arg(long, allow_hyphen_values = true)]
    alphas: Option<String>,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> anyhow::Result<Vec<T>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("invalid {what} entry: {part:?}"))
        })
        .collect()
}

fn build_config(args: &Args) -> anyhow::Result<ExperimentConfig> {
    let experiment = Experiment::parse(&args.experiment)
        .ok_or_else(|| anyhow::anyhow!("unknown experiment {:?}", args.experiment))?;
    let mut config = ExperimentConfig::new(experiment, args.out.clone());

    if let Some(n) = args.n {
        config.n = n;
        // An explicit n collapses the sample-size sweep unless --ns is given.
        if args.ns.is_none() {
            config.ns = vec![n];
        }
    }
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    config.seed = args.seed;
    config.alpha = args.alpha;
    config.kernel = match args.kernel.as_str() {
        "linear" => KernelArg::Linear,
        "gaussian" => KernelArg::Gaussian,
        "both" => KernelArg::Both,
        other => anyhow::bail!("unknown kernel {other:?} (expected linear|gaussian|both)"),
    };
    config.bandwidth = match args.bandwidth.as_str() {
        "median" => BandwidthArg::Median,
        value => BandwidthArg::Fixed(
            value
                .parse()
                .map_err(|_| anyhow::anyhow!("invalid bandwidth {value:?}"))?,
        ),
    };
    if let Some(epsilon) = &args.epsilon {
        config.epsilon = match epsilon.as_str() {
            "cv" => EpsilonArg::Cv,
            "schedule" => EpsilonArg::Schedule,
            value => EpsilonArg::Fixed(
                value
                    .parse()
                    .map_err(|_| anyhow::anyhow!("invalid epsilon {value:?}"))?,
            ),
        };
    }
    config.bootstrap = args.bootstrap;
    config.nystrom_rank = args.nystrom_rank;
    if let Some(ns) = &args.ns {
        config.ns = parse_list(ns, "--ns")?;
    }
    if let Some(alphas) = &args.alphas {
        config.alphas = parse_list(alphas, "--alphas")?;
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    let config = match build_config(&args) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    match cfk_cli::run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
