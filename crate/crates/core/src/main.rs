use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use workex::cli::{
    load_rates_file, run_single, run_sweep, RateSource, RunSpec, Sigma2Policy, SweepKind,
    SweepSpec, CSV_HEADER,
};
use workex::model::Scheme;

#[derive(Parser)]
#[command(
    name = "workex",
    version,
    about = "Latency simulator for straggler-mitigation schemes on heterogeneous master/worker pools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and print a CSV row to stdout.
    Run(RunArgs),
    /// Run a parameter sweep and write a CSV file.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SchemeArg {
    Oracle,
    Mds,
    Fixed,
    ExchangeKnown,
    ExchangeUnknown,
}

impl From<SchemeArg> for Scheme {
    fn from(value: SchemeArg) -> Self {
        match value {
            SchemeArg::Oracle => Scheme::Oracle,
            SchemeArg::Mds => Scheme::Mds,
            SchemeArg::Fixed => Scheme::Fixed,
            SchemeArg::ExchangeKnown => Scheme::ExchangeKnown,
            SchemeArg::ExchangeUnknown => Scheme::ExchangeUnknown,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    LambdaSum,
    Sigma2Comm,
    Sigma2Iters,
    Threshold,
    Single,
}

impl From<KindArg> for SweepKind {
    fn from(value: KindArg) -> Self {
        match value {
            KindArg::LambdaSum => SweepKind::LambdaSum,
            KindArg::Sigma2Comm => SweepKind::Sigma2Comm,
            KindArg::Sigma2Iters => SweepKind::Sigma2Iters,
            KindArg::Threshold => SweepKind::Threshold,
            KindArg::Single => SweepKind::Single,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PolicyArg {
    Zero,
    High,
    Both,
}

impl From<PolicyArg> for Sigma2Policy {
    fn from(value: PolicyArg) -> Self {
        match value {
            PolicyArg::Zero => Sigma2Policy::Zero,
            PolicyArg::High => Sigma2Policy::High,
            PolicyArg::Both => Sigma2Policy::Both,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scheme to simulate.
    #[arg(long)]
    scheme: SchemeArg,

    /// Total number of data points.
    #[arg(long, default_value_t = 100_000)]
    n: u64,

    /// Number of workers (ignored when --rates-file is given).
    #[arg(long, default_value_t = 10)]
    k: usize,

    /// Mean worker rate in points/second.
    #[arg(long, default_value_t = 50.0)]
    mu: f64,

    /// Worker-rate variance; admissible range is [0, mu^2/3].
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,

    /// One-rate-per-line file fixing the worker rates explicitly.
    #[arg(long)]
    rates_file: Option<PathBuf>,

    /// Cutting threshold as a fraction of N/K.
    #[arg(long, default_value_t = 0.01)]
    threshold_frac: f64,

    /// Base seed for the run's random streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Code dimension for the coded baseline; optimized when omitted.
    #[arg(long)]
    mds_l: Option<usize>,

    /// Monte Carlo trials for code-dimension optimization and references.
    #[arg(long, default_value_t = 10_000)]
    mc_trials: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// What the sweep varies.
    #[arg(long)]
    kind: KindArg,

    /// Comma-separated grid values; a per-kind default applies when omitted.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,

    /// Schemes to run at every grid point.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "oracle,mds,fixed,exchange_known,exchange_unknown"
    )]
    schemes: Vec<SchemeArg>,

    /// Total number of data points.
    #[arg(long, default_value_t = 100_000)]
    n: u64,

    /// Number of workers.
    #[arg(long, default_value_t = 10)]
    k: usize,

    /// Mean worker rate in points/second.
    #[arg(long, default_value_t = 50.0)]
    mu: f64,

    /// Trials per (grid point, profile).
    #[arg(long, default_value_t = 100)]
    trials: usize,

    /// Heterogeneity profiles resampled per grid point.
    #[arg(long, default_value_t = 20)]
    profiles: usize,

    /// Base seed; every run's stream derives from it and the run's labels.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output CSV path (defaults to sweep_<kind>.csv under $WORKEX_OUT_DIR
    /// or the working directory).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Cutting threshold as a fraction of N/K.
    #[arg(long, default_value_t = 0.01)]
    threshold_frac: f64,

    /// Heterogeneity level(s) at each grid point, for kinds whose grid is
    /// not already a variance. Defaults to both levels for lambda_sum and
    /// to high for the others.
    #[arg(long)]
    sigma2_policy: Option<PolicyArg>,

    /// Monte Carlo trials for the code-dimension optimizer.
    #[arg(long, default_value_t = 10_000)]
    mds_mc_trials: u64,

    /// Try the exact order-statistic evaluator for the coded baseline,
    /// falling back to Monte Carlo when infeasible.
    #[arg(long, default_value_t = false)]
    mds_exact: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => do_run(args),
        Command::Sweep(args) => do_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn do_run(args: RunArgs) -> Result<(), workex::Error> {
    let (rates, workers) = match &args.rates_file {
        Some(path) => {
            let profile = load_rates_file(path)?;
            let k = profile.worker_count();
            (RateSource::Explicit(profile), k)
        }
        None => (
            RateSource::Sampled {
                mu: args.mu,
                sigma2: args.sigma2,
            },
            args.k,
        ),
    };
    let spec = RunSpec {
        scheme: args.scheme.into(),
        n_points: args.n,
        workers,
        rates,
        threshold_fraction: args.threshold_frac,
        seed: args.seed,
        mds_dimension: args.mds_l,
        mc_trials: args.mc_trials,
    };
    let outcome = run_single(&spec)?;
    println!("{CSV_HEADER}");
    println!("{}", outcome.row);
    Ok(())
}

fn do_sweep(args: SweepArgs) -> Result<(), workex::Error> {
    let kind: SweepKind = args.kind.into();
    let grid = args
        .grid
        .unwrap_or_else(|| SweepSpec::default_grid(kind, args.k, args.mu));
    let sigma2_policy = match args.sigma2_policy {
        Some(p) => p.into(),
        None => match kind {
            SweepKind::LambdaSum => Sigma2Policy::Both,
            _ => Sigma2Policy::High,
        },
    };
    let spec = SweepSpec {
        kind,
        grid,
        schemes: args.schemes.into_iter().map(Scheme::from).collect(),
        n_points: args.n,
        workers: args.k,
        mu: args.mu,
        sigma2_policy,
        threshold_fraction: args.threshold_frac,
        profile_resamples: args.profiles,
        trials_per_point: args.trials,
        base_seed: args.seed,
        mds_mc_trials: args.mds_mc_trials,
        mds_exact: args.mds_exact,
    };
    let path = run_sweep(&spec, args.out.as_deref())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
