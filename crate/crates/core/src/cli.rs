//! Experiment runner behind the command-line interface: single seeded runs,
//! parameter sweeps over a grid, CSV emission, and reproducibility metadata.

use crate::analytic::{
    expected_comm_unknown, optimize_mds, oracle_mean, MeanEstimator, TermBudget,
};
use crate::engine::{
    run_exchange_known, run_exchange_unknown, run_fixed, run_mds, run_oracle, RunMetrics,
};
use crate::error::Error;
use crate::metrics::{summarize, MeanSe, ReferenceValues};
use crate::model::{sample_profile, ExperimentConfig, HeterogeneityProfile, Scheme};
use crate::stochastic::{derive_stream, RandomStream, GENERATOR_ID};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Fixed column schema of every emitted CSV row.
pub const CSV_HEADER: &str = "sweep_kind,grid_value,scheme,N,K,mu,sigma2,threshold_fraction,\
profiles,trials,mean_T_comp,se_T_comp,mean_Ncomm_norm,se_Ncomm_norm,mean_I,se_I,oracle_ref,\
analytic_ref";

/// Environment variable overriding the default output directory for sweeps.
pub const OUT_DIR_ENV: &str = "WORKEX_OUT_DIR";

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

// Roles folded into stream derivation so each consumer of randomness gets
// an independent stream.
const ROLE_PROFILE: u64 = 1;
const ROLE_RUN: u64 = 2;
const ROLE_MDS_OPT: u64 = 3;

/// What a sweep varies along its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepKind {
    /// Grid of pooled rates; mean rate is grid_value / K.
    LambdaSum,
    /// Grid of rate variances, reporting communication overhead.
    Sigma2Comm,
    /// Grid of rate variances, reporting reassignment iterations.
    Sigma2Iters,
    /// Grid of cutting-threshold fractions of N/K.
    Threshold,
    /// No grid: one configuration.
    Single,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] = [
        SweepKind::LambdaSum,
        SweepKind::Sigma2Comm,
        SweepKind::Sigma2Iters,
        SweepKind::Threshold,
        SweepKind::Single,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            SweepKind::LambdaSum => "lambda_sum",
            SweepKind::Sigma2Comm => "sigma2_comm",
            SweepKind::Sigma2Iters => "sigma2_iters",
            SweepKind::Threshold => "threshold",
            SweepKind::Single => "single",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        SweepKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown sweep kind {s:?}")))
    }

    fn tag(&self) -> u64 {
        match self {
            SweepKind::LambdaSum => 1,
            SweepKind::Sigma2Comm => 2,
            SweepKind::Sigma2Iters => 3,
            SweepKind::Threshold => 4,
            SweepKind::Single => 5,
        }
    }
}

/// Which heterogeneity levels a sweep runs at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sigma2Policy {
    /// Homogeneous workers.
    Zero,
    /// High heterogeneity, sigma2 = mu^2 / 6.
    High,
    /// Both of the above, two rows per grid point and scheme.
    Both,
}

impl Sigma2Policy {
    pub fn id(&self) -> &'static str {
        match self {
            Sigma2Policy::Zero => "zero",
            Sigma2Policy::High => "high",
            Sigma2Policy::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "zero" => Ok(Sigma2Policy::Zero),
            "high" => Ok(Sigma2Policy::High),
            "both" => Ok(Sigma2Policy::Both),
            _ => Err(Error::invalid(format!("unknown sigma2 policy {s:?}"))),
        }
    }

    fn levels(&self, mu: f64) -> Vec<f64> {
        match self {
            Sigma2Policy::Zero => vec![0.0],
            Sigma2Policy::High => vec![mu * mu / 6.0],
            Sigma2Policy::Both => vec![0.0, mu * mu / 6.0],
        }
    }
}

/// A full sweep request.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub n_points: u64,
    pub workers: usize,
    pub mu: f64,
    pub sigma2_policy: Sigma2Policy,
    pub threshold_fraction: f64,
    pub profile_resamples: usize,
    pub trials_per_point: usize,
    pub base_seed: u64,
    /// Trials for the Monte Carlo code-dimension optimizer.
    pub mds_mc_trials: u64,
    /// Try the exact order-statistic evaluator first for the coded baseline,
    /// falling back to Monte Carlo (with a notice) when infeasible.
    pub mds_exact: bool,
}

impl SweepSpec {
    /// Default grid per kind: four pooled rates around K*mu, the
    /// threshold fractions 1e-4..1e-1, or six evenly spaced variances
    /// across the admissible interval [0, mu^2/3].
    pub fn default_grid(kind: SweepKind, workers: usize, mu: f64) -> Vec<f64> {
        match kind {
            SweepKind::LambdaSum => [0.5, 1.0, 1.5, 2.0]
                .iter()
                .map(|f| f * mu * workers as f64)
                .collect(),
            SweepKind::Sigma2Comm | SweepKind::Sigma2Iters => {
                let max = mu * mu / 3.0;
                (0..6).map(|i| max * i as f64 / 5.0).collect()
            }
            SweepKind::Threshold => vec![1e-4, 1e-3, 1e-2, 1e-1],
            SweepKind::Single => vec![],
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.kind != SweepKind::Single && self.grid.is_empty() {
            return Err(Error::invalid("sweep grid must be non-empty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("need at least one scheme"));
        }
        if self.profile_resamples < 1 || self.trials_per_point < 1 {
            return Err(Error::invalid("profiles and trials must be at least 1"));
        }
        ExperimentConfig::new(
            self.n_points,
            self.workers,
            self.threshold_fraction,
            self.base_seed,
            self.schemes[0],
        )?;
        let max_sigma2 = self.mu * self.mu / 3.0;
        for &g in &self.grid {
            let admissible = match self.kind {
                SweepKind::LambdaSum => g > 0.0,
                SweepKind::Sigma2Comm | SweepKind::Sigma2Iters => {
                    (0.0..=max_sigma2).contains(&g)
                }
                SweepKind::Threshold => (0.0..1.0).contains(&g),
                SweepKind::Single => true,
            };
            if !g.is_finite() || !admissible {
                return Err(Error::invalid(format!(
                    "grid value {g} inadmissible for kind {}",
                    self.kind.id()
                )));
            }
        }
        Ok(())
    }

    /// Expands the sweep into its ordered list of cells (one per CSV row).
    ///
    /// Float configuration is canonicalized through its CSV rendering, so a
    /// cell and the row it prints are the same thing: re-parsing a row
    /// re-runs the identical cell.
    pub fn cells(&self) -> Result<Vec<CellSpec>, Error> {
        self.validate()?;
        let mut cells = Vec::new();
        let grid_points: Vec<Option<f64>> = if self.kind == SweepKind::Single {
            vec![None]
        } else {
            self.grid.iter().map(|&g| Some(canon(g))).collect()
        };
        for gv in grid_points {
            let mu = canon(match (self.kind, gv) {
                (SweepKind::LambdaSum, Some(lambda_sum)) => lambda_sum / self.workers as f64,
                _ => self.mu,
            });
            let sigma2_levels = match (self.kind, gv) {
                (SweepKind::Sigma2Comm | SweepKind::Sigma2Iters, Some(s2)) => vec![s2],
                _ => self.sigma2_policy.levels(mu),
            };
            let threshold_fraction = canon(match (self.kind, gv) {
                (SweepKind::Threshold, Some(tf)) => tf,
                _ => self.threshold_fraction,
            });
            for sigma2 in sigma2_levels {
                for &scheme in &self.schemes {
                    cells.push(CellSpec {
                        kind: self.kind,
                        grid_value: gv,
                        scheme,
                        n_points: self.n_points,
                        workers: self.workers,
                        mu,
                        sigma2: canon(sigma2),
                        threshold_fraction,
                        profiles: self.profile_resamples,
                        trials: self.trials_per_point,
                        base_seed: self.base_seed,
                        mds_mc_trials: self.mds_mc_trials,
                        mds_exact: self.mds_exact,
                    });
                }
            }
        }
        Ok(cells)
    }
}

/// One (grid value, heterogeneity level, scheme) combination: the unit that
/// produces a single CSV row. Every stream of randomness it consumes is
/// derived from these fields plus the base seed, so a cell re-runs
/// identically in isolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub kind: SweepKind,
    pub grid_value: Option<f64>,
    pub scheme: Scheme,
    pub n_points: u64,
    pub workers: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub threshold_fraction: f64,
    pub profiles: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub mds_mc_trials: u64,
    pub mds_exact: bool,
}

/// A cell's aggregated numbers plus its formatted CSV row.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub row: String,
    pub t_comp: MeanSe,
    pub comm_norm: MeanSe,
    pub iterations: MeanSe,
    pub oracle_ref: f64,
    pub analytic_ref: Option<f64>,
}

fn scheme_tag(scheme: Scheme) -> u64 {
    match scheme {
        Scheme::Oracle => 1,
        Scheme::Mds => 2,
        Scheme::Fixed => 3,
        Scheme::ExchangeKnown => 4,
        Scheme::ExchangeUnknown => 5,
    }
}

impl CellSpec {
    fn stream_parts(&self) -> Vec<u64> {
        vec![
            self.kind.tag(),
            self.grid_value.map_or(u64::MAX, f64::to_bits),
            self.sigma2.to_bits(),
            self.threshold_fraction.to_bits(),
            self.n_points,
            self.workers as u64,
            self.mu.to_bits(),
        ]
    }

    fn profile_stream(&self, resample: usize) -> u64 {
        let mut parts = self.stream_parts();
        parts.extend([resample as u64, ROLE_PROFILE]);
        derive_stream(&parts)
    }

    fn run_stream(&self, resample: usize, trial: usize) -> u64 {
        let mut parts = self.stream_parts();
        parts.extend([
            resample as u64,
            trial as u64,
            scheme_tag(self.scheme),
            ROLE_RUN,
        ]);
        derive_stream(&parts)
    }

    fn mds_opt_stream(&self, resample: usize) -> u64 {
        let mut parts = self.stream_parts();
        parts.extend([resample as u64, ROLE_MDS_OPT]);
        derive_stream(&parts)
    }

    fn cutting_threshold(&self) -> u64 {
        (self.threshold_fraction * self.n_points as f64 / self.workers as f64).floor() as u64
    }
}

fn execute_scheme_run(
    scheme: Scheme,
    n_points: u64,
    profile: &HeterogeneityProfile,
    threshold: u64,
    mds_dimension: Option<usize>,
    rng: &mut RandomStream,
) -> Result<RunMetrics, Error> {
    match scheme {
        Scheme::Oracle => run_oracle(n_points, profile, rng),
        Scheme::Fixed => run_fixed(n_points, profile, rng),
        Scheme::Mds => {
            let l = mds_dimension
                .ok_or_else(|| Error::invalid("coded run needs a code dimension"))?;
            run_mds(n_points, l, profile, rng)
        }
        Scheme::ExchangeKnown => run_exchange_known(n_points, profile, threshold, rng),
        Scheme::ExchangeUnknown => run_exchange_unknown(n_points, profile, threshold, rng),
    }
}

/// Picks the coded baseline's code dimension for one profile, preferring the
/// exact evaluator only when asked and feasible.
fn plan_mds(
    cell: &CellSpec,
    profile: &HeterogeneityProfile,
    resample: usize,
) -> Result<(usize, f64), Error> {
    let mut rng = RandomStream::new(cell.base_seed, cell.mds_opt_stream(resample));
    if cell.mds_exact {
        match optimize_mds(
            cell.n_points,
            profile,
            MeanEstimator::Exact(TermBudget::default()),
            &mut rng,
        ) {
            Ok(plan) => return Ok((plan.code_dimension, plan.expected_mean)),
            Err(Error::Infeasible { terms, budget }) => {
                eprintln!(
                    "notice: exact code-dimension optimization infeasible \
                     ({terms:.3e} terms > budget {budget:.3e}); using Monte Carlo"
                );
            }
            Err(e) => return Err(e),
        }
    }
    let plan = optimize_mds(
        cell.n_points,
        profile,
        MeanEstimator::MonteCarlo {
            trials: cell.mds_mc_trials,
        },
        &mut rng,
    )?;
    Ok((plan.code_dimension, plan.expected_mean))
}

/// Runs one cell to completion: resamples profiles, runs all trials, and
/// aggregates into one CSV row. With several profiles the row reports the
/// mean and standard error across per-profile averages (the per-profile
/// average pools that profile's trials); with a single profile it reports
/// the mean and standard error across trials.
pub fn run_cell(cell: &CellSpec) -> Result<CellOutcome, Error> {
    let profiles: Vec<HeterogeneityProfile> = (0..cell.profiles)
        .map(|r| {
            let mut rng = RandomStream::new(cell.base_seed, cell.profile_stream(r));
            sample_profile(cell.workers, cell.mu, cell.sigma2, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    let mds_plans: Vec<Option<(usize, f64)>> = if cell.scheme == Scheme::Mds {
        profiles
            .par_iter()
            .enumerate()
            .map(|(r, p)| plan_mds(cell, p, r).map(Some))
            .collect::<Result<_, _>>()?
    } else {
        vec![None; cell.profiles]
    };

    let threshold = cell.cutting_threshold();
    let jobs: Vec<(usize, usize)> = (0..cell.profiles)
        .flat_map(|r| (0..cell.trials).map(move |t| (r, t)))
        .collect();
    let runs: Vec<RunMetrics> = jobs
        .par_iter()
        .map(|&(r, t)| {
            let mut rng = RandomStream::new(cell.base_seed, cell.run_stream(r, t));
            execute_scheme_run(
                cell.scheme,
                cell.n_points,
                &profiles[r],
                threshold,
                mds_plans[r].map(|(l, _)| l),
                &mut rng,
            )
        })
        .collect::<Result<_, _>>()?;

    let oracle_ref = mean_of(profiles.iter().map(|p| oracle_mean(cell.n_points, p)));
    let analytic_ref = match cell.scheme {
        Scheme::Mds => Some(mean_of(
            mds_plans.iter().map(|plan| plan.expect("planned above").1),
        )),
        Scheme::ExchangeUnknown => {
            let mut acc = 0.0;
            for p in &profiles {
                acc += expected_comm_unknown(cell.n_points, cell.workers, p)?
                    / cell.n_points as f64;
            }
            Some(acc / cell.profiles as f64)
        }
        _ => None,
    };
    let references = ReferenceValues {
        oracle_mean: Some(oracle_ref),
        mds_optimum: (cell.scheme == Scheme::Mds).then_some(analytic_ref.unwrap_or(0.0)),
        expected_comm_norm: (cell.scheme == Scheme::ExchangeUnknown)
            .then_some(analytic_ref.unwrap_or(0.0)),
    };

    let (t_comp, comm_norm, iterations) = if cell.profiles == 1 {
        let s = summarize(&runs, references)?;
        (s.t_comp, s.comm_norm, s.iterations)
    } else {
        // Per-profile averages first, then spread across profiles.
        let mut t_means = Vec::with_capacity(cell.profiles);
        let mut c_means = Vec::with_capacity(cell.profiles);
        let mut i_means = Vec::with_capacity(cell.profiles);
        for (r, chunk) in runs.chunks(cell.trials).enumerate() {
            debug_assert_eq!(chunk.len(), cell.trials);
            let _ = r;
            let s = summarize(chunk, references)?;
            t_means.push(s.t_comp.mean);
            c_means.push(s.comm_norm.mean);
            i_means.push(s.iterations.mean);
        }
        (
            mean_se_of(&t_means),
            mean_se_of(&c_means),
            mean_se_of(&i_means),
        )
    };

    let row = format_row(cell, t_comp, comm_norm, iterations, oracle_ref, analytic_ref);
    Ok(CellOutcome {
        row,
        t_comp,
        comm_norm,
        iterations,
        oracle_ref,
        analytic_ref,
    })
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let collected: Vec<f64> = values.collect();
    collected.iter().sum::<f64>() / collected.len() as f64
}

fn mean_se_of(samples: &[f64]) -> MeanSe {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return MeanSe { mean, se: 0.0 };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    MeanSe {
        mean,
        se: (var / n).sqrt(),
    }
}

/// Rounds a float through its CSV rendering, so configuration values and
/// their printed form coincide exactly.
fn canon(x: f64) -> f64 {
    fmt_sig(x).parse().expect("fmt_sig output parses back")
}

/// Renders a float with nine significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&exp) {
        format!("{x:.8e}")
    } else {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

fn format_row(
    cell: &CellSpec,
    t_comp: MeanSe,
    comm_norm: MeanSe,
    iterations: MeanSe,
    oracle_ref: f64,
    analytic_ref: Option<f64>,
) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        cell.kind.id(),
        cell.grid_value.map(fmt_sig).unwrap_or_default(),
        cell.scheme.id(),
        cell.n_points,
        cell.workers,
        fmt_sig(cell.mu),
        fmt_sig(cell.sigma2),
        fmt_sig(cell.threshold_fraction),
        cell.profiles,
        cell.trials,
        fmt_sig(t_comp.mean),
        fmt_sig(t_comp.se),
        fmt_sig(comm_norm.mean),
        fmt_sig(comm_norm.se),
        fmt_sig(iterations.mean),
        fmt_sig(iterations.se),
        fmt_sig(oracle_ref),
        analytic_ref.map(fmt_sig).unwrap_or_default(),
    )
}

/// A CSV row parsed back into the cell that produced it (plus the reported
/// means, for verification). Only the configuration columns are needed to
/// re-run the cell; the base seed comes from the file's metadata header.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub kind: SweepKind,
    pub grid_value: Option<f64>,
    pub scheme: Scheme,
    pub n_points: u64,
    pub workers: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub threshold_fraction: f64,
    pub profiles: usize,
    pub trials: usize,
}

impl ParsedRow {
    pub fn parse(line: &str) -> Result<Self, Error> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 18 {
            return Err(Error::invalid(format!(
                "expected 18 CSV fields, found {}",
                fields.len()
            )));
        }
        let float = |s: &str, what: &str| -> Result<f64, Error> {
            s.parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad {what} field {s:?}: {e}")))
        };
        Ok(Self {
            kind: SweepKind::parse(fields[0])?,
            grid_value: if fields[1].is_empty() {
                None
            } else {
                Some(float(fields[1], "grid_value")?)
            },
            scheme: Scheme::parse(fields[2])?,
            n_points: fields[3]
                .parse()
                .map_err(|e| Error::invalid(format!("bad N field: {e}")))?,
            workers: fields[4]
                .parse()
                .map_err(|e| Error::invalid(format!("bad K field: {e}")))?,
            mu: float(fields[5], "mu")?,
            sigma2: float(fields[6], "sigma2")?,
            threshold_fraction: float(fields[7], "threshold_fraction")?,
            profiles: fields[8]
                .parse()
                .map_err(|e| Error::invalid(format!("bad profiles field: {e}")))?,
            trials: fields[9]
                .parse()
                .map_err(|e| Error::invalid(format!("bad trials field: {e}")))?,
        })
    }

    /// Rebuilds the cell this row came from. The parsed mu/sigma2 round-trip
    /// exactly because rows print them with enough significant digits only
    /// for sampled (not rates-file) configurations.
    pub fn to_cell(&self, base_seed: u64, mds_mc_trials: u64, mds_exact: bool) -> CellSpec {
        CellSpec {
            kind: self.kind,
            grid_value: self.grid_value,
            scheme: self.scheme,
            n_points: self.n_points,
            workers: self.workers,
            mu: self.mu,
            sigma2: self.sigma2,
            threshold_fraction: self.threshold_fraction,
            profiles: self.profiles,
            trials: self.trials,
            base_seed,
            mds_mc_trials,
            mds_exact,
        }
    }
}

/// Renders a whole sweep: metadata header, column header, then one row per
/// cell in deterministic grid order (cells execute in parallel).
pub fn render_sweep(spec: &SweepSpec) -> Result<String, Error> {
    let cells = spec.cells()?;
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(run_cell)
        .collect::<Result<_, _>>()?;

    let mut out = String::new();
    out.push_str("# workex sweep\n");
    out.push_str(&format!("# version: {TOOL_VERSION}\n"));
    out.push_str(&format!(
        "# generated_unix: {}\n",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    ));
    out.push_str(&format!("# rng: {GENERATOR_ID}\n"));
    out.push_str(&format!("# base_seed: {}\n", spec.base_seed));
    out.push_str(&format!("# kind: {}\n", spec.kind.id()));
    out.push_str(&format!("# n: {}\n", spec.n_points));
    out.push_str(&format!("# k: {}\n", spec.workers));
    out.push_str(&format!("# mu: {}\n", fmt_sig(spec.mu)));
    out.push_str(&format!("# sigma2_policy: {}\n", spec.sigma2_policy.id()));
    out.push_str(&format!(
        "# threshold_fraction: {}\n",
        fmt_sig(spec.threshold_fraction)
    ));
    out.push_str(&format!("# profiles: {}\n", spec.profile_resamples));
    out.push_str(&format!("# trials: {}\n", spec.trials_per_point));
    out.push_str(&format!("# mds_mc_trials: {}\n", spec.mds_mc_trials));
    out.push_str(&format!(
        "# grid: {}\n",
        spec.grid.iter().map(|g| fmt_sig(*g)).collect::<Vec<_>>().join(",")
    ));
    out.push_str(&format!(
        "# schemes: {}\n",
        spec.schemes.iter().map(Scheme::id).collect::<Vec<_>>().join(",")
    ));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for outcome in &outcomes {
        out.push_str(&outcome.row);
        out.push('\n');
    }
    Ok(out)
}

/// Resolves the output path: an explicit path wins, then the directory in
/// `WORKEX_OUT_DIR`, then the working directory.
pub fn resolve_out_path(kind: SweepKind, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let file = format!("sweep_{}.csv", kind.id());
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(file),
        None => PathBuf::from(file),
    }
}

/// Renders a sweep and writes it to the resolved path.
pub fn run_sweep(spec: &SweepSpec, out: Option<&Path>) -> Result<PathBuf, Error> {
    let content = render_sweep(spec)?;
    let path = resolve_out_path(spec.kind, out);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&path, content)?;
    Ok(path)
}

/// Where a single run takes its rates from.
#[derive(Debug, Clone, PartialEq)]
pub enum RateSource {
    Sampled { mu: f64, sigma2: f64 },
    Explicit(HeterogeneityProfile),
}

/// One seeded run as requested on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub scheme: Scheme,
    pub n_points: u64,
    pub workers: usize,
    pub rates: RateSource,
    pub threshold_fraction: f64,
    pub seed: u64,
    /// Fixed code dimension for the coded baseline; optimized when absent.
    pub mds_dimension: Option<usize>,
    pub mc_trials: u64,
}

/// Executes one seeded run and renders its CSV row. With sampled rates this
/// is exactly a single-trial, single-profile cell; with an explicit rates
/// file the profile is used as-is and the mu/sigma2 columns report the
/// file's empirical mean and population variance.
pub fn run_single(spec: &RunSpec) -> Result<CellOutcome, Error> {
    ExperimentConfig::new(
        spec.n_points,
        spec.workers,
        spec.threshold_fraction,
        spec.seed,
        spec.scheme,
    )?;

    match &spec.rates {
        RateSource::Sampled { mu, sigma2 } => {
            let cell = CellSpec {
                kind: SweepKind::Single,
                grid_value: None,
                scheme: spec.scheme,
                n_points: spec.n_points,
                workers: spec.workers,
                mu: canon(*mu),
                sigma2: canon(*sigma2),
                threshold_fraction: canon(spec.threshold_fraction),
                profiles: 1,
                trials: 1,
                base_seed: spec.seed,
                mds_mc_trials: spec.mc_trials,
                mds_exact: false,
            };
            if spec.scheme == Scheme::Mds {
                if let Some(l) = spec.mds_dimension {
                    return run_single_explicit_mds(&cell, None, l);
                }
            }
            run_cell(&cell)
        }
        RateSource::Explicit(profile) => {
            if profile.worker_count() != spec.workers {
                return Err(Error::invalid(format!(
                    "rates file has {} workers but K is {}",
                    profile.worker_count(),
                    spec.workers
                )));
            }
            let k = profile.worker_count();
            let mean = profile.rate_sum() / k as f64;
            let var = profile
                .rates()
                .iter()
                .map(|r| (r - mean).powi(2))
                .sum::<f64>()
                / k as f64;
            let cell = CellSpec {
                kind: SweepKind::Single,
                grid_value: None,
                scheme: spec.scheme,
                n_points: spec.n_points,
                workers: k,
                mu: canon(mean),
                sigma2: canon(var),
                threshold_fraction: canon(spec.threshold_fraction),
                profiles: 1,
                trials: 1,
                base_seed: spec.seed,
                mds_mc_trials: spec.mc_trials,
                mds_exact: false,
            };
            match (spec.scheme, spec.mds_dimension) {
                (Scheme::Mds, Some(l)) => run_single_explicit_mds(&cell, Some(profile), l),
                _ => run_cell_with_profile(&cell, profile),
            }
        }
    }
}

/// Single run on an explicit profile (no resampling).
fn run_cell_with_profile(
    cell: &CellSpec,
    profile: &HeterogeneityProfile,
) -> Result<CellOutcome, Error> {
    let mds_plan = if cell.scheme == Scheme::Mds {
        Some(plan_mds(cell, profile, 0)?)
    } else {
        None
    };
    finish_single_run(cell, profile, mds_plan)
}

fn run_single_explicit_mds(
    cell: &CellSpec,
    profile: Option<&HeterogeneityProfile>,
    l: usize,
) -> Result<CellOutcome, Error> {
    let sampled;
    let profile = match profile {
        Some(p) => p,
        None => {
            let mut rng = RandomStream::new(cell.base_seed, cell.profile_stream(0));
            sampled = sample_profile(cell.workers, cell.mu, cell.sigma2, &mut rng)?;
            &sampled
        }
    };
    // Reference mean at the requested dimension, from the Monte Carlo
    // estimator on the plan's stream.
    let chunk = cell.n_points.div_ceil(l as u64);
    let mut opt_rng = RandomStream::new(cell.base_seed, cell.mds_opt_stream(0));
    let (mean, _se) = crate::analytic::orderstat_mean_mc(
        l,
        chunk,
        profile,
        cell.mds_mc_trials,
        &mut opt_rng,
    )?;
    finish_single_run(cell, profile, Some((l, mean)))
}

fn finish_single_run(
    cell: &CellSpec,
    profile: &HeterogeneityProfile,
    mds_plan: Option<(usize, f64)>,
) -> Result<CellOutcome, Error> {
    let mut rng = RandomStream::new(cell.base_seed, cell.run_stream(0, 0));
    let run = execute_scheme_run(
        cell.scheme,
        cell.n_points,
        profile,
        cell.cutting_threshold(),
        mds_plan.map(|(l, _)| l),
        &mut rng,
    )?;
    let oracle_ref = oracle_mean(cell.n_points, profile);
    let analytic_ref = match cell.scheme {
        Scheme::Mds => mds_plan.map(|(_, mean)| mean),
        Scheme::ExchangeUnknown => Some(
            expected_comm_unknown(cell.n_points, profile.worker_count(), profile)?
                / cell.n_points as f64,
        ),
        _ => None,
    };
    let t_comp = MeanSe {
        mean: run.t_comp,
        se: 0.0,
    };
    let comm_norm = MeanSe {
        mean: run.n_comm as f64 / run.n_points as f64,
        se: 0.0,
    };
    let iterations = MeanSe {
        mean: run.iterations as f64,
        se: 0.0,
    };
    let row = format_row(cell, t_comp, comm_norm, iterations, oracle_ref, analytic_ref);
    Ok(CellOutcome {
        row,
        t_comp,
        comm_norm,
        iterations,
        oracle_ref,
        analytic_ref,
    })
}

/// Loads a one-rate-per-line text file. Blank lines and `#` comments are
/// allowed; anything else must parse as a positive, finite rate.
pub fn load_rates_file(path: &Path) -> Result<HeterogeneityProfile, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut rates = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rate: f64 = line.parse().map_err(|e| Error::RatesFile {
            path: path.display().to_string(),
            line: idx + 1,
            message: format!("cannot parse {line:?} as a rate: {e}"),
        })?;
        if !rate.is_finite() || rate <= 0.0 {
            return Err(Error::RatesFile {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("rate must be positive and finite, got {rate}"),
            });
        }
        rates.push(rate);
    }
    if rates.is_empty() {
        return Err(Error::RatesFile {
            path: path.display().to_string(),
            line: 0,
            message: "file contains no rates".to_string(),
        });
    }
    HeterogeneityProfile::new(rates)
}
