//! Aggregation of per-run metrics across Monte Carlo trials into summary
//! statistics with error bars.

use crate::engine::{IterationRecord, RunMetrics};
use crate::error::Error;
use crate::model::Scheme;

/// Closed-form reference values attached verbatim to a summary.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReferenceValues {
    /// N / rate_sum.
    pub oracle_mean: Option<f64>,
    /// Optimized mean of the coded baseline.
    pub mds_optimum: Option<f64>,
    /// Expected extra communication of the estimated scheme, normalized by N.
    pub expected_comm_norm: Option<f64>,
}

/// A sample mean with its standard error (sample standard deviation over
/// the square root of the trial count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

/// Summary of a batch of runs of one scheme under one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub scheme: Scheme,
    pub trials: usize,
    /// Computation time (seconds).
    pub t_comp: MeanSe,
    /// Extra communication normalized by N.
    pub comm_norm: MeanSe,
    /// Extra communication in raw points.
    pub comm_raw: MeanSe,
    /// Reassignment epochs.
    pub iterations: MeanSe,
    /// Wasted completions normalized by N (coded baseline only).
    pub wasted_norm: Option<MeanSe>,
    /// True when a single run forced the standard errors to zero.
    pub degenerate_se: bool,
    pub references: ReferenceValues,
}

/// Averages a batch of runs. All runs must come from the same scheme (and
/// configuration); an empty batch is rejected.
pub fn summarize(runs: &[RunMetrics], references: ReferenceValues) -> Result<TrialSummary, Error> {
    let first = runs
        .first()
        .ok_or_else(|| Error::invalid("cannot summarize an empty run list"))?;
    if runs.iter().any(|r| r.scheme != first.scheme) {
        return Err(Error::invalid("runs mix schemes"));
    }

    let t_comp: Vec<f64> = runs.iter().map(|r| r.t_comp).collect();
    let comm_norm: Vec<f64> = runs
        .iter()
        .map(|r| r.n_comm as f64 / r.n_points as f64)
        .collect();
    let comm_raw: Vec<f64> = runs.iter().map(|r| r.n_comm as f64).collect();
    let iterations: Vec<f64> = runs.iter().map(|r| r.iterations as f64).collect();
    let wasted_norm = (first.scheme == Scheme::Mds).then(|| {
        let samples: Vec<f64> = runs
            .iter()
            .map(|r| r.wasted_points as f64 / r.n_points as f64)
            .collect();
        MeanSe::from_samples(&samples)
    });

    Ok(TrialSummary {
        scheme: first.scheme,
        trials: runs.len(),
        t_comp: MeanSe::from_samples(&t_comp),
        comm_norm: MeanSe::from_samples(&comm_norm),
        comm_raw: MeanSe::from_samples(&comm_raw),
        iterations: MeanSe::from_samples(&iterations),
        wasted_norm,
        degenerate_se: runs.len() == 1,
        references,
    })
}

/// Total extra communication of a run trace: shipped points summed over
/// every epoch after the first (the initial assignment is not overhead).
pub fn comm_overhead(trace: &[IterationRecord]) -> u64 {
    trace
        .iter()
        .skip(1)
        .map(|record| record.shipped.iter().sum::<u64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_oracle;
    use crate::model::HeterogeneityProfile;
    use crate::stochastic::RandomStream;

    fn oracle_runs(count: usize) -> Vec<RunMetrics> {
        let p = HeterogeneityProfile::new(vec![1.0, 3.0, 6.0]).unwrap();
        (0..count)
            .map(|i| run_oracle(200, &p, &mut RandomStream::new(42, i as u64)).unwrap())
            .collect()
    }

    #[test]
    fn single_run_summary_is_degenerate() {
        let runs = oracle_runs(1);
        let s = summarize(&runs, ReferenceValues::default()).unwrap();
        assert!(s.degenerate_se);
        assert_eq!(s.t_comp.mean, runs[0].t_comp);
        assert_eq!(s.t_comp.se, 0.0);
        assert_eq!(s.trials, 1);
    }

    #[test]
    fn two_value_summary_matches_hand_computation() {
        // T_comp samples 10 and 20: mean 15, sample SD sqrt(50), SE 5.
        let mut runs = oracle_runs(2);
        runs[0].t_comp = 10.0;
        runs[1].t_comp = 20.0;
        let s = summarize(&runs, ReferenceValues::default()).unwrap();
        assert!((s.t_comp.mean - 15.0).abs() < 1e-12);
        assert!((s.t_comp.se - 5.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_batch_mean_near_reference() {
        let runs = oracle_runs(1000);
        let s = summarize(&runs, ReferenceValues::default()).unwrap();
        assert!(
            (s.t_comp.mean - 20.0).abs() <= 3.0 * s.t_comp.se,
            "mean {} se {}",
            s.t_comp.mean,
            s.t_comp.se
        );
    }

    #[test]
    fn summarize_rejects_bad_batches() {
        assert!(summarize(&[], ReferenceValues::default()).is_err());
        let mut runs = oracle_runs(2);
        runs[1].scheme = Scheme::Fixed;
        assert!(summarize(&runs, ReferenceValues::default()).is_err());
    }

    #[test]
    fn summarize_is_permutation_invariant() {
        let mut runs = oracle_runs(10);
        let forward = summarize(&runs, ReferenceValues::default()).unwrap();
        runs.reverse();
        let backward = summarize(&runs, ReferenceValues::default()).unwrap();
        assert!((forward.t_comp.mean - backward.t_comp.mean).abs() < 1e-12);
        assert!((forward.t_comp.se - backward.t_comp.se).abs() < 1e-12);
    }

    #[test]
    fn comm_overhead_skips_the_initial_epoch() {
        let runs = oracle_runs(1);
        assert_eq!(comm_overhead(&runs[0].trace), 0);

        let mut trace = runs[0].trace.clone();
        let mut second = trace[0].clone();
        second.epoch = 2;
        second.shipped = vec![3, 0, 5];
        trace.push(second);
        assert_eq!(comm_overhead(&trace), 8);
    }
}
