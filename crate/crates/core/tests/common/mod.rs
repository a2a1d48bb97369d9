//! Helpers shared by the integration test suites.
#![allow(dead_code)] // each test target uses its own subset

use workex::engine::{
    run_exchange_known, run_exchange_unknown, run_fixed, run_mds, run_oracle, RunMetrics,
};
use workex::model::{HeterogeneityProfile, Scheme};
use workex::stochastic::RandomStream;

/// Runs one scheme with explicit parameters (`mds_l` only matters for the
/// coded baseline).
pub fn run_scheme(
    scheme: Scheme,
    n: u64,
    profile: &HeterogeneityProfile,
    threshold: u64,
    mds_l: usize,
    rng: &mut RandomStream,
) -> RunMetrics {
    match scheme {
        Scheme::Oracle => run_oracle(n, profile, rng),
        Scheme::Fixed => run_fixed(n, profile, rng),
        Scheme::Mds => run_mds(n, mds_l, profile, rng),
        Scheme::ExchangeKnown => run_exchange_known(n, profile, threshold, rng),
        Scheme::ExchangeUnknown => run_exchange_unknown(n, profile, threshold, rng),
    }
    .expect("valid fuzz config")
}

/// Useful work always adds up to exactly N; only the coded baseline may
/// additionally complete wasted points.
pub fn assert_work_conservation(run: &RunMetrics) {
    let total: u64 = run.done_per_worker.iter().sum();
    assert_eq!(
        total, run.n_points,
        "scheme {} credited {total} of {} points",
        run.scheme, run.n_points
    );
    let traced: u64 = run
        .trace
        .iter()
        .map(|r| r.done.iter().sum::<u64>())
        .sum();
    assert_eq!(traced, run.n_points, "trace disagrees with ledger");
    if run.scheme != Scheme::Mds {
        assert_eq!(run.wasted_points, 0);
    }
}

/// Every record's shipments obey shipped = max(assignment - previous left, 0),
/// and nothing ships in the terminal drain.
pub fn assert_shipping_identity(run: &RunMetrics) {
    let workers = run.done_per_worker.len();
    let mut left_prev = vec![0u64; workers];
    for record in &run.trace {
        if record.is_reassignment {
            for k in 0..workers {
                let expected = record.assignments[k].saturating_sub(left_prev[k]);
                assert_eq!(
                    record.shipped[k], expected,
                    "epoch {} worker {k}: shipped {} != max(assign - left, 0) = {expected}",
                    record.epoch, record.shipped[k]
                );
            }
        } else if record.epoch > 1 {
            // terminal drain: workers finish what they hold, nothing ships
            assert!(record.shipped.iter().all(|&s| s == 0), "drain must not ship");
            assert_eq!(record.assignments, left_prev, "drain runs exactly the leftovers");
        } else {
            // the oracle's merged-pool record: no assignments were shipped
            assert!(record.shipped.iter().all(|&s| s == 0));
        }
        for k in 0..workers {
            assert!(record.done[k] <= record.assignments[k]);
            left_prev[k] = record.assignments[k] - record.done[k];
        }
    }
}

/// Remaining points strictly decrease over reassignment epochs.
pub fn assert_epoch_monotonicity(run: &RunMetrics) {
    let mut prev = run.n_points;
    for record in run.trace.iter().filter(|r| r.is_reassignment) {
        assert!(
            record.remaining_after < prev,
            "scheme {}: remainder {} did not decrease below {prev}",
            run.scheme,
            record.remaining_after
        );
        prev = record.remaining_after;
    }
}

/// Two-sample Kolmogorov-Smirnov distance over pre-sorted samples.
pub fn ks_distance(sorted_a: &[f64], sorted_b: &[f64]) -> f64 {
    let (n, m) = (sorted_a.len(), sorted_b.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if sorted_a[i] <= sorted_b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

pub fn sort_floats(xs: &mut [f64]) {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
}

pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
