//! Domain types for worker heterogeneity and deterministic integer
//! partitioning of work proportional to rates.

use crate::error::Error;
use crate::stochastic::RandomStream;
use rand_distr::{Distribution, Uniform};

/// Per-worker average processing rates (points/second) for a pool of workers.
///
/// Immutable after construction; the rate sum is cached so repeated
/// summation cannot drift.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityProfile {
    rates: Vec<f64>,
    rate_sum: f64,
}

impl HeterogeneityProfile {
    /// Builds a profile from per-worker rates. Every rate must be positive
    /// and finite, and there must be at least one worker.
    pub fn new(rates: Vec<f64>) -> Result<Self, Error> {
        if rates.is_empty() {
            return Err(Error::invalid("profile needs at least one worker"));
        }
        for (k, &r) in rates.iter().enumerate() {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::invalid(format!(
                    "worker {k} rate must be positive and finite, got {r}"
                )));
            }
        }
        let rate_sum = rates.iter().sum();
        Ok(Self { rates, rate_sum })
    }

    /// Profile with `workers` identical rates.
    pub fn homogeneous(workers: usize, rate: f64) -> Result<Self, Error> {
        Self::new(vec![rate; workers])
    }

    pub fn worker_count(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, worker: usize) -> f64 {
        self.rates[worker]
    }

    /// Pooled rate of the whole pool (points/second).
    pub fn rate_sum(&self) -> f64 {
        self.rate_sum
    }
}

/// Uniform law for drawing per-worker rates with mean `mu` and variance
/// `sigma2`, i.e. Uniform(mu - sqrt(3 sigma2), mu + sqrt(3 sigma2)).
///
/// Admissible variances are 0 <= sigma2 <= mu^2/3 so the support stays
/// non-negative; at the upper boundary the support touches zero and a drawn
/// rate of exactly zero (probability zero) is rejected, since profiles
/// require strictly positive rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSampler {
    mu: f64,
    sigma2: f64,
}

impl ProfileSampler {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self, Error> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::invalid(format!("mean rate must be positive, got {mu}")));
        }
        let max_sigma2 = mu * mu / 3.0;
        if !sigma2.is_finite() || sigma2 < 0.0 || sigma2 > max_sigma2 {
            return Err(Error::invalid(format!(
                "variance {sigma2} outside the admissible interval [0, {max_sigma2}]"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Largest admissible variance for this mean, mu^2/3.
    pub fn max_sigma2(&self) -> f64 {
        self.mu * self.mu / 3.0
    }

    /// Draws `workers` independent rates. A zero variance yields exactly
    /// equal rates.
    pub fn sample(
        &self,
        workers: usize,
        rng: &mut RandomStream,
    ) -> Result<HeterogeneityProfile, Error> {
        if self.sigma2 == 0.0 {
            return HeterogeneityProfile::homogeneous(workers, self.mu);
        }
        let half_width = (3.0 * self.sigma2).sqrt();
        let law = Uniform::new_inclusive(self.mu - half_width, self.mu + half_width)
            .map_err(|e| Error::invalid(format!("uniform support: {e}")))?;
        let rates: Vec<f64> = (0..workers).map(|_| law.sample(rng)).collect();
        HeterogeneityProfile::new(rates)
    }
}

/// Draws a heterogeneity profile of `workers` rates from the uniform law
/// with the given mean and variance.
pub fn sample_profile(
    workers: usize,
    mu: f64,
    sigma2: f64,
    rng: &mut RandomStream,
) -> Result<HeterogeneityProfile, Error> {
    ProfileSampler::new(mu, sigma2)?.sample(workers, rng)
}

/// The five schemes the simulator implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Work-conserving pooled-rate bound.
    Oracle,
    /// MDS-coded baseline with an optimized code dimension.
    Mds,
    /// Fixed rate-proportional assignment, wait for all workers.
    Fixed,
    /// Iterative work exchange with the true rates known to the master.
    ExchangeKnown,
    /// Iterative work exchange with online-estimated rates.
    ExchangeUnknown,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Oracle,
        Scheme::Mds,
        Scheme::Fixed,
        Scheme::ExchangeKnown,
        Scheme::ExchangeUnknown,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Scheme::Oracle => "oracle",
            Scheme::Mds => "mds",
            Scheme::Fixed => "fixed",
            Scheme::ExchangeKnown => "exchange_known",
            Scheme::ExchangeUnknown => "exchange_unknown",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scheme {s:?}")))
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Validated parameters for one simulated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub n_points: u64,
    pub workers: usize,
    /// Cutting threshold as a fraction of N/K, in [0, 1).
    pub threshold_fraction: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl ExperimentConfig {
    pub fn new(
        n_points: u64,
        workers: usize,
        threshold_fraction: f64,
        seed: u64,
        scheme: Scheme,
    ) -> Result<Self, Error> {
        if n_points < 1 {
            return Err(Error::invalid("need at least one data point"));
        }
        if workers < 1 {
            return Err(Error::invalid("need at least one worker"));
        }
        if n_points < workers as u64 {
            return Err(Error::invalid(format!(
                "need at least as many points ({n_points}) as workers ({workers})"
            )));
        }
        if !threshold_fraction.is_finite() || !(0.0..1.0).contains(&threshold_fraction) {
            return Err(Error::invalid(format!(
                "threshold fraction {threshold_fraction} outside [0, 1)"
            )));
        }
        Ok(Self {
            n_points,
            workers,
            threshold_fraction,
            seed,
            scheme,
        })
    }

    /// Remaining-points level below which reassignments stop:
    /// floor(threshold_fraction * N / K).
    pub fn cutting_threshold(&self) -> u64 {
        (self.threshold_fraction * self.n_points as f64 / self.workers as f64).floor() as u64
    }
}

/// Splits `total` into non-negative integers proportional to `weights`,
/// summing exactly to `total`.
///
/// Each entry is floor(total * w_k / sum(w)) plus at most one leftover unit;
/// leftovers go to the largest fractional remainders, ties to the lower
/// index. Zero weights are permitted (and receive zero) as long as at least
/// one weight is positive.
pub fn proportional_split(total: u64, weights: &[f64]) -> Result<Vec<u64>, Error> {
    if weights.is_empty() {
        return Err(Error::invalid("weights must be non-empty"));
    }
    for (k, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::invalid(format!(
                "weight {k} must be non-negative and finite, got {w}"
            )));
        }
    }
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum <= 0.0 {
        return Err(Error::invalid("at least one weight must be positive"));
    }

    let mut base = vec![0u64; weights.len()];
    let mut remainder = vec![0.0f64; weights.len()];
    let mut assigned = 0u64;
    for (k, &w) in weights.iter().enumerate() {
        let quota = total as f64 * (w / weight_sum);
        let floor = quota.floor();
        base[k] = floor as u64;
        remainder[k] = quota - floor;
        assigned += base[k];
    }
    debug_assert!(assigned <= total, "floors cannot exceed the total");
    let leftovers = total - assigned;

    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        remainder[b]
            .partial_cmp(&remainder[a])
            .expect("remainders are finite")
            .then(a.cmp(&b))
    });
    for &k in order.iter().take(leftovers as usize) {
        base[k] += 1;
    }
    Ok(base)
}
