//! Closed-form means: the pooled-rate lower bound, per-worker expected
//! completions, exact order-statistic means of heterogeneous Erlang
//! completion times, optimization of the coded baseline's code dimension,
//! and the expected extra communication of the online-estimated scheme.

use crate::error::Error;
use crate::model::HeterogeneityProfile;
use crate::stochastic::RandomStream;
use itertools::Itertools;
use rand_distr::{Distribution, Gamma};

/// Cap on the number of enumerated terms the exact order-statistic
/// evaluator will accept. The double sum has C(K,j) * m^j terms, so exact
/// evaluation is reserved for small instances; larger ones must use the
/// Monte Carlo estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermBudget {
    pub max_terms: f64,
}

impl Default for TermBudget {
    fn default() -> Self {
        Self { max_terms: 1e8 }
    }
}

/// Which order statistic of the K per-worker Erlang(shape, rate_k)
/// completion times to average.
#[derive(Debug, Clone, Copy)]
pub struct OrderStatSpec<'a> {
    order: usize,
    shape: u64,
    profile: &'a HeterogeneityProfile,
}

impl<'a> OrderStatSpec<'a> {
    pub fn new(
        order: usize,
        shape: u64,
        profile: &'a HeterogeneityProfile,
    ) -> Result<Self, Error> {
        if order < 1 || order > profile.worker_count() {
            return Err(Error::invalid(format!(
                "order {order} outside 1..={}",
                profile.worker_count()
            )));
        }
        if shape < 1 {
            return Err(Error::invalid("per-worker shape must be at least 1"));
        }
        Ok(Self {
            order,
            shape,
            profile,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn shape(&self) -> u64 {
        self.shape
    }

    pub fn profile(&self) -> &HeterogeneityProfile {
        self.profile
    }
}

/// Outcome of optimizing the coded baseline over the code dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MdsPlan {
    /// Chosen code dimension L*: completion needs the L* fastest workers.
    pub code_dimension: usize,
    /// Points per coded chunk, ceil(N / L*).
    pub chunk: u64,
    /// Estimated mean completion time at L* (seconds).
    pub expected_mean: f64,
}

/// How optimize_mds evaluates candidate means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanEstimator {
    /// Literal enumeration, gated by the term budget.
    Exact(TermBudget),
    /// Empirical average of the order statistic over this many trials.
    MonteCarlo { trials: u64 },
}

/// Mean completion time of a fully work-conserving pool: N / rate_sum.
pub fn oracle_mean(n_points: u64, profile: &HeterogeneityProfile) -> f64 {
    n_points as f64 / profile.rate_sum()
}

/// Expected number of points each worker completes under work conservation:
/// entry k is rate_k * N / rate_sum. Entries sum to N.
pub fn expected_done(n_points: u64, profile: &HeterogeneityProfile) -> Vec<f64> {
    let n = n_points as f64;
    profile
        .rates()
        .iter()
        .map(|&r| r * n / profile.rate_sum())
        .collect()
}

/// Expected extra points the master ships when it starts from a uniform
/// assignment and must restore each worker's work-conserving share:
/// sum over workers of max(N/K - N * rate_k / rate_sum, 0).
pub fn expected_comm_unknown(
    n_points: u64,
    workers: usize,
    profile: &HeterogeneityProfile,
) -> Result<f64, Error> {
    if workers != profile.worker_count() {
        return Err(Error::invalid(format!(
            "worker count {workers} does not match profile size {}",
            profile.worker_count()
        )));
    }
    let n = n_points as f64;
    let uniform_share = n / workers as f64;
    Ok(profile
        .rates()
        .iter()
        .map(|&r| (uniform_share - n * r / profile.rate_sum()).max(0.0))
        .sum())
}

/// Streaming compensated accumulator (Neumaier variant), insensitive to the
/// magnitude ordering of the incoming terms.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// ln(i!) for i in 0..=up_to.
fn ln_factorials(up_to: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(up_to + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for i in 1..=up_to {
        acc += (i as f64).ln();
        table.push(acc);
    }
    table
}

fn binomial_f64(n: u64, r: u64) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0f64;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn term_count(workers: usize, subset_size: usize, shape: u64) -> f64 {
    binomial_f64(workers as u64, subset_size as u64) * (shape as f64).powi(subset_size as i32)
}

/// Evaluates one P_j^m term of the order-statistic recursion: the sum over
/// all size-j worker subsets and over all per-worker completion counts
/// 0 <= n_i < m of
///
/// ```text
/// (1/rate_subset) * multinomial(sum n_i; n_1..n_j) * prod (rate_i/rate_subset)^{n_i}
/// ```
///
/// Multinomial coefficients are evaluated in log space and the terms are
/// accumulated with compensated summation.
pub fn p_term(
    subset_size: usize,
    shape: u64,
    profile: &HeterogeneityProfile,
    budget: TermBudget,
) -> Result<f64, Error> {
    let workers = profile.worker_count();
    if subset_size < 1 || subset_size > workers {
        return Err(Error::invalid(format!(
            "subset size {subset_size} outside 1..={workers}"
        )));
    }
    if shape < 1 {
        return Err(Error::invalid("shape must be at least 1"));
    }
    let terms = term_count(workers, subset_size, shape);
    if terms > budget.max_terms {
        return Err(Error::Infeasible {
            terms,
            budget: budget.max_terms,
        });
    }

    let ln_fact = ln_factorials(subset_size * (shape as usize - 1));
    let mut acc = CompensatedSum::default();
    for subset in (0..workers).combinations(subset_size) {
        let subset_rate: f64 = subset.iter().map(|&k| profile.rate(k)).sum();
        let ln_subset_rate = subset_rate.ln();
        let ln_ratio: Vec<f64> = subset
            .iter()
            .map(|&k| profile.rate(k).ln() - ln_subset_rate)
            .collect();

        // Mixed-radix counter over (n_1, ..., n_j), each digit in 0..shape.
        let mut counts = vec![0u64; subset_size];
        loop {
            let total: u64 = counts.iter().sum();
            let mut ln_term = -ln_subset_rate + ln_fact[total as usize];
            for (i, &n) in counts.iter().enumerate() {
                ln_term -= ln_fact[n as usize];
                ln_term += n as f64 * ln_ratio[i];
            }
            acc.add(ln_term.exp());

            let mut digit = 0;
            loop {
                if digit == subset_size {
                    break;
                }
                counts[digit] += 1;
                if counts[digit] < shape {
                    break;
                }
                counts[digit] = 0;
                digit += 1;
            }
            if digit == subset_size {
                break;
            }
        }
    }
    Ok(acc.total())
}

/// Exact mean of the `order`-th smallest of the K per-worker
/// Erlang(shape, rate_k) completion times, via the recursion
///
/// ```text
/// mu_(l,m) = mu_(l-1,m) + sum_{j=1}^{l} (-1)^{j-1} C(K-l+j, j-1) P^m_{K-l+j}
/// ```
///
/// starting from mu_(0,m) = 0. Propagates infeasibility from `p_term`.
pub fn orderstat_mean(spec: OrderStatSpec<'_>, budget: TermBudget) -> Result<f64, Error> {
    let profile = spec.profile();
    let workers = profile.worker_count();
    let shape = spec.shape();

    // P^m_{j'} is needed for j' in K-L+1 ..= K.
    let lo = workers - spec.order() + 1;
    let mut p_cache = vec![0.0f64; workers + 1];
    for j in lo..=workers {
        p_cache[j] = p_term(j, shape, profile, budget)?;
    }

    let mut mean = 0.0f64;
    for level in 1..=spec.order() {
        let mut increment = CompensatedSum::default();
        for j in 1..=level {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            let coeff = binomial_f64((workers - level + j) as u64, (j - 1) as u64);
            increment.add(sign * coeff * p_cache[workers - level + j]);
        }
        mean += increment.total();
    }
    Ok(mean)
}

/// Mean completion time of the coded baseline at code dimension `l`: the
/// l-th smallest of K Erlang(ceil(N/l), rate_k) completion times.
pub fn mds_mean(
    l: usize,
    n_points: u64,
    profile: &HeterogeneityProfile,
    budget: TermBudget,
) -> Result<f64, Error> {
    let chunk = n_points.div_ceil(l as u64);
    orderstat_mean(OrderStatSpec::new(l, chunk, profile)?, budget)
}

/// Monte Carlo estimate of the means of all K order statistics of the
/// per-worker Erlang(shape, rate_k) completion times, sharing draws across
/// orders. Returns (means, standard errors), indexed by order - 1.
pub fn orderstat_means_mc(
    shape: u64,
    profile: &HeterogeneityProfile,
    trials: u64,
    rng: &mut RandomStream,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    if shape < 1 {
        return Err(Error::invalid("shape must be at least 1"));
    }
    if trials < 2 {
        return Err(Error::invalid("need at least 2 trials"));
    }
    let workers = profile.worker_count();
    let laws: Vec<Gamma<f64>> = profile
        .rates()
        .iter()
        .map(|&r| Gamma::new(shape as f64, 1.0 / r).expect("valid profile"))
        .collect();

    let mut sums = vec![0.0f64; workers];
    let mut sq_sums = vec![0.0f64; workers];
    let mut draws = vec![0.0f64; workers];
    for _ in 0..trials {
        for (slot, law) in draws.iter_mut().zip(&laws) {
            *slot = law.sample(rng);
        }
        draws.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        for (i, &d) in draws.iter().enumerate() {
            sums[i] += d;
            sq_sums[i] += d * d;
        }
    }
    let n = trials as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let ses: Vec<f64> = means
        .iter()
        .zip(&sq_sums)
        .map(|(&m, &sq)| (((sq - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt())
        .collect();
    Ok((means, ses))
}

/// Monte Carlo estimate of a single order-statistic mean; returns
/// (mean, standard error).
pub fn orderstat_mean_mc(
    order: usize,
    shape: u64,
    profile: &HeterogeneityProfile,
    trials: u64,
    rng: &mut RandomStream,
) -> Result<(f64, f64), Error> {
    if order < 1 || order > profile.worker_count() {
        return Err(Error::invalid(format!(
            "order {order} outside 1..={}",
            profile.worker_count()
        )));
    }
    let (means, ses) = orderstat_means_mc(shape, profile, trials, rng)?;
    Ok((means[order - 1], ses[order - 1]))
}

/// Picks the code dimension minimizing the coded baseline's mean completion
/// time over L in 1..=min(K, N); ties go to the smaller L. The exact
/// estimator propagates infeasibility so callers can fall back to the Monte
/// Carlo one.
pub fn optimize_mds(
    n_points: u64,
    profile: &HeterogeneityProfile,
    estimator: MeanEstimator,
    rng: &mut RandomStream,
) -> Result<MdsPlan, Error> {
    if n_points < 1 {
        return Err(Error::invalid("need at least one data point"));
    }
    let l_max = profile.worker_count().min(n_points as usize);
    let mut best: Option<MdsPlan> = None;
    for l in 1..=l_max {
        let chunk = n_points.div_ceil(l as u64);
        let mean = match estimator {
            MeanEstimator::Exact(budget) => mds_mean(l, n_points, profile, budget)?,
            MeanEstimator::MonteCarlo { trials } => {
                orderstat_mean_mc(l, chunk, profile, trials, rng)?.0
            }
        };
        let better = match &best {
            None => true,
            Some(plan) => mean < plan.expected_mean,
        };
        if better {
            best = Some(MdsPlan {
                code_dimension: l,
                chunk,
                expected_mean: mean,
            });
        }
    }
    Ok(best.expect("l_max >= 1"))
}
