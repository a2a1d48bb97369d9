//! Random-variate kernels for per-point processing times and worker progress
//! traces under the exponential service model.

use crate::error::Error;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};

/// Generator identity recorded in run metadata. ChaCha gives a documented
/// stream-splitting mechanism and far more than 2^64 period per stream.
pub const GENERATOR_ID: &str = "chacha8(rand_chacha-0.9)";

/// Seedable, splittable stream of random variates.
///
/// Identical `(seed, stream_id)` pairs reproduce identical sequences;
/// distinct stream ids select independent ChaCha streams under the same
/// seed, so concurrent trials never share state.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds labels into a stream id with a splitmix64 chain. Every consumer of
/// randomness derives its stream from the labels that identify it (grid
/// point, profile resample, trial, scheme, role), so adding one consumer
/// never perturbs the variates any other consumer sees.
pub fn derive_stream(parts: &[u64]) -> u64 {
    let mut acc = 0xd6e8_feb8_6659_fd93;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

fn validate_rate(rate: f64) -> Result<(), Error> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::invalid(format!(
            "rate must be positive and finite, got {rate}"
        )));
    }
    Ok(())
}

/// Draws one exponential processing time (seconds) at the given rate
/// (points/second). Strictly positive.
pub fn sample_exponential(rate: f64, rng: &mut RandomStream) -> Result<f64, Error> {
    validate_rate(rate)?;
    let law = Exp::new(rate).expect("validated rate");
    let mut draw = law.sample(rng);
    while draw <= 0.0 {
        draw = law.sample(rng);
    }
    Ok(draw)
}

/// Draws the time to process `shape` points sequentially at `rate`, i.e. the
/// sum of `shape` independent exponential(rate) durations (mean m/rate,
/// variance m/rate^2). Sampled in closed form through the equivalent gamma
/// law. A zero shape is an empty task and takes zero time.
pub fn sample_erlang(shape: u64, rate: f64, rng: &mut RandomStream) -> Result<f64, Error> {
    validate_rate(rate)?;
    if shape == 0 {
        return Ok(0.0);
    }
    let law = Gamma::new(shape as f64, 1.0 / rate).expect("validated shape and rate");
    let mut draw = law.sample(rng);
    while draw <= 0.0 {
        draw = law.sample(rng);
    }
    Ok(draw)
}

/// Completion instants of one worker processing its assignment point by
/// point at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerTrace {
    rate: f64,
    instants: Vec<f64>,
}

impl WorkerTrace {
    /// Number of points in the assignment.
    pub fn assignment(&self) -> u64 {
        self.instants.len() as u64
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Cumulative completion instants, strictly increasing.
    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    /// Instant at which the whole assignment is done (zero for an empty one).
    pub fn completion_time(&self) -> f64 {
        self.instants.last().copied().unwrap_or(0.0)
    }

    /// Number of points completed by time `t` (inclusive). Right-continuous,
    /// non-decreasing in `t`, bounded by the assignment size.
    pub fn count_done_by(&self, t: f64) -> Result<u64, Error> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::invalid(format!("time must be non-negative, got {t}")));
        }
        Ok(self.instants.partition_point(|&x| x <= t) as u64)
    }
}

/// Simulates a worker processing `assignment` points at `rate`, recording
/// every completion instant. The final instant is Erlang(assignment, rate)
/// distributed.
pub fn generate_trace(
    assignment: u64,
    rate: f64,
    rng: &mut RandomStream,
) -> Result<WorkerTrace, Error> {
    validate_rate(rate)?;
    let law = Exp::new(rate).expect("validated rate");
    let mut instants = Vec::with_capacity(assignment as usize);
    let mut clock = 0.0f64;
    for _ in 0..assignment {
        let mut gap = law.sample(rng);
        while gap <= 0.0 {
            gap = law.sample(rng);
        }
        clock += gap;
        instants.push(clock);
    }
    Ok(WorkerTrace { rate, instants })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_are_bitwise_identical() {
        let mut a = RandomStream::new(42, 3);
        let mut b = RandomStream::new(42, 3);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn distinct_stream_ids_diverge() {
        let mut a = RandomStream::new(42, 0);
        let mut b = RandomStream::new(42, 1);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn derive_stream_is_order_sensitive_and_stable() {
        assert_eq!(derive_stream(&[1, 2]), derive_stream(&[1, 2]));
        assert_ne!(derive_stream(&[1, 2]), derive_stream(&[2, 1]));
        assert_ne!(derive_stream(&[1]), derive_stream(&[1, 0]));
    }

    #[test]
    fn exponential_rejects_bad_rates() {
        let mut rng = RandomStream::new(0, 0);
        assert!(sample_exponential(0.0, &mut rng).is_err());
        assert!(sample_exponential(-1.0, &mut rng).is_err());
        assert!(sample_exponential(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn exponential_mean_converges() {
        let mut rng = RandomStream::new(11, 0);
        let n = 1_000_000;
        let sum: f64 = (0..n)
            .map(|_| sample_exponential(1.0, &mut rng).unwrap())
            .sum();
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn exponential_scaling_halves_rate_two_draws() {
        // Draws at rate 2 are distributionally the rate-1 draws halved:
        // compare empirical CDFs through a two-sample KS statistic.
        let n = 100_000usize;
        let mut rng1 = RandomStream::new(5, 1);
        let mut rng2 = RandomStream::new(5, 2);
        let mut scaled: Vec<f64> = (0..n)
            .map(|_| sample_exponential(1.0, &mut rng1).unwrap() / 2.0)
            .collect();
        let mut direct: Vec<f64> = (0..n)
            .map(|_| sample_exponential(2.0, &mut rng2).unwrap())
            .collect();
        scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        direct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = ks_distance(&scaled, &direct);
        // 1% critical value: 1.6276 * sqrt(2/n)
        let crit = 1.6276 * (2.0 / n as f64).sqrt();
        assert!(d < crit, "KS distance {d} >= {crit}");
    }

    #[test]
    fn huge_rate_means_tiny_draws() {
        let mut rng = RandomStream::new(9, 0);
        for _ in 0..1000 {
            let d = sample_exponential(1e9, &mut rng).unwrap();
            assert!(d > 0.0 && d < 1e-6, "draw {d}");
        }
    }

    #[test]
    fn erlang_empty_task_is_instant() {
        let mut rng = RandomStream::new(0, 0);
        assert_eq!(sample_erlang(0, 3.0, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn erlang_mean_matches_m_over_rate() {
        let mut rng = RandomStream::new(13, 0);
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| sample_erlang(100, 1.0, &mut rng).unwrap())
            .sum();
        let mean = sum / n as f64;
        assert!((mean - 100.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn erlang_variance_matches_m_over_rate_squared() {
        let mut rng = RandomStream::new(17, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_erlang(4, 2.0, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn erlang_shape_one_is_exponential_in_law() {
        let n = 100_000usize;
        let mut rng1 = RandomStream::new(23, 1);
        let mut rng2 = RandomStream::new(23, 2);
        let mut erl: Vec<f64> = (0..n)
            .map(|_| sample_erlang(1, 3.0, &mut rng1).unwrap())
            .collect();
        let mut exp: Vec<f64> = (0..n)
            .map(|_| sample_exponential(3.0, &mut rng2).unwrap())
            .collect();
        erl.sort_by(|a, b| a.partial_cmp(b).unwrap());
        exp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = ks_distance(&erl, &exp);
        let crit = 1.6276 * (2.0 / n as f64).sqrt();
        assert!(d < crit, "KS distance {d} >= {crit}");
    }

    #[test]
    fn trace_shape() {
        let mut rng = RandomStream::new(2, 0);
        let empty = generate_trace(0, 1.0, &mut rng).unwrap();
        assert_eq!(empty.assignment(), 0);
        assert_eq!(empty.completion_time(), 0.0);

        let t = generate_trace(3, 4.0, &mut rng).unwrap();
        assert_eq!(t.assignment(), 3);
        assert!(t.instants()[0] > 0.0);
        assert!(t.instants()[0] < t.instants()[1] && t.instants()[1] < t.instants()[2]);
    }

    #[test]
    fn count_done_by_endpoints() {
        let mut rng = RandomStream::new(3, 0);
        let t = generate_trace(50, 5.0, &mut rng).unwrap();
        assert_eq!(t.count_done_by(0.0).unwrap(), 0);
        assert_eq!(t.count_done_by(1e6).unwrap(), 50);
        assert_eq!(t.count_done_by(t.completion_time()).unwrap(), 50);
        assert!(t.count_done_by(-1.0).is_err());
    }

    #[test]
    fn count_done_by_is_monotone() {
        let mut rng = RandomStream::new(4, 0);
        let t = generate_trace(30, 2.0, &mut rng).unwrap();
        let mut prev = 0;
        for i in 0..200 {
            let now = t.count_done_by(i as f64 * 0.1).unwrap();
            assert!(now >= prev);
            prev = now;
        }
    }

    #[test]
    fn uncapped_count_is_poisson() {
        // With the assignment far from exhausted (m >> rate*t), the count of
        // completions by time t is Poisson(rate*t): chi-square test of the
        // counts at rate=2, t=3 against Poisson(6), binned 0..=14 plus tail.
        // Critical value chi2(1 - 1e-6, df=15) = 56.4934.
        let pmf: [f64; 15] = [
            0.0024787521766663585,
            0.014872513059998142,
            0.04461753917999444,
            0.08923507835998894,
            0.13385261753998332,
            0.16062314104797995,
            0.1606231410479801,
            0.1376769780411257,
            0.1032577335308442,
            0.06883848902056285,
            0.04130309341233764,
            0.022528960043093245,
            0.011264480021546681,
            0.005198990779175391,
            0.0022281389053608724,
        ];
        let tail = 0.0014003538333621224;
        let trials = 100_000u64;
        let mut rng = RandomStream::new(37, 0);
        let mut observed = [0u64; 16];
        for _ in 0..trials {
            let count = generate_trace(100, 2.0, &mut rng)
                .unwrap()
                .count_done_by(3.0)
                .unwrap() as usize;
            observed[count.min(15)] += 1;
        }
        let mut chi2 = 0.0;
        for (bin, &obs) in observed.iter().enumerate() {
            let expected = trials as f64 * if bin < 15 { pmf[bin] } else { tail };
            chi2 += (obs as f64 - expected).powi(2) / expected;
        }
        assert!(chi2 < 56.4934, "chi-square statistic {chi2}");
    }

    #[test]
    fn censored_count_mean_matches_capped_poisson() {
        // m=50 at rate 5 observed at t=10: the count is min(Poisson(50), 50),
        // whose exact mean is 47.18374968374...; tolerance is 4 standard
        // errors of the Monte Carlo average at 1e5 traces.
        let mut rng = RandomStream::new(29, 0);
        let trials = 100_000;
        let sum: u64 = (0..trials)
            .map(|_| {
                generate_trace(50, 5.0, &mut rng)
                    .unwrap()
                    .count_done_by(10.0)
                    .unwrap()
            })
            .sum();
        let mean = sum as f64 / trials as f64;
        let expected = 47.183749683740075;
        let se = (16.128318382582165f64 / trials as f64).sqrt();
        assert!(
            (mean - expected).abs() < 4.0 * se,
            "mean {mean}, expected {expected} +- {}",
            4.0 * se
        );
    }

    pub(super) fn ks_distance(sorted_a: &[f64], sorted_b: &[f64]) -> f64 {
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
            let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
            d = d.max(diff);
        }
        d
    }
}
