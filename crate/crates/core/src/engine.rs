//! Discrete-event execution of the five schemes as master/worker protocol
//! state machines over an instantaneous control plane.
//!
//! One run is a single deterministic event loop; concurrency lives one level
//! up, where independent trials execute on independent random streams.

use crate::error::Error;
use crate::model::{proportional_split, HeterogeneityProfile, Scheme};
use crate::stochastic::{generate_trace, sample_erlang, RandomStream, GENERATOR_ID};

/// Master-side accounting for one worker across reassignment epochs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerState {
    /// Points assigned for the current epoch.
    pub assigned_current: u64,
    /// Points completed within the current epoch.
    pub done_current: u64,
    /// assigned_current - done_current.
    pub left_current: u64,
    /// Total points completed over the whole run.
    pub done_total: u64,
    /// Total time spent processing (seconds).
    pub busy_time_total: f64,
    /// Master's running rate estimate (points/second); meaningful only for
    /// the online-estimated scheme.
    pub estimated_rate: f64,
}

/// Per-worker ledger the master maintains while a run executes.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerLedger {
    workers: Vec<WorkerState>,
}

impl WorkerLedger {
    pub fn new(worker_count: usize) -> Self {
        Self {
            workers: vec![WorkerState::default(); worker_count],
        }
    }

    pub fn worker_count(&self) -> usize {
        self.workers.len()
    }

    pub fn worker(&self, k: usize) -> &WorkerState {
        &self.workers[k]
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    /// Starts an epoch: records the new assignments and returns the points
    /// newly shipped to each worker, max(assignment - left, 0). Points a
    /// worker already holds are never re-sent.
    pub fn assign(&mut self, assignments: &[u64]) -> Vec<u64> {
        debug_assert_eq!(assignments.len(), self.workers.len());
        let mut shipped = Vec::with_capacity(assignments.len());
        for (state, &assignment) in self.workers.iter_mut().zip(assignments) {
            shipped.push(assignment.saturating_sub(state.left_current));
            state.assigned_current = assignment;
            state.done_current = 0;
            state.left_current = assignment;
        }
        shipped
    }

    /// Applies one worker's end-of-epoch feedback.
    fn record_feedback(&mut self, worker: usize, done: u64, busy: f64) {
        let state = &mut self.workers[worker];
        debug_assert!(done <= state.assigned_current);
        state.done_current = done;
        state.left_current = state.assigned_current - done;
        state.done_total += done;
        state.busy_time_total += busy;
    }

    pub fn total_left(&self) -> u64 {
        self.workers.iter().map(|w| w.left_current).sum()
    }

    pub fn done_totals(&self) -> Vec<u64> {
        self.workers.iter().map(|w| w.done_total).collect()
    }
}

/// Control-plane messages of one reassignment epoch. The control plane is
/// instantaneous: coordination cost is counted in epochs, not simulated time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlSignal {
    /// First finisher announces its assignment is done.
    CompletionFlag { worker: usize },
    /// Master pauses every worker.
    StopBroadcast,
    /// A worker reports points done and points left this epoch.
    Feedback { worker: usize, done: u64, left: u64 },
}

/// What one epoch produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    /// Time from epoch start to the first completion flag (seconds).
    pub duration: f64,
    /// Points each worker completed within the epoch.
    pub done: Vec<u64>,
    /// Worker whose completion flag ended the epoch.
    pub finisher: usize,
    /// The epoch's control-plane messages, in emission order.
    pub signals: Vec<ControlSignal>,
}

/// One reassignment epoch (or the terminal drain) as recorded in a run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// False only for the terminal drain, which reassigns nothing.
    pub is_reassignment: bool,
    /// Points each worker was to process this epoch.
    pub assignments: Vec<u64>,
    /// New points shipped to each worker, max(assignment - left, 0).
    pub shipped: Vec<u64>,
    pub epoch_duration: f64,
    /// Points each worker completed this epoch.
    pub done: Vec<u64>,
    /// Unprocessed points after the epoch's feedback.
    pub remaining_after: u64,
}

/// Metrics of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub scheme: Scheme,
    pub n_points: u64,
    /// Total computation time (seconds).
    pub t_comp: f64,
    /// Extra points shipped after the initial assignment.
    pub n_comm: u64,
    /// Number of reassignment epochs (the oracle performs none).
    pub iterations: u64,
    pub trace: Vec<IterationRecord>,
    pub seed: u64,
    pub stream_id: u64,
    /// Identity of the random generator, for reproducibility.
    pub generator: &'static str,
    /// Useful points credited to each worker; sums to n_points.
    pub done_per_worker: Vec<u64>,
    pub busy_time_per_worker: Vec<f64>,
    /// Final online rate estimates; present only for the estimated scheme.
    pub estimated_rates: Option<Vec<f64>>,
    /// Completions beyond the N useful points (coded baseline only).
    pub wasted_points: u64,
}

impl RunMetrics {
    fn from_ledger(
        scheme: Scheme,
        n_points: u64,
        t_comp: f64,
        n_comm: u64,
        iterations: u64,
        trace: Vec<IterationRecord>,
        ledger: &WorkerLedger,
        rng: &RandomStream,
    ) -> Self {
        Self {
            scheme,
            n_points,
            t_comp,
            n_comm,
            iterations,
            trace,
            seed: rng.seed(),
            stream_id: rng.stream_id(),
            generator: GENERATOR_ID,
            done_per_worker: ledger.done_totals(),
            busy_time_per_worker: ledger.workers().iter().map(|w| w.busy_time_total).collect(),
            estimated_rates: None,
            wasted_points: 0,
        }
    }
}

fn validate_run(n_points: u64, profile: &HeterogeneityProfile) -> Result<(), Error> {
    if n_points < 1 {
        return Err(Error::invalid("need at least one data point"));
    }
    let _ = profile;
    Ok(())
}

/// Runs all workers on their assignments until the first of them finishes,
/// then pauses everyone and collects feedback into the ledger.
///
/// The epoch lasts until the minimum full-completion instant among workers
/// with a positive assignment; zero-assignment workers stay silent. A point
/// in progress at the pause counts as not done (it is redrawn on resume,
/// which the memoryless service law makes statistically exact).
pub fn step_epoch(
    ledger: &mut WorkerLedger,
    assignments: &[u64],
    profile: &HeterogeneityProfile,
    rng: &mut RandomStream,
) -> Result<EpochOutcome, Error> {
    if assignments.len() != profile.worker_count() {
        return Err(Error::invalid("assignment vector does not match profile"));
    }
    if assignments.iter().all(|&a| a == 0) {
        return Err(Error::invalid("every worker has a zero assignment"));
    }

    let mut traces = Vec::with_capacity(assignments.len());
    let mut finisher = usize::MAX;
    let mut duration = f64::INFINITY;
    for (k, &assignment) in assignments.iter().enumerate() {
        let trace = generate_trace(assignment, profile.rate(k), rng)?;
        if assignment > 0 && trace.completion_time() < duration {
            duration = trace.completion_time();
            finisher = k;
        }
        traces.push(trace);
    }

    let mut signals = Vec::with_capacity(assignments.len() + 2);
    signals.push(ControlSignal::CompletionFlag { worker: finisher });
    signals.push(ControlSignal::StopBroadcast);

    let mut done = Vec::with_capacity(assignments.len());
    for (k, trace) in traces.iter().enumerate() {
        let completed = trace.count_done_by(duration)?;
        done.push(completed);
        signals.push(ControlSignal::Feedback {
            worker: k,
            done: completed,
            left: assignments[k] - completed,
        });
        let busy = if assignments[k] > 0 { duration } else { 0.0 };
        ledger.record_feedback(k, completed, busy);
    }
    debug_assert_eq!(done[finisher], assignments[finisher]);

    Ok(EpochOutcome {
        duration,
        done,
        finisher,
        signals,
    })
}

/// Lets every worker finish the points it currently holds, with no further
/// reassignment; returns the drain record. The first finisher idles.
fn drain_leftovers(
    ledger: &mut WorkerLedger,
    epoch: usize,
    profile: &HeterogeneityProfile,
    rng: &mut RandomStream,
) -> Result<IterationRecord, Error> {
    let leftovers: Vec<u64> = ledger.workers().iter().map(|w| w.left_current).collect();
    let mut duration = 0.0f64;
    let mut drain_times = vec![0.0f64; leftovers.len()];
    for (k, &left) in leftovers.iter().enumerate() {
        if left > 0 {
            let t = sample_erlang(left, profile.rate(k), rng)?;
            drain_times[k] = t;
            duration = duration.max(t);
        }
    }
    for (k, &left) in leftovers.iter().enumerate() {
        ledger.workers[k].assigned_current = left;
        ledger.workers[k].done_current = left;
        ledger.workers[k].left_current = 0;
        ledger.workers[k].done_total += left;
        ledger.workers[k].busy_time_total += drain_times[k];
    }
    Ok(IterationRecord {
        epoch,
        is_reassignment: false,
        assignments: leftovers.clone(),
        shipped: vec![0; leftovers.len()],
        epoch_duration: duration,
        done: leftovers,
        remaining_after: 0,
    })
}

/// Work-conserving bound: the pool behaves as one machine at the summed
/// rate. Completion is the N-th event of the superposed point streams (an
/// Erlang(N, rate_sum) time), and each event belongs to worker k with
/// probability rate_k/rate_sum. No assignments, shipments, or epochs.
pub fn run_oracle(
    n_points: u64,
    profile: &HeterogeneityProfile,
    rng: &mut RandomStream,
) -> Result<RunMetrics, Error> {
    validate_run(n_points, profile)?;
    let t_comp = sample_erlang(n_points, profile.rate_sum(), rng)?;

    // Multinomial attribution via sequential conditional binomials.
    let k = profile.worker_count();
    let mut done = vec![0u64; k];
    let mut remaining = n_points;
    let mut rate_rest = profile.rate_sum();
    for worker in 0..k {
        if remaining == 0 {
            break;
        }
        if worker == k - 1 {
            done[worker] = remaining;
            break;
        }
        let p = (profile.rate(worker) / rate_rest).clamp(0.0, 1.0);
        let law = rand_distr::Binomial::new(remaining, p)
            .map_err(|e| Error::invalid(format!("binomial attribution: {e}")))?;
        let share = rand_distr::Distribution::sample(&law, rng);
        done[worker] = share;
        remaining -= share;
        rate_rest -= profile.rate(worker);
    }

    let mut ledger = WorkerLedger::new(k);
    for (worker, &d) in done.iter().enumerate() {
        ledger.workers[worker].done_total = d;
        ledger.workers[worker].done_current = d;
        // Work conservation: every worker computes for the whole run.
        ledger.workers[worker].busy_time_total = t_comp;
    }
    let record = IterationRecord {
        epoch: 1,
        is_reassignment: false,
        assignments: done.clone(),
        shipped: vec![0; k],
        epoch_duration: t_comp,
        done: done.clone(),
        remaining_after: 0,
    };
    Ok(RunMetrics::from_ledger(
        Scheme::Oracle,
        n_points,
        t_comp,
        0,
        0,
        vec![record],
        &ledger,
        rng,
    ))
}

/// Fixed rate-proportional assignment: one shipment, then wait for every
/// worker. Completion time is the slowest worker's Erlang time.
pub fn run_fixed(
    n_points: u64,
    profile: &HeterogeneityProfile,
    rng: &mut RandomStream,
) -> Result<RunMetrics, Error> {
    validate_run(n_points, profile)?;
    let assignments = proportional_split(n_points, profile.rates())?;
    let mut ledger = WorkerLedger::new(profile.worker_count());
    let shipped = ledger.assign(&assignments);
    let mut t_comp = 0.0f64;
    for (k, &assignment) in assignments.iter().enumerate() {
        let t = sample_erlang(assignment, profile.rate(k), rng)?;
        ledger.record_feedback(k, assignment, t);
        t_comp = t_comp.max(t);
    }
    let record = IterationRecord {
        epoch: 1,
        is_reassignment: true,
        assignments: assignments.clone(),
        shipped,
        epoch_duration: t_comp,
        done: assignments,
        remaining_after: 0,
    };
    Ok(RunMetrics::from_ledger(
        Scheme::Fixed,
        n_points,
        t_comp,
        0,
        1,
        vec![record],
        &ledger,
        rng,
    ))
}

/// Coded baseline at code dimension `l`: every worker gets a coded chunk of
/// ceil(N/l) points and completion needs the l fastest. The decoded N points
/// are credited to the l responders; everything else completed by the pause
/// instant is counted as wasted work.
pub fn run_mds(
    n_points: u64,
    l: usize,
    profile: &HeterogeneityProfile,
    rng: &mut RandomStream,
) -> Result<RunMetrics, Error> {
    validate_run(n_points, profile)?;
    let workers = profile.worker_count();
    if l < 1 || l > workers {
        return Err(Error::invalid(format!(
            "code dimension {l} outside 1..={workers}"
        )));
    }
    let chunk = n_points.div_ceil(l as u64);

    let mut traces = Vec::with_capacity(workers);
    for k in 0..workers {
        traces.push(generate_trace(chunk, profile.rate(k), rng)?);
    }
    let mut order: Vec<usize> = (0..workers).collect();
    order.sort_by(|&a, &b| {
        traces[a]
            .completion_time()
            .partial_cmp(&traces[b].completion_time())
            .expect("finite times")
    });
    let t_comp = traces[order[l - 1]].completion_time();
    let responders = &order[..l];

    // Decoded credit: the N recovered points, split evenly over the
    // responders (remainders to the earliest).
    let credit_split = proportional_split(n_points, &vec![1.0; l])?;
    let mut credited = vec![0u64; workers];
    for (i, &worker) in responders.iter().enumerate() {
        credited[worker] = credit_split[i];
    }

    let mut completed_total = 0u64;
    let mut ledger = WorkerLedger::new(workers);
    for k in 0..workers {
        let completed = traces[k].count_done_by(t_comp)?;
        completed_total += completed;
        ledger.workers[k].assigned_current = chunk;
        ledger.workers[k].done_current = credited[k];
        ledger.workers[k].left_current = chunk - credited[k];
        ledger.workers[k].done_total = credited[k];
        ledger.workers[k].busy_time_total = traces[k].completion_time().min(t_comp);
    }
    debug_assert!(completed_total >= n_points);
    let wasted = completed_total - n_points;

    let record = IterationRecord {
        epoch: 1,
        is_reassignment: true,
        assignments: vec![chunk; workers],
        shipped: vec![chunk; workers],
        epoch_duration: t_comp,
        done: credited,
        remaining_after: 0,
    };
    let mut metrics = RunMetrics::from_ledger(
        Scheme::Mds,
        n_points,
        t_comp,
        0,
        1,
        vec![record],
        &ledger,
        rng,
    );
    metrics.wasted_points = wasted;
    Ok(metrics)
}

/// Iterative work exchange with the true rates known to the master.
///
/// Each epoch assigns the remaining points proportionally to the rates,
/// ships only what workers do not already hold, and ends at the first
/// completion flag. Once the remainder falls to the cutting threshold,
/// workers drain their current leftovers with no further reassignment.
pub fn run_exchange_known(
    n_points: u64,
    profile: &HeterogeneityProfile,
    threshold: u64,
    rng: &mut RandomStream,
) -> Result<RunMetrics, Error> {
    validate_run(n_points, profile)?;
    let workers = profile.worker_count();
    let mut ledger = WorkerLedger::new(workers);
    let mut remaining = n_points;
    let mut t_comp = 0.0f64;
    let mut n_comm = 0u64;
    let mut epochs = 0u64;
    let mut trace = Vec::new();

    loop {
        epochs += 1;
        let assignments = proportional_split(remaining, profile.rates())?;
        let shipped = ledger.assign(&assignments);
        if epochs >= 2 {
            n_comm += shipped.iter().sum::<u64>();
        }
        let outcome = step_epoch(&mut ledger, &assignments, profile, rng)?;
        t_comp += outcome.duration;
        let after = ledger.total_left();
        debug_assert!(after < remaining, "first finisher completes >= 1 point");
        remaining = after;
        trace.push(IterationRecord {
            epoch: epochs as usize,
            is_reassignment: true,
            assignments,
            shipped,
            epoch_duration: outcome.duration,
            done: outcome.done,
            remaining_after: remaining,
        });
        if remaining <= threshold {
            break;
        }
    }

    if remaining > 0 {
        let drain = drain_leftovers(&mut ledger, epochs as usize + 1, profile, rng)?;
        t_comp += drain.epoch_duration;
        trace.push(drain);
    }

    Ok(RunMetrics::from_ledger(
        Scheme::ExchangeKnown,
        n_points,
        t_comp,
        n_comm,
        epochs,
        trace,
        &ledger,
        rng,
    ))
}

/// Iterative work exchange with online-estimated rates.
///
/// The first epoch assigns floor(N/K) points to every worker (nothing is
/// known yet; the initial estimates are an inert sentinel). After each epoch
/// the master re-estimates every rate as cumulative points done over
/// cumulative elapsed time, and reassigns the remainder proportionally to
/// the estimates, capped at the per-worker storage of floor(N/K) points.
/// Capped assignments can undershoot the remainder; the difference carries
/// over to the next epoch. True rates drive only the service-time draws.
///
/// The terminal drain can only complete points workers already hold, so the
/// loop keeps reassigning while the master still carries undelivered points,
/// even below the cutting threshold; otherwise carried points would never
/// be processed.
pub fn run_exchange_unknown(
    n_points: u64,
    profile: &HeterogeneityProfile,
    threshold: u64,
    rng: &mut RandomStream,
) -> Result<RunMetrics, Error> {
    validate_run(n_points, profile)?;
    let workers = profile.worker_count();
    if n_points < workers as u64 {
        return Err(Error::invalid(format!(
            "need at least as many points ({n_points}) as workers ({workers})"
        )));
    }
    let storage_cap = n_points / workers as u64;
    let mut estimates = vec![1.0f64; workers];
    let mut ledger = WorkerLedger::new(workers);
    let mut remaining = n_points;
    let mut elapsed = 0.0f64;
    let mut t_comp = 0.0f64;
    let mut n_comm = 0u64;
    let mut epochs = 0u64;
    let mut trace = Vec::new();

    loop {
        epochs += 1;
        if estimates.iter().all(|&e| e <= 0.0) {
            return Err(Error::AllRatesZero);
        }
        let uncapped = proportional_split(remaining, &estimates)?;
        let assignments: Vec<u64> = uncapped.iter().map(|&a| a.min(storage_cap)).collect();
        let carried = remaining - assignments.iter().sum::<u64>();
        let shipped = ledger.assign(&assignments);
        if epochs >= 2 {
            n_comm += shipped.iter().sum::<u64>();
        }
        let outcome = step_epoch(&mut ledger, &assignments, profile, rng)?;
        t_comp += outcome.duration;
        elapsed += outcome.duration;
        let after = carried + ledger.total_left();
        debug_assert!(after < remaining);
        remaining = after;

        for (k, state) in ledger.workers().iter().enumerate() {
            estimates[k] = state.done_total as f64 / elapsed;
        }
        for (k, state) in ledger.workers.iter_mut().enumerate() {
            state.estimated_rate = estimates[k];
        }

        trace.push(IterationRecord {
            epoch: epochs as usize,
            is_reassignment: true,
            assignments,
            shipped,
            epoch_duration: outcome.duration,
            done: outcome.done,
            remaining_after: remaining,
        });
        if remaining <= threshold && carried == 0 {
            break;
        }
    }

    if remaining > 0 {
        let drain = drain_leftovers(&mut ledger, epochs as usize + 1, profile, rng)?;
        t_comp += drain.epoch_duration;
        trace.push(drain);
    }

    let mut metrics = RunMetrics::from_ledger(
        Scheme::ExchangeUnknown,
        n_points,
        t_comp,
        n_comm,
        epochs,
        trace,
        &ledger,
        rng,
    );
    metrics.estimated_rates = Some(estimates);
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::oracle_mean;

    fn profile(rates: &[f64]) -> HeterogeneityProfile {
        HeterogeneityProfile::new(rates.to_vec()).unwrap()
    }

    #[test]
    fn oracle_mean_time_matches_bound() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let trials = 10_000;
        let mut rng = RandomStream::new(101, 0);
        let mut sum = 0.0;
        for _ in 0..trials {
            sum += run_oracle(200, &p, &mut rng).unwrap().t_comp;
        }
        let mean = sum / trials as f64;
        assert!((mean - 20.0).abs() < 0.4, "mean {mean}");
    }

    #[test]
    fn oracle_attribution_matches_expected_done() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let trials = 10_000;
        let mut rng = RandomStream::new(102, 0);
        let mut sums = [0u64; 3];
        for _ in 0..trials {
            let run = run_oracle(200, &p, &mut rng).unwrap();
            for (s, d) in sums.iter_mut().zip(&run.done_per_worker) {
                *s += d;
            }
        }
        let means: Vec<f64> = sums.iter().map(|&s| s as f64 / trials as f64).collect();
        for (mean, expected) in means.iter().zip([20.0, 60.0, 120.0]) {
            assert!(
                (mean - expected).abs() / expected < 0.02,
                "means {means:?}"
            );
        }
    }

    #[test]
    fn oracle_reports_no_coordination() {
        let p = profile(&[2.0]);
        let mut rng = RandomStream::new(103, 0);
        let run = run_oracle(50, &p, &mut rng).unwrap();
        assert_eq!(run.iterations, 0);
        assert_eq!(run.n_comm, 0);
        assert_eq!(run.done_per_worker, vec![50]);
    }

    #[test]
    fn fixed_assignment_matches_split() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let mut rng = RandomStream::new(104, 0);
        let run = run_fixed(200, &p, &mut rng).unwrap();
        assert_eq!(run.trace[0].assignments, vec![20, 60, 120]);
        assert_eq!(run.iterations, 1);
        assert_eq!(run.n_comm, 0);
        assert_eq!(run.done_per_worker.iter().sum::<u64>(), 200);
    }

    #[test]
    fn fixed_two_homogeneous_workers_mean_max() {
        // max of two iid exp(rate) has mean 1.5/rate
        let p = profile(&[2.0, 2.0]);
        let trials = 100_000;
        let mut rng = RandomStream::new(105, 0);
        let mut sum = 0.0;
        for _ in 0..trials {
            sum += run_fixed(2, &p, &mut rng).unwrap().t_comp;
        }
        let mean = sum / trials as f64;
        let expected = 1.5 / 2.0;
        assert!((mean - expected).abs() / expected < 0.02, "mean {mean}");
    }

    #[test]
    fn mds_full_dimension_waits_for_slowest() {
        let p = profile(&[1.0, 1.0, 1.0]);
        let mut rng = RandomStream::new(106, 0);
        let run = run_mds(9, 3, &p, &mut rng).unwrap();
        // all chunks complete by t_comp, so nothing beyond N is wasted
        assert_eq!(run.wasted_points, 0);
        assert_eq!(run.done_per_worker.iter().sum::<u64>(), 9);
    }

    #[test]
    fn mds_matches_orderstat_mean() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let trials = 200_000;
        let mut rng = RandomStream::new(107, 0);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..trials {
            let t = run_mds(6, 2, &p, &mut rng).unwrap().t_comp;
            sum += t;
            sumsq += t * t;
        }
        let mean = sum / trials as f64;
        let se = (((sumsq - sum * sum / trials as f64) / (trials as f64 - 1.0))
            / trials as f64)
            .sqrt();
        let spec = crate::analytic::OrderStatSpec::new(2, 3, &p).unwrap();
        let exact =
            crate::analytic::orderstat_mean(spec, crate::analytic::TermBudget::default())
                .unwrap();
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "mean {mean}, exact {exact}, se {se}"
        );
    }

    #[test]
    fn mds_minimum_is_below_every_worker_mean() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let trials = 20_000;
        let mut rng = RandomStream::new(108, 0);
        let mut sum = 0.0;
        for _ in 0..trials {
            sum += run_mds(30, 1, &p, &mut rng).unwrap().t_comp;
        }
        let mean = sum / trials as f64;
        for &rate in p.rates() {
            assert!(mean <= 30.0 / rate * 1.02);
        }
    }

    #[test]
    fn exchange_known_threshold_at_n_degenerates_to_fixed() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let mut rng = RandomStream::new(109, 0);
        let run = run_exchange_known(200, &p, 200, &mut rng).unwrap();
        assert_eq!(run.iterations, 1);
        assert_eq!(run.n_comm, 0);
        assert_eq!(run.done_per_worker.iter().sum::<u64>(), 200);
        // proportional initial assignment, like the fixed scheme
        assert_eq!(run.trace[0].assignments, vec![20, 60, 120]);
    }

    #[test]
    fn exchange_known_single_worker() {
        let p = profile(&[4.0]);
        let mut rng = RandomStream::new(110, 0);
        let run = run_exchange_known(100, &p, 1, &mut rng).unwrap();
        assert_eq!(run.iterations, 1);
        assert_eq!(run.n_comm, 0);
        assert_eq!(run.done_per_worker, vec![100]);
    }

    #[test]
    fn exchange_known_tracks_oracle() {
        let mut profile_rng = RandomStream::new(111, 0);
        let mut rng = RandomStream::new(111, 1);
        let trials = 100;
        let mut ratio_sum = 0.0;
        let mut comm_sum = 0.0;
        for _ in 0..trials {
            let p =
                crate::model::sample_profile(10, 50.0, 2500.0 / 6.0, &mut profile_rng).unwrap();
            let run = run_exchange_known(100_000, &p, 100, &mut rng).unwrap();
            ratio_sum += run.t_comp / oracle_mean(100_000, &p);
            comm_sum += run.n_comm as f64 / 100_000.0;
        }
        let mean_ratio = ratio_sum / trials as f64;
        let mean_comm = comm_sum / trials as f64;
        assert!(mean_ratio < 1.05, "ratio {mean_ratio}");
        assert!(mean_comm <= 0.02, "comm {mean_comm}");
    }

    #[test]
    fn exchange_unknown_single_worker() {
        let p = profile(&[4.0]);
        let mut rng = RandomStream::new(112, 0);
        let run = run_exchange_unknown(100, &p, 1, &mut rng).unwrap();
        assert_eq!(run.iterations, 1);
        assert_eq!(run.n_comm, 0);
        assert_eq!(run.done_per_worker, vec![100]);
    }

    #[test]
    fn exchange_unknown_homogeneous_ships_little() {
        let p = profile(&[50.0; 10]);
        let mut rng = RandomStream::new(113, 0);
        let trials = 100;
        let mut comm_sum = 0.0;
        for _ in 0..trials {
            let run = run_exchange_unknown(100_000, &p, 100, &mut rng).unwrap();
            comm_sum += run.n_comm as f64 / 100_000.0;
        }
        let mean = comm_sum / trials as f64;
        assert!(mean <= 0.01, "mean normalized comm {mean}");
    }

    #[test]
    fn exchange_unknown_uniform_initial_assignment() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let mut rng = RandomStream::new(114, 0);
        let run = run_exchange_unknown(301, &p, 0, &mut rng).unwrap();
        // floor(301/3) = 100 each; the odd point carries over to epoch 2
        assert_eq!(run.trace[0].assignments, vec![100, 100, 100]);
        assert_eq!(run.done_per_worker.iter().sum::<u64>(), 301);
    }

    #[test]
    fn exchange_unknown_respects_storage_cap() {
        let p = profile(&[1.0, 100.0]);
        let mut rng = RandomStream::new(115, 0);
        let run = run_exchange_unknown(1000, &p, 0, &mut rng).unwrap();
        for record in &run.trace {
            for &a in &record.assignments {
                assert!(a <= 500, "assignment {a} above the cap");
            }
        }
        assert_eq!(run.done_per_worker.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn step_epoch_single_worker_completes_everything() {
        let p = profile(&[3.0]);
        let mut ledger = WorkerLedger::new(1);
        ledger.assign(&[7]);
        let mut rng = RandomStream::new(116, 0);
        let out = step_epoch(&mut ledger, &[7], &p, &mut rng).unwrap();
        assert_eq!(out.done, vec![7]);
        assert_eq!(out.finisher, 0);
        assert_eq!(ledger.worker(0).left_current, 0);
    }

    #[test]
    fn step_epoch_two_homogeneous_single_points() {
        // With one point each, the finisher completes its point and the
        // other worker has completed none (ties have probability zero).
        let p = profile(&[2.0, 2.0]);
        let mut rng = RandomStream::new(117, 0);
        for _ in 0..100_000 {
            let mut ledger = WorkerLedger::new(2);
            ledger.assign(&[1, 1]);
            let out = step_epoch(&mut ledger, &[1, 1], &p, &mut rng).unwrap();
            let other = 1 - out.finisher;
            assert_eq!(out.done[out.finisher], 1);
            assert_eq!(out.done[other], 0);
        }
    }

    #[test]
    fn step_epoch_ignores_zero_assignments() {
        let p = profile(&[1.0, 5.0]);
        let mut ledger = WorkerLedger::new(2);
        ledger.assign(&[4, 0]);
        let mut rng = RandomStream::new(118, 0);
        let out = step_epoch(&mut ledger, &[4, 0], &p, &mut rng).unwrap();
        assert_eq!(out.finisher, 0);
        assert_eq!(out.done, vec![4, 0]);
        assert_eq!(ledger.worker(1).busy_time_total, 0.0);
    }

    #[test]
    fn step_epoch_rejects_all_zero() {
        let p = profile(&[1.0, 5.0]);
        let mut ledger = WorkerLedger::new(2);
        let mut rng = RandomStream::new(119, 0);
        assert!(step_epoch(&mut ledger, &[0, 0], &p, &mut rng).is_err());
    }

    #[test]
    fn completion_flag_comes_from_finished_worker() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let mut rng = RandomStream::new(120, 0);
        for _ in 0..200 {
            let mut ledger = WorkerLedger::new(3);
            let assignments = [5u64, 9, 11];
            ledger.assign(&assignments);
            let out = step_epoch(&mut ledger, &assignments, &p, &mut rng).unwrap();
            let ControlSignal::CompletionFlag { worker } = out.signals[0] else {
                panic!("first signal must be the completion flag");
            };
            // the flag's worker reports zero leftover in its feedback
            let feedback = out.signals.iter().find_map(|s| match s {
                ControlSignal::Feedback { worker: w, left, .. } if *w == worker => Some(*left),
                _ => None,
            });
            assert_eq!(feedback, Some(0));
        }
    }

    #[test]
    fn runs_are_deterministic_under_same_stream() {
        let p = profile(&[1.0, 3.0, 6.0]);
        let a = run_exchange_unknown(500, &p, 5, &mut RandomStream::new(7, 9)).unwrap();
        let b = run_exchange_unknown(500, &p, 5, &mut RandomStream::new(7, 9)).unwrap();
        assert_eq!(a, b);
    }
}
