//! Event-driven simulation of open queueing networks with state-dependent
//! routing probabilities fixed per station.
//!
//! Each station carries two pending event times, the next external arrival
//! and the next service completion. The engine repeatedly takes the earliest
//! pending event (scanning stations in order, completion before arrival on
//! ties), advances busy-time and queue-integral accumulators, and applies the
//! event. Job transfers happen inside the completion event, so a routed job
//! joins the downstream queue at the same instant it leaves the upstream one.
//!
//! Randomness is split per station and purpose (interarrival, service,
//! routing draws), so common-random-number comparisons across service-rate
//! schedules stay aligned.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::network::{service_rates, NetworkError, NetworkSpec, UnitSampler};
use crate::rng::StreamFamily;
use crate::skorokhod::PathGrid;

/// Default ceiling on processed events per run.
pub const DEFAULT_EVENT_CAP: u64 = 500_000_000;

#[derive(Debug, Error)]
pub enum GjnError {
    #[error("event budget of {cap} exhausted at time {time}")]
    EventCapExceeded { cap: u64, time: f64 },
    #[error("bad simulation options: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Run controls for a single sample path.
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub horizon: f64,
    /// Strictly increasing observation times in `[0, horizon]`; the state is
    /// recorded right-continuously (events at the observation instant are
    /// applied first).
    pub obs_times: Vec<f64>,
    pub event_cap: u64,
    /// Count external arrivals, completions, transfers, and exits.
    pub record_flow: bool,
}

impl SimOptions {
    pub fn to_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            obs_times: Vec::new(),
            event_cap: DEFAULT_EVENT_CAP,
            record_flow: false,
        }
    }
}

/// Job-flow counters over a run.
#[derive(Clone, Debug, Default)]
pub struct FlowCounts {
    pub external: Vec<u64>,
    pub completions: Vec<u64>,
    /// `transfers[i][j]` = jobs routed from station `i` to station `j`.
    pub transfers: Vec<Vec<u64>>,
    pub exits: Vec<u64>,
}

/// Recorded sample path and run accounting.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub obs_times: Vec<f64>,
    /// `queues[j][n]` = station `j` occupancy at the `n`-th observation.
    pub queues: Vec<Vec<u64>>,
    /// `integrals[j][n]` = time integral of station `j` occupancy on
    /// `[0, obs_times[n]]`; consecutive differences give batch time averages.
    pub integrals: Vec<Vec<f64>>,
    /// `busy_at_obs[j][n]` = cumulative busy time of station `j` on
    /// `[0, obs_times[n]]`.
    pub busy_at_obs: Vec<Vec<f64>>,
    /// Cumulative time with at least one job present, up to the horizon.
    pub busy_time: Vec<f64>,
    /// Service rates in force for this run.
    pub mu: Vec<f64>,
    pub final_queue: Vec<u64>,
    pub events: u64,
    pub horizon: f64,
    pub flow: Option<FlowCounts>,
}

impl SimOutput {
    /// Unused-capacity regulator `y[j][n] = mu_j * (obs_times[n] -
    /// busy_at_obs[j][n])`, the idleness accumulated by each server expressed
    /// in units of forgone service completions.
    pub fn idle_regulator(&self) -> Vec<Vec<f64>> {
        (0..self.queues.len())
            .map(|j| {
                self.obs_times
                    .iter()
                    .zip(&self.busy_at_obs[j])
                    .map(|(&t, &b)| self.mu[j] * (t - b))
                    .collect()
            })
            .collect()
    }
}

struct Engine<'a> {
    jj: usize,
    alpha: &'a [f64],
    mu: Vec<f64>,
    spec: &'a NetworkSpec,
    arrival_samplers: Vec<UnitSampler>,
    service_samplers: Vec<UnitSampler>,
    arrival_rngs: Vec<ChaCha8Rng>,
    service_rngs: Vec<ChaCha8Rng>,
    routing_rngs: Vec<ChaCha8Rng>,
    queue: Vec<u64>,
    next_arrival: Vec<f64>,
    next_completion: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn start_service(&mut self, j: usize, now: f64) {
        let s = self.service_samplers[j].sample(&mut self.service_rngs[j]);
        self.next_completion[j] = now + s / self.mu[j];
    }

    fn schedule_arrival(&mut self, j: usize, now: f64) {
        if self.alpha[j] > 0.0 {
            let a = self.arrival_samplers[j].sample(&mut self.arrival_rngs[j]);
            self.next_arrival[j] = now + a / self.alpha[j];
        }
    }

    /// Adds a job to station `j`, starting service if the station was idle.
    fn admit(&mut self, j: usize, now: f64) {
        self.queue[j] += 1;
        if self.queue[j] == 1 {
            self.start_service(j, now);
        }
    }

    /// Routes a completed job from `j`; returns `Some(destination)` or `None`
    /// for an exit.
    fn route(&mut self, j: usize) -> Option<usize> {
        let u: f64 = self.routing_rngs[j].random();
        let mut acc = 0.0;
        for k in 0..self.jj {
            acc += self.spec.routing.p()[(j, k)];
            if u < acc {
                return Some(k);
            }
        }
        None
    }
}

/// Simulates one sample path of the network with service rates taken at
/// scale `r`, starting from the queue vector `z0`.
pub fn simulate(
    spec: &NetworkSpec,
    r: f64,
    z0: &[u64],
    opts: &SimOptions,
    streams: &StreamFamily,
) -> Result<SimOutput, GjnError> {
    let jj = spec.stations();
    if z0.len() != jj {
        return Err(GjnError::BadOptions(format!(
            "initial queue has {} entries for {jj} stations",
            z0.len()
        )));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(GjnError::BadOptions("horizon must be positive".into()));
    }
    if opts
        .obs_times
        .iter()
        .any(|&t| !(0.0..=opts.horizon).contains(&t))
    {
        return Err(GjnError::BadOptions(
            "observation times must lie in [0, horizon]".into(),
        ));
    }
    if opts.obs_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GjnError::BadOptions(
            "observation times must increase strictly".into(),
        ));
    }
    if opts.event_cap == 0 {
        return Err(GjnError::BadOptions("event cap must be positive".into()));
    }
    let rates = service_rates(spec, r)?;

    let mut eng = Engine {
        jj,
        alpha: &spec.alpha,
        mu: rates.mu.as_slice().to_vec(),
        spec,
        arrival_samplers: spec.arrival.iter().map(|d| d.sampler()).collect(),
        service_samplers: spec.service.iter().map(|d| d.sampler()).collect(),
        arrival_rngs: (0..jj).map(|j| streams.arrival(j)).collect(),
        service_rngs: (0..jj).map(|j| streams.service(j)).collect(),
        routing_rngs: (0..jj).map(|j| streams.routing(j)).collect(),
        queue: z0.to_vec(),
        next_arrival: vec![f64::INFINITY; jj],
        next_completion: vec![f64::INFINITY; jj],
    };
    for j in 0..jj {
        eng.schedule_arrival(j, 0.0);
        if eng.queue[j] > 0 {
            eng.start_service(j, 0.0);
        }
    }

    let mut flow = opts.record_flow.then(|| FlowCounts {
        external: vec![0; jj],
        completions: vec![0; jj],
        transfers: vec![vec![0; jj]; jj],
        exits: vec![0; jj],
    });

    let mut queues = vec![Vec::with_capacity(opts.obs_times.len()); jj];
    let mut obs_integrals = vec![Vec::with_capacity(opts.obs_times.len()); jj];
    let mut obs_busy = vec![Vec::with_capacity(opts.obs_times.len()); jj];
    let mut busy = vec![0.0f64; jj];
    let mut integral = vec![0.0f64; jj];
    let mut obs_ptr = 0;
    let mut now = 0.0f64;
    let mut events = 0u64;

    loop {
        // Earliest pending event; scan order fixes ties as completion before
        // arrival within a station, lower station first across stations.
        let mut best_t = f64::INFINITY;
        let mut best = usize::MAX;
        for j in 0..jj {
            if eng.next_completion[j] < best_t {
                best_t = eng.next_completion[j];
                best = 2 * j;
            }
            if eng.next_arrival[j] < best_t {
                best_t = eng.next_arrival[j];
                best = 2 * j + 1;
            }
        }
        if best == usize::MAX || best_t > opts.horizon {
            break;
        }
        while obs_ptr < opts.obs_times.len() && opts.obs_times[obs_ptr] < best_t {
            let s = opts.obs_times[obs_ptr];
            for j in 0..jj {
                queues[j].push(eng.queue[j]);
                obs_integrals[j].push(integral[j] + eng.queue[j] as f64 * (s - now));
                let run = if eng.queue[j] > 0 { s - now } else { 0.0 };
                obs_busy[j].push(busy[j] + run);
            }
            obs_ptr += 1;
        }
        let dt = best_t - now;
        for j in 0..jj {
            if eng.queue[j] > 0 {
                busy[j] += dt;
            }
            integral[j] += eng.queue[j] as f64 * dt;
        }
        now = best_t;
        events += 1;
        if events > opts.event_cap {
            return Err(GjnError::EventCapExceeded {
                cap: opts.event_cap,
                time: now,
            });
        }

        let station = best >> 1;
        if best & 1 == 0 {
            // Service completion: release the job, restart the server if jobs
            // remain, then route.
            eng.queue[station] -= 1;
            if eng.queue[station] > 0 {
                eng.start_service(station, now);
            } else {
                eng.next_completion[station] = f64::INFINITY;
            }
            let dest = eng.route(station);
            if let Some(f) = flow.as_mut() {
                f.completions[station] += 1;
                match dest {
                    Some(k) => f.transfers[station][k] += 1,
                    None => f.exits[station] += 1,
                }
            }
            if let Some(k) = dest {
                eng.admit(k, now);
            }
        } else {
            eng.admit(station, now);
            eng.schedule_arrival(station, now);
            if let Some(f) = flow.as_mut() {
                f.external[station] += 1;
            }
        }
    }

    // Flush accumulators and any remaining observations to the horizon.
    while obs_ptr < opts.obs_times.len() {
        let s = opts.obs_times[obs_ptr];
        for j in 0..jj {
            queues[j].push(eng.queue[j]);
            obs_integrals[j].push(integral[j] + eng.queue[j] as f64 * (s - now));
            let run = if eng.queue[j] > 0 { s - now } else { 0.0 };
            obs_busy[j].push(busy[j] + run);
        }
        obs_ptr += 1;
    }
    let dt = opts.horizon - now;
    for j in 0..jj {
        if eng.queue[j] > 0 {
            busy[j] += dt;
        }
        integral[j] += eng.queue[j] as f64 * dt;
    }

    Ok(SimOutput {
        obs_times: opts.obs_times.clone(),
        queues,
        integrals: obs_integrals,
        busy_at_obs: obs_busy,
        busy_time: busy,
        mu: eng.mu,
        final_queue: eng.queue,
        events,
        horizon: opts.horizon,
        flow,
    })
}

/// Initial queue vector matching a scaled starting point `xi`: station `j`
/// holds `ceil(xi_j / gamma)` jobs at its block's spatial scale.
pub fn warm_start(spec: &NetworkSpec, r: f64, xi: &[f64]) -> Vec<u64> {
    assert_eq!(xi.len(), spec.stations());
    (0..spec.stations())
        .map(|j| {
            let g = spec.regime.gamma_station(j, r);
            (xi[j] / g).ceil().max(0.0) as u64
        })
        .collect()
}

/// Rescales a recorded path onto a diffusion clock: observation time `t`
/// maps to `t * time_scale` and station `j` occupancy is multiplied by
/// `space_scales[j]`.
pub fn scaled_path(
    out: &SimOutput,
    time_scale: f64,
    space_scales: &[f64],
) -> Result<PathGrid, GjnError> {
    if space_scales.len() != out.queues.len() {
        return Err(GjnError::BadOptions(
            "one spatial scale per station is required".into(),
        ));
    }
    if out.obs_times.is_empty() {
        return Err(GjnError::BadOptions(
            "path has no recorded observations".into(),
        ));
    }
    let times: Vec<f64> = out.obs_times.iter().map(|&t| t * time_scale).collect();
    let coords: Vec<Vec<f64>> = out
        .queues
        .iter()
        .zip(space_scales)
        .map(|(col, &s)| col.iter().map(|&q| q as f64 * s).collect())
        .collect();
    PathGrid::new(times, coords).map_err(|e| GjnError::BadOptions(e.to_string()))
}

/// Occupancy read out at batch boundaries of a single long run, for
/// steady-state checks.
#[derive(Clone, Debug)]
pub struct StationarySample {
    /// `point_samples[j][i]` = occupancy at the end of batch `i`.
    pub point_samples: Vec<Vec<u64>>,
    /// `batch_means[j][i]` = time-average occupancy over batch `i`.
    pub batch_means: Vec<Vec<f64>>,
    pub batch_len: f64,
    pub batches: usize,
}

/// Runs one long path and summarizes it into per-batch point samples and
/// time averages after a burn-in period.
pub fn stationary_sample(
    spec: &NetworkSpec,
    r: f64,
    z0: &[u64],
    burn_in: f64,
    batch_len: f64,
    batches: usize,
    event_cap: u64,
    streams: &StreamFamily,
) -> Result<StationarySample, GjnError> {
    if !(batch_len > 0.0) || batches == 0 {
        return Err(GjnError::BadOptions(
            "need a positive batch length and at least one batch".into(),
        ));
    }
    let horizon = burn_in + batch_len * batches as f64;
    let obs_times: Vec<f64> = (0..=batches)
        .map(|i| burn_in + i as f64 * batch_len)
        .collect();
    let opts = SimOptions {
        horizon,
        obs_times,
        event_cap,
        record_flow: false,
    };
    let out = simulate(spec, r, z0, &opts, streams)?;
    let jj = spec.stations();
    let mut point_samples = vec![Vec::with_capacity(batches); jj];
    let mut batch_means = vec![Vec::with_capacity(batches); jj];
    for j in 0..jj {
        for i in 0..batches {
            point_samples[j].push(out.queues[j][i + 1]);
            let di = out.integrals[j][i + 1] - out.integrals[j][i];
            batch_means[j].push(di / batch_len);
        }
    }
    Ok(StationarySample {
        point_samples,
        batch_means,
        batch_len,
        batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Block, DistributionSpec, NetworkSpec, RoutingMatrix, ScaleRegime};

    /// Single deterministic station: unit arrivals, service rate `1 + r b`.
    fn dd1(b: f64) -> NetworkSpec {
        NetworkSpec::new(
            RoutingMatrix::from_rows(&[vec![0.0]]).unwrap(),
            vec![1.0],
            vec![DistributionSpec::Deterministic],
            vec![DistributionSpec::Deterministic],
            ScaleRegime::new(
                vec![Block {
                    lo: 0,
                    hi: 0,
                    exponent: 1.0,
                    b: vec![b],
                }],
                1,
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn mm1() -> NetworkSpec {
        NetworkSpec::new(
            RoutingMatrix::from_rows(&[vec![0.0]]).unwrap(),
            vec![1.0],
            vec![DistributionSpec::Exponential],
            vec![DistributionSpec::Exponential],
            ScaleRegime::fully_separated(1),
        )
        .unwrap()
    }

    /// Two exponential stations in series on separated scales.
    fn tandem() -> NetworkSpec {
        NetworkSpec::new(
            RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(),
            vec![1.0, 0.0],
            vec![DistributionSpec::Exponential; 2],
            vec![DistributionSpec::Exponential; 2],
            ScaleRegime::fully_separated(2),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_single_station_trace() {
        // r = 0.25 gives service rate 1.25, so each job takes 0.8. Arrivals
        // land at 1, 2, ..., 5; the queue alternates 0 and 1.
        let spec = dd1(1.0);
        let opts = SimOptions {
            horizon: 5.0,
            obs_times: vec![0.5, 1.5, 1.9, 2.5, 4.9],
            event_cap: 1000,
            record_flow: true,
        };
        let streams = StreamFamily::new(7, 1);
        let out = simulate(&spec, 0.25, &[0], &opts, &streams).unwrap();
        assert_eq!(out.queues[0], vec![0, 1, 0, 1, 0]);
        // Busy stretches [1,1.8], ..., [4,4.8] plus nothing else.
        assert!((out.busy_time[0] - 3.2).abs() < 1e-9);
        // Five arrivals and four completions fit before the horizon; the
        // arrival at t = 5 is processed, its completion at 5.8 is not.
        assert_eq!(out.events, 9);
        assert_eq!(out.final_queue, vec![1]);
        let flow = out.flow.as_ref().unwrap();
        assert_eq!(flow.external, vec![5]);
        assert_eq!(flow.completions, vec![4]);
        assert_eq!(flow.exits, vec![4]);
        // Occupancy integral at t = 4.9: four full busy cycles of length 0.8.
        assert!((out.integrals[0].last().unwrap() - 3.2).abs() < 1e-9);
        // Busy time at the observations: partial cycles count up to the
        // observation instant.
        let bo = &out.busy_at_obs[0];
        let expect = [0.0, 0.5, 0.8, 1.3, 3.2];
        for (got, want) in bo.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "busy at obs {got} vs {want}");
        }
        // The idle regulator is the unused service capacity mu * (t - busy).
        let y = out.idle_regulator();
        assert!((out.mu[0] - 1.25).abs() < 1e-12);
        assert!((y[0].last().unwrap() - 1.25 * (4.9 - 3.2)).abs() < 1e-9);
    }

    #[test]
    fn completion_processed_before_simultaneous_arrival() {
        // b = 2 at r = 0.5 gives service rate 2. Starting with two jobs, the
        // second completion lands exactly on the first arrival at t = 1.
        let spec = dd1(2.0);
        let opts = SimOptions {
            horizon: 1.0,
            obs_times: vec![1.0],
            event_cap: 100,
            record_flow: true,
        };
        let streams = StreamFamily::new(3, 1);
        let out = simulate(&spec, 0.5, &[2], &opts, &streams).unwrap();
        // Completions at 0.5 and 1.0, arrival at 1.0: three events, and the
        // observation at t = 1 sees the queue after both.
        assert_eq!(out.events, 3);
        assert_eq!(out.queues[0], vec![1]);
        let flow = out.flow.unwrap();
        assert_eq!(flow.completions, vec![2]);
        assert_eq!(flow.external, vec![1]);
    }

    #[test]
    fn flow_counters_balance_exactly() {
        let spec = tandem();
        let opts = SimOptions {
            horizon: 4000.0,
            obs_times: vec![],
            event_cap: 1_000_000,
            record_flow: true,
        };
        let streams = StreamFamily::new(42, 2);
        let out = simulate(&spec, 0.2, &[0, 0], &opts, &streams).unwrap();
        let flow = out.flow.as_ref().unwrap();
        for j in 0..2 {
            let inflow: u64 = flow.external[j] + (0..2).map(|i| flow.transfers[i][j]).sum::<u64>();
            assert_eq!(inflow, flow.completions[j] + out.final_queue[j]);
            let outflow: u64 = flow.exits[j] + (0..2).map(|k| flow.transfers[j][k]).sum::<u64>();
            assert_eq!(outflow, flow.completions[j]);
        }
        // In a tandem line every station-1 completion transfers to station 2.
        assert_eq!(flow.transfers[0][1], flow.completions[0]);
        assert_eq!(flow.exits[0], 0);
        assert!(out.events > 10_000);
    }

    #[test]
    fn identical_seeds_reproduce_the_path() {
        let spec = tandem();
        let opts = SimOptions {
            horizon: 500.0,
            obs_times: (1..50).map(|i| i as f64 * 10.0).collect(),
            event_cap: 1_000_000,
            record_flow: false,
        };
        let a = simulate(&spec, 0.3, &[1, 2], &opts, &StreamFamily::new(11, 2)).unwrap();
        let b = simulate(&spec, 0.3, &[1, 2], &opts, &StreamFamily::new(11, 2)).unwrap();
        let c = simulate(&spec, 0.3, &[1, 2], &opts, &StreamFamily::new(12, 2)).unwrap();
        assert_eq!(a.queues, b.queues);
        assert_eq!(a.events, b.events);
        assert_ne!(a.queues, c.queues);
    }

    #[test]
    fn utilization_approaches_traffic_intensity() {
        // M/M/1 with rho = 1/1.1: busy fraction over a long run sits nearby.
        let spec = mm1();
        let opts = SimOptions {
            horizon: 200_000.0,
            obs_times: vec![],
            event_cap: 2_000_000,
            record_flow: false,
        };
        let out = simulate(&spec, 0.1, &[0], &opts, &StreamFamily::new(5, 1)).unwrap();
        let util = out.busy_time[0] / out.horizon;
        assert!((util - 1.0 / 1.1).abs() < 0.03, "utilization {util}");
    }

    #[test]
    fn event_cap_is_enforced() {
        let spec = mm1();
        let opts = SimOptions {
            horizon: 1e9,
            obs_times: vec![],
            event_cap: 1000,
            record_flow: false,
        };
        assert!(matches!(
            simulate(&spec, 0.5, &[0], &opts, &StreamFamily::new(1, 1)),
            Err(GjnError::EventCapExceeded { cap: 1000, .. })
        ));
    }

    #[test]
    fn warm_start_rounds_up_per_station_scale() {
        let spec = tandem();
        // Fully separated scales: gamma_1 = 0.1, gamma_2 = 0.01.
        let z0 = warm_start(&spec, 0.1, &[1.0, 1.0]);
        assert_eq!(z0, vec![10, 100]);
        let z1 = warm_start(&spec, 0.1, &[0.25, 0.0]);
        assert_eq!(z1, vec![3, 0]);
    }

    #[test]
    fn scaled_path_applies_clock_and_space_scales() {
        let spec = dd1(1.0);
        let opts = SimOptions {
            horizon: 5.0,
            obs_times: vec![1.5, 3.5],
            event_cap: 1000,
            record_flow: false,
        };
        let out = simulate(&spec, 0.25, &[0], &opts, &StreamFamily::new(2, 1)).unwrap();
        let path = scaled_path(&out, 0.01, &[0.1]).unwrap();
        assert_eq!(path.times(), &[0.015, 0.035]);
        assert_eq!(path.coord(0), &[0.1, 0.1]);
    }

    #[test]
    fn stationary_batches_partition_the_run() {
        let spec = mm1();
        let streams = StreamFamily::new(9, 1);
        let s =
            stationary_sample(&spec, 0.2, &[2], 100.0, 50.0, 100, 10_000_000, &streams).unwrap();
        assert_eq!(s.point_samples[0].len(), 100);
        assert_eq!(s.batch_means[0].len(), 100);
        // rho/(1-rho) = 5 for rho = 1/1.2; batch means should hover nearby.
        let grand: f64 = s.batch_means[0].iter().sum::<f64>() / 100.0;
        assert!((grand - 5.0).abs() < 2.0, "grand mean {grand}");
    }
}
