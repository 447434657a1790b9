//! Discrete-event simulation of FCFS many-server and infinite-server
//! queues fed by realized arrival paths, plus the exceedance and
//! time-of-day delay estimators used to evaluate staffing rules.
//!
//! The system starts empty. Each arrival enters service immediately when
//! a server is free and queues first-in-first-out otherwise; service
//! times are i.i.d. draws made at service start from a replication-scoped
//! stream, which keeps common random numbers usable across staffing
//! levels. Capacity may be a constant, infinite, or a periodic
//! piecewise-constant profile; when a profile shrinks, customers already
//! in service finish, and the reduction binds new admissions only.

use crate::arrivals::ArrivalPath;
use crate::error::{invalid, Result};
use crate::rng;
use crate::service::ServiceDistSpec;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

/// Server capacity of the simulated system.
#[derive(Debug, Clone, PartialEq)]
pub enum Capacity {
    Finite(u64),
    Infinite,
    /// Periodic piecewise-constant staffing profile; levels may be zero.
    Periodic(CapacityProfile),
}

/// Staffing level per segment, repeating with period delta * levels.len().
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityProfile {
    pub delta: f64,
    pub levels: Vec<u64>,
}

impl CapacityProfile {
    pub fn new(delta: f64, levels: Vec<u64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid!("segment length must be positive, got {delta}"));
        }
        if levels.is_empty() {
            return Err(invalid!("capacity profile needs at least one segment"));
        }
        Ok(Self { delta, levels })
    }

    pub fn period(&self) -> f64 {
        self.delta * self.levels.len() as f64
    }

    /// Staffing level in force at time t (periodic extension).
    pub fn level_at(&self, t: f64) -> u64 {
        let period = self.period();
        let mut s = t % period;
        if s < 0.0 {
            s += period;
        }
        let idx = ((s / self.delta).floor() as usize).min(self.levels.len() - 1);
        self.levels[idx]
    }
}

/// Realized queue trajectory: number-in-system as a right-continuous
/// step function, with per-arrival delay flags and service-start times.
#[derive(Debug, Clone)]
pub struct QueuePath {
    /// Event times (arrivals and departures), nondecreasing.
    pub times: Vec<f64>,
    /// Number in system immediately after each event.
    pub levels: Vec<u32>,
    /// Per arrival, in arrival order: did it find every server busy.
    pub delayed: Vec<bool>,
    /// Per arrival, in arrival order: when its service began.
    pub service_starts: Vec<f64>,
    pub capacity: Capacity,
    /// Horizon of the driving arrival path; departures past it are kept
    /// so the step function is complete.
    pub horizon: f64,
}

impl QueuePath {
    /// Number in system at time t (right-continuous; 0 before the first
    /// event).
    pub fn level_at(&self, t: f64) -> u64 {
        let idx = self.times.partition_point(|&e| e <= t);
        if idx == 0 {
            0
        } else {
            self.levels[idx - 1] as u64
        }
    }

    /// Fraction of arrivals at or after `from` that were delayed. Arrival
    /// times are recovered from the +1 jumps of the event record.
    pub fn delayed_fraction_after(&self, from: f64) -> f64 {
        let mut arrival_idx = 0usize;
        let mut total = 0u64;
        let mut delayed = 0u64;
        let mut prev: u32 = 0;
        for (i, &lvl) in self.levels.iter().enumerate() {
            if lvl > prev {
                if self.times[i] >= from {
                    total += 1;
                    if self.delayed[arrival_idx] {
                        delayed += 1;
                    }
                }
                arrival_idx += 1;
            }
            prev = lvl;
        }
        if total == 0 {
            0.0
        } else {
            delayed as f64 / total as f64
        }
    }
}

/// Delay or exceedance probabilities across probe times.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate {
    pub probes: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub replications: usize,
}

impl DelayEstimate {
    /// Average probability pooled over all probes.
    pub fn pooled_mean(&self) -> f64 {
        if self.probabilities.is_empty() {
            return 0.0;
        }
        self.probabilities.iter().sum::<f64>() / self.probabilities.len() as f64
    }
}

/// Evenly spaced probe times from `from` to `to` inclusive (within
/// floating-point tolerance).
pub fn probe_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let mut probes = Vec::new();
    let mut i = 0u64;
    loop {
        let t = from + i as f64 * step;
        if t > to + 1e-9 * step {
            break;
        }
        probes.push(t);
        i += 1;
    }
    probes
}

/// Orders f64 event keys inside the departure heap.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Simulates the FCFS queue fed by `arrivals`. Deterministic given
/// (arrivals, seed); the system starts empty and drains completely after
/// the last arrival.
pub fn simulate_queue(
    arrivals: &ArrivalPath,
    service: &ServiceDistSpec,
    capacity: Capacity,
    seed: u64,
) -> Result<QueuePath> {
    match &capacity {
        Capacity::Finite(0) => return Err(invalid!("finite capacity must be at least 1")),
        Capacity::Periodic(p) => {
            CapacityProfile::new(p.delta, p.levels.clone())?;
        }
        _ => {}
    }
    let n_arrivals = arrivals.timestamps.len();
    let sampler = service.sampler();
    let mut rng = rng::root(seed);

    let mut heap: BinaryHeap<Reverse<Time>> = BinaryHeap::new();
    let mut fifo: VecDeque<usize> = VecDeque::new();
    let mut in_service: u64 = 0;
    let mut level: u32 = 0;

    let mut times = Vec::with_capacity(2 * n_arrivals);
    let mut levels = Vec::with_capacity(2 * n_arrivals);
    let mut delayed = vec![false; n_arrivals];
    let mut service_starts = vec![f64::NAN; n_arrivals];

    // Capacity in force at time t; None means infinite.
    let cap_at = |t: f64| -> Option<u64> {
        match &capacity {
            Capacity::Finite(n) => Some(*n),
            Capacity::Infinite => None,
            Capacity::Periodic(p) => Some(p.level_at(t)),
        }
    };
    // Segment boundaries matter only for periodic capacity: a level
    // increase admits waiting customers at the boundary instant.
    let boundary_step = match &capacity {
        Capacity::Periodic(p) => Some(p.delta),
        _ => None,
    };

    let mut next_arrival = 0usize;
    let mut boundary_idx: u64 = 1;
    let max_periodic_level = match &capacity {
        Capacity::Periodic(p) => p.levels.iter().copied().max().unwrap_or(0),
        _ => 0,
    };

    loop {
        let t_arr = arrivals.timestamps.get(next_arrival).copied().unwrap_or(f64::INFINITY);
        let t_dep = heap.peek().map(|Reverse(Time(t))| *t).unwrap_or(f64::INFINITY);
        let t_bnd = match boundary_step {
            Some(d) if !fifo.is_empty() || next_arrival < n_arrivals => {
                // Waiters that no future level can admit are permanently
                // stuck once arrivals and departures are exhausted, and
                // boundaries stop mattering; without this cut the periodic
                // boundary stream would never end.
                let stuck = next_arrival >= n_arrivals
                    && t_dep.is_infinite()
                    && max_periodic_level <= in_service;
                if stuck {
                    f64::INFINITY
                } else {
                    boundary_idx as f64 * d
                }
            }
            _ => f64::INFINITY,
        };
        if t_arr.is_infinite() && t_dep.is_infinite() && t_bnd.is_infinite() {
            break;
        }

        if t_dep <= t_arr && t_dep <= t_bnd {
            // Departure: free a server, pull the FIFO head if capacity
            // still allows at this instant.
            heap.pop();
            level -= 1;
            in_service -= 1;
            times.push(t_dep);
            levels.push(level);
            if let Some(&idx) = fifo.front() {
                let admits = cap_at(t_dep).map_or(true, |n| in_service < n);
                if admits {
                    fifo.pop_front();
                    service_starts[idx] = t_dep;
                    in_service += 1;
                    heap.push(Reverse(Time(t_dep + sampler.draw(&mut rng))));
                }
            }
        } else if t_bnd <= t_arr {
            // Capacity boundary: admit as many waiters as the new level
            // allows. Number in system does not change.
            while let Some(&idx) = fifo.front() {
                let admits = cap_at(t_bnd).map_or(true, |n| in_service < n);
                if !admits {
                    break;
                }
                fifo.pop_front();
                service_starts[idx] = t_bnd;
                in_service += 1;
                heap.push(Reverse(Time(t_bnd + sampler.draw(&mut rng))));
            }
            boundary_idx += 1;
        } else {
            // Arrival.
            let idx = next_arrival;
            next_arrival += 1;
            level += 1;
            times.push(t_arr);
            levels.push(level);
            let free = cap_at(t_arr).map_or(true, |n| in_service < n);
            if free {
                service_starts[idx] = t_arr;
                in_service += 1;
                heap.push(Reverse(Time(t_arr + sampler.draw(&mut rng))));
            } else {
                delayed[idx] = true;
                fifo.push_back(idx);
            }
        }
    }

    Ok(QueuePath {
        times,
        levels,
        delayed,
        service_starts,
        capacity,
        horizon: arrivals.horizon,
    })
}

/// Fraction of replications whose number-in-system exceeds `threshold`
/// at each probe time (strict inequality). Probes past any path's
/// horizon are rejected.
pub fn exceedance_prob(
    paths: &[QueuePath],
    threshold: u64,
    warmup: f64,
    probes: &[f64],
) -> Result<DelayEstimate> {
    if paths.is_empty() {
        return Err(invalid!("need at least one replication"));
    }
    let mut acc = ExceedanceAccumulator::new(threshold, warmup, probes.to_vec())?;
    for p in paths {
        acc.add_path(p)?;
    }
    Ok(acc.finish())
}

/// Streaming version of [`exceedance_prob`]: replications are folded in
/// one at a time so large paths never need to be stored together.
#[derive(Debug, Clone)]
pub struct ExceedanceAccumulator {
    threshold: u64,
    warmup: f64,
    probes: Vec<f64>,
    exceed: Vec<u64>,
    replications: usize,
}

impl ExceedanceAccumulator {
    pub fn new(threshold: u64, warmup: f64, probes: Vec<f64>) -> Result<Self> {
        if probes.is_empty() {
            return Err(invalid!("need at least one probe time"));
        }
        if let Some(t) = probes.iter().find(|t| **t < warmup) {
            return Err(invalid!("probe time {t} precedes the warm-up end {warmup}"));
        }
        let n = probes.len();
        Ok(Self { threshold, warmup, probes, exceed: vec![0; n], replications: 0 })
    }

    pub fn add_path(&mut self, path: &QueuePath) -> Result<()> {
        if path.horizon < self.warmup {
            return Err(invalid!(
                "path horizon {} is shorter than the warm-up {}",
                path.horizon,
                self.warmup
            ));
        }
        if let Some(t) = self.probes.iter().find(|t| **t > path.horizon + 1e-9) {
            return Err(invalid!("probe time {t} exceeds the path horizon {}", path.horizon));
        }
        for (i, &t) in self.probes.iter().enumerate() {
            if path.level_at(t) > self.threshold {
                self.exceed[i] += 1;
            }
        }
        self.replications += 1;
        Ok(())
    }

    pub fn finish(self) -> DelayEstimate {
        let r = self.replications.max(1) as f64;
        DelayEstimate {
            probes: self.probes,
            probabilities: self.exceed.iter().map(|&c| c as f64 / r).collect(),
            replications: self.replications,
        }
    }
}

/// Exceedance against a time-varying staffing profile: at probe t the
/// threshold is the profile level in force at t. Used with independent
/// daily replications simulated under that same profile.
pub fn exceedance_prob_vs_profile(
    paths: &[QueuePath],
    profile: &CapacityProfile,
    probes: &[f64],
) -> Result<DelayEstimate> {
    if paths.is_empty() {
        return Err(invalid!("need at least one replication"));
    }
    if probes.is_empty() {
        return Err(invalid!("need at least one probe time"));
    }
    let mut exceed = vec![0u64; probes.len()];
    for path in paths {
        if let Some(t) = probes.iter().find(|t| **t > path.horizon + 1e-9) {
            return Err(invalid!("probe time {t} exceeds the path horizon {}", path.horizon));
        }
        for (i, &t) in probes.iter().enumerate() {
            if path.level_at(t) > profile.level_at(t) {
                exceed[i] += 1;
            }
        }
    }
    let r = paths.len() as f64;
    Ok(DelayEstimate {
        probes: probes.to_vec(),
        probabilities: exceed.iter().map(|&c| c as f64 / r).collect(),
        replications: paths.len(),
    })
}

/// Time-of-day delay curve over one long path spanning `cycles` cycles of
/// the staffing profile: at time-of-day t the estimate is the fraction of
/// cycles j with Q(period (j-1) + t) above the staffing level at t.
pub fn delay_prob_timeofday(
    path: &QueuePath,
    profile: &CapacityProfile,
    cycles: usize,
    probe_step: f64,
) -> Result<DelayEstimate> {
    if cycles == 0 {
        return Err(invalid!("need at least one cycle"));
    }
    if !(probe_step > 0.0) || !probe_step.is_finite() {
        return Err(invalid!("probe step must be positive, got {probe_step}"));
    }
    let period = profile.period();
    let span = period * cycles as f64;
    if span > path.horizon + 1e-9 {
        return Err(invalid!(
            "{cycles} cycles of length {period} exceed the path horizon {}",
            path.horizon
        ));
    }
    let offsets = probe_grid(0.0, period - probe_step * 0.5, probe_step);
    let mut probabilities = Vec::with_capacity(offsets.len());
    for &t in &offsets {
        let n_t = profile.level_at(t);
        let mut hits = 0u64;
        for j in 0..cycles {
            let s = period * j as f64 + t;
            if path.level_at(s) > n_t {
                hits += 1;
            }
        }
        probabilities.push(hits as f64 / cycles as f64);
    }
    Ok(DelayEstimate { probes: offsets, probabilities, replications: cycles })
}
