use std::ops::Range;

use serde::Serialize;

use super::SimError;
use crate::measure::{AtomicMeasure, Measure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arrival {
    pub time: f64,
    pub service: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub id: usize,
    /// 0 for jobs present at time 0.
    pub arrival: f64,
    pub service: f64,
    /// None while the job is still waiting behind the gate at the horizon.
    pub batch: Option<usize>,
    pub departure: Option<f64>,
}

impl Job {
    pub fn sojourn(&self) -> Option<f64> {
        self.departure.map(|d| d - self.arrival)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub index: usize,
    pub start: f64,
    pub profile: AtomicMeasure,
    /// ⟨χ, profile⟩, summed in job order.
    pub work: f64,
    pub completion: f64,
    /// β_{k+1}; None when it lies beyond the horizon and is not determined
    /// by the arrivals seen so far.
    pub next_start: Option<f64>,
    /// Job ids in this batch.
    pub jobs: Range<usize>,
    /// Arrival indices consumed through this batch (exclusive end).
    pub arrivals_through: usize,
}

impl BatchRecord {
    pub fn size(&self) -> usize {
        self.jobs.len()
    }

    /// Idle interval [completion, next_start) following this batch, if nonempty.
    pub fn idle_period(&self) -> Option<(f64, f64)> {
        match self.next_start {
            Some(n) if n > self.completion => Some((self.completion, n)),
            Some(_) => None,
            None => Some((self.completion, f64::INFINITY)),
        }
    }
}

/// State of the system at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Residual service times of the active batch.
    pub sigma: AtomicMeasure,
    /// Service times of jobs waiting behind the gate.
    pub mu: AtomicMeasure,
    pub workload: f64,
    pub queue_length: f64,
    pub batch_index: usize,
    pub batch_start: f64,
    pub shift: f64,
    pub idle_time: f64,
}

/// Complete record of one simulated path on [0, horizon].
#[derive(Debug, Clone)]
pub struct Trace {
    pub horizon: f64,
    pub initial_work: f64,
    pub jobs: Vec<Job>,
    pub batches: Vec<BatchRecord>,
    pub arrivals: Vec<Arrival>,
    pub snapshots: Vec<SimState>,
    arrival_work: Vec<f64>,
    idle: Vec<(f64, f64)>,
    idle_prefix: Vec<f64>,
}

fn check_positive(what: &str, x: f64) -> Result<(), SimError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(SimError::Config(format!("{what} {x} must be finite and > 0")))
    }
}

impl Trace {
    /// Runs the gated processor-sharing dynamics on explicit primitives.
    ///
    /// Batch k+1 opens at the completion c_k of batch k if some job arrived
    /// in (β_k, c_k], and otherwise at the first arrival after c_k. Its
    /// profile is every arrival in (β_k, β_{k+1}].
    pub fn from_primitives(initial: &[f64], arrivals: Vec<Arrival>, horizon: f64) -> Result<Trace, SimError> {
        check_positive("horizon", horizon)?;
        for &v in initial {
            check_positive("initial job size", v)?;
        }
        let mut prev = 0.0;
        for a in &arrivals {
            check_positive("service time", a.service)?;
            if !(a.time > 0.0 && a.time <= horizon && a.time >= prev) {
                return Err(SimError::Config(format!(
                    "arrival times must be nondecreasing in (0, horizon]; got {} after {prev}",
                    a.time
                )));
            }
            prev = a.time;
        }

        let n0 = initial.len();
        let mut jobs: Vec<Job> = initial
            .iter()
            .enumerate()
            .map(|(id, &service)| Job {
                id,
                arrival: 0.0,
                service,
                batch: None,
                departure: None,
            })
            .chain(arrivals.iter().enumerate().map(|(i, a)| Job {
                id: n0 + i,
                arrival: a.time,
                service: a.service,
                batch: None,
                departure: None,
            }))
            .collect();

        let mut batches = Vec::new();
        let mut start = 0.0;
        let mut members = 0..n0;
        let mut consumed = 0usize;
        loop {
            let index = batches.len();
            let sizes: Vec<f64> = jobs[members.clone()].iter().map(|j| j.service).collect();
            let work: f64 = sizes.iter().sum();
            let profile = AtomicMeasure::from_locations(sizes).expect("validated sizes");
            let completion = start + work;
            for job in &mut jobs[members.clone()] {
                job.batch = Some(index);
                job.departure = Some(start + profile.shift_work(job.service));
            }
            let (next_start, through) = match arrivals.get(consumed) {
                None => (None, consumed),
                Some(a) => {
                    let gate = if a.time <= completion { completion } else { a.time };
                    let end = consumed + arrivals[consumed..].partition_point(|x| x.time <= gate);
                    (Some(gate), end)
                }
            };
            let opens = matches!(next_start, Some(n) if n <= horizon);
            batches.push(BatchRecord {
                index,
                start,
                profile,
                work,
                completion,
                next_start,
                jobs: members.clone(),
                arrivals_through: consumed,
            });
            if !opens {
                break;
            }
            start = next_start.unwrap();
            members = n0 + consumed..n0 + through;
            consumed = through;
        }

        let mut arrival_work = Vec::with_capacity(arrivals.len() + 1);
        arrival_work.push(0.0);
        let mut acc = 0.0;
        for a in &arrivals {
            acc += a.service;
            arrival_work.push(acc);
        }
        let idle: Vec<(f64, f64)> = batches.iter().filter_map(|b| b.idle_period()).collect();
        let mut idle_prefix = Vec::with_capacity(idle.len() + 1);
        idle_prefix.push(0.0);
        let mut acc = 0.0;
        for &(s, e) in &idle {
            acc += e - s;
            idle_prefix.push(acc);
        }

        Ok(Trace {
            horizon,
            initial_work: initial.iter().sum(),
            jobs,
            batches,
            arrivals,
            snapshots: Vec::new(),
            arrival_work,
            idle,
            idle_prefix,
        })
    }

    fn check_time(&self, t: f64) -> Result<(), SimError> {
        if t.is_finite() && (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(SimError::OutOfRange { t, horizon: self.horizon })
        }
    }

    /// ℓ(t): index of the batch whose start is the latest at or before t.
    pub fn batch_index_at(&self, t: f64) -> usize {
        self.batches.partition_point(|b| b.start <= t).saturating_sub(1)
    }

    /// Number of arrivals in (0, t].
    pub fn arrivals_by(&self, t: f64) -> usize {
        self.arrivals.partition_point(|a| a.time <= t)
    }

    /// I(t), cumulative idle time in [0, t].
    pub fn idle_time_at(&self, t: f64) -> f64 {
        let j = self.idle.partition_point(|&(s, _)| s < t);
        if j == 0 {
            return 0.0;
        }
        let (s, e) = self.idle[j - 1];
        self.idle_prefix[j - 1] + (t.min(e) - s).max(0.0)
    }

    /// W(t) = W₀ + ⟨χ, 𝓔(t)⟩ − t + I(t).
    pub fn workload_at(&self, t: f64) -> Result<f64, SimError> {
        self.check_time(t)?;
        // past the current batch's completion the system is empty
        if t >= self.batches[self.batch_index_at(t)].completion {
            return Ok(0.0);
        }
        let w = self.initial_work + self.arrival_work[self.arrivals_by(t)] - t + self.idle_time_at(t);
        Ok(w.max(0.0))
    }

    pub fn snapshot(&self, t: f64) -> Result<SimState, SimError> {
        self.check_time(t)?;
        let k = self.batch_index_at(t);
        let batch = &self.batches[k];
        let shift = batch.profile.shift_for_work_exact(t - batch.start);
        let sigma = batch.profile.shift_truncate(shift);
        let waiting = &self.arrivals[batch.arrivals_through..self.arrivals_by(t)];
        let mu = AtomicMeasure::from_locations(waiting.iter().map(|a| a.service)).expect("validated sizes");
        let queue_length = sigma.total_mass() + mu.total_mass();
        Ok(SimState {
            t,
            workload: self.workload_at(t)?,
            queue_length,
            batch_index: k,
            batch_start: batch.start,
            shift,
            idle_time: self.idle_time_at(t),
            sigma,
            mu,
        })
    }

    /// Jobs present at t: arrived by t and not yet departed.
    pub fn jobs_in_system(&self, t: f64) -> usize {
        self.jobs
            .iter()
            .filter(|j| j.arrival <= t && j.departure.is_none_or(|d| d > t))
            .count()
    }

    pub fn is_in_flight(&self, job: &Job) -> bool {
        job.departure.is_none_or(|d| d > self.horizon)
    }
}
