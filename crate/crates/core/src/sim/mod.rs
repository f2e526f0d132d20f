//! Exact event-driven simulation of the gated processor-sharing queue.
//!
//! Within a batch every job receives service at rate 1/(batch size in
//! service), so the residual profile at elapsed work `y` is the start
//! profile shifted left by `F⁻¹(y)`. Batch boundaries are computed from
//! arrival times and batch work alone, never by testing `W(s) > 0` on
//! floating-point values.

mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use trace::{Arrival, BatchRecord, Job, SimState, Trace};

use crate::primitives::{generate_arrivals, DistributionSpec, InitialConditionSpec, PrimitiveError, RenewalSpec, SeedProtocol};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation input: {0}")]
    Config(String),
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
}

/// Jobs present at time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBatch {
    Empty,
    /// ⌊scale·z₀⌋ iid sizes.
    Sampled { spec: InitialConditionSpec, scale: f64 },
    /// Explicit job sizes.
    Sizes(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub arrivals: RenewalSpec,
    pub service: DistributionSpec,
    pub initial: InitialBatch,
    pub horizon: f64,
    pub snapshot_grid: Vec<f64>,
    pub seed: u64,
}

/// Samples the primitives for `config` without running the dynamics.
pub fn sample_primitives(config: &SimConfig) -> Result<(Vec<f64>, Vec<Arrival>), SimError> {
    if !(config.horizon.is_finite() && config.horizon > 0.0) {
        return Err(SimError::Config(format!("horizon {} must be finite and > 0", config.horizon)));
    }
    config.service.validate().map_err(PrimitiveError::from)?;
    let seeds = SeedProtocol::new(config.seed);
    let initial = match &config.initial {
        InitialBatch::Empty => Vec::new(),
        InitialBatch::Sampled { spec, scale } => spec.sample_sizes(*scale, seeds.child(0, "initial"))?,
        InitialBatch::Sizes(s) => s.clone(),
    };
    let times = generate_arrivals(&config.arrivals, config.horizon, seeds.child(0, "arrivals"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.child(0, "service"));
    let arrivals = times
        .into_iter()
        .map(|time| Arrival {
            time,
            service: config.service.sample(&mut rng),
        })
        .collect();
    Ok((initial, arrivals))
}

/// Simulates `config` to its horizon and materializes snapshots on its grid.
pub fn run(config: &SimConfig) -> Result<Trace, SimError> {
    if let Some(&t) = config
        .snapshot_grid
        .iter()
        .find(|&&t| !(t.is_finite() && (0.0..=config.horizon).contains(&t)))
    {
        return Err(SimError::OutOfRange {
            t,
            horizon: config.horizon,
        });
    }
    let (initial, arrivals) = sample_primitives(config)?;
    let mut trace = Trace::from_primitives(&initial, arrivals, config.horizon)?;
    trace.snapshots = config
        .snapshot_grid
        .iter()
        .map(|&t| trace.snapshot(t))
        .collect::<Result<_, _>>()?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SojournStats {
    pub completed: usize,
    pub in_flight: usize,
    pub mean_sojourn: Option<f64>,
    pub mean_wait: Option<f64>,
    pub p50: Option<f64>,
    pub p90: Option<f64>,
    pub p99: Option<f64>,
    pub max: Option<f64>,
}

fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// Sojourn and gate-waiting statistics over jobs that departed by the horizon.
pub fn sojourn_stats(trace: &Trace) -> SojournStats {
    let mut sojourns = Vec::new();
    let mut waits = Vec::new();
    let mut in_flight = 0;
    for job in &trace.jobs {
        if trace.is_in_flight(job) {
            in_flight += 1;
            continue;
        }
        let batch = &trace.batches[job.batch.expect("departed jobs are batched")];
        sojourns.push(job.sojourn().expect("departed"));
        waits.push(batch.start - job.arrival);
    }
    let n = sojourns.len();
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let mean_sojourn = mean(&sojourns);
    let mean_wait = mean(&waits);
    sojourns.sort_by(f64::total_cmp);
    SojournStats {
        completed: n,
        in_flight,
        mean_sojourn,
        mean_wait,
        p50: nearest_rank(&sojourns, 0.5),
        p90: nearest_rank(&sojourns, 0.9),
        p99: nearest_rank(&sojourns, 0.99),
        max: sojourns.last().copied(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AtomicMeasure, Measure};
    use crate::primitives::Delay;

    fn dd1() -> SimConfig {
        SimConfig {
            arrivals: RenewalSpec::new(DistributionSpec::deterministic(1.0), Delay::Fixed(1.0)),
            service: DistributionSpec::deterministic(1.0),
            initial: InitialBatch::Sizes(vec![1.0]),
            horizon: 3.5,
            snapshot_grid: vec![0.0, 0.5, 3.5],
            seed: 0,
        }
    }

    fn pair_batch() -> Trace {
        Trace::from_primitives(&[1.0, 3.0], Vec::new(), 10.0).unwrap()
    }

    #[test]
    fn dd1_hand_trace() {
        let tr = run(&dd1()).unwrap();
        let starts: Vec<f64> = tr.batches.iter().map(|b| b.start).collect();
        assert_eq!(starts, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(tr.batches.iter().all(|b| b.size() == 1));
        for b in &tr.batches {
            assert_eq!(tr.workload_at(b.start).unwrap(), 1.0);
        }
        for t in [0.0, 0.7, 1.0, 2.2, 3.5] {
            assert_eq!(tr.idle_time_at(t), 0.0);
        }
        for j in &tr.jobs {
            if !tr.is_in_flight(j) {
                assert_eq!(j.sojourn(), Some(1.0));
            }
        }
        let s = sojourn_stats(&tr);
        assert_eq!(s.completed, 3);
        assert_eq!(s.in_flight, 1);
        assert_eq!(s.mean_sojourn, Some(1.0));
        assert_eq!(s.mean_wait, Some(0.0));
    }

    #[test]
    fn dd1_snapshots_and_workload() {
        let tr = run(&dd1()).unwrap();
        let s = &tr.snapshots[1];
        assert_eq!(s.sigma, AtomicMeasure::dirac(0.5));
        assert!(s.mu.is_empty());
        assert_eq!(s.workload, 0.5);
        assert_eq!(s.queue_length, 1.0);
        assert_eq!(tr.workload_at(0.25).unwrap(), 0.75);
    }

    #[test]
    fn idle_start() {
        let tr = Trace::from_primitives(
            &[],
            vec![Arrival {
                time: 2.0,
                service: 0.5,
            }],
            5.0,
        )
        .unwrap();
        assert_eq!(tr.batches[1].start, 2.0);
        assert_eq!(tr.idle_time_at(2.0), 2.0);
        assert_eq!(tr.workload_at(1.0).unwrap(), 0.0);
        let s = tr.snapshot(1.5).unwrap();
        assert!(s.sigma.is_empty() && s.mu.is_empty());
        // idle again after completion at 2.5
        assert_eq!(tr.idle_time_at(4.0), 3.5);
    }

    #[test]
    fn two_job_batch_against_ps_hand_oracle() {
        let tr = pair_batch();
        assert_eq!(tr.jobs[0].departure, Some(2.0));
        assert_eq!(tr.jobs[1].departure, Some(4.0));
        let s = tr.snapshot(3.0).unwrap();
        assert_eq!(s.sigma, AtomicMeasure::dirac(1.0));
        assert!(s.mu.is_empty());
        assert_eq!(s.shift, 2.0);
        assert_eq!(tr.workload_at(1.5).unwrap(), 2.5);
        let st = sojourn_stats(&tr);
        assert_eq!(st.mean_sojourn, Some(3.0));
    }

    #[test]
    fn single_job_sojourn() {
        let tr = Trace::from_primitives(&[0.8], Vec::new(), 2.0).unwrap();
        assert_eq!(sojourn_stats(&tr).mean_sojourn, Some(0.8));
    }

    #[test]
    fn gate_opening_snapshot() {
        let tr = run(&SimConfig {
            horizon: 50.0,
            snapshot_grid: vec![],
            ..dd1()
        })
        .unwrap();
        for b in &tr.batches {
            let s = tr.snapshot(b.start).unwrap();
            assert_eq!(s.sigma, b.profile);
            assert!(s.mu.is_empty());
            assert_eq!(s.shift, 0.0);
        }
    }

    #[test]
    fn empty_system_forever() {
        let tr = Trace::from_primitives(&[], Vec::new(), 4.0).unwrap();
        assert_eq!(tr.batches.len(), 1);
        assert_eq!(tr.batches[0].next_start, None);
        assert_eq!(tr.idle_time_at(4.0), 4.0);
        let s = tr.snapshot(3.0).unwrap();
        assert_eq!(s.queue_length, 0.0);
    }

    #[test]
    fn arrival_at_completion_joins_next_batch_without_idle() {
        let tr = Trace::from_primitives(
            &[1.0],
            vec![Arrival {
                time: 1.0,
                service: 2.0,
            }],
            5.0,
        )
        .unwrap();
        assert_eq!(tr.batches[1].start, 1.0);
        assert_eq!(tr.batches[0].idle_period(), None);
        assert_eq!(tr.jobs[1].departure, Some(3.0));
    }

    #[test]
    fn out_of_range_snapshot() {
        let tr = pair_batch();
        assert!(matches!(tr.snapshot(10.5), Err(SimError::OutOfRange { .. })));
        assert!(matches!(tr.workload_at(-1.0), Err(SimError::OutOfRange { .. })));
    }

    #[test]
    fn rejects_bad_primitives() {
        assert!(Trace::from_primitives(&[0.0], Vec::new(), 1.0).is_err());
        let a = vec![Arrival { time: 0.0, service: 1.0 }];
        assert!(Trace::from_primitives(&[], a, 1.0).is_err());
    }

    #[test]
    fn batch_profiles_cover_arrivals() {
        let cfg = SimConfig {
            arrivals: RenewalSpec::new(DistributionSpec::exponential(1.0), Delay::None),
            service: DistributionSpec::exponential(1.1),
            initial: InitialBatch::Sampled {
                spec: InitialConditionSpec {
                    z0: 1.0,
                    law: DistributionSpec::exponential(1.0),
                },
                scale: 20.0,
            },
            horizon: 200.0,
            snapshot_grid: vec![],
            seed: 5,
        };
        let tr = run(&cfg).unwrap();
        let last = tr.batches.last().unwrap();
        let batched: f64 = tr.batches[1..].iter().map(|b| b.profile.total_mass()).sum();
        assert_eq!(batched as usize, tr.arrivals_by(last.start));
        for w in tr.batches.windows(2) {
            assert!(w[1].start >= w[0].start + w[0].work - 1e-12);
            assert!(w[0].completion <= w[1].start);
        }
    }
}
