mod common;

use common::close;
use proptest::prelude::*;

use gps_core::measure::Measure;
use gps_core::sim::{Arrival, Trace};

const TOL: f64 = 1e-9;
const HORIZON: f64 = 60.0;

/// Explicit primitives: initial sizes, then arrivals (gaps, services).
fn primitives() -> impl Strategy<Value = (Vec<f64>, Vec<Arrival>)> {
    let size = prop_oneof![(1u32..=3).prop_map(f64::from), 0.01f64..4.0];
    let initial = prop::collection::vec(size.clone(), 0..8);
    let gaps = prop::collection::vec((prop_oneof![Just(0.5), 0.01f64..3.0], size), 0..60);
    (initial, gaps).prop_map(|(initial, gaps)| {
        let mut t = 0.0;
        let mut arrivals = Vec::new();
        for (g, service) in gaps {
            t += g;
            if t > HORIZON {
                break;
            }
            arrivals.push(Arrival { time: t, service });
        }
        (initial, arrivals)
    })
}

fn trace() -> impl Strategy<Value = Trace> {
    primitives().prop_map(|(i, a)| Trace::from_primitives(&i, a, HORIZON).unwrap())
}

/// Times where the state changes: arrivals, gate openings, departures.
fn event_times(tr: &Trace) -> Vec<f64> {
    let mut ts: Vec<f64> = tr.arrivals.iter().map(|a| a.time).collect();
    ts.extend(tr.batches.iter().map(|b| b.start));
    ts.extend(tr.jobs.iter().filter_map(|j| j.departure).filter(|&d| d <= tr.horizon));
    ts.push(0.0);
    ts.push(tr.horizon);
    ts
}

/// I(t) = sup_{s ≤ t} (W₀ + A(s) − s)⁻, the infimum being approached just
/// before an arrival or at t itself.
fn idle_oracle(tr: &Trace, t: f64) -> f64 {
    let mut work = tr.initial_work;
    let mut worst: f64 = 0.0;
    for a in tr.arrivals.iter().take_while(|a| a.time <= t) {
        worst = worst.max(a.time - work);
        work += a.service;
    }
    worst.max(t - work)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn work_conservation(tr in trace(), us in prop::collection::vec(0.0f64..=1.0, 50)) {
        let mut ts = event_times(&tr);
        ts.extend(us.iter().map(|u| u * HORIZON));
        for t in ts {
            let s = tr.snapshot(t).unwrap();
            let direct = s.sigma.first_moment() + s.mu.first_moment();
            let scale = tr.initial_work + tr.arrivals.iter().map(|a| a.service).sum::<f64>();
            prop_assert!(close(s.workload, direct, TOL, scale), "t={} W={} direct={}", t, s.workload, direct);
        }
    }

    #[test]
    fn queue_length_counts_jobs(tr in trace(), us in prop::collection::vec(0.0f64..=1.0, 50)) {
        for u in us {
            let t = u * HORIZON;
            let s = tr.snapshot(t).unwrap();
            prop_assert_eq!(s.queue_length, tr.jobs_in_system(t) as f64, "t={}", t);
        }
    }

    #[test]
    fn idle_time(tr in trace()) {
        let mut ts = event_times(&tr);
        ts.sort_by(f64::total_cmp);
        prop_assert_eq!(tr.idle_time_at(0.0), 0.0);
        let mut prev = 0.0;
        for &t in &ts {
            let i = tr.idle_time_at(t);
            prop_assert!(i >= prev);
            prev = i;
            prop_assert!(close(i, idle_oracle(&tr, t), TOL, t));
        }
        // I grows only while the system is empty
        for b in &tr.batches {
            if let Some((s, e)) = b.idle_period() {
                let mid = 0.5 * (s + e.min(tr.horizon));
                if mid > s && mid <= tr.horizon {
                    prop_assert_eq!(tr.workload_at(mid).unwrap(), 0.0);
                }
            }
            if b.work > 0.0 {
                let mid = b.start + 0.5 * b.work;
                if mid <= tr.horizon {
                    prop_assert_eq!(tr.idle_time_at(mid), tr.idle_time_at(b.start));
                }
            }
        }
    }

    #[test]
    fn gate_semantics(tr in trace(), us in prop::collection::vec(0.0f64..1.0, 20)) {
        for (k, b) in tr.batches.iter().enumerate() {
            let s = tr.snapshot(b.start).unwrap();
            prop_assert_eq!(s.batch_index, k);
            prop_assert!(s.mu.is_empty());
            prop_assert_eq!(&s.sigma, &b.profile);
            let end = tr.batches.get(k + 1).map_or(tr.horizon, |n| n.start);
            let mut ts: Vec<f64> = us.iter().map(|u| b.start + u * (end - b.start)).collect();
            ts.sort_by(f64::total_cmp);
            let mut last = (f64::INFINITY, 0.0);
            for t in ts {
                let s = tr.snapshot(t).unwrap();
                prop_assert!(s.sigma.total_mass() <= last.0 && s.mu.total_mass() >= last.1);
                last = (s.sigma.total_mass(), s.mu.total_mass());
            }
        }
    }

    #[test]
    fn batch_recursion(tr in trace()) {
        for pair in tr.batches.windows(2) {
            let (b, n) = (&pair[0], &pair[1]);
            prop_assert!(n.start >= b.start + b.work);
            let busy = tr.arrivals.iter().any(|a| a.time > b.start && a.time <= b.completion);
            prop_assert_eq!(n.start == b.completion, busy);
        }
    }

    #[test]
    fn equal_sizes_depart_together(v in 0.1f64..5.0, n in 2usize..8) {
        let tr = Trace::from_primitives(&vec![v; n], Vec::new(), 100.0).unwrap();
        let d = tr.jobs[0].departure.unwrap();
        prop_assert!(tr.jobs.iter().all(|j| j.departure == Some(d)));
        prop_assert!(close(d, n as f64 * v, TOL, d));
    }
}

/// Egalitarian processor sharing, advanced one completion at a time.
fn ps_departures(sizes: &[f64]) -> Vec<f64> {
    let mut left: Vec<(usize, f64)> = sizes.iter().copied().enumerate().collect();
    let mut out = vec![0.0; sizes.len()];
    let mut t = 0.0;
    while !left.is_empty() {
        let step = left.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        t += step * left.len() as f64;
        left.iter_mut().for_each(|r| r.1 -= step);
        left.retain(|&(id, r)| {
            if r <= 0.0 {
                out[id] = t;
            }
            r > 0.0
        });
    }
    out
}

proptest! {
    #[test]
    fn matches_processor_sharing(sizes in prop::collection::vec(prop_oneof![(1u32..=3).prop_map(f64::from), 0.01f64..10.0], 1..=8)) {
        let tr = Trace::from_primitives(&sizes, Vec::new(), 1e4).unwrap();
        for (j, d) in tr.jobs.iter().zip(ps_departures(&sizes)) {
            prop_assert!(close(j.departure.unwrap(), d, TOL, d));
        }
    }
}
