#![allow(dead_code)]

use proptest::prelude::*;

use gps_core::measure::AtomicMeasure;
use gps_core::primitives::DistributionSpec;

pub fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale.abs().max(1.0)
}

/// Location in (0, 10], sometimes on an integer lattice so merges occur.
pub fn location() -> impl Strategy<Value = f64> {
    prop_oneof![(1u32..=10).prop_map(f64::from), (1e-6f64..=10.0)]
}

pub fn atoms(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((location(), 1e-6f64..=10.0), 1..=max)
}

pub fn atomic(max: usize) -> impl Strategy<Value = AtomicMeasure> {
    atoms(max).prop_map(|a| AtomicMeasure::new(a).unwrap())
}

/// One law per family, all with the given mean.
pub fn law_with_mean(family: usize, mean: f64) -> DistributionSpec {
    match family % 6 {
        0 => DistributionSpec::exponential(1.0 / mean),
        1 => DistributionSpec::deterministic(mean),
        2 => DistributionSpec::uniform(0.2 * mean, 1.8 * mean),
        3 => DistributionSpec::Pareto {
            scale: mean * 1.5 / 2.5,
            shape: 2.5,
        },
        4 => DistributionSpec::Hyperexponential {
            probs: vec![0.3, 0.7],
            rates: vec![1.0 / (2.0 * mean), 0.7 / (0.4 * mean)],
        },
        _ => DistributionSpec::Lognormal {
            mu: mean.ln() - 0.125,
            sigma: 0.5,
        },
    }
}

pub fn law() -> impl Strategy<Value = DistributionSpec> {
    (0usize..6, 0.3f64..3.0).prop_map(|(f, m)| law_with_mean(f, m))
}
