//! Closed-form fluid model of the critical gated processor-sharing queue.
//!
//! With initial condition ξ of first moment w, the waiting measure grows
//! as α⟦t⟧_w ν while the batch in service shifts left; at every multiple of
//! w the accumulated α w ν passes the gate and the cycle repeats.

use serde::{Deserialize, Serialize};

use crate::measure::{AtomicMeasure, Extent, Measure, MeasureError, MeasureValue, ScaledDistribution, ShiftedView};
use crate::primitives::{DistributionError, DistributionSpec};

/// Largest tolerated |α·mean(ν) − 1| before a criticality warning.
pub const CRITICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FluidError {
    #[error("fluid arrival rate {0} must be finite and > 0")]
    Rate(f64),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("initial condition has mass at 0")]
    MassAtZero,
}

/// ⟦t⟧_w = t − ⌊t/w⌋w, with ⟦t⟧₀ = 0.
pub fn residue(t: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    t.rem_euclid(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub alpha: f64,
    pub nu: DistributionSpec,
    pub xi: MeasureValue,
    w: f64,
}

impl FluidParams {
    pub fn new(alpha: f64, nu: DistributionSpec, xi: MeasureValue) -> Result<Self, FluidError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(FluidError::Rate(alpha));
        }
        let mean = nu.mean()?;
        if let MeasureValue::Scaled(s) = &xi {
            s.law.validate()?;
        }
        if xi.cumulative_mass(0.0) > 0.0 {
            return Err(FluidError::MassAtZero);
        }
        let w = xi.first_moment();
        let gap = (alpha * mean - 1.0).abs();
        if gap > CRITICALITY_TOL {
            log::warn!("fluid model is not critical: alpha * mean(nu) = {}", alpha * mean);
        }
        if let MeasureValue::Atomic(_) = &xi {
            log::debug!("atomic fluid initial condition; the limit theorem assumes an atomless one");
        }
        Ok(FluidParams { alpha, nu, xi, w })
    }

    pub fn with_zero_initial(alpha: f64, nu: DistributionSpec) -> Result<Self, FluidError> {
        Self::new(alpha, nu, MeasureValue::Atomic(AtomicMeasure::zero()))
    }

    /// Initial fluid workload, the period of the orbit.
    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn is_critical(&self) -> bool {
        (self.alpha * self.nu.mean_unchecked() - 1.0).abs() <= CRITICALITY_TOL
    }

    /// Whether the configuration meets the limit theorem's hypotheses
    /// (critical, atomless ν and ξ).
    pub fn within_theorem(&self) -> bool {
        self.is_critical() && !self.nu.has_atoms() && !matches!(&self.xi, MeasureValue::Atomic(a) if !a.is_empty())
            && !matches!(&self.xi, MeasureValue::Scaled(s) if s.law.has_atoms())
    }

    fn is_zero(&self) -> bool {
        self.xi.total_mass() == 0.0
    }

    /// α w ν, the state entering service at each multiple of w.
    pub fn orbit_batch(&self) -> ScaledDistribution {
        ScaledDistribution {
            scale: self.alpha * self.w,
            law: self.nu.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidState {
    pub t: f64,
    pub sigma: MeasureValue,
    pub mu: MeasureValue,
    pub residue: f64,
}

/// The growing path μ(t) = α⟦t⟧_w ν.
pub fn fluid_mu(p: &FluidParams, t: f64) -> MeasureValue {
    if p.is_zero() {
        return MeasureValue::zero();
    }
    MeasureValue::Scaled(ScaledDistribution {
        scale: p.alpha * residue(t, p.w),
        law: p.nu.clone(),
    })
}

fn shift_by_work(base: &MeasureValue, work: f64) -> MeasureValue {
    match base.shift_for_work(work) {
        Extent::Infinite => MeasureValue::zero(),
        Extent::Finite(x) => match base {
            MeasureValue::Scaled(s) if !matches!(s.law, DistributionSpec::Exponential { .. }) => {
                MeasureValue::Shifted(ShiftedView::new(s.clone(), x))
            }
            _ => base.shift(x),
        },
    }
}

/// The shifting path: ξ(·+₀F_ξ⁻¹(t)) on [0, w), then
/// αwν(·+₀F⁻¹_{αwν}(⟦t⟧_w)).
pub fn fluid_sigma(p: &FluidParams, t: f64) -> MeasureValue {
    if p.is_zero() {
        return MeasureValue::zero();
    }
    if t < p.w {
        shift_by_work(&p.xi, t)
    } else {
        shift_by_work(&MeasureValue::Scaled(p.orbit_batch()), residue(t, p.w))
    }
}

pub fn fluid_state(p: &FluidParams, t: f64) -> FluidState {
    FluidState {
        t,
        sigma: fluid_sigma(p, t),
        mu: fluid_mu(p, t),
        residue: residue(t, p.w),
    }
}

/// The fluid workload is constant and equal to w.
pub fn fluid_workload(p: &FluidParams, _t: f64) -> f64 {
    p.w
}

pub fn fluid_queue_length(p: &FluidParams, t: f64) -> f64 {
    fluid_sigma(p, t).total_mass() + fluid_mu(p, t).total_mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{discrepancy, TestFunctionSet};
    use std::f64::consts::LN_2;

    fn mm1() -> FluidParams {
        FluidParams::new(
            1.0,
            DistributionSpec::exponential(1.0),
            MeasureValue::Scaled(ScaledDistribution::new(1.0, DistributionSpec::exponential(1.0)).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn residue_examples() {
        assert_eq!(residue(2.5, 1.0), 0.5);
        assert_eq!(residue(3.0, 1.0), 0.0);
        assert_eq!(residue(7.0, 0.0), 0.0);
    }

    #[test]
    fn mu_examples() {
        let p = mm1();
        assert_eq!(
            fluid_mu(&p, 0.5),
            MeasureValue::Scaled(ScaledDistribution::new(0.5, DistributionSpec::exponential(1.0)).unwrap())
        );
        assert_eq!(fluid_mu(&p, 1.0).total_mass(), 0.0);
        let zero = FluidParams::with_zero_initial(1.0, DistributionSpec::exponential(1.0)).unwrap();
        assert_eq!(fluid_mu(&zero, 0.7), MeasureValue::zero());
        assert_eq!(fluid_sigma(&zero, 0.7), MeasureValue::zero());
    }

    #[test]
    fn sigma_examples() {
        let p = mm1();
        let s = fluid_sigma(&p, 0.5);
        assert!((s.total_mass() - 0.5).abs() < 1e-15);
        // shift by F⁻¹(0.5) = ln 2
        let expect = ScaledDistribution::new(1.0, DistributionSpec::exponential(1.0))
            .unwrap()
            .shift_truncate(LN_2, None)
            .unwrap();
        assert!(discrepancy(&s, &expect, &TestFunctionSet::default()) < 1e-15);
        assert_eq!(fluid_sigma(&p, 1.0), MeasureValue::Scaled(p.orbit_batch()));
        assert_eq!(fluid_sigma(&p, 2.5), fluid_sigma(&p, 1.5));
    }

    #[test]
    fn workload_and_queue_length() {
        let p = mm1();
        assert_eq!(fluid_workload(&p, 3.3), 1.0);
        for t in [1.0, 1.25, 1.5, 2.9] {
            assert!((fluid_queue_length(&p, t) - 1.0).abs() < 1e-12, "t={t}");
        }
        let det = FluidParams::new(
            1.0,
            DistributionSpec::deterministic(1.0),
            MeasureValue::Scaled(ScaledDistribution::new(1.0, DistributionSpec::deterministic(1.0)).unwrap()),
        )
        .unwrap();
        assert!((fluid_queue_length(&det, 1.5) - 1.5).abs() < 1e-15);
        assert!(!det.within_theorem());
        assert!(mm1().within_theorem());
        let zero = FluidParams::with_zero_initial(1.0, DistributionSpec::exponential(1.0)).unwrap();
        assert_eq!(fluid_queue_length(&zero, 2.0), 0.0);
        assert_eq!(fluid_workload(&zero, 2.0), 0.0);
    }

    #[test]
    fn atomic_initial_condition_first_cycle() {
        let xi = AtomicMeasure::new([(0.5, 1.0), (1.5, 2.0)]).unwrap();
        let p = FluidParams::new(0.5, DistributionSpec::uniform(1.0, 3.0), MeasureValue::Atomic(xi)).unwrap();
        assert_eq!(p.w(), 3.5);
        for t in [0.0, 0.4, 1.7, 3.4] {
            assert!((fluid_sigma(&p, t).first_moment() - (3.5 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(
            FluidParams::with_zero_initial(0.0, DistributionSpec::exponential(1.0)),
            Err(FluidError::Rate(_))
        ));
        let xi = MeasureValue::Atomic(AtomicMeasure::new([(0.0, 1.0)]).unwrap());
        assert_eq!(
            FluidParams::new(1.0, DistributionSpec::exponential(1.0), xi).unwrap_err(),
            FluidError::MassAtZero
        );
    }
}
