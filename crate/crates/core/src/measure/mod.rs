//! Finite nonnegative measures on ℝ₊ with finite first moment.
//!
//! Two concrete representations share the [`Measure`] interface: weighted
//! atom lists ([`AtomicMeasure`]) for simulation state, and scaled
//! parametric laws ([`ScaledDistribution`], [`ShiftedView`]) for fluid
//! model states.

mod atomic;
pub mod quad;
mod scaled;
mod test_fn;

use serde::{Deserialize, Serialize};

pub use atomic::AtomicMeasure;
pub use scaled::{ScaledDistribution, ShiftedView, DEFAULT_DISCRETIZATION};
pub use test_fn::{TestFunction, TestFunctionSet};

use crate::primitives::DistributionError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("atom location {0} is not a finite nonnegative number")]
    Location(f64),
    #[error("weight {0} is not a finite positive number")]
    Weight(f64),
    #[error("unbounded support has no finite supremum")]
    Unbounded,
    #[error("{0} law is not closed under shift; pass a discretization size")]
    NotClosedUnderShift(&'static str),
    #[error("invalid test set: {0}")]
    TestSet(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// A point of ℝ₊ ∪ {+∞}; returned where a supremum of support can be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extent {
    Finite(f64),
    Infinite,
}

impl Extent {
    pub fn finite(self) -> Result<f64, MeasureError> {
        match self {
            Extent::Finite(x) => Ok(x),
            Extent::Infinite => Err(MeasureError::Unbounded),
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extent::Finite(_))
    }
}

/// The functional interface shared by every measure representation.
pub trait Measure {
    /// ⟨1, ζ⟩
    fn total_mass(&self) -> f64;
    /// ⟨χ, ζ⟩
    fn first_moment(&self) -> f64;
    /// ζ([0, x])
    fn cumulative_mass(&self, x: f64) -> f64;
    /// F_ζ(x) = ⟨χ ∧ x, ζ⟩: work to shift ζ left by `x`, dropping mass at or below zero.
    fn shift_work(&self, x: f64) -> f64;
    /// Inverse of [`shift_work`](Measure::shift_work), extended by the
    /// supremum of the support once `y` reaches the first moment.
    fn shift_for_work(&self, y: f64) -> Extent;
    fn sup_support(&self) -> Extent;
    /// ⟨f, ζ⟩
    fn integrate(&self, f: &TestFunction) -> f64;
}

/// Any of the concrete representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum MeasureValue {
    Atomic(AtomicMeasure),
    Scaled(ScaledDistribution),
    Shifted(ShiftedView),
}

impl MeasureValue {
    pub fn zero() -> Self {
        MeasureValue::Atomic(AtomicMeasure::zero())
    }

    fn inner(&self) -> &dyn Measure {
        match self {
            MeasureValue::Atomic(atoms) => atoms,
            MeasureValue::Scaled(s) => s,
            MeasureValue::Shifted(v) => v,
        }
    }

    /// ζ(·+₀x), staying lazy for non-exponential laws.
    pub fn shift(&self, x: f64) -> MeasureValue {
        match self {
            MeasureValue::Atomic(atoms) => MeasureValue::Atomic(atoms.shift_truncate(x)),
            MeasureValue::Scaled(s) => s
                .shift_truncate(x, None)
                .unwrap_or_else(|_| MeasureValue::Shifted(ShiftedView::new(s.clone(), x))),
            MeasureValue::Shifted(v) => {
                MeasureValue::Shifted(ShiftedView::new(v.base.clone(), v.offset + x.max(0.0)))
            }
        }
    }
}

impl From<AtomicMeasure> for MeasureValue {
    fn from(atoms: AtomicMeasure) -> Self {
        MeasureValue::Atomic(atoms)
    }
}

impl From<ScaledDistribution> for MeasureValue {
    fn from(s: ScaledDistribution) -> Self {
        MeasureValue::Scaled(s)
    }
}

impl Measure for MeasureValue {
    fn total_mass(&self) -> f64 {
        self.inner().total_mass()
    }
    fn first_moment(&self) -> f64 {
        self.inner().first_moment()
    }
    fn cumulative_mass(&self, x: f64) -> f64 {
        self.inner().cumulative_mass(x)
    }
    fn shift_work(&self, x: f64) -> f64 {
        self.inner().shift_work(x)
    }
    fn shift_for_work(&self, y: f64) -> Extent {
        self.inner().shift_for_work(y)
    }
    fn sup_support(&self) -> Extent {
        self.inner().sup_support()
    }
    fn integrate(&self, f: &TestFunction) -> f64 {
        self.inner().integrate(f)
    }
}

/// max over the test set of |⟨f, a⟩ − ⟨f, b⟩|; a pseudometric.
pub fn discrepancy(a: &dyn Measure, b: &dyn Measure, set: &TestFunctionSet) -> f64 {
    set.functions()
        .iter()
        .map(|f| (a.integrate(f) - b.integrate(f)).abs())
        .fold(0.0, f64::max)
}
