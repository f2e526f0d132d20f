use serde::{Deserialize, Serialize};

use super::{quad, AtomicMeasure, Extent, Measure, MeasureError, MeasureValue, TestFunction};
use crate::primitives::DistributionSpec;

/// `scale · law` for a parametric probability law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledDistribution {
    pub scale: f64,
    pub law: DistributionSpec,
}

impl ScaledDistribution {
    pub fn new(scale: f64, law: DistributionSpec) -> Result<Self, MeasureError> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(MeasureError::Weight(scale));
        }
        law.validate()?;
        Ok(ScaledDistribution { scale, law })
    }

    /// ζ(·+₀x). Closed form only for the exponential family; other
    /// families need a discretization size and come back atomic.
    pub fn shift_truncate(&self, x: f64, discretization: Option<usize>) -> Result<MeasureValue, MeasureError> {
        if x <= 0.0 {
            return Ok(MeasureValue::Scaled(self.clone()));
        }
        match (&self.law, discretization) {
            (DistributionSpec::Exponential { .. }, _) => Ok(MeasureValue::Scaled(ScaledDistribution {
                scale: self.scale * self.law.tail(x),
                law: self.law.clone(),
            })),
            (_, Some(n)) => Ok(MeasureValue::Atomic(self.discretize_shifted(x, n))),
            (law, None) => Err(MeasureError::NotClosedUnderShift(law.family())),
        }
    }

    /// Quantile-spaced atomic approximation of ζ(·+₀x) with `n` equal-weight atoms.
    pub fn discretize_shifted(&self, x: f64, n: usize) -> AtomicMeasure {
        let tail = self.law.tail(x.max(0.0));
        let mass = self.scale * tail;
        if n == 0 || mass <= 0.0 {
            return AtomicMeasure::zero();
        }
        let base = 1.0 - tail;
        let w = mass / n as f64;
        let atoms = (0..n).filter_map(|i| {
            let u = base + (i as f64 + 0.5) / n as f64 * tail;
            match self.law.quantile(u) {
                Extent::Finite(q) if q > x => Some((q - x.max(0.0), w)),
                _ => None,
            }
        });
        AtomicMeasure::new(atoms).expect("quantiles are finite and nonnegative")
    }
}

pub const DEFAULT_DISCRETIZATION: usize = 2048;

/// ∫_{(x,∞)} f(u − x) law(du).
pub(crate) fn shifted_expectation(law: &DistributionSpec, f: &TestFunction, x: f64) -> f64 {
    let x = x.max(0.0);
    let tail = law.tail(x);
    if tail <= 0.0 {
        return 0.0;
    }
    match (*f, law) {
        (TestFunction::Identity, _) => (law.mean_unchecked() - law.integrated_tail(x)).max(0.0),
        (TestFunction::Min(a), _) => law.integrated_tail(x + a) - law.integrated_tail(x),
        (_, DistributionSpec::Deterministic { value }) => f.eval(value - x),
        (TestFunction::Exp(k), DistributionSpec::Exponential { rate }) => tail * rate / (rate + k),
        (TestFunction::Exp(k), DistributionSpec::Hyperexponential { probs, rates }) => probs
            .iter()
            .zip(rates)
            .map(|(p, r)| p * (-r * x).exp() * r / (r + k))
            .sum(),
        (TestFunction::Exp(k), DistributionSpec::Uniform { low, high }) => {
            let a = low.max(x);
            ((-k * (a - x)).exp() - (-k * (high - x)).exp()) / (k * (high - low))
        }
        _ => {
            let density = |u: f64| law.density(u).unwrap_or(0.0);
            let integrand = |u: f64| f.eval(u - x) * density(u);
            let (lo, hi) = law.support();
            let start = lo.max(x);
            match hi {
                Extent::Finite(h) => quad::integrate(&integrand, start, h),
                Extent::Infinite => {
                    // split at the bulk so the mapped tail stays smooth
                    let mid = start + law.mean_unchecked().max(1.0);
                    quad::integrate(&integrand, start, mid) + quad::integrate_to_infinity(&integrand, mid)
                }
            }
        }
    }
}

impl Measure for ScaledDistribution {
    fn total_mass(&self) -> f64 {
        self.scale
    }

    fn first_moment(&self) -> f64 {
        self.scale * self.law.mean_unchecked()
    }

    fn cumulative_mass(&self, x: f64) -> f64 {
        self.scale * self.law.cdf(x)
    }

    fn shift_work(&self, x: f64) -> f64 {
        self.scale * self.law.integrated_tail(x)
    }

    fn shift_for_work(&self, y: f64) -> Extent {
        if self.scale == 0.0 || y <= 0.0 {
            return Extent::Finite(0.0);
        }
        self.law.integrated_tail_inverse(y / self.scale)
    }

    fn sup_support(&self) -> Extent {
        if self.scale == 0.0 {
            Extent::Finite(0.0)
        } else {
            self.law.support().1
        }
    }

    fn integrate(&self, f: &TestFunction) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        self.scale * shifted_expectation(&self.law, f, 0.0)
    }
}

/// Lazy ζ(·+₀x) of a scaled distribution, integrated without materializing the shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedView {
    pub base: ScaledDistribution,
    pub offset: f64,
}

impl ShiftedView {
    pub fn new(base: ScaledDistribution, offset: f64) -> Self {
        ShiftedView {
            base,
            offset: offset.max(0.0),
        }
    }

    pub fn discretize(&self, n: usize) -> AtomicMeasure {
        self.base.discretize_shifted(self.offset, n)
    }
}

impl Measure for ShiftedView {
    fn total_mass(&self) -> f64 {
        self.base.scale * self.base.law.tail(self.offset)
    }

    fn first_moment(&self) -> f64 {
        self.base.scale * shifted_expectation(&self.base.law, &TestFunction::Identity, self.offset)
    }

    fn cumulative_mass(&self, y: f64) -> f64 {
        let law = &self.base.law;
        self.base.scale * (law.tail(self.offset) - law.tail(self.offset + y)).max(0.0)
    }

    fn shift_work(&self, y: f64) -> f64 {
        let law = &self.base.law;
        self.base.scale * (law.integrated_tail(self.offset + y) - law.integrated_tail(self.offset)).max(0.0)
    }

    fn shift_for_work(&self, y: f64) -> Extent {
        if y <= 0.0 || self.total_mass() == 0.0 {
            return Extent::Finite(0.0);
        }
        match self.base.shift_for_work(y + self.base.shift_work(self.offset)) {
            Extent::Finite(x) => Extent::Finite((x - self.offset).max(0.0)),
            Extent::Infinite => Extent::Infinite,
        }
    }

    fn sup_support(&self) -> Extent {
        if self.total_mass() == 0.0 {
            return Extent::Finite(0.0);
        }
        match self.base.sup_support() {
            Extent::Finite(x) => Extent::Finite((x - self.offset).max(0.0)),
            Extent::Infinite => Extent::Infinite,
        }
    }

    fn integrate(&self, f: &TestFunction) -> f64 {
        self.base.scale * shifted_expectation(&self.base.law, f, self.offset)
    }
}
