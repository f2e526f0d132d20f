use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Extent, Measure, MeasureError, TestFunction};

/// Finite measure on ℝ₊ given by a sorted list of weighted atoms.
///
/// Atoms at equal locations are merged, so the location list is strictly
/// increasing. Prefix sums over the atoms make `shift_work` and its
/// inverse `O(log n)`.
#[derive(Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    locations: Vec<f64>,
    weights: Vec<f64>,
    // over atoms strictly before index i; length n + 1
    prefix_mass: Vec<f64>,
    prefix_work: Vec<f64>,
    // F at each atom location; length n
    knot_work: Vec<f64>,
}

impl fmt::Debug for AtomicMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.locations.iter().zip(&self.weights))
            .finish()
    }
}

impl Serialize for AtomicMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.atoms())
    }
}

impl<'de> Deserialize<'de> for AtomicMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<(f64, f64)>::deserialize(d)?;
        AtomicMeasure::new(pairs).map_err(serde::de::Error::custom)
    }
}

impl AtomicMeasure {
    pub fn zero() -> Self {
        Self::from_sorted(Vec::new(), Vec::new())
    }

    pub fn dirac(location: f64) -> Self {
        Self::new([(location, 1.0)]).expect("valid dirac")
    }

    /// Builds a measure from `(location, weight)` pairs in any order.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MeasureError> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        for &(loc, w) in &atoms {
            if !(loc.is_finite() && loc >= 0.0) {
                return Err(MeasureError::Location(loc));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(MeasureError::Weight(w));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locations: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (loc, w) in atoms {
            match locations.last() {
                Some(&last) if last == loc => *weights.last_mut().unwrap() += w,
                _ => {
                    locations.push(loc);
                    weights.push(w);
                }
            }
        }
        Ok(Self::from_sorted(locations, weights))
    }

    /// Unit atoms at each location (e.g. a profile of job sizes).
    pub fn from_locations(locations: impl IntoIterator<Item = f64>) -> Result<Self, MeasureError> {
        Self::new(locations.into_iter().map(|l| (l, 1.0)))
    }

    fn from_sorted(locations: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = locations.len();
        let mut prefix_mass = Vec::with_capacity(n + 1);
        let mut prefix_work = Vec::with_capacity(n + 1);
        let (mut m, mut wk) = (0.0, 0.0);
        prefix_mass.push(0.0);
        prefix_work.push(0.0);
        for (l, w) in locations.iter().zip(&weights) {
            m += w;
            wk += w * l;
            prefix_mass.push(m);
            prefix_work.push(wk);
        }
        let total = m;
        let knot_work = locations
            .iter()
            .enumerate()
            .map(|(i, &l)| prefix_work[i] + l * (total - prefix_mass[i]))
            .collect();
        AtomicMeasure {
            locations,
            weights,
            prefix_mass,
            prefix_work,
            knot_work,
        }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Multiplies every weight by `factor`; locations are unchanged.
    pub fn scale(&self, factor: f64) -> AtomicMeasure {
        assert!(factor.is_finite() && factor >= 0.0, "scale factor {factor}");
        if factor == 0.0 {
            return Self::zero();
        }
        Self::from_sorted(
            self.locations.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }

    pub fn add(&self, other: &AtomicMeasure) -> AtomicMeasure {
        Self::new(self.atoms().chain(other.atoms())).expect("sum of valid measures")
    }

    /// ζ(·+₀x): moves atoms left by `x` and drops those at or below zero.
    pub fn shift_truncate(&self, x: f64) -> AtomicMeasure {
        if x <= 0.0 {
            return self.clone();
        }
        let first = self.locations.partition_point(|&l| l <= x);
        Self::from_sorted(
            self.locations[first..].iter().map(|l| l - x).collect(),
            self.weights[first..].to_vec(),
        )
    }

    /// Exact piecewise-linear inverse of `shift_work`. Saturates at the
    /// largest atom location; 0 for the zero measure.
    pub fn shift_for_work_exact(&self, y: f64) -> f64 {
        let n = self.len();
        if n == 0 || y <= 0.0 {
            return 0.0;
        }
        if y >= self.knot_work[n - 1] {
            return self.locations[n - 1];
        }
        // first knot whose work reaches y; F is linear with slope
        // total − prefix_mass[i] on [location[i-1], location[i]]
        let i = self.knot_work.partition_point(|&k| k < y);
        let remaining = self.prefix_mass[n] - self.prefix_mass[i];
        let x = (y - self.prefix_work[i]) / remaining;
        let lo = if i == 0 { 0.0 } else { self.locations[i - 1] };
        x.clamp(lo, self.locations[i])
    }
}

impl Measure for AtomicMeasure {
    fn total_mass(&self) -> f64 {
        self.prefix_mass[self.len()]
    }

    fn first_moment(&self) -> f64 {
        self.prefix_work[self.len()]
    }

    fn cumulative_mass(&self, x: f64) -> f64 {
        self.prefix_mass[self.locations.partition_point(|&l| l <= x)]
    }

    fn shift_work(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let i = self.locations.partition_point(|&l| l < x);
        self.prefix_work[i] + x * (self.total_mass() - self.prefix_mass[i])
    }

    fn shift_for_work(&self, y: f64) -> Extent {
        Extent::Finite(self.shift_for_work_exact(y))
    }

    fn sup_support(&self) -> Extent {
        Extent::Finite(self.locations.last().copied().unwrap_or(0.0))
    }

    fn integrate(&self, f: &TestFunction) -> f64 {
        match f {
            TestFunction::Identity => self.first_moment(),
            TestFunction::Min(a) => self.shift_work(*a),
            _ => self.atoms().map(|(l, w)| w * f.eval(l)).sum(),
        }
    }
}
