use serde::{Deserialize, Serialize};

use super::MeasureError;

/// Test functions against which measures are compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// x ↦ x ∧ a
    Min(f64),
    /// x ↦ e^{−kx}
    Exp(f64),
    /// x ↦ 1/(1+x)
    Reciprocal,
    /// x ↦ x, the first-moment probe
    Identity,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Min(a) => x.min(a),
            TestFunction::Exp(k) => (-k * x).exp(),
            TestFunction::Reciprocal => 1.0 / (1.0 + x),
            TestFunction::Identity => x,
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            TestFunction::Min(a) => format!("min_{a}"),
            TestFunction::Exp(k) => format!("exp_{k}"),
            TestFunction::Reciprocal => "recip".to_string(),
            TestFunction::Identity => "id".to_string(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, TestFunction::Identity)
    }

    /// Lipschitz constant on ℝ₊.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            TestFunction::Min(_) | TestFunction::Reciprocal | TestFunction::Identity => 1.0,
            TestFunction::Exp(k) => k,
        }
    }

    fn validate(&self) -> Result<(), MeasureError> {
        let ok = match *self {
            TestFunction::Min(a) => a.is_finite() && a > 0.0,
            TestFunction::Exp(k) => k.is_finite() && k > 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(MeasureError::TestSet(format!("bad parameter in {self:?}")))
        }
    }
}

/// A fixed family of test functions containing the first-moment probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TestFunction>", into = "Vec<TestFunction>")]
pub struct TestFunctionSet {
    functions: Vec<TestFunction>,
}

impl TestFunctionSet {
    pub fn new(functions: Vec<TestFunction>) -> Result<Self, MeasureError> {
        if functions.is_empty() {
            return Err(MeasureError::TestSet("test set is empty".into()));
        }
        if !functions.contains(&TestFunction::Identity) {
            return Err(MeasureError::TestSet("test set must include the identity probe".into()));
        }
        for f in &functions {
            f.validate()?;
        }
        Ok(TestFunctionSet { functions })
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

impl Default for TestFunctionSet {
    fn default() -> Self {
        let mut functions: Vec<TestFunction> = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
            .into_iter()
            .map(TestFunction::Min)
            .collect();
        functions.extend([0.5, 1.0, 2.0].into_iter().map(TestFunction::Exp));
        functions.push(TestFunction::Reciprocal);
        functions.push(TestFunction::Identity);
        TestFunctionSet { functions }
    }
}

impl TryFrom<Vec<TestFunction>> for TestFunctionSet {
    type Error = MeasureError;

    fn try_from(functions: Vec<TestFunction>) -> Result<Self, Self::Error> {
        TestFunctionSet::new(functions)
    }
}

impl From<TestFunctionSet> for Vec<TestFunction> {
    fn from(set: TestFunctionSet) -> Self {
        set.functions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_set_shape() {
        let s = TestFunctionSet::default();
        assert_eq!(s.len(), 11);
        assert_eq!(s.functions().iter().filter(|f| !f.is_bounded()).count(), 1);
    }

    #[test]
    fn rejects_sets_without_probe() {
        assert!(TestFunctionSet::new(vec![]).is_err());
        assert!(TestFunctionSet::new(vec![TestFunction::Min(1.0)]).is_err());
        assert!(TestFunctionSet::new(vec![TestFunction::Min(-1.0), TestFunction::Identity]).is_err());
    }

    #[test]
    fn json_form() {
        let s: TestFunctionSet = serde_json::from_str(r#"[{"min": 0.5}, {"exp": 2.0}, "reciprocal", "identity"]"#).unwrap();
        assert_eq!(s.len(), 4);
        assert!(serde_json::from_str::<TestFunctionSet>(r#"[{"min": 0.5}]"#).is_err());
    }
}
