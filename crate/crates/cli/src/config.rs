//! Run configuration file. Every model parameter lives here; unknown keys
//! anywhere in the file are rejected.

use serde::Deserialize;
use serde_json::{json, Map, Value};

use gps_core::fluid::FluidParams;
use gps_core::harness::{hex_digest, ConvergenceRule, FluidReference, ScalingConfig};
use gps_core::measure::{AtomicMeasure, MeasureValue, ScaledDistribution, TestFunctionSet};
use gps_core::primitives::{Delay, DistributionSpec, InitialConditionSpec, RenewalSpec};
use gps_core::sim::{InitialBatch, SimConfig};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct SchemaError(pub String);

fn schema<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> SchemaError + '_ {
    move |e| SchemaError(format!("{what}: {e}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaw {
    family: String,
    params: Map<String, Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArrivals {
    family: String,
    params: Map<String, Value>,
    #[serde(default)]
    delay: Delay,
}

/// `{z0, family, params}` or `{atoms: [[loc, weight], ...]}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    z0: Option<f64>,
    family: Option<String>,
    params: Option<Map<String, Value>>,
    atoms: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFluid {
    alpha: f64,
    nu: RawLaw,
    xi: Option<RawInitial>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    List(Vec<f64>),
    Range(RawRange),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    halving_factor: Option<f64>,
    monotone_slack: Option<f64>,
    workload_bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    arrivals: RawArrivals,
    service: RawLaw,
    initial: Option<RawInitial>,
    horizon: Option<f64>,
    grid: Option<RawGrid>,
    seed: u64,
    scales: Option<Vec<f64>>,
    replications: Option<usize>,
    fluid: Option<RawFluid>,
    exclusion_radius: Option<f64>,
    #[serde(default)]
    include_excluded: bool,
    #[serde(default)]
    reference: FluidReference,
    test_set: Option<TestFunctionSet>,
    rule: Option<RawRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Law(InitialConditionSpec),
    Atoms(AtomicMeasure),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub arrivals: RenewalSpec,
    pub service: DistributionSpec,
    pub initial: Initial,
    pub horizon: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub seed: u64,
    pub scales: Option<Vec<f64>>,
    pub replications: Option<usize>,
    pub fluid: Option<FluidParams>,
    pub exclusion_radius: Option<f64>,
    pub include_excluded: bool,
    pub reference: FluidReference,
    pub test_set: TestFunctionSet,
    pub rule: ConvergenceRule,
    /// SHA-256 of the file bytes, plus the seed override when one applies.
    pub hash: String,
}

fn law(family: String, params: Map<String, Value>) -> Result<DistributionSpec, SchemaError> {
    let what = format!("distribution `{family}`");
    serde_json::from_value(json!({ "family": family, "params": params })).map_err(|e| SchemaError(format!("{what}: {e}")))
}

fn parse_initial(raw: RawInitial, what: &str) -> Result<Initial, SchemaError> {
    match raw {
        RawInitial {
            atoms: Some(atoms),
            z0: None,
            family: None,
            params: None,
        } => AtomicMeasure::new(atoms).map(Initial::Atoms).map_err(schema(what)),
        RawInitial {
            atoms: None,
            z0: Some(z0),
            family: Some(family),
            params: Some(params),
        } => {
            let spec = InitialConditionSpec { z0, law: law(family, params)? };
            spec.validate().map_err(schema(what))?;
            Ok(Initial::Law(spec))
        }
        _ => Err(SchemaError(format!(
            "{what}: expected either {{z0, family, params}} or {{atoms}}"
        ))),
    }
}

fn grid(raw: RawGrid) -> Result<Vec<f64>, SchemaError> {
    let points = match raw {
        RawGrid::List(v) => v,
        RawGrid::Range(RawRange { start, stop, step }) => {
            if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite() && stop >= start) {
                return Err(SchemaError("grid: need finite start <= stop and step > 0".into()));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
    };
    if points.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(SchemaError("grid: times must be finite and >= 0".into()));
    }
    Ok(points)
}

impl Initial {
    fn to_measure(&self) -> Result<MeasureValue, SchemaError> {
        Ok(match self {
            Initial::Atoms(a) => MeasureValue::Atomic(a.clone()),
            Initial::Law(spec) if spec.z0 == 0.0 => MeasureValue::zero(),
            Initial::Law(spec) => MeasureValue::Scaled(
                ScaledDistribution::new(spec.z0, spec.law.clone()).map_err(schema("initial"))?,
            ),
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str, seed_override: Option<u64>) -> Result<RunConfig, SchemaError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(schema("config"))?;
        let arrivals = RenewalSpec::new(law(raw.arrivals.family, raw.arrivals.params)?, raw.arrivals.delay);
        arrivals.validate().map_err(schema("arrivals"))?;
        let service = law(raw.service.family, raw.service.params)?;
        let initial = match raw.initial {
            Some(i) => parse_initial(i, "initial")?,
            None => Initial::Law(InitialConditionSpec::empty()),
        };
        if let Some(h) = raw.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(SchemaError(format!("horizon {h} must be finite and > 0")));
            }
        }
        let fluid = match raw.fluid {
            None => None,
            Some(f) => {
                let nu = law(f.nu.family, f.nu.params)?;
                let xi = match f.xi {
                    Some(x) => parse_initial(x, "fluid.xi")?.to_measure()?,
                    None => initial.to_measure()?,
                };
                Some(FluidParams::new(f.alpha, nu, xi).map_err(schema("fluid"))?)
            }
        };
        let defaults = ConvergenceRule::default();
        let rule = match raw.rule {
            None => defaults,
            Some(r) => ConvergenceRule {
                halving_factor: r.halving_factor.unwrap_or(defaults.halving_factor),
                monotone_slack: r.monotone_slack.unwrap_or(defaults.monotone_slack),
                workload_bound: r.workload_bound,
            },
        };
        let mut hash_input = text.as_bytes().to_vec();
        let seed = match seed_override {
            Some(s) => {
                hash_input.extend_from_slice(format!("\nseed_override={s}").as_bytes());
                s
            }
            None => raw.seed,
        };
        Ok(RunConfig {
            arrivals,
            service,
            initial,
            horizon: raw.horizon,
            grid: raw.grid.map(grid).transpose()?,
            seed,
            scales: raw.scales,
            replications: raw.replications,
            fluid,
            exclusion_radius: raw.exclusion_radius,
            include_excluded: raw.include_excluded,
            reference: raw.reference,
            test_set: raw.test_set.unwrap_or_default(),
            rule,
            hash: hex_digest(&hash_input),
        })
    }

    /// Settings for one simulated path; atom weights must be whole job counts.
    pub fn sim_config(&self) -> Result<SimConfig, SchemaError> {
        let horizon = self.horizon.ok_or_else(|| SchemaError("simulate needs `horizon`".into()))?;
        let initial = match &self.initial {
            Initial::Law(spec) => InitialBatch::Sampled {
                spec: spec.clone(),
                scale: 1.0,
            },
            Initial::Atoms(a) => {
                let mut sizes = Vec::new();
                for (loc, weight) in a.atoms() {
                    if weight.fract() != 0.0 {
                        return Err(SchemaError(format!(
                            "initial atom at {loc} has weight {weight}; simulation needs whole job counts"
                        )));
                    }
                    sizes.extend(std::iter::repeat_n(loc, weight as usize));
                }
                InitialBatch::Sizes(sizes)
            }
        };
        let grid = match &self.grid {
            Some(g) => g.clone(),
            None => (0..=100).map(|i| horizon * i as f64 / 100.0).collect(),
        };
        if let Some(t) = grid.iter().find(|&&t| t > horizon) {
            return Err(SchemaError(format!("grid time {t} exceeds horizon {horizon}")));
        }
        Ok(SimConfig {
            arrivals: self.arrivals.clone(),
            service: self.service.clone(),
            initial,
            horizon,
            snapshot_grid: grid,
            seed: self.seed,
        })
    }

    /// The configured fluid model, or the idealized limit of the primitives.
    pub fn fluid_params(&self) -> Result<FluidParams, SchemaError> {
        if let Some(f) = &self.fluid {
            return Ok(f.clone());
        }
        let alpha = self.arrivals.rate().map_err(schema("arrivals"))?;
        FluidParams::new(alpha, self.service.clone(), self.initial.to_measure()?).map_err(schema("fluid"))
    }

    pub fn grid(&self, command: &str) -> Result<&[f64], SchemaError> {
        self.grid
            .as_deref()
            .filter(|g| !g.is_empty())
            .ok_or_else(|| SchemaError(format!("{command} needs a nonempty `grid`")))
    }

    pub fn scaling_config(&self) -> Result<ScalingConfig, SchemaError> {
        let scales = self.scales.clone().ok_or_else(|| SchemaError("converge needs `scales`".into()))?;
        if scales.len() < 2 {
            return Err(SchemaError(format!("converge needs at least two scales, got {}", scales.len())));
        }
        let Initial::Law(initial) = &self.initial else {
            return Err(SchemaError("converge needs `initial` as {z0, family, params}".into()));
        };
        let cfg = ScalingConfig {
            scales,
            replications: self.replications.unwrap_or(20),
            arrivals: self.arrivals.clone(),
            service: self.service.clone(),
            initial: initial.clone(),
            fluid: self.fluid_params()?,
            reference: self.reference,
            grid: self.grid("converge")?.to_vec(),
            exclusion_radius: self.exclusion_radius,
            include_excluded: self.include_excluded,
            test_set: self.test_set.clone(),
            seed: self.seed,
        };
        cfg.validate().map_err(schema("converge"))?;
        Ok(cfg)
    }
}
