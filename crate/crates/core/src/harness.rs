//! Fluid-scale convergence experiments.
//!
//! For each scale r the r-th system starts with ⌊r·z₀⌋ jobs and runs to
//! r·max(grid). Its fluid-scaled state σ̄ʳ(t) = r⁻¹σʳ(rt) (weights scaled,
//! locations untouched) is compared with the fluid path over a test set.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fluid::{fluid_state, residue, FluidError, FluidParams};
use crate::measure::{discrepancy, AtomicMeasure, Measure, MeasureValue, TestFunctionSet};
use crate::primitives::{DistributionSpec, InitialConditionSpec, PrimitiveError, RenewalSpec, SeedProtocol};
use crate::sim::{self, InitialBatch, SimConfig, SimError, Trace};

pub const TOOL_VERSION: &str = concat!("gps ", env!("CARGO_PKG_VERSION"));

/// Default exclusion radius around multiples of w, as a fraction of w.
pub const DEFAULT_EXCLUSION_FRACTION: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid scaling config: {0}")]
    Config(String),
    #[error("replication with seed {seed} failed: {source}")]
    Replication { seed: u64, source: SimError },
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
    #[error("fluid time {t} at scale {r} exceeds the simulated horizon {horizon}")]
    HorizonOverflow { r: f64, t: f64, horizon: f64 },
    #[error("convergence check needs at least two scales, got {0}")]
    InsufficientScales(usize),
}

/// Which fluid path a replication is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluidReference {
    /// ξ = z₀·ξ₀ for every replication.
    #[default]
    Idealized,
    /// ξ = the replication's own scaled initial batch.
    PerReplication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub scales: Vec<f64>,
    pub replications: usize,
    pub arrivals: RenewalSpec,
    pub service: DistributionSpec,
    pub initial: InitialConditionSpec,
    pub fluid: FluidParams,
    #[serde(default)]
    pub reference: FluidReference,
    /// Fluid-scale times.
    pub grid: Vec<f64>,
    /// Defaults to 0.05·w.
    pub exclusion_radius: Option<f64>,
    #[serde(default)]
    pub include_excluded: bool,
    pub test_set: TestFunctionSet,
    pub seed: u64,
}

impl ScalingConfig {
    /// Sweep whose fluid reference is the idealized limit of the given primitives.
    pub fn idealized(
        scales: Vec<f64>,
        replications: usize,
        arrivals: RenewalSpec,
        service: DistributionSpec,
        initial: InitialConditionSpec,
        grid: Vec<f64>,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let alpha = arrivals.rate()?;
        let xi = if initial.z0 == 0.0 {
            MeasureValue::zero()
        } else {
            MeasureValue::Scaled(
                crate::measure::ScaledDistribution::new(initial.z0, initial.law.clone())
                    .map_err(FluidError::from)?,
            )
        };
        let fluid = FluidParams::new(alpha, service.clone(), xi)?;
        Ok(ScalingConfig {
            scales,
            replications,
            arrivals,
            service,
            initial,
            fluid,
            reference: FluidReference::Idealized,
            grid,
            exclusion_radius: None,
            include_excluded: false,
            test_set: TestFunctionSet::default(),
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.scales.is_empty() {
            return Err(HarnessError::Config("no scales".into()));
        }
        if self.scales.iter().any(|&r| !(r.is_finite() && r >= 1.0)) {
            return Err(HarnessError::Config("scales must be finite and >= 1".into()));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config("scales must be strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.grid.is_empty() || self.grid.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
            return Err(HarnessError::Config("grid must be a nonempty list of finite times >= 0".into()));
        }
        if self.grid.iter().all(|&t| t == 0.0) {
            return Err(HarnessError::Config("grid must reach past t = 0".into()));
        }
        if let Some(e) = self.exclusion_radius {
            if !(e.is_finite() && e >= 0.0) {
                return Err(HarnessError::Config(format!("exclusion radius {e} must be >= 0")));
            }
        }
        self.arrivals.validate()?;
        self.service.validate().map_err(PrimitiveError::from)?;
        self.initial.validate()?;
        Ok(())
    }

    pub fn exclusion(&self) -> f64 {
        self.exclusion_radius
            .unwrap_or(DEFAULT_EXCLUSION_FRACTION * self.fluid.w())
    }

    /// Whether `t` is scored: away from the jumps of the fluid path at multiples of w.
    pub fn is_kept(&self, t: f64) -> bool {
        if self.include_excluded {
            return true;
        }
        let w = self.fluid.w();
        let eps = self.exclusion();
        if w <= 0.0 || eps <= 0.0 {
            return true;
        }
        let res = residue(t, w);
        res >= eps && w - res >= eps
    }

    pub fn kept_grid(&self) -> Vec<f64> {
        self.grid.iter().copied().filter(|&t| self.is_kept(t)).collect()
    }

    pub fn fluid_horizon(&self) -> f64 {
        self.grid.iter().copied().fold(0.0, f64::max)
    }

    /// Labels describing how the configuration relates to the limit theorem.
    pub fn labels(&self) -> Vec<String> {
        let mut labels = Vec::new();
        let critical = self
            .arrivals
            .rate()
            .ok()
            .zip(self.service.mean().ok())
            .is_some_and(|(a, m)| (a * m - 1.0).abs() <= crate::fluid::CRITICALITY_TOL);
        if !critical || !self.fluid.is_critical() {
            labels.push("not-critical".to_string());
        }
        if !critical || !self.fluid.within_theorem() || self.service.has_atoms() || self.initial.law.has_atoms() && self.initial.z0 > 0.0 {
            labels.push("outside-theorem".to_string());
        }
        labels
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }

    /// Seed for replication `rep` at scale index `scale_idx`.
    pub fn replication_seed(&self, scale_idx: usize, rep: usize) -> u64 {
        SeedProtocol::new(self.seed)
            .derive(scale_idx as u64, "scale")
            .child(rep as u64, "replication")
    }

    pub fn sim_config(&self, r: f64, seed: u64) -> SimConfig {
        SimConfig {
            arrivals: self.arrivals.clone(),
            service: self.service.clone(),
            initial: InitialBatch::Sampled {
                spec: self.initial.clone(),
                scale: r,
            },
            horizon: r * self.fluid_horizon(),
            snapshot_grid: Vec::new(),
            seed,
        }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Fluid-scaled state (σ̄ʳ(t), μ̄ʳ(t), W̄ʳ(t)).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState {
    pub sigma: AtomicMeasure,
    pub mu: AtomicMeasure,
    pub workload: f64,
}

pub fn scaled_snapshot(trace: &Trace, r: f64, t: f64) -> Result<ScaledState, HarnessError> {
    let time = r * t;
    if time > trace.horizon {
        return Err(HarnessError::HorizonOverflow {
            r,
            t,
            horizon: trace.horizon,
        });
    }
    let s = trace
        .snapshot(time)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(ScaledState {
        sigma: s.sigma.scale(1.0 / r),
        mu: s.mu.scale(1.0 / r),
        workload: s.workload / r,
    })
}

/// β̄ʳ_k = r⁻¹βʳ_k.
pub fn scaled_batch_starts(trace: &Trace, r: f64) -> Vec<f64> {
    trace.batches.iter().map(|b| b.start / r).collect()
}

#[derive(Debug, Clone)]
struct ReplicationResult {
    // [kept t][f] absolute errors
    sigma_err: Vec<Vec<f64>>,
    mu_err: Vec<Vec<f64>>,
    // per kept t
    disc: Vec<(f64, f64)>,
    // per grid t
    workload_err: Vec<f64>,
    jobs: usize,
}

fn run_replication(cfg: &ScalingConfig, r: f64, seed: u64, kept: &[f64]) -> Result<ReplicationResult, HarnessError> {
    let sim_cfg = cfg.sim_config(r, seed);
    let trace = sim::run(&sim_cfg).map_err(|source| HarnessError::Replication { seed, source })?;
    let fluid = match cfg.reference {
        FluidReference::Idealized => cfg.fluid.clone(),
        FluidReference::PerReplication => {
            let xi = trace.snapshot(0.0).map_err(|source| HarnessError::Replication { seed, source })?;
            FluidParams::new(cfg.fluid.alpha, cfg.fluid.nu.clone(), MeasureValue::Atomic(xi.sigma.scale(1.0 / r)))?
        }
    };
    let fs = cfg.test_set.functions();
    let mut result = ReplicationResult {
        sigma_err: Vec::with_capacity(kept.len()),
        mu_err: Vec::with_capacity(kept.len()),
        disc: Vec::with_capacity(kept.len()),
        workload_err: Vec::with_capacity(cfg.grid.len()),
        jobs: trace.jobs.len(),
    };
    for &t in kept {
        let scaled = scaled_snapshot(&trace, r, t)?;
        let limit = fluid_state(&fluid, t);
        result
            .sigma_err
            .push(fs.iter().map(|f| (scaled.sigma.integrate(f) - limit.sigma.integrate(f)).abs()).collect());
        result
            .mu_err
            .push(fs.iter().map(|f| (scaled.mu.integrate(f) - limit.mu.integrate(f)).abs()).collect());
        result.disc.push((
            discrepancy(&scaled.sigma, &limit.sigma, &cfg.test_set),
            discrepancy(&scaled.mu, &limit.mu, &cfg.test_set),
        ));
    }
    for &t in &cfg.grid {
        let scaled = scaled_snapshot(&trace, r, t)?;
        result.workload_err.push((scaled.workload - fluid.w()).abs());
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSummary {
    pub r: f64,
    pub seeds: Vec<u64>,
    /// D(r): mean over replications and kept grid of the σ plus μ discrepancies.
    pub aggregate_discrepancy: f64,
    pub sigma_discrepancy: f64,
    pub mu_discrepancy: f64,
    /// max over the grid of the replication-mean |W̄ʳ(t) − w|.
    pub workload_sup_error: f64,
    /// max over the grid and replications of |W̄ʳ(t) − w|.
    pub workload_sup_error_max: f64,
    pub mean_jobs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub r: f64,
    pub t: f64,
    pub path: &'static str,
    pub f: String,
    pub mean_abs_err: f64,
    pub max_abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub tool_version: String,
    pub config_hash: String,
    pub config: ScalingConfig,
    pub labels: Vec<String>,
    pub w: f64,
    pub exclusion_radius: f64,
    pub kept_grid: Vec<f64>,
    pub scales: Vec<ScaleSummary>,
    pub table: Vec<ErrorRow>,
    pub timing: Timing,
}

impl ConvergenceReport {
    pub fn discrepancies(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s.aggregate_discrepancy).collect()
    }

    /// The report as JSON without the wall-clock section.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        v
    }
}

fn summarize(cfg: &ScalingConfig, r: f64, seeds: Vec<u64>, kept: &[f64], reps: &[ReplicationResult]) -> (ScaleSummary, Vec<ErrorRow>) {
    let n = reps.len() as f64;
    let cells = (reps.len() * kept.len()).max(1) as f64;
    let sigma_d: f64 = reps.iter().flat_map(|x| x.disc.iter().map(|d| d.0)).sum::<f64>() / cells;
    let mu_d: f64 = reps.iter().flat_map(|x| x.disc.iter().map(|d| d.1)).sum::<f64>() / cells;
    let mut sup_mean: f64 = 0.0;
    let mut sup_max: f64 = 0.0;
    for i in 0..cfg.grid.len() {
        let errs = reps.iter().map(|x| x.workload_err[i]);
        sup_mean = sup_mean.max(errs.clone().sum::<f64>() / n);
        sup_max = sup_max.max(errs.fold(0.0, f64::max));
    }
    let mut rows = Vec::new();
    for (ti, &t) in kept.iter().enumerate() {
        for (path, pick) in [("sigma", 0), ("mu", 1)] {
            for (fi, f) in cfg.test_set.functions().iter().enumerate() {
                let errs = reps.iter().map(|x| if pick == 0 { x.sigma_err[ti][fi] } else { x.mu_err[ti][fi] });
                rows.push(ErrorRow {
                    r,
                    t,
                    path,
                    f: f.tag(),
                    mean_abs_err: errs.clone().sum::<f64>() / n,
                    max_abs_err: errs.fold(0.0, f64::max),
                });
            }
        }
    }
    let summary = ScaleSummary {
        r,
        seeds,
        aggregate_discrepancy: sigma_d + mu_d,
        sigma_discrepancy: sigma_d,
        mu_discrepancy: mu_d,
        workload_sup_error: sup_mean,
        workload_sup_error_max: sup_max,
        mean_jobs: reps.iter().map(|x| x.jobs as f64).sum::<f64>() / n,
    };
    (summary, rows)
}

/// Runs every (scale, replication) pair and folds the results in a fixed order.
pub fn run_sweep(cfg: &ScalingConfig) -> Result<ConvergenceReport, HarnessError> {
    cfg.validate()?;
    let started = Instant::now();
    let kept = cfg.kept_grid();
    let labels = cfg.labels();
    if labels.iter().any(|l| l == "outside-theorem") {
        log::warn!("sweep configuration is outside the limit theorem's hypotheses: {labels:?}");
    }
    let mut scales = Vec::with_capacity(cfg.scales.len());
    let mut table = Vec::new();
    for (si, &r) in cfg.scales.iter().enumerate() {
        let seeds: Vec<u64> = (0..cfg.replications).map(|i| cfg.replication_seed(si, i)).collect();
        let reps = seeds
            .par_iter()
            .map(|&seed| run_replication(cfg, r, seed, &kept))
            .collect::<Result<Vec<_>, _>>()?;
        let (summary, rows) = summarize(cfg, r, seeds, &kept, &reps);
        log::info!("r = {r}: D = {:.6}, workload sup-error = {:.6}", summary.aggregate_discrepancy, summary.workload_sup_error);
        scales.push(summary);
        table.extend(rows);
    }
    Ok(ConvergenceReport {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        labels,
        w: cfg.fluid.w(),
        exclusion_radius: if cfg.include_excluded { 0.0 } else { cfg.exclusion() },
        kept_grid: kept,
        scales,
        table,
        timing: Timing {
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    /// D(r_max) ≤ factor · D(r_min).
    pub halving_factor: f64,
    /// D(r_{i+1}) ≤ (1 + slack) · D(r_i).
    pub monotone_slack: f64,
    /// Bound on the scaled-workload sup-error at r_max.
    pub workload_bound: Option<f64>,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        ConvergenceRule {
            halving_factor: 0.5,
            monotone_slack: 0.1,
            workload_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub narrative: Vec<String>,
}

pub fn check_convergence(report: &ConvergenceReport, rule: &ConvergenceRule) -> Result<CheckOutcome, HarnessError> {
    check_scales(&report.scales, rule)
}

pub fn check_scales(scales: &[ScaleSummary], rule: &ConvergenceRule) -> Result<CheckOutcome, HarnessError> {
    if scales.len() < 2 {
        return Err(HarnessError::InsufficientScales(scales.len()));
    }
    let mut narrative = Vec::new();
    let mut passed = true;
    let first = &scales[0];
    let last = &scales[scales.len() - 1];
    let ratio_ok = last.aggregate_discrepancy <= rule.halving_factor * first.aggregate_discrepancy;
    narrative.push(format!(
        "{}: D({}) = {:.6} vs {} x D({}) = {:.6}",
        if ratio_ok { "PASS" } else { "FAIL" },
        last.r,
        last.aggregate_discrepancy,
        rule.halving_factor,
        first.r,
        rule.halving_factor * first.aggregate_discrepancy
    ));
    passed &= ratio_ok;
    for pair in scales.windows(2) {
        let ok = pair[1].aggregate_discrepancy <= (1.0 + rule.monotone_slack) * pair[0].aggregate_discrepancy;
        narrative.push(format!(
            "{}: D({}) = {:.6} <= (1 + {}) x D({}) = {:.6}",
            if ok { "PASS" } else { "FAIL" },
            pair[1].r,
            pair[1].aggregate_discrepancy,
            rule.monotone_slack,
            pair[0].r,
            pair[0].aggregate_discrepancy
        ));
        passed &= ok;
    }
    if let Some(bound) = rule.workload_bound {
        let ok = last.workload_sup_error < bound;
        narrative.push(format!(
            "{}: workload sup-error at r = {} is {:.6} (bound {bound})",
            if ok { "PASS" } else { "FAIL" },
            last.r,
            last.workload_sup_error
        ));
        passed &= ok;
    }
    Ok(CheckOutcome { passed, narrative })
}

/// Long-form rows (r, t, path, f, mean, max) grouped by scale.
pub fn table_by_scale(report: &ConvergenceReport) -> BTreeMap<String, Vec<&ErrorRow>> {
    let mut out: BTreeMap<String, Vec<&ErrorRow>> = BTreeMap::new();
    for row in &report.table {
        out.entry(row.r.to_string()).or_default().push(row);
    }
    out
}
