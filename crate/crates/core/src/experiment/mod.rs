//! Sweeps over (dimension, step size, metric) cells: stationary bias
//! estimation against the target, theory bounds and log-log slope fits.

mod harvest;
mod output;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use harvest::{BiasRoute, ReferenceKind};
pub use output::{format_float, write_csv, CSV_HEADER};
pub(crate) use output::{csv_error, csv_writer};

use crate::bounds::{
    estimate_m_quantities, prop10_constants, prop4_constants, thm11_bound, thm5_bound, ContractionInput, Convergence,
    MIN_SAMPLES,
};
use crate::error::{Error, Result};
use crate::metrics::{gaussian_w_metric, MetricSpec};
use crate::model::{MarginalSampler, ModelSpec, TargetModel};
use crate::parallel::map_indexed;
use crate::sampler::{leapfrog_count, mix64, KernelKind, KernelSpec, Purpose, RngStream, DEFAULT_GAMMA_CAP};
use crate::stats::{batch_means, geyer_ess, least_squares, Estimate, BATCHES};

pub const DEFAULT_SAMPLES: usize = 10_000;
/// Default cap on `transitions x gradient evaluations x d` per cell.
pub const DEFAULT_BUDGET: f64 = 5e9;
/// Default cap on `retained samples x d` per cell.
pub const DEFAULT_MAX_POOLED: usize = 10_000_000;
pub const DEFAULT_DIRECTIONS: usize = 64;
/// Smallest number of retained samples per replica.
pub const MIN_CELL_SAMPLES: usize = 4 * BATCHES;
/// A fit with a smaller coefficient of determination carries a warning.
pub const R_SQUARED_WARNING: f64 = 0.98;
/// Step-size ratio between a chain and the fine chain used as its
/// reference when no exact sampler exists.
pub const REFERENCE_REFINEMENT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelChoice {
    pub kind: KernelKind,
    /// Integration time per HMC transition.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice {
            kind: KernelKind::Ula,
            duration: None,
        }
    }
}

impl KernelChoice {
    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.duration) {
            (KernelKind::Ula | KernelKind::TamedUla, None) => Ok(()),
            (KernelKind::Ula | KernelKind::TamedUla, Some(_)) => {
                Err(Error::Config(format!("kernel {} takes no integration time T", self.kind)))
            }
            (KernelKind::Uhmc, Some(t)) if t > 0.0 && t.is_finite() => Ok(()),
            (KernelKind::Uhmc, _) => Err(Error::Config("kernel uhmc needs a positive integration time T".into())),
            (k, _) => Err(Error::Config(format!("kernel {k} cannot be swept; use ula, tamed-ula or uhmc"))),
        }
    }

    pub fn build(&self, model: TargetModel, gamma: f64, gamma_cap: f64) -> Result<KernelSpec> {
        KernelSpec::new(self.kind, model, Some(gamma), self.duration, gamma_cap)
    }

    pub fn label(&self) -> String {
        match self.duration {
            Some(t) => format!("{}(T={t})", self.kind),
            None => self.kind.to_string(),
        }
    }
}

fn default_metrics() -> Vec<MetricSpec> {
    vec![MetricSpec {
        p: 2.0,
        base: crate::metrics::BaseMetric::Euclidean,
        equivalence_m: None,
    }]
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_one() -> usize {
    1
}
fn default_cap() -> f64 {
    DEFAULT_GAMMA_CAP
}
fn default_budget() -> f64 {
    DEFAULT_BUDGET
}
fn default_pooled() -> usize {
    DEFAULT_MAX_POOLED
}
fn default_directions() -> usize {
    DEFAULT_DIRECTIONS
}

/// Half-widths of the acceptance windows around the expected slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeWindows {
    pub gamma: f64,
    pub gamma_hmc: f64,
    pub dimension: f64,
}

impl Default for SlopeWindows {
    fn default() -> Self {
        SlopeWindows {
            gamma: 0.1,
            gamma_hmc: 0.15,
            dimension: 0.05,
        }
    }
}

/// One sweep: the cartesian product of `dims x gammas`, each cell scored
/// under every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub model: ModelSpec,
    pub dims: Vec<usize>,
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricSpec>,
    /// Retained samples per cell, before the pooled-size cap.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Independent chains per cell; the samples are split evenly.
    #[serde(default = "default_one")]
    pub replicas: usize,
    /// Transitions discarded per replica; derived from the contraction
    /// rate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default = "default_cap")]
    pub gamma_cap: f64,
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default = "default_pooled")]
    pub max_pooled: usize,
    #[serde(default = "default_directions")]
    pub sliced_directions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Contraction of the Euler chain, `(A, c)` or a profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionInput>,
    /// One-transition contraction of unadjusted HMC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc_c: Option<f64>,
    #[serde(default)]
    pub slope_windows: SlopeWindows,
    /// Fill the wall-time column; off by default so output is reproducible
    /// byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl SweepSpec {
    /// A spec with defaults for everything but the axes.
    pub fn new(model: ModelSpec, dims: Vec<usize>, gammas: Vec<f64>, kernel: KernelChoice) -> Self {
        SweepSpec {
            model,
            dims,
            gammas,
            kernel,
            metrics: default_metrics(),
            samples: DEFAULT_SAMPLES,
            replicas: 1,
            burn_in: None,
            gamma_cap: DEFAULT_GAMMA_CAP,
            budget: DEFAULT_BUDGET,
            max_pooled: DEFAULT_MAX_POOLED,
            sliced_directions: DEFAULT_DIRECTIONS,
            seed: 0,
            contraction: None,
            hmc_c: None,
            slope_windows: SlopeWindows::default(),
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    /// Validates the spec and lays out the cells in key order.
    pub fn plan(&self) -> Result<Vec<CellPlan>> {
        let cfg = |m: String| Error::Config(m);
        if self.dims.is_empty() {
            return Err(cfg("dimension list is empty".into()));
        }
        if self.gammas.is_empty() {
            return Err(cfg("gamma list is empty".into()));
        }
        if self.metrics.is_empty() {
            return Err(cfg("metric list is empty".into()));
        }
        for m in &self.metrics {
            m.validate().map_err(|e| cfg(e.to_string()))?;
        }
        self.kernel.validate()?;
        if !(self.gamma_cap > 0.0) {
            return Err(cfg("gamma_cap must be positive".into()));
        }
        for &g in &self.gammas {
            if !(g > 0.0 && g <= self.gamma_cap) {
                return Err(cfg(format!("gamma {g} must lie in (0, {}]", self.gamma_cap)));
            }
        }
        if self.replicas == 0 {
            return Err(cfg("replicas must be at least 1".into()));
        }
        if self.sliced_directions < crate::metrics::MIN_DIRECTIONS {
            return Err(cfg(format!(
                "sliced_directions must be at least {}",
                crate::metrics::MIN_DIRECTIONS
            )));
        }
        if let Some(c) = &self.contraction {
            c.resolve()?;
        }
        if let Some(c) = self.hmc_c {
            if !(c > 0.0 && c <= 1.0) {
                return Err(cfg(format!("hmc_c must lie in (0, 1], got {c}")));
            }
        }
        let mut dims = self.dims.clone();
        dims.sort_unstable();
        dims.dedup();
        let mut gammas = self.gammas.clone();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        let mut plans = Vec::with_capacity(dims.len() * gammas.len());
        for &d in &dims {
            let model = self.model.build(d).map_err(|e| cfg(e.to_string()))?;
            for &gamma in &gammas {
                plans.push(self.plan_cell(&model, d, gamma)?);
            }
        }
        Ok(plans)
    }

    fn plan_cell(&self, model: &TargetModel, d: usize, gamma: f64) -> Result<CellPlan> {
        let cfg = |m: String| Error::Config(m);
        let kernel = self
            .kernel
            .build(model.clone(), gamma, self.gamma_cap)
            .map_err(|e| cfg(e.to_string()))?;
        let h = kernel.time_per_transition();
        let reference = if model.gaussian_variance().is_some() {
            ReferenceKind::CoupledExact
        } else if model.marginal().is_some() {
            ReferenceKind::ExactMarginal
        } else {
            ReferenceKind::FineChain
        };
        let fine_kernel = match reference {
            ReferenceKind::FineChain => Some(
                self.kernel
                    .build(model.clone(), gamma / REFERENCE_REFINEMENT as f64, self.gamma_cap)
                    .map_err(|e| cfg(e.to_string()))?,
            ),
            _ => None,
        };
        let burn_in = match self.burn_in {
            Some(b) => b,
            None => {
                let rate = default_contraction(self, &kernel)?.map(|c| c.per_unit_time);
                let rate = rate.ok_or_else(|| {
                    cfg(format!(
                        "cell d={d}, gamma={gamma}: no contraction rate known for {}; set `burn_in` or `contraction`",
                        model.name()
                    ))
                })?;
                (10.0 / (rate * h)).ceil() as usize
            }
        };
        let thin = (1.0 / h).ceil().max(1.0) as usize;
        let cap = (self.max_pooled / d).max(1);
        let n_samples = self.samples.min(cap);
        if n_samples / self.replicas < MIN_CELL_SAMPLES {
            return Err(cfg(format!(
                "cell d={d}: {n_samples} retained samples over {} replicas is below {MIN_CELL_SAMPLES} per replica",
                self.replicas
            )));
        }
        let grads = match self.kernel.kind {
            KernelKind::Uhmc => leapfrog_count(self.kernel.duration.unwrap_or_default(), gamma)? as f64,
            _ => 1.0,
        };
        let factor = match reference {
            ReferenceKind::CoupledExact => 2.0,
            ReferenceKind::ExactMarginal => 1.0,
            ReferenceKind::FineChain => 1.0 + REFERENCE_REFINEMENT as f64,
        };
        let transitions = (self.replicas * burn_in + n_samples * thin) as f64;
        let work = transitions * grads * d as f64 * factor;
        if work > self.budget {
            return Err(cfg(format!(
                "cell d={d}, gamma={gamma} needs {work:.3e} units of work, above the budget {:.3e}",
                self.budget
            )));
        }
        Ok(CellPlan {
            d,
            gamma,
            kernel,
            fine_kernel,
            reference,
            burn_in,
            thin,
            n_samples,
            replicas: self.replicas,
        })
    }
}

/// A validated cell.
#[derive(Debug, Clone)]
pub struct CellPlan {
    pub d: usize,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub(crate) fine_kernel: Option<KernelSpec>,
    pub reference: ReferenceKind,
    pub burn_in: usize,
    pub thin: usize,
    pub n_samples: usize,
    pub replicas: usize,
}

impl CellPlan {
    fn replica_counts(&self) -> Vec<usize> {
        let base = self.n_samples / self.replicas;
        let extra = self.n_samples % self.replicas;
        (0..self.replicas).map(|r| base + usize::from(r < extra)).collect()
    }

    /// Stream of this cell, a function of the seed, `d` and `gamma` only.
    pub fn stream(&self, seed: u64) -> RngStream {
        RngStream::derive(seed, mix64(self.d as u64, self.gamma.to_bits(), 0), Purpose::Chain)
    }
}

/// A contraction assumption with its rate per unit time.
#[derive(Debug, Clone)]
struct Contraction {
    convergence: Option<Convergence>,
    hmc_c: Option<f64>,
    per_unit_time: f64,
}

/// One-transition contraction factor of unadjusted HMC on `N(0, v I)`
/// under a shared momentum: `|cos(N theta)|` with
/// `cos theta = 1 - gamma^2 / (2 v)`.
pub fn gaussian_uhmc_contraction(variance: f64, duration: f64, gamma: f64) -> Result<f64> {
    let n = leapfrog_count(duration, gamma)?;
    let c = 1.0 - gamma * gamma / (2.0 * variance);
    if c.abs() >= 1.0 {
        return Err(Error::invalid("Verlet step is unstable for this variance"));
    }
    Ok((n as f64 * c.acos()).cos().abs())
}

fn default_contraction(spec: &SweepSpec, kernel: &KernelSpec) -> Result<Option<Contraction>> {
    let model = kernel.model();
    let variance = model.gaussian_variance();
    match kernel.kind() {
        KernelKind::Uhmc => {
            let t = kernel.duration().unwrap_or_default();
            let c = match (spec.hmc_c, variance) {
                (Some(c), _) => Some(c),
                (None, Some(v)) => Some(1.0 - gaussian_uhmc_contraction(v, t, kernel.gamma().unwrap_or_default())?),
                _ => None,
            };
            Ok(c.filter(|c| *c > 1e-12).map(|c| Contraction {
                convergence: None,
                hmc_c: Some(c),
                per_unit_time: -(1.0 - c).max(f64::MIN_POSITIVE).ln() / t,
            }))
        }
        _ => {
            if let Some(input) = &spec.contraction {
                let conv = input.resolve()?;
                let rate = match conv {
                    Convergence::Geometric { c, .. } => c,
                    Convergence::Subgeometric { t_rel } => std::f64::consts::LN_2 / t_rel,
                };
                return Ok(Some(Contraction {
                    convergence: Some(conv),
                    hmc_c: None,
                    per_unit_time: rate,
                }));
            }
            // the synchronous coupling of the Euler chain contracts by
            // 1 - gamma / v <= e^{-gamma / v} per step
            Ok(match (kernel.kind(), variance) {
                (KernelKind::Ula, Some(v)) => Some(Contraction {
                    convergence: Some(Convergence::Geometric { a: 1.0, c: 1.0 / v }),
                    hmc_c: None,
                    per_unit_time: 1.0 / v,
                }),
                _ => None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Diverged { step: usize },
    Failed { message: String },
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellStatus::Ok => write!(f, "ok"),
            CellStatus::Diverged { step } => write!(f, "diverged at step {step}"),
            CellStatus::Failed { message } => write!(f, "failed: {message}"),
        }
    }
}

impl CellStatus {
    fn from_error(e: &Error) -> Self {
        match e {
            Error::Divergence { step, .. } => CellStatus::Diverged { step: *step },
            other => CellStatus::Failed {
                message: other.to_string(),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, CellStatus::Ok)
    }
}

/// One (cell, metric) result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub model: String,
    pub d: usize,
    pub gamma: f64,
    pub kernel: String,
    pub metric: MetricSpec,
    /// `NaN` for failed cells.
    pub bias: f64,
    pub stderr: f64,
    pub theory_bound: Option<f64>,
    /// Exact value of the bias when the target and kernel admit one.
    pub closed_form_bias: Option<f64>,
    pub route: String,
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub wall_time_s: Option<f64>,
    pub status: CellStatus,
}

/// Per-cell diagnostics that do not depend on the metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub d: usize,
    pub gamma: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub n_samples: usize,
    pub reference: ReferenceKind,
    /// Mean of `|x|^2 / d` over retained states.
    pub second_moment: Option<Estimate>,
    /// Its exact stationary value, when known.
    pub closed_form_second_moment: Option<f64>,
    /// Effective sample size of `|x|^2`.
    pub ess: Option<f64>,
    pub status: CellStatus,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub records: Vec<ExperimentRecord>,
    pub cells: Vec<CellSummary>,
}

/// Exact stationary variance per coordinate of the kernel on a Gaussian
/// target `N(0, v I)`.
pub fn gaussian_stationary_variance(kind: KernelKind, variance: f64, gamma: f64) -> Option<f64> {
    match kind {
        KernelKind::Ula => Some(variance / (1.0 - gamma / (2.0 * variance))),
        KernelKind::Uhmc => Some(variance / (1.0 - gamma * gamma / (4.0 * variance))),
        KernelKind::ExactOu | KernelKind::ExactHmc => Some(variance),
        KernelKind::TamedUla => None,
    }
}

fn closed_form_bias(plan: &CellPlan, metric: &MetricSpec) -> Option<f64> {
    let v = plan.kernel.model().gaussian_variance()?;
    let vg = gaussian_stationary_variance(plan.kernel.kind(), v, plan.gamma)?;
    gaussian_w_metric(metric, plan.d, v.sqrt(), vg.sqrt()).ok().map(|e| e.value)
}

/// Theory bound for every metric of a cell, or `None` without a
/// contraction assumption.
struct Theory {
    contraction: Contraction,
    lambda: f64,
    m: f64,
    l: f64,
}

impl Theory {
    fn bound(&self, plan: &CellPlan, metric: &MetricSpec) -> Result<f64> {
        match (&self.contraction.convergence, self.contraction.hmc_c) {
            (Some(conv), _) => thm5_bound(metric, plan.d, conv, self.lambda, self.m, plan.gamma),
            (None, Some(c)) => thm11_bound(
                metric,
                plan.d,
                c,
                self.l,
                plan.kernel.duration().unwrap_or_default(),
                self.lambda,
                self.m,
                plan.gamma,
            ),
            (None, None) => Err(Error::invalid("no contraction assumption")),
        }
    }
}

/// `n` independent draws from `pi`, when the target has a closed-form law
/// or a product structure with a tabulated marginal.
pub fn exact_pi_samples(model: &TargetModel, n: usize, stream: &RngStream) -> Result<Option<Vec<Vec<f64>>>> {
    let d = model.dimension();
    let mut g = stream.child(7, Purpose::Reference).generator();
    if let Some(law) = model.stationary_law() {
        return Ok(Some(
            (0..n)
                .map(|_| {
                    let mut x = vec![0.0; d];
                    law.sample_into(&mut g, &mut x);
                    x
                })
                .collect(),
        ));
    }
    if let Some(m) = model.marginal() {
        let s = MarginalSampler::new(m)?;
        return Ok(Some(
            (0..n)
                .map(|_| {
                    let mut x = vec![0.0; d];
                    s.fill(&mut g, &mut x);
                    x
                })
                .collect(),
        ));
    }
    Ok(None)
}

fn theory(spec: &SweepSpec, plan: &CellPlan, h: &harvest::Harvest, stream: &RngStream) -> Result<Option<Theory>> {
    let Some(contraction) = default_contraction(spec, &plan.kernel)? else {
        return Ok(None);
    };
    let model = plan.kernel.model();
    let samples = match exact_pi_samples(model, MIN_SAMPLES, stream)? {
        Some(s) => s,
        // the retained chain states stand in for pi
        None => h.x_rows(),
    };
    let tamed = plan.kernel.kind() == KernelKind::TamedUla;
    let m = estimate_m_quantities(model, &samples, plan.gamma, tamed)?;
    let l = model.constants().lipschitz_l;
    let v = |e: &Estimate| e.value.max(0.0);
    let (lambda, mm) = match plan.kernel.kind() {
        KernelKind::Uhmc => prop10_constants(l, plan.gamma, v(&m.m1), v(&m.m2), v(&m.m4), v(&m.m5))?,
        _ => prop4_constants(l, plan.gamma, spec.gamma_cap, v(&m.m1), v(&m.m2), v(&m.m3))?,
    };
    Ok(Some(Theory {
        contraction,
        lambda,
        m: mm,
        l,
    }))
}

fn experiment_id(spec: &SweepSpec, plan: &CellPlan, metric: &MetricSpec) -> String {
    format!(
        "{}-d{}-g{}-{}-p{}-{}",
        spec.model.kind(),
        plan.d,
        plan.gamma,
        spec.kernel.label(),
        metric.p,
        metric.base
    )
}

fn run_cell(spec: &SweepSpec, plan: &CellPlan) -> (Vec<ExperimentRecord>, CellSummary) {
    // the clock is only read on request; wasm32 has no monotonic clock
    let started = spec.record_wall_time.then(Instant::now);
    let stream = plan.stream(spec.seed);
    let model = plan.kernel.model();
    let closed_var = model
        .gaussian_variance()
        .and_then(|v| gaussian_stationary_variance(plan.kernel.kind(), v, plan.gamma));
    let record = |metric: &MetricSpec, est: Option<(f64, f64, String)>, theory: Option<f64>, status: CellStatus| {
        let (bias, stderr, route) = est.unwrap_or((f64::NAN, f64::NAN, String::new()));
        ExperimentRecord {
            experiment_id: experiment_id(spec, plan, metric),
            model: model.name().to_string(),
            d: plan.d,
            gamma: plan.gamma,
            kernel: spec.kernel.label(),
            metric: *metric,
            bias,
            stderr,
            theory_bound: theory,
            closed_form_bias: closed_form_bias(plan, metric),
            route,
            n_samples: plan.n_samples,
            burn_in: plan.burn_in,
            seed: spec.seed,
            wall_time_s: None,
            status,
        }
    };
    let mut summary = CellSummary {
        d: plan.d,
        gamma: plan.gamma,
        burn_in: plan.burn_in,
        thin: plan.thin,
        n_samples: plan.n_samples,
        reference: plan.reference,
        second_moment: None,
        closed_form_second_moment: closed_var,
        ess: None,
        status: CellStatus::Ok,
        wall_time_s: None,
    };
    let mut records = Vec::with_capacity(spec.metrics.len());
    match harvest::harvest(plan, &stream) {
        Err(e) => {
            let status = CellStatus::from_error(&e);
            summary.status = status.clone();
            for m in &spec.metrics {
                records.push(record(m, None, None, status.clone()));
            }
        }
        Ok(h) => {
            let second = h.second_moments();
            summary.second_moment = Some(batch_means(&second));
            summary.ess = Some(geyer_ess(&second));
            let th = theory(spec, plan, &h, &stream);
            for (k, m) in spec.metrics.iter().enumerate() {
                let bound = match &th {
                    Ok(Some(t)) => t.bound(plan, m).ok(),
                    _ => None,
                };
                let s = stream.child(k as u64, Purpose::Directions);
                match harvest::estimate_bias(&h, m, spec.sliced_directions, &s) {
                    Ok((est, route)) => records.push(record(
                        m,
                        Some((est.value, est.stderr, harvest::route_label(route, h.reference))),
                        bound,
                        CellStatus::Ok,
                    )),
                    Err(e) => records.push(record(m, None, bound, CellStatus::from_error(&e))),
                }
            }
        }
    }
    if let Some(started) = started {
        let t = started.elapsed().as_secs_f64();
        summary.wall_time_s = Some(t);
        records.iter_mut().for_each(|r| r.wall_time_s = Some(t));
    }
    (records, summary)
}

/// Runs every cell of a validated spec. Cells that diverge or fail are
/// recorded with their status; the sweep itself only fails on an invalid
/// spec.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let plans = spec.plan()?;
    let results = map_indexed(plans.len(), |i| run_cell(spec, &plans[i]));
    let mut out = SweepResult {
        records: Vec::new(),
        cells: Vec::new(),
    };
    for (r, c) in results {
        out.records.extend(r);
        out.cells.push(c);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Gamma,
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub axis: Axis,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Least squares on `(ln x, ln y)`. Points with a nonpositive or
/// non-finite `y` are dropped; fewer than three remaining is an error.
pub fn fit_slope(axis: Axis, points: &[(f64, f64)]) -> Result<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: logs.len(),
        });
    }
    let (slope, intercept) = least_squares(&logs);
    let my = logs.iter().map(|p| p.1).sum::<f64>() / logs.len() as f64;
    let ss_tot: f64 = logs.iter().map(|(_, y)| (y - my).powi(2)).sum();
    let ss_res: f64 = logs.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    let warning = (r_squared < R_SQUARED_WARNING)
        .then(|| format!("r^2 = {r_squared:.4} is below {R_SQUARED_WARNING}; the power law fits poorly"));
    Ok(SlopeFit {
        axis,
        slope,
        intercept,
        r_squared,
        points: logs.len(),
        warning,
    })
}

/// A slope fit over one axis of a sweep, the other coordinates held fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledFit {
    pub metric: MetricSpec,
    /// The fixed `d` (gamma axis) or `gamma` (dimension axis).
    pub fixed: f64,
    pub fit: SlopeFit,
    /// Order predicted for Gaussian targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_window: Option<bool>,
}

/// Every slope the sweep supports: along `gamma` for each `(metric, d)` and
/// along `d` for each `(metric, gamma)` with at least three points.
pub fn sweep_slopes(spec: &SweepSpec, records: &[ExperimentRecord]) -> Vec<LabeledFit> {
    let gaussian = matches!(spec.model, ModelSpec::Gaussian { .. });
    let mut out = Vec::new();
    for metric in &spec.metrics {
        let mine: Vec<&ExperimentRecord> = records
            .iter()
            .filter(|r| r.metric == *metric && r.status.is_ok())
            .collect();
        let mut dims: Vec<usize> = mine.iter().map(|r| r.d).collect();
        dims.dedup();
        let mut gammas: Vec<f64> = mine.iter().map(|r| r.gamma).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        let expected_gamma = match spec.kernel.kind {
            KernelKind::Uhmc => 2.0,
            _ => 1.0,
        };
        let window_gamma = match spec.kernel.kind {
            KernelKind::Uhmc => spec.slope_windows.gamma_hmc,
            _ => spec.slope_windows.gamma,
        };
        for &d in &dims {
            let pts: Vec<(f64, f64)> = mine.iter().filter(|r| r.d == d).map(|r| (r.gamma, r.bias)).collect();
            if let Ok(fit) = fit_slope(Axis::Gamma, &pts) {
                let expected = gaussian.then_some(expected_gamma);
                out.push(LabeledFit {
                    metric: *metric,
                    fixed: d as f64,
                    within_window: expected.map(|e| (fit.slope - e).abs() <= window_gamma),
                    expected,
                    fit,
                });
            }
        }
        for &g in &gammas {
            let pts: Vec<(f64, f64)> = mine.iter().filter(|r| r.gamma == g).map(|r| (r.d as f64, r.bias)).collect();
            if let Ok(fit) = fit_slope(Axis::Dimension, &pts) {
                let expected = if gaussian { metric.product_exponent() } else { None };
                out.push(LabeledFit {
                    metric: *metric,
                    fixed: g,
                    within_window: expected.map(|e| (fit.slope - e).abs() <= spec.slope_windows.dimension),
                    expected,
                    fit,
                });
            }
        }
    }
    out
}

/// Runs `spec` at the single step size `gamma` over its dimension list and
/// fits the dimension exponent of each metric.
pub fn dimension_scan(spec: &SweepSpec, gamma: f64) -> Result<(SweepResult, Vec<LabeledFit>)> {
    let mut s = spec.clone();
    s.gammas = vec![gamma];
    let result = run_sweep(&s)?;
    let fits: Vec<LabeledFit> = sweep_slopes(&s, &result.records)
        .into_iter()
        .filter(|f| f.fit.axis == Axis::Dimension)
        .collect();
    if fits.len() < s.metrics.len() {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: s.dims.len(),
        });
    }
    Ok((result, fits))
}

#[cfg(test)]
mod tests;
