//! Browser demo over `mcmclab`: a ULA histogram against its exact
//! stationary law, a Verlet orbit with its conserved modified energy, and
//! a measured bias-versus-step curve against the Gaussian closed form.
//!
//! The plain functions are callable from Rust; the `js_*` wrappers are the
//! exports seen by JavaScript.

use mcmclab::experiment::{
    fit_slope, gaussian_stationary_variance, run_sweep, Axis, CellStatus, KernelChoice, SweepSpec,
};
use mcmclab::model::{make_gaussian_model, ModelSpec};
use mcmclab::sampler::{modified_hamiltonian, run_chain_visit, verlet_step, KernelKind, KernelSpec, Purpose, RngStream};
use mcmclab::stats::batch_means;
use mcmclab::{Error, Result};
use wasm_bindgen::prelude::*;

const HISTOGRAM_HALF_WIDTH: f64 = 4.5;
const MAX_STEPS: usize = 5_000_000;

/// Binned ULA chain on the standard Gaussian in one dimension.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Histogram {
    centers: Vec<f64>,
    density: Vec<f64>,
    target_density: Vec<f64>,
    chain_density: Vec<f64>,
    variance: f64,
    variance_stderr: f64,
    closed_form_variance: f64,
    samples: usize,
}

#[wasm_bindgen]
impl Histogram {
    #[wasm_bindgen(getter)]
    pub fn centers(&self) -> Vec<f64> {
        self.centers.clone()
    }
    /// Empirical density of the retained states.
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }
    /// `N(0, 1)` density at the bin centers.
    #[wasm_bindgen(getter, js_name = targetDensity)]
    pub fn target_density(&self) -> Vec<f64> {
        self.target_density.clone()
    }
    /// Exact stationary density of the chain at the bin centers.
    #[wasm_bindgen(getter, js_name = chainDensity)]
    pub fn chain_density(&self) -> Vec<f64> {
        self.chain_density.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn variance(&self) -> f64 {
        self.variance
    }
    #[wasm_bindgen(getter, js_name = varianceStderr)]
    pub fn variance_stderr(&self) -> f64 {
        self.variance_stderr
    }
    #[wasm_bindgen(getter, js_name = closedFormVariance)]
    pub fn closed_form_variance(&self) -> f64 {
        self.closed_form_variance
    }
    #[wasm_bindgen(getter)]
    pub fn samples(&self) -> usize {
        self.samples
    }
}

/// Verlet orbit on the standard Gaussian.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Orbit {
    q: Vec<f64>,
    p: Vec<f64>,
    energy: Vec<f64>,
    modified_energy: Vec<f64>,
}

#[wasm_bindgen]
impl Orbit {
    #[wasm_bindgen(getter)]
    pub fn q(&self) -> Vec<f64> {
        self.q.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn p(&self) -> Vec<f64> {
        self.p.clone()
    }
    /// `(q^2 + p^2) / 2` along the orbit.
    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> Vec<f64> {
        self.energy.clone()
    }
    /// `(1 - gamma^2/4) q^2 / 2 + p^2 / 2` along the orbit.
    #[wasm_bindgen(getter, js_name = modifiedEnergy)]
    pub fn modified_energy(&self) -> Vec<f64> {
        self.modified_energy.clone()
    }
    /// Largest relative change of the modified energy.
    #[wasm_bindgen(js_name = maxModifiedDrift)]
    pub fn max_modified_drift(&self) -> f64 {
        let h0 = self.modified_energy[0];
        self.modified_energy
            .iter()
            .map(|h| (h - h0).abs() / h0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Measured `W_2` bias over a step-size grid on `N(0, I_d)`.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct BiasCurve {
    gammas: Vec<f64>,
    bias: Vec<f64>,
    stderr: Vec<f64>,
    closed_form: Vec<f64>,
    slope: f64,
}

#[wasm_bindgen]
impl BiasCurve {
    #[wasm_bindgen(getter)]
    pub fn gammas(&self) -> Vec<f64> {
        self.gammas.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn bias(&self) -> Vec<f64> {
        self.bias.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn stderr(&self) -> Vec<f64> {
        self.stderr.clone()
    }
    #[wasm_bindgen(getter, js_name = closedForm)]
    pub fn closed_form(&self) -> Vec<f64> {
        self.closed_form.clone()
    }
    /// Fitted order of the measured bias in `gamma` (log-log slope).
    #[wasm_bindgen(getter)]
    pub fn slope(&self) -> f64 {
        self.slope
    }
}

fn normal_pdf(x: f64, variance: f64) -> f64 {
    (-0.5 * x * x / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Runs ULA at step `gamma` on `N(0, 1)` for `steps` retained states
/// after a burn-in of `ceil(10 / gamma)` and bins them on `[-4.5, 4.5]`.
pub fn ula_histogram(gamma: f64, steps: usize, bins: usize, seed: u64) -> Result<Histogram> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    if steps < 64 || steps > MAX_STEPS {
        return Err(Error::InvalidArgument(format!("steps must lie in [64, {MAX_STEPS}], got {steps}")));
    }
    if bins == 0 || bins > 1000 {
        return Err(Error::InvalidArgument(format!("bins must lie in [1, 1000], got {bins}")));
    }
    let kernel = KernelSpec::ula(make_gaussian_model(1, 1.0)?, gamma)?;
    let burn_in = (10.0 / gamma).ceil() as usize;
    let stream = RngStream::derive(seed, 0, Purpose::Chain);
    let width = 2.0 * HISTOGRAM_HALF_WIDTH / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut squares = Vec::with_capacity(steps + 1);
    run_chain_visit(&kernel, &[0.0], steps, burn_in, 1, &stream, |_, x| {
        let v = x[0];
        squares.push(v * v);
        let k = ((v + HISTOGRAM_HALF_WIDTH) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    })?;
    let n = squares.len();
    let est = batch_means(&squares);
    let closed = gaussian_stationary_variance(KernelKind::Ula, 1.0, gamma).unwrap_or(f64::NAN);
    let centers: Vec<f64> = (0..bins).map(|k| -HISTOGRAM_HALF_WIDTH + (k as f64 + 0.5) * width).collect();
    Ok(Histogram {
        density: counts.iter().map(|&c| c as f64 / (n as f64 * width)).collect(),
        target_density: centers.iter().map(|&x| normal_pdf(x, 1.0)).collect(),
        chain_density: centers.iter().map(|&x| normal_pdf(x, closed)).collect(),
        centers,
        variance: est.value,
        variance_stderr: est.stderr,
        closed_form_variance: closed,
        samples: n,
    })
}

/// `steps` Verlet steps of size `gamma` from `(q0, p0)` on `N(0, 1)`.
pub fn verlet_orbit(gamma: f64, q0: f64, p0: f64, steps: usize) -> Result<Orbit> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    if steps == 0 || steps > 100_000 {
        return Err(Error::InvalidArgument(format!("steps must lie in [1, 100000], got {steps}")));
    }
    if !(q0.is_finite() && p0.is_finite()) || (q0 == 0.0 && p0 == 0.0) {
        return Err(Error::InvalidArgument("start must be finite and nonzero".into()));
    }
    let model = make_gaussian_model(1, 1.0)?;
    let mut orbit = Orbit {
        q: Vec::with_capacity(steps + 1),
        p: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        modified_energy: Vec::with_capacity(steps + 1),
    };
    let (mut q, mut p) = (vec![q0], vec![p0]);
    for i in 0..=steps {
        if i > 0 {
            (q, p) = verlet_step(&model, gamma, &q, &p)?;
        }
        orbit.q.push(q[0]);
        orbit.p.push(p[0]);
        orbit.energy.push(0.5 * (q[0] * q[0] + p[0] * p[0]));
        orbit.modified_energy.push(modified_hamiltonian(gamma, &q, &p));
    }
    Ok(orbit)
}

/// Measured `W_2` bias of `kernel` ("ula" or "uhmc", duration 1) on
/// `N(0, I_dim)` over `gammas`, next to the closed form.
pub fn bias_curve(kernel: &str, dim: usize, gammas: &[f64], samples: usize, seed: u64) -> Result<BiasCurve> {
    let kind: KernelKind = kernel.parse()?;
    let duration = match kind {
        KernelKind::Ula => None,
        KernelKind::Uhmc => Some(1.0),
        other => return Err(Error::InvalidArgument(format!("bias curve supports ula and uhmc, not {other}"))),
    };
    if dim == 0 || dim > 1000 {
        return Err(Error::InvalidArgument(format!("dim must lie in [1, 1000], got {dim}")));
    }
    if gammas.len() < 3 {
        return Err(Error::InvalidArgument("need at least three step sizes".into()));
    }
    if samples < 100 || samples > 1_000_000 {
        return Err(Error::InvalidArgument(format!("samples must lie in [100, 1000000], got {samples}")));
    }
    let mut spec = SweepSpec::new(
        ModelSpec::Gaussian { variance: 1.0 },
        vec![dim],
        gammas.to_vec(),
        KernelChoice { kind, duration },
    );
    spec.samples = samples;
    spec.seed = seed;
    let result = run_sweep(&spec)?;
    let mut curve = BiasCurve {
        gammas: Vec::new(),
        bias: Vec::new(),
        stderr: Vec::new(),
        closed_form: Vec::new(),
        slope: f64::NAN,
    };
    for rec in &result.records {
        if let CellStatus::Diverged { step } = rec.status {
            return Err(Error::Divergence { step, norm: f64::INFINITY });
        }
        curve.gammas.push(rec.gamma);
        curve.bias.push(rec.bias);
        curve.stderr.push(rec.stderr);
        curve.closed_form.push(rec.closed_form_bias.unwrap_or(f64::NAN));
    }
    let pts: Vec<(f64, f64)> = curve.gammas.iter().copied().zip(curve.bias.iter().copied()).collect();
    curve.slope = fit_slope(Axis::Gamma, &pts).map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(curve)
}

fn js_error(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = ulaHistogram)]
pub fn js_ula_histogram(gamma: f64, steps: u32, bins: u32, seed: u32) -> std::result::Result<Histogram, JsError> {
    ula_histogram(gamma, steps as usize, bins as usize, seed as u64).map_err(js_error)
}

#[wasm_bindgen(js_name = verletOrbit)]
pub fn js_verlet_orbit(gamma: f64, q0: f64, p0: f64, steps: u32) -> std::result::Result<Orbit, JsError> {
    verlet_orbit(gamma, q0, p0, steps as usize).map_err(js_error)
}

#[wasm_bindgen(js_name = biasCurve)]
pub fn js_bias_curve(
    kernel: &str,
    dim: u32,
    gammas: Vec<f64>,
    samples: u32,
    seed: u32,
) -> std::result::Result<BiasCurve, JsError> {
    bias_curve(kernel, dim as usize, &gammas, samples as usize, seed as u64).map_err(js_error)
}
