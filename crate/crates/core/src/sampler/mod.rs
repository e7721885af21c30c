//! Discrete kernels (ULA, tamed ULA, unadjusted HMC), the exact reference
//! dynamics for Gaussian targets, and a seeded chain runner.

mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::TargetModel;
use crate::stats::norm;
pub use rng::{mix64, splitmix64, GaussianSource, Purpose, RngStream};

/// States with a larger Euclidean norm abort the chain.
pub const DIVERGENCE_NORM: f64 = 1e8;

/// Default cap on the step size.
pub const DEFAULT_GAMMA_CAP: f64 = 1.0;

const DIVISIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Ula,
    TamedUla,
    Uhmc,
    ExactOu,
    ExactHmc,
}

impl KernelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::Ula => "ula",
            KernelKind::TamedUla => "tamed-ula",
            KernelKind::Uhmc => "uhmc",
            KernelKind::ExactOu => "exact-ou",
            KernelKind::ExactHmc => "exact-hmc",
        }
    }

    pub fn is_hamiltonian(&self) -> bool {
        matches!(self, KernelKind::Uhmc | KernelKind::ExactHmc)
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ula" => Ok(KernelKind::Ula),
            "tamed-ula" => Ok(KernelKind::TamedUla),
            "uhmc" => Ok(KernelKind::Uhmc),
            "exact-ou" => Ok(KernelKind::ExactOu),
            "exact-hmc" => Ok(KernelKind::ExactHmc),
            other => Err(Error::invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// A fully validated Markov kernel on `R^d`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    gamma: Option<f64>,
    duration: Option<f64>,
    leapfrog_steps: usize,
    gamma_cap: f64,
    model: TargetModel,
}

fn check_gamma(gamma: f64, cap: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {gamma}")));
    }
    if gamma > cap {
        return Err(Error::invalid(format!("step size {gamma} exceeds the cap {cap}")));
    }
    Ok(())
}

fn check_duration(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("duration T must be positive, got {t}")));
    }
    Ok(())
}

/// Number of Verlet steps `T / gamma`, which must be an integer.
pub fn leapfrog_count(duration: f64, gamma: f64) -> Result<usize> {
    let ratio = duration / gamma;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > DIVISIBILITY_TOL {
        return Err(Error::invalid(format!(
            "T / gamma = {ratio} is not a positive integer (T = {duration}, gamma = {gamma})"
        )));
    }
    Ok(rounded as usize)
}

impl KernelSpec {
    pub fn new(
        kind: KernelKind,
        model: TargetModel,
        gamma: Option<f64>,
        duration: Option<f64>,
        gamma_cap: f64,
    ) -> Result<Self> {
        if !(gamma_cap > 0.0) {
            return Err(Error::invalid("gamma cap must be positive"));
        }
        let need_gamma = || gamma.ok_or_else(|| Error::invalid(format!("kernel {kind} needs a step size")));
        let need_duration = || duration.ok_or_else(|| Error::invalid(format!("kernel {kind} needs a duration T")));
        let mut spec = KernelSpec {
            kind,
            gamma: None,
            duration: None,
            leapfrog_steps: 0,
            gamma_cap,
            model,
        };
        match kind {
            KernelKind::Ula | KernelKind::TamedUla | KernelKind::ExactOu => {
                let g = need_gamma()?;
                check_gamma(g, gamma_cap)?;
                spec.gamma = Some(g);
            }
            KernelKind::Uhmc => {
                let g = need_gamma()?;
                let t = need_duration()?;
                check_gamma(g, gamma_cap)?;
                check_duration(t)?;
                spec.leapfrog_steps = leapfrog_count(t, g)?;
                spec.gamma = Some(g);
                spec.duration = Some(t);
            }
            KernelKind::ExactHmc => {
                let t = need_duration()?;
                check_duration(t)?;
                spec.duration = Some(t);
            }
        }
        if matches!(kind, KernelKind::ExactOu | KernelKind::ExactHmc) && spec.model.gaussian_variance().is_none() {
            return Err(Error::invalid(format!(
                "kernel {kind} is only available for centered isotropic Gaussian targets"
            )));
        }
        Ok(spec)
    }

    pub fn ula(model: TargetModel, gamma: f64) -> Result<Self> {
        Self::new(KernelKind::Ula, model, Some(gamma), None, DEFAULT_GAMMA_CAP)
    }

    pub fn tamed_ula(model: TargetModel, gamma: f64) -> Result<Self> {
        Self::new(KernelKind::TamedUla, model, Some(gamma), None, DEFAULT_GAMMA_CAP)
    }

    pub fn uhmc(model: TargetModel, duration: f64, gamma: f64) -> Result<Self> {
        Self::new(KernelKind::Uhmc, model, Some(gamma), Some(duration), DEFAULT_GAMMA_CAP)
    }

    pub fn exact_ou(model: TargetModel, gamma: f64) -> Result<Self> {
        Self::new(KernelKind::ExactOu, model, Some(gamma), None, DEFAULT_GAMMA_CAP)
    }

    pub fn exact_hmc(model: TargetModel, duration: f64) -> Result<Self> {
        Self::new(KernelKind::ExactHmc, model, None, Some(duration), DEFAULT_GAMMA_CAP)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn duration(&self) -> Option<f64> {
        self.duration
    }

    pub fn gamma_cap(&self) -> f64 {
        self.gamma_cap
    }

    pub fn leapfrog_steps(&self) -> usize {
        self.leapfrog_steps
    }

    pub fn model(&self) -> &TargetModel {
        &self.model
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    /// Physical time covered by one transition.
    pub fn time_per_transition(&self) -> f64 {
        match self.kind {
            KernelKind::Uhmc | KernelKind::ExactHmc => self.duration.unwrap_or(0.0),
            _ => self.gamma.unwrap_or(0.0),
        }
    }

    /// Applies one transition to `x` using the standard normal vector
    /// `noise` (Brownian increment or fresh momentum). Sharing `noise`
    /// between two states gives the synchronous coupling.
    pub fn apply(&self, x: &mut [f64], noise: &[f64], scratch: &mut Scratch) -> Result<()> {
        let m = &self.model;
        match self.kind {
            KernelKind::Ula => {
                let g = self.gamma.unwrap_or_default();
                m.drift_into(x, &mut scratch.a);
                let s = (2.0 * g).sqrt();
                for i in 0..x.len() {
                    x[i] += g * scratch.a[i] + s * noise[i];
                }
            }
            KernelKind::TamedUla => {
                let g = self.gamma.unwrap_or_default();
                m.drift_into(x, &mut scratch.a);
                tame_in_place(&mut scratch.a, g);
                let s = (2.0 * g).sqrt();
                for i in 0..x.len() {
                    x[i] += g * scratch.a[i] + s * noise[i];
                }
            }
            KernelKind::ExactOu => {
                let var = m.gaussian_variance().unwrap_or(1.0);
                let g = self.gamma.unwrap_or_default() / var;
                let decay = (-g).exp();
                let s = var.sqrt() * (-(-2.0 * g).exp_m1()).sqrt();
                for i in 0..x.len() {
                    x[i] = decay * x[i] + s * noise[i];
                }
            }
            KernelKind::Uhmc => {
                let g = self.gamma.unwrap_or_default();
                scratch.p.copy_from_slice(noise);
                let Scratch { a, b, p } = scratch;
                m.drift_into(x, a);
                for _ in 0..self.leapfrog_steps {
                    verlet_in_place(m, g, x, p, a, b);
                }
            }
            KernelKind::ExactHmc => {
                let var = m.gaussian_variance().unwrap_or(1.0);
                gaussian_flow_in_place(var, self.duration.unwrap_or_default(), x, noise);
            }
        }
        let n = norm(x);
        if !(n <= DIVERGENCE_NORM) {
            return Err(Error::Divergence { step: 0, norm: n });
        }
        Ok(())
    }

    pub fn scratch(&self) -> Scratch {
        Scratch::new(self.dimension())
    }
}

/// Work buffers for [`KernelSpec::apply`].
#[derive(Debug, Clone)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    p: Vec<f64>,
}

impl Scratch {
    pub fn new(d: usize) -> Self {
        Scratch {
            a: vec![0.0; d],
            b: vec![0.0; d],
            p: vec![0.0; d],
        }
    }
}

fn tame_in_place(b: &mut [f64], gamma: f64) {
    let scale = 1.0 / (1.0 + gamma * norm(b));
    b.iter_mut().for_each(|v| *v *= scale);
}

/// One Verlet step in place. `force` holds `b(q)` on entry and `b(q')` on
/// exit; `next` is scratch.
fn verlet_in_place(
    model: &TargetModel,
    gamma: f64,
    q: &mut [f64],
    p: &mut [f64],
    force: &mut Vec<f64>,
    next: &mut Vec<f64>,
) {
    let half = 0.5 * gamma;
    let half_sq = 0.5 * gamma * gamma;
    for i in 0..q.len() {
        q[i] += gamma * p[i] + half_sq * force[i];
    }
    model.drift_into(q, next);
    for i in 0..q.len() {
        p[i] += half * (force[i] + next[i]);
    }
    std::mem::swap(force, next);
}

/// Exact flow of `q' = p, p' = -q / variance` for time `t`, applied to
/// `(q, p)`; only the position is written back.
fn gaussian_flow_in_place(variance: f64, t: f64, q: &mut [f64], p: &[f64]) {
    let omega = 1.0 / variance.sqrt();
    let (s, c) = (omega * t).sin_cos();
    for i in 0..q.len() {
        q[i] = c * q[i] + (s / omega) * p[i];
    }
}

fn check_state(x: &[f64]) -> Result<()> {
    let n = norm(x);
    if n <= DIVERGENCE_NORM {
        Ok(())
    } else {
        Err(Error::Divergence { step: 0, norm: n })
    }
}

/// One ULA step `x + gamma b(x) + sqrt(2 gamma) g`.
pub fn ula_step(model: &TargetModel, gamma: f64, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    check_gamma(gamma, f64::INFINITY)?;
    check_dim(model.dimension(), x.len())?;
    check_dim(model.dimension(), g.len())?;
    let b = model.drift(x)?;
    let s = (2.0 * gamma).sqrt();
    let out: Vec<f64> = (0..x.len()).map(|i| x[i] + gamma * b[i] + s * g[i]).collect();
    check_state(&out)?;
    Ok(out)
}

/// `b(x) / (1 + gamma |b(x)|)`.
pub fn tamed_drift(model: &TargetModel, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_gamma(gamma, f64::INFINITY)?;
    let mut b = model.drift(x)?;
    tame_in_place(&mut b, gamma);
    Ok(b)
}

/// One Verlet step `(q, p) -> (q', p')` for `q'' = b(q)`:
/// `q' = q + gamma p + gamma^2/2 b(q)`, `p' = p + gamma/2 (b(q) + b(q'))`.
pub fn verlet_step(model: &TargetModel, gamma: f64, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_gamma(gamma, f64::INFINITY)?;
    check_dim(model.dimension(), q.len())?;
    check_dim(model.dimension(), p.len())?;
    let (mut q, mut p) = (q.to_vec(), p.to_vec());
    let mut force = model.drift(&q)?;
    let mut next = vec![0.0; q.len()];
    verlet_in_place(model, gamma, &mut q, &mut p, &mut force, &mut next);
    check_state(&q)?;
    Ok((q, p))
}

/// `T / gamma` Verlet steps from `(q, p)`, returning both components.
pub fn verlet_flow(
    model: &TargetModel,
    duration: f64,
    gamma: f64,
    q: &[f64],
    p: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let steps = leapfrog_count(duration, gamma)?;
    check_dim(model.dimension(), q.len())?;
    check_dim(model.dimension(), p.len())?;
    let (mut q, mut p) = (q.to_vec(), p.to_vec());
    let mut force = model.drift(&q)?;
    let mut next = vec![0.0; q.len()];
    for step in 0..steps {
        verlet_in_place(model, gamma, &mut q, &mut p, &mut force, &mut next);
        check_state(&q).map_err(|e| e.at_step(step + 1))?;
    }
    Ok((q, p))
}

/// One unadjusted HMC transition: fresh momentum from `stream`, `T / gamma`
/// Verlet steps, position returned.
pub fn uhmc_transition(
    model: &TargetModel,
    duration: f64,
    gamma: f64,
    q: &[f64],
    stream: &RngStream,
) -> Result<Vec<f64>> {
    check_gamma(gamma, f64::INFINITY)?;
    check_duration(duration)?;
    let p = stream.generator().normal_vec(model.dimension());
    verlet_flow(model, duration, gamma, q, &p).map(|(q, _)| q)
}

/// Exact transition of `dY = -Y dt + sqrt(2) dB` over time `gamma`:
/// `e^{-gamma} x + sqrt(1 - e^{-2 gamma}) g`. Unit variance only; other
/// variances go through `x -> x / sigma`.
pub fn exact_ou_step(variance: f64, gamma: f64, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    if variance != 1.0 {
        return Err(Error::invalid("exact_ou_step is defined for the unit-variance target"));
    }
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma must be nonnegative"));
    }
    check_dim(x.len(), g.len())?;
    let decay = (-gamma).exp();
    let s = (-(-2.0 * gamma).exp_m1()).sqrt();
    Ok(x.iter().zip(g).map(|(xi, gi)| decay * xi + s * gi).collect())
}

/// Exact flow of `q' = p, p' = -q` for time `t`:
/// `(q cos t + p sin t, p cos t - q sin t)`.
pub fn exact_gaussian_hmc_flow(t: f64, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(q.len(), p.len())?;
    let (s, c) = t.sin_cos();
    let qn = q.iter().zip(p).map(|(qi, pi)| qi * c + pi * s).collect();
    let pn = q.iter().zip(p).map(|(qi, pi)| pi * c - qi * s).collect();
    Ok((qn, pn))
}

/// Modified energy `(1 - gamma^2/4) |q|^2 / 2 + |p|^2 / 2`, exactly
/// preserved by Verlet on the standard Gaussian.
pub fn modified_hamiltonian(gamma: f64, q: &[f64], p: &[f64]) -> f64 {
    0.5 * (1.0 - 0.25 * gamma * gamma) * crate::stats::norm_sq(q) + 0.5 * crate::stats::norm_sq(p)
}

/// Burn-in default `ceil(10 / (c_eff * h))` where `h` is the time per
/// transition and `c_eff = |kappa|` for contractive models.
pub fn default_burn_in(kernel: &KernelSpec, c_eff: Option<f64>) -> Result<usize> {
    let kappa = kernel.model().constants().one_sided_kappa;
    let c = match c_eff {
        Some(c) if c > 0.0 => c,
        Some(_) => return Err(Error::invalid("effective contraction rate must be positive")),
        None if kappa < 0.0 => -kappa,
        None => {
            return Err(Error::invalid(
                "model is not strongly contractive; supply an effective contraction rate for burn-in",
            ))
        }
    };
    let h = kernel.time_per_transition();
    Ok((10.0 / (c * h)).ceil() as usize)
}

/// Chain output: `n_steps + 1` retained states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    /// Transition index of `states[0]` (the burn-in length).
    pub step_index_origin: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub kernel: KernelSpec,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Runs a chain and hands every retained state to `visit`: the state after
/// `burn_in` transitions, then every `thin`-th state after that, `n_steps`
/// more times. Returns the number of transitions performed.
pub fn run_chain_visit(
    kernel: &KernelSpec,
    x0: &[f64],
    n_steps: usize,
    burn_in: usize,
    thin: usize,
    stream: &RngStream,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<usize> {
    check_dim(kernel.dimension(), x0.len())?;
    check_state(x0)?;
    let thin = thin.max(1);
    let mut rng = stream.generator();
    let mut x = x0.to_vec();
    let mut noise = vec![0.0; x.len()];
    let mut scratch = kernel.scratch();
    let mut step = 0usize;
    let mut advance = |x: &mut Vec<f64>, step: &mut usize| -> Result<()> {
        rng.fill_normal(&mut noise);
        *step += 1;
        kernel.apply(x, &noise, &mut scratch).map_err(|e| e.at_step(*step))
    };
    for _ in 0..burn_in {
        advance(&mut x, &mut step)?;
    }
    visit(0, &x);
    for k in 1..=n_steps {
        for _ in 0..thin {
            advance(&mut x, &mut step)?;
        }
        visit(k, &x);
    }
    Ok(step)
}

pub fn run_chain(
    kernel: &KernelSpec,
    x0: &[f64],
    n_steps: usize,
    burn_in: usize,
    thin: usize,
    stream: &RngStream,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n_steps + 1);
    run_chain_visit(kernel, x0, n_steps, burn_in, thin, stream, |_, x| states.push(x.to_vec()))?;
    Ok(Trajectory {
        states,
        step_index_origin: burn_in,
        thin: thin.max(1),
        seed: stream.base_seed,
        stream_id: stream.stream_id,
        kernel: kernel.clone(),
    })
}

#[cfg(test)]
mod tests;
