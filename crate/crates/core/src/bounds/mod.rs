//! Explicit constants and assembled bias bounds, with Monte-Carlo estimators
//! for the integrals they depend on.

mod estimators;
pub mod liouville;
mod report;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricSpec;

pub use estimators::{
    estimate_m5, estimate_m_quantities, estimate_mtilde6, prop6_quantities, u_grid, MQuantities, MTildeQuantities, MIN_SAMPLES,
    SemigroupApprox, SNAPSHOT_TIMES,
};
pub use report::{assemble_report, BoundReport, KeyQuantities, ReportInputs};

/// Decreasing convergence profile `psi` with `psi(t) -> 0`.
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Horizon searched for the relaxation time.
pub const RELAXATION_HORIZON: f64 = 1e6;

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `min_{1 <= n <= n_max, phi(n) < 1} eps(n) / (1 - phi(n))`, or `+inf`.
pub fn lemma1_bound(phi: impl Fn(usize) -> f64, eps: impl Fn(usize) -> f64, n_max: usize) -> f64 {
    (1..=n_max)
        .filter_map(|n| {
            let f = phi(n);
            (f < 1.0).then(|| eps(n) / (1.0 - f))
        })
        .fold(f64::INFINITY, f64::min)
}

/// `gamma B e^{1 + lambda gamma} A^{lambda / c} (lambda / c + 1)`.
pub fn example2_bound(a: f64, c: f64, lambda: f64, gamma: f64, b: f64) -> Result<f64> {
    nonneg("A", a)?;
    positive("c", c)?;
    positive("lambda", lambda)?;
    positive("gamma", gamma)?;
    nonneg("B", b)?;
    let r = lambda / c;
    Ok(gamma * b * (1.0 + lambda * gamma).exp() * a.powf(r) * (r + 1.0))
}

/// `inf { t >= 0 : psi(t) <= 1/2 }` by bisection.
pub fn relaxation_time(psi: &dyn Fn(f64) -> f64, horizon: f64) -> Result<f64> {
    if psi(0.0) <= 0.5 {
        return Ok(0.0);
    }
    if !(psi(horizon) <= 0.5) {
        return Err(Error::invalid(format!(
            "convergence profile stays above 1/2 up to t = {horizon}"
        )));
    }
    let (mut lo, mut hi) = (0.0, horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi(mid) <= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(hi)
}

/// `2 gamma B e^{lambda (t_rel + gamma)}`.
pub fn example3_bound(t_rel: f64, lambda: f64, gamma: f64, b: f64) -> Result<f64> {
    nonneg("t_rel", t_rel)?;
    positive("lambda", lambda)?;
    positive("gamma", gamma)?;
    nonneg("B", b)?;
    Ok(2.0 * gamma * b * (lambda * (t_rel + gamma)).exp())
}

/// Contraction assumption on a Markov semigroup, as supplied by the user.
#[derive(Clone)]
pub enum Convergence {
    /// `W(nu P_t, pi) <= A e^{-c t} W(nu, pi)`.
    Geometric { a: f64, c: f64 },
    /// `W(nu P_t, pi) <= psi(t) W(nu, pi)`, summarized by its relaxation time.
    Subgeometric { t_rel: f64 },
}

impl std::fmt::Debug for Convergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Convergence::Geometric { a, c } => write!(f, "Geometric {{ a: {a}, c: {c} }}"),
            Convergence::Subgeometric { t_rel } => write!(f, "Subgeometric {{ t_rel: {t_rel} }}"),
        }
    }
}

impl Convergence {
    pub fn from_profile(psi: &dyn Fn(f64) -> f64) -> Result<Self> {
        Ok(Convergence::Subgeometric {
            t_rel: relaxation_time(psi, RELAXATION_HORIZON)?,
        })
    }

    /// Example 2 or 3 style bound for rate `lambda` and one-step error `b`.
    pub fn bound(&self, lambda: f64, gamma: f64, b: f64) -> Result<f64> {
        match *self {
            Convergence::Geometric { a, c } => example2_bound(a, c, lambda, gamma, b),
            Convergence::Subgeometric { t_rel } => example3_bound(t_rel, lambda, gamma, b),
        }
    }
}

/// `(lambda_L, M_L)` for the Euler scheme.
pub fn prop4_constants(l: f64, gamma: f64, gamma_bar: f64, m1: f64, m2: f64, m3: f64) -> Result<(f64, f64)> {
    for (n, v) in [("L", l), ("gamma", gamma), ("gamma_bar", gamma_bar), ("M1", m1), ("M2", m2), ("M3", m3)] {
        nonneg(n, v)?;
    }
    let lambda = 1.0 + l * l + 1.5 * l * l * gamma_bar;
    let m = (1.0 / 6.0 + 0.75 * gamma) * m1 + 1.5 * m2 + (1.0 + 1.5 * gamma) * m3;
    Ok((lambda, m))
}

/// Finite-time accuracy curve `gamma M_L^{1/2} e^{lambda_L t}`.
pub fn prop4_curve(lambda_l: f64, m_l: f64, gamma: f64, t: f64) -> f64 {
    gamma * m_l.sqrt() * (lambda_l * t).exp()
}

/// `W_{p,d}(pi_gamma, pi)` bound from the chain's contraction.
pub fn thm5_bound(metric: &MetricSpec, d: usize, conv: &Convergence, lambda_l: f64, m_l: f64, gamma: f64) -> Result<f64> {
    nonneg("M_L", m_l)?;
    conv.bound(lambda_l, gamma, metric.c_d(d) * m_l.sqrt())
}

/// `M~_L` from the five smoothed integrals.
pub fn mtilde_l(gamma: f64, mt: [f64; 5]) -> Result<f64> {
    for (i, v) in mt.iter().enumerate() {
        nonneg(&format!("Mtilde{}", i + 1), *v)?;
    }
    let [m1, m2, m3, m4, m5] = mt;
    Ok(m1 / 6.0 + 0.5 * gamma.sqrt() * (m2 * m3).sqrt() + (m2 * m4).sqrt() / std::f64::consts::SQRT_2 + 0.5 * m5)
}

/// Finite-time accuracy from `pi_gamma`:
/// `gamma (1 + gamma)^{1/2} M~_L^{1/2} e^{(1 + kappa) t}`.
pub fn prop6_curve(kappa: f64, mtilde_l: f64, gamma: f64, t: f64) -> f64 {
    gamma * (1.0 + gamma).sqrt() * mtilde_l.sqrt() * ((1.0 + kappa) * t).exp()
}

/// `W_{p,d}(pi_gamma, pi)` bound from the diffusion's contraction and the
/// one-sided Lipschitz constant `kappa > 0`.
pub fn thm7_bound(metric: &MetricSpec, d: usize, conv: &Convergence, kappa: f64, mtilde_l: f64, gamma: f64) -> Result<f64> {
    positive("kappa", kappa)?;
    nonneg("Mtilde_L", mtilde_l)?;
    conv.bound(1.0 + kappa, gamma, metric.c_d(d) * mtilde_l.sqrt())
}

/// `(lambda_H, M_H)` for one unadjusted HMC transition.
pub fn prop10_constants(l: f64, gamma: f64, m1: f64, m2: f64, m4: f64, m5: f64) -> Result<(f64, f64)> {
    for (n, v) in [("L", l), ("gamma", gamma), ("M1", m1), ("M2", m2), ("M4", m4), ("M5", m5)] {
        nonneg(n, v)?;
    }
    let rl = l.sqrt();
    let lambda = rl * (1.0 + 0.5 * gamma * rl + 0.25 * gamma * gamma * l);
    let m = m1 + (1.0 + gamma * gamma * l) * l * m2 + 2.0 * m4 + ((2.0 + 0.5 * gamma * l).powi(2) + l) * m5;
    Ok((lambda, m))
}

/// One-transition accuracy `gamma^2 L^{-1} e^{lambda_H T} M_H^{1/2}`.
pub fn prop10_bound(l: f64, duration: f64, lambda_h: f64, m_h: f64, gamma: f64) -> Result<f64> {
    positive("L", l)?;
    Ok(gamma * gamma / l * (lambda_h * duration).exp() * m_h.sqrt())
}

/// `gamma^2 (c L)^{-1} e^{lambda_H T} C_d M_H^{1/2}`.
#[allow(clippy::too_many_arguments)]
pub fn thm11_bound(
    metric: &MetricSpec,
    d: usize,
    c: f64,
    l: f64,
    duration: f64,
    lambda_h: f64,
    m_h: f64,
    gamma: f64,
) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid(format!("contraction c must lie in (0, 1], got {c}")));
    }
    positive("L", l)?;
    positive("T", duration)?;
    nonneg("M_H", m_h)?;
    Ok(gamma * gamma / (c * l) * (lambda_h * duration).exp() * metric.c_d(d) * m_h.sqrt())
}

const CTV_GRID: usize = 10_000;

fn ctv_ratio(kappa: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    u / (-(-2.0 * kappa * u).exp_m1()).sqrt()
}

/// `sqrt(kappa / pi) sup_{u in [0, 2]} u / (1 - e^{-2 kappa u})^{1/2}` on a
/// grid of `grid` points with golden-section refinement around the best one.
pub fn thm8_ctv_grid(kappa: f64, grid: usize) -> Result<f64> {
    positive("kappa", kappa)?;
    let grid = grid.max(2);
    let h = 2.0 / grid as f64;
    let (best_i, _) = (0..=grid)
        .map(|i| (i, ctv_ratio(kappa, i as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut lo = (best_i as f64 - 1.0).max(0.0) * h;
    let mut hi = ((best_i as f64 + 1.0) * h).min(2.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if ctv_ratio(kappa, a) >= ctv_ratio(kappa, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let sup = [lo, hi, 0.5 * (lo + hi), best_i as f64 * h]
        .into_iter()
        .map(|u| ctv_ratio(kappa, u))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((kappa / std::f64::consts::PI).sqrt() * sup)
}

pub fn thm8_ctv(kappa: f64) -> Result<f64> {
    thm8_ctv_grid(kappa, CTV_GRID)
}

/// `ceil(log(1/gamma) / log 2)`.
pub fn halving_count(gamma: f64) -> Result<u32> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(((1.0 / gamma).ln() / std::f64::consts::LN_2 - 1e-12).ceil().max(0.0) as u32)
}

/// `4 C_tv A_tv e^{2 lambda_tv}`.
pub fn mtilde7(c_tv: f64, a_tv: f64, lambda_tv: f64) -> Result<f64> {
    nonneg("C_tv", c_tv)?;
    nonneg("A_tv", a_tv)?;
    nonneg("lambda_tv", lambda_tv)?;
    Ok(4.0 * c_tv * a_tv * (2.0 * lambda_tv).exp())
}

/// Total-variation bias bound
/// `2^{-3/2} L gamma (d + gamma M~6 / 3)^{1/2} + gamma C_tv B_tv + gamma n(gamma) M~7`.
pub fn thm9_bound(l: f64, gamma: f64, d: usize, mtilde6: f64, c_tv: f64, b_tv: f64, mtilde7: f64) -> Result<f64> {
    let n = halving_count(gamma)?;
    for (name, v) in [("L", l), ("Mtilde6", mtilde6), ("C_tv", c_tv), ("B_tv", b_tv), ("Mtilde7", mtilde7)] {
        nonneg(name, v)?;
    }
    Ok(2f64.powf(-1.5) * l * gamma * (d as f64 + gamma * mtilde6 / 3.0).sqrt()
        + gamma * c_tv * b_tv
        + gamma * n as f64 * mtilde7)
}

/// Lyapunov-drift moment bounds: the stationary bound
/// `b a^{-gamma_bar} / ((1 - a) log(1/a))` and the continuous-time bound
/// `e^{-alpha t} W0 + (1 - e^{-alpha t}) beta / alpha`.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_bounds(a: f64, b: f64, gamma_bar: f64, alpha: f64, beta: f64, w0: f64, t: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::invalid(format!("a must lie in (0, 1), got {a}")));
    }
    nonneg("b", b)?;
    nonneg("gamma_bar", gamma_bar)?;
    positive("alpha", alpha)?;
    nonneg("beta", beta)?;
    nonneg("t", t)?;
    let stationary = b * a.powf(-gamma_bar) / ((1.0 - a) * (1.0 / a).ln());
    let decay = (-alpha * t).exp();
    Ok((stationary, decay * w0 + (1.0 - decay) * beta / alpha))
}

/// Profile shapes accepted from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `psi(t) = a e^{-c t}`.
    Exponential { a: f64, c: f64 },
    /// `psi(t) = a (1 + t)^{-power}`.
    Polynomial { a: f64, power: f64 },
}

impl ProfileSpec {
    pub fn profile(&self) -> Profile {
        match *self {
            ProfileSpec::Exponential { a, c } => Arc::new(move |t| a * (-c * t).exp()),
            ProfileSpec::Polynomial { a, power } => Arc::new(move |t| a * (1.0 + t).powf(-power)),
        }
    }
}

/// A contraction assumption as written in a configuration file: either
/// `(A, c)` or a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ContractionInput {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<ProfileSpec>,
}

impl ContractionInput {
    pub fn geometric(a: f64, c: f64) -> Self {
        ContractionInput {
            a: Some(a),
            c: Some(c),
            psi: None,
        }
    }

    pub fn resolve(&self) -> Result<Convergence> {
        match (self.a, self.c, self.psi) {
            (Some(a), Some(c), None) => {
                nonneg("A", a)?;
                positive("c", c)?;
                Ok(Convergence::Geometric { a, c })
            }
            (None, None, Some(psi)) => Convergence::from_profile(&*psi.profile()),
            _ => Err(Error::Config(
                "a contraction assumption needs either both `A` and `c`, or a `psi` profile".into(),
            )),
        }
    }
}

/// Constants of the total-variation contraction assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TvInputs {
    #[serde(rename = "A_tv")]
    pub a_tv: f64,
    #[serde(rename = "B_tv")]
    pub b_tv: f64,
    pub lambda_tv: f64,
    /// Defaults to the smoothing constant computed from `kappa`.
    #[serde(rename = "C_tv", default, skip_serializing_if = "Option::is_none")]
    pub c_tv: Option<f64>,
}

#[cfg(test)]
mod tests;
