//! Monte-Carlo estimators of the integrals entering the bounds.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::TargetModel;
use crate::sampler::{verlet_step, KernelKind, KernelSpec, Purpose, RngStream};
use crate::stats::{batch_means, norm_sq, Estimate};

/// Fewest samples accepted by the estimators.
pub const MIN_SAMPLES: usize = 1000;

/// Times at which `pi_gamma P_t` is probed for the sup over `t`.
pub const SNAPSHOT_TIMES: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];

fn check_samples(model: &TargetModel, samples: &[Vec<f64>]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    for s in samples {
        check_dim(model.dimension(), s.len())?;
    }
    Ok(())
}

/// Taming error density `Gamma(x) = |b|^2 / (1 + gamma |b|)`, so that
/// `|b - b~_gamma| = gamma Gamma`.
pub fn taming_gamma(b: &[f64], gamma: f64) -> f64 {
    let s = norm_sq(b);
    s / (1.0 + gamma * s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MQuantities {
    #[serde(rename = "M1")]
    pub m1: Estimate,
    #[serde(rename = "M2")]
    pub m2: Estimate,
    #[serde(rename = "M3")]
    pub m3: Estimate,
    #[serde(rename = "M4")]
    pub m4: Estimate,
    #[serde(rename = "M5")]
    pub m5: Estimate,
}

/// `M1 = E|L^L b|^2`, `M2 = E||Db||_F^2`, `M3 = E Gamma^2` (zero unless
/// `tamed`), `M4 = E||D^2 b||_F^2` under samples of `pi`. `M5` is zero
/// because the Verlet integrator here uses `b` itself; see [`estimate_m5`].
pub fn estimate_m_quantities(
    model: &TargetModel,
    pi_samples: &[Vec<f64>],
    gamma: f64,
    tamed: bool,
) -> Result<MQuantities> {
    check_samples(model, pi_samples)?;
    let n = pi_samples.len();
    let (mut v1, mut v2, mut v3, mut v4) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for x in pi_samples {
        v1.push(norm_sq(&model.generator_on_drift(x)?));
        v2.push(model.jacobian_frobenius_sq(x)?);
        if tamed {
            v3.push(taming_gamma(&model.drift(x)?, gamma).powi(2));
        }
        let h = model.hessian_frobenius_sq(x)?.ok_or_else(|| {
            Error::invalid(format!("model {} has no second-derivative oracle", model.name()))
        })?;
        v4.push(h);
    }
    Ok(MQuantities {
        m1: batch_means(&v1),
        m2: batch_means(&v2),
        m3: if tamed { batch_means(&v3) } else { Estimate::exact(0.0) },
        m4: batch_means(&v4),
        m5: Estimate::exact(0.0),
    })
}

/// `sup_{t in [0, T]} E Lambda(q_t)^2` with `q_t` the Verlet position from a
/// `pi` sample and a fresh momentum; the sup runs over the Verlet grid.
pub fn estimate_m5(
    model: &TargetModel,
    duration: f64,
    gamma: f64,
    pi_samples: &[Vec<f64>],
    stream: &RngStream,
    lambda: &dyn Fn(&[f64]) -> f64,
) -> Result<Estimate> {
    check_samples(model, pi_samples)?;
    let steps = crate::sampler::leapfrog_count(duration, gamma)?;
    let mut per_time = vec![Vec::with_capacity(pi_samples.len()); steps + 1];
    for (i, q0) in pi_samples.iter().enumerate() {
        let mut rng = stream.child(i as u64, Purpose::Momentum).generator();
        let mut q = q0.clone();
        let mut p = rng.normal_vec(q.len());
        per_time[0].push(lambda(&q).powi(2));
        for row in per_time.iter_mut().skip(1) {
            (q, p) = verlet_step(model, gamma, &q, &p)?;
            row.push(lambda(&q).powi(2));
        }
    }
    Ok(sup_estimate(per_time.iter().map(|v| batch_means(v))).1)
}

fn sup_estimate(it: impl Iterator<Item = Estimate>) -> (usize, Estimate) {
    it.enumerate()
        .fold((0, Estimate::exact(f64::NEG_INFINITY)), |best, (i, e)| {
            if e.value > best.1.value {
                (i, e)
            } else {
                best
            }
        })
}

/// Geometric grid of `n` step sizes on `[gamma_bar / 256, gamma_bar]`.
pub fn u_grid(gamma_bar: f64, n: usize) -> Vec<f64> {
    let lo = gamma_bar / 256.0;
    if n == 1 {
        return vec![gamma_bar];
    }
    (0..n)
        .map(|i| lo * (gamma_bar / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// How `pi_gamma P_t` is approximated for the sup over `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SemigroupApprox {
    /// Exact Ornstein-Uhlenbeck transition (Gaussian targets only).
    Exact,
    /// Euler-Maruyama with the given fine step.
    FineEuler { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTildeQuantities {
    #[serde(rename = "Mtilde1")]
    pub mt1: Estimate,
    #[serde(rename = "Mtilde2")]
    pub mt2: Estimate,
    #[serde(rename = "Mtilde3")]
    pub mt3: Estimate,
    #[serde(rename = "Mtilde4")]
    pub mt4: Estimate,
    #[serde(rename = "Mtilde5")]
    pub mt5: Estimate,
    #[serde(rename = "Mtilde6")]
    pub mt6: Estimate,
    /// Step `u` attaining the grid maximum for `Mtilde1` and `Mtilde2`.
    pub argmax_u: [f64; 2],
    /// Time attaining the snapshot maximum for `Mtilde3` and `Mtilde4`.
    pub argmax_t: [f64; 2],
    pub semigroup: SemigroupApprox,
}

/// `M~6 = E|b|^2` under `pi_gamma` samples.
pub fn estimate_mtilde6(model: &TargetModel, pi_gamma_samples: &[Vec<f64>]) -> Result<Estimate> {
    check_samples(model, pi_gamma_samples)?;
    let v = pi_gamma_samples
        .iter()
        .map(|x| model.drift(x).map(|b| norm_sq(&b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(batch_means(&v))
}

/// Estimates `M~1 .. M~6` from samples of the chain's invariant law.
///
/// `M~1`, `M~2` take the max over [`u_grid`] of the smoothed integrals with
/// fresh Gaussian draws; `M~3`, `M~4` take the max over [`SNAPSHOT_TIMES`]
/// after pushing each sample through the diffusion semigroup.
pub fn prop6_quantities(
    kernel: &KernelSpec,
    gamma_bar: f64,
    pi_gamma_samples: &[Vec<f64>],
    stream: &RngStream,
    u_grid_size: usize,
    semigroup: SemigroupApprox,
) -> Result<MTildeQuantities> {
    let model = kernel.model();
    check_samples(model, pi_gamma_samples)?;
    if u_grid_size < 8 {
        return Err(Error::invalid("u grid needs at least 8 points"));
    }
    let tamed = match kernel.kind() {
        KernelKind::Ula => false,
        KernelKind::TamedUla => true,
        other => return Err(Error::invalid(format!("kernel {other} is not an Euler scheme"))),
    };
    let gamma = kernel.gamma().unwrap_or_default();
    if gamma > gamma_bar {
        return Err(Error::invalid("gamma exceeds gamma_bar"));
    }
    let variance = model.gaussian_variance();
    if semigroup == SemigroupApprox::Exact && variance.is_none() {
        return Err(Error::invalid("exact semigroup is only available for Gaussian targets"));
    }
    let d = model.dimension();
    let grid = u_grid(gamma_bar, u_grid_size);
    let n = pi_gamma_samples.len();

    let mut g1 = vec![Vec::with_capacity(n); grid.len()];
    let mut g2 = vec![Vec::with_capacity(n); grid.len()];
    let mut t3 = vec![Vec::with_capacity(n); SNAPSHOT_TIMES.len()];
    let mut t4 = vec![Vec::with_capacity(n); SNAPSHOT_TIMES.len()];
    let mut v5 = Vec::with_capacity(n);
    let mut v6 = Vec::with_capacity(n);
    let mut y = vec![0.0; d];
    for (i, x) in pi_gamma_samples.iter().enumerate() {
        let mut rng = stream.child(i as u64, Purpose::Smoothing).generator();
        let b = model.drift(x)?;
        let mut bt = b.clone();
        if tamed {
            let s = 1.0 / (1.0 + gamma * norm_sq(&b).sqrt());
            bt.iter_mut().for_each(|v| *v *= s);
        }
        v5.push(if tamed { taming_gamma(&b, gamma).powi(2) } else { 0.0 });
        v6.push(norm_sq(&b));
        for (k, &u) in grid.iter().enumerate() {
            let s = (2.0 * u).sqrt();
            for j in 0..d {
                y[j] = x[j] + u * bt[j] + s * rng.normal();
            }
            // L^D b(x, y) = Db(y) b(x) + Delta b(y)
            let mut ld = model.jacobian_apply(&y, &b)?;
            for (l, v) in ld.iter_mut().zip(model.laplacian_of_drift(&y)?) {
                *l += v;
            }
            g1[k].push(norm_sq(&ld));
            g2[k].push(model.jacobian_frobenius_sq(&y)?);
        }
        let mut z = x.clone();
        let mut t_now = 0.0;
        for (k, &t) in SNAPSHOT_TIMES.iter().enumerate() {
            evolve(model, semigroup, variance, &mut z, t - t_now, &mut rng)?;
            t_now = t;
            t3[k].push(norm_sq(&model.generator_on_drift(&z)?));
            t4[k].push(model.jacobian_frobenius_sq(&z)?);
        }
    }
    let (i1, mt1) = sup_estimate(g1.iter().map(|v| batch_means(v)));
    let (i2, mt2) = sup_estimate(g2.iter().map(|v| batch_means(v)));
    let (j3, mt3) = sup_estimate(t3.iter().map(|v| batch_means(v)));
    let (j4, mt4) = sup_estimate(t4.iter().map(|v| batch_means(v)));
    Ok(MTildeQuantities {
        mt1,
        mt2,
        mt3,
        mt4,
        mt5: if tamed { batch_means(&v5) } else { Estimate::exact(0.0) },
        mt6: batch_means(&v6),
        argmax_u: [grid[i1], grid[i2]],
        argmax_t: [SNAPSHOT_TIMES[j3], SNAPSHOT_TIMES[j4]],
        semigroup,
    })
}

fn evolve(
    model: &TargetModel,
    semigroup: SemigroupApprox,
    variance: Option<f64>,
    z: &mut [f64],
    dt: f64,
    rng: &mut crate::sampler::GaussianSource,
) -> Result<()> {
    if dt <= 0.0 {
        return Ok(());
    }
    match semigroup {
        SemigroupApprox::Exact => {
            let v = variance.unwrap_or(1.0);
            let decay = (-dt / v).exp();
            let s = (v * -(-2.0 * dt / v).exp_m1()).sqrt();
            for zi in z.iter_mut() {
                *zi = decay * *zi + s * rng.normal();
            }
        }
        SemigroupApprox::FineEuler { step } => {
            if !(step > 0.0) {
                return Err(Error::invalid("fine Euler step must be positive"));
            }
            let n = (dt / step).ceil() as usize;
            let h = dt / n as f64;
            let s = (2.0 * h).sqrt();
            let mut b = vec![0.0; z.len()];
            for _ in 0..n {
                model.drift_into(z, &mut b);
                for j in 0..z.len() {
                    z[j] += h * b[j] + s * rng.normal();
                }
            }
        }
    }
    Ok(())
}
