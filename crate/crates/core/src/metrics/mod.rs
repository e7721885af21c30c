//! Base distances on `R^d`, Wasserstein distances (empirical 1D, closed-form
//! Gaussian, product aggregation, sliced proxy) and total variation between
//! centered isotropic Gaussians.

pub mod quad;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sampler::{Purpose, RngStream};
use crate::stats::{mean, norm, variance};

/// Bootstrap resamples used for empirical standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Minimum number of projection directions for the sliced proxy.
pub const MIN_DIRECTIONS: usize = 16;

pub const TV_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseMetric {
    Euclidean,
    Lq { q: f64 },
    NormalizedLq { q: f64 },
}

impl std::fmt::Display for BaseMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaseMetric::Euclidean => write!(f, "euclidean"),
            BaseMetric::Lq { q } => write!(f, "lq({q})"),
            BaseMetric::NormalizedLq { q } => write!(f, "normalized-lq({q})"),
        }
    }
}

/// `W_{p, d}` with base distance `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub p: f64,
    pub base: BaseMetric,
    /// Lower-equivalence factor `m` with `m |x - y| <= d(x, y)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence_m: Option<f64>,
}

fn check_order(name: &str, v: f64) -> Result<()> {
    if (1.0..=2.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in [1, 2], got {v}")))
    }
}

impl MetricSpec {
    pub fn new(p: f64, base: BaseMetric) -> Result<Self> {
        let spec = MetricSpec {
            p,
            base,
            equivalence_m: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn euclidean(p: f64) -> Result<Self> {
        Self::new(p, BaseMetric::Euclidean)
    }

    pub fn validate(&self) -> Result<()> {
        check_order("p", self.p)?;
        match self.base {
            BaseMetric::Euclidean => {}
            BaseMetric::Lq { q } | BaseMetric::NormalizedLq { q } => check_order("q", q)?,
        }
        if let Some(m) = self.equivalence_m {
            if !(m > 0.0) {
                return Err(Error::invalid("equivalence factor m must be positive"));
            }
        }
        Ok(())
    }

    /// Constant with `d(x, y) <= C_d |x - y|` on `R^d`.
    pub fn c_d(&self, d: usize) -> f64 {
        match self.base {
            BaseMetric::Lq { q } => (d as f64).powf(1.0 / q - 0.5),
            _ => 1.0,
        }
    }

    /// Exponent `e` such that `W_{p,d}` of a product law is `d^e` times the
    /// one-dimensional `W_p`, when the metric is separable.
    pub fn product_exponent(&self) -> Option<f64> {
        match self.base {
            BaseMetric::Euclidean if self.p == 2.0 => Some(0.5),
            BaseMetric::Lq { q } if q == self.p => Some(1.0 / q),
            BaseMetric::NormalizedLq { q } if q == self.p => Some(0.0),
            _ => None,
        }
    }
}

fn lq_norm(x: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q == 1.0 {
        x.map(f64::abs).sum()
    } else if q == 2.0 {
        x.map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

pub fn base_distance(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    let diff = x.iter().zip(y).map(|(a, b)| a - b);
    Ok(match metric.base {
        BaseMetric::Euclidean => lq_norm(diff, 2.0),
        BaseMetric::Lq { q } => lq_norm(diff, q),
        BaseMetric::NormalizedLq { q } => (x.len() as f64).powf(-1.0 / q) * lq_norm(diff, q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    ClosedForm,
    Empirical1d,
    ProductAggregate,
    /// Heuristic proxy; not an estimator of `W_p` itself.
    SlicedProxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: DistanceMethod,
    pub n_a: usize,
    pub n_b: usize,
}

impl DistanceEstimate {
    pub fn closed_form(value: f64) -> Self {
        DistanceEstimate {
            value,
            stderr: 0.0,
            method: DistanceMethod::ClosedForm,
            n_a: 0,
            n_b: 0,
        }
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// `W_p` between two sorted samples of equal size.
pub fn w1d_sorted(a: &[f64], b: &[f64], p: f64) -> f64 {
    let n = a.len() as f64;
    let s: f64 = if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum()
    };
    (s / n).powf(1.0 / p)
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "sample counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: a.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    Ok(())
}

/// Empirical `W_p` between two one-dimensional samples via the comonotone
/// (sorted) coupling; standard error from a nonparametric bootstrap with
/// [`BOOTSTRAP_RESAMPLES`] resamples drawn from `stream`.
pub fn w1d_empirical(a: &[f64], b: &[f64], p: f64, stream: &RngStream) -> Result<DistanceEstimate> {
    check_samples(a, b)?;
    check_order("p", p)?;
    let n = a.len();
    let value = w1d_sorted(&sorted(a), &sorted(b), p);
    let mut rng = stream.child(0, Purpose::Bootstrap).generator();
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    let reps: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for v in ra.iter_mut() {
                *v = a[rng.index(n)];
            }
            for v in rb.iter_mut() {
                *v = b[rng.index(n)];
            }
            ra.sort_unstable_by(f64::total_cmp);
            rb.sort_unstable_by(f64::total_cmp);
            w1d_sorted(&ra, &rb, p)
        })
        .collect();
    Ok(DistanceEstimate {
        value,
        stderr: variance(&reps).sqrt(),
        method: DistanceMethod::Empirical1d,
        n_a: n,
        n_b: n,
    })
}

/// `E|G|^p` for a standard Gaussian vector `G` in `R^d`.
pub fn gaussian_abs_moment(d: usize, p: f64) -> f64 {
    let d = d as f64;
    (0.5 * p * std::f64::consts::LN_2 + libm::lgamma(0.5 * (d + p)) - libm::lgamma(0.5 * d)).exp()
}

/// `W_p` (Euclidean) between `N(0, sigma1^2 I_d)` and `N(0, sigma2^2 I_d)`,
/// attained by the scaling coupling: `|sigma1 - sigma2| E[|G|^p]^{1/p}`.
pub fn gaussian_w(p: f64, d: usize, sigma1: f64, sigma2: f64) -> Result<DistanceEstimate> {
    check_order("p", p)?;
    if !(sigma1 > 0.0 && sigma2 > 0.0) {
        return Err(Error::invalid("standard deviations must be positive"));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let m = if p == 2.0 {
        (d as f64).sqrt()
    } else {
        gaussian_abs_moment(d, p).powf(1.0 / p)
    };
    Ok(DistanceEstimate::closed_form((sigma1 - sigma2).abs() * m))
}

/// Closed-form `W_{p,d}` between centered isotropic Gaussians for every
/// metric where it is known: Euclidean base, or separable `l^q` with `p = q`.
pub fn gaussian_w_metric(metric: &MetricSpec, d: usize, sigma1: f64, sigma2: f64) -> Result<DistanceEstimate> {
    metric.validate()?;
    match metric.base {
        BaseMetric::Euclidean => gaussian_w(metric.p, d, sigma1, sigma2),
        BaseMetric::Lq { q } | BaseMetric::NormalizedLq { q } if q == 2.0 => {
            let w = gaussian_w(metric.p, d, sigma1, sigma2)?;
            let scale = if matches!(metric.base, BaseMetric::NormalizedLq { .. }) {
                (d as f64).powf(-0.5)
            } else {
                1.0
            };
            Ok(DistanceEstimate::closed_form(w.value * scale))
        }
        _ => match metric.product_exponent() {
            Some(e) => {
                let w1 = gaussian_w(metric.p, 1, sigma1, sigma2)?.value;
                Ok(DistanceEstimate::closed_form((d as f64).powf(e) * w1))
            }
            None => Err(Error::invalid(format!(
                "no closed form for W_{} over {} between Gaussians",
                metric.p, metric.base
            ))),
        },
    }
}

/// `W_2` of a product of `d` identical factors from the per-factor `W_2`.
pub fn product_w2(per_coordinate_w2: f64, d: usize) -> Result<f64> {
    if !(per_coordinate_w2 >= 0.0) {
        return Err(Error::invalid("per-coordinate distance must be nonnegative"));
    }
    Ok((d as f64).sqrt() * per_coordinate_w2)
}

/// Lifts a per-coordinate `W_p` estimate to `W_{p,d}` of the product law.
pub fn product_aggregate(metric: &MetricSpec, per_coordinate: DistanceEstimate, d: usize) -> Result<DistanceEstimate> {
    let e = metric.product_exponent().ok_or_else(|| {
        Error::invalid(format!(
            "W_{} over {} does not factor over coordinates",
            metric.p, metric.base
        ))
    })?;
    let s = (d as f64).powf(e);
    Ok(DistanceEstimate {
        value: s * per_coordinate.value,
        stderr: s * per_coordinate.stderr,
        method: DistanceMethod::ProductAggregate,
        ..per_coordinate
    })
}

/// Sliced-Wasserstein proxy: the average of one-dimensional `W_p` over
/// `n_directions` random unit directions.
pub fn sliced_w(
    samples_a: &[Vec<f64>],
    samples_b: &[Vec<f64>],
    p: f64,
    n_directions: usize,
    stream: &RngStream,
) -> Result<DistanceEstimate> {
    if n_directions < MIN_DIRECTIONS {
        return Err(Error::invalid(format!(
            "at least {MIN_DIRECTIONS} directions required, got {n_directions}"
        )));
    }
    if samples_a.len() != samples_b.len() {
        return Err(Error::invalid("sample counts differ"));
    }
    let d = samples_a.first().map(Vec::len).unwrap_or(0);
    for s in samples_a.iter().chain(samples_b) {
        check_dim(d, s.len())?;
    }
    let mut dirs = stream.child(0, Purpose::Directions).generator();
    let per_dir = |k: usize, theta: &[f64]| -> Result<DistanceEstimate> {
        let proj = |s: &Vec<f64>| s.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>();
        let a: Vec<f64> = samples_a.iter().map(proj).collect();
        let b: Vec<f64> = samples_b.iter().map(proj).collect();
        w1d_empirical(&a, &b, p, &stream.child(k as u64, Purpose::Bootstrap))
    };
    let thetas: Vec<Vec<f64>> = (0..n_directions)
        .map(|_| loop {
            let g = dirs.normal_vec(d);
            let n = norm(&g);
            if n > 0.0 {
                break g.into_iter().map(|v| v / n).collect();
            }
        })
        .collect();
    let estimates = thetas
        .iter()
        .enumerate()
        .map(|(k, t)| per_dir(k, t))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let boot = mean(&estimates.iter().map(|e| e.stderr * e.stderr).collect::<Vec<_>>());
    let between = variance(&values) / n_directions as f64;
    Ok(DistanceEstimate {
        value: mean(&values),
        stderr: (between + boot).sqrt(),
        method: DistanceMethod::SlicedProxy,
        n_a: samples_a.len(),
        n_b: samples_b.len(),
    })
}

fn log_chi_density(d: f64, sigma: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let s = r / sigma;
    (d - 1.0) * s.ln() - 0.5 * s * s - (0.5 * d - 1.0) * std::f64::consts::LN_2 - libm::lgamma(0.5 * d) - sigma.ln()
}

/// Total variation between `N(0, sigma1^2 I_d)` and `N(0, sigma2^2 I_d)`,
/// computed as the total variation of the radial laws (scaled chi
/// distributions) by adaptive quadrature split at the density crossing.
pub fn tv_isotropic_gaussians(d: usize, sigma1: f64, sigma2: f64) -> Result<f64> {
    if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
        return Err(Error::invalid("standard deviations must be positive"));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if sigma1 == sigma2 {
        return Ok(0.0);
    }
    let df = d as f64;
    let (lo, hi) = if sigma1 < sigma2 { (sigma1, sigma2) } else { (sigma2, sigma1) };
    let crossing = (2.0 * df * (hi / lo).ln() / (lo.powi(-2) - hi.powi(-2))).sqrt();
    let r_max = 12.0 * hi * df.sqrt();
    // the narrower law dominates below the crossing, the wider one above
    let diff = |r: f64| log_chi_density(df, lo, r).exp() - log_chi_density(df, hi, r).exp();
    let c = crossing.min(r_max);
    let tol = 0.25 * TV_TOLERANCE;
    let below = quad::integrate(|r| diff(r).max(0.0), 0.0, c, tol, 64)?;
    let above = quad::integrate(|r| (-diff(r)).max(0.0), c, r_max, tol, 64)?;
    let v = 0.5 * (below + above);
    Ok(v.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests;
