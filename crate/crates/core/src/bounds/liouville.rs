//! The Liouville operator `L^H` of the Hamiltonian flow applied to the
//! drift, and Monte-Carlo checks of its Gaussian-momentum averages.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::model::TargetModel;
use crate::sampler::RngStream;
use crate::stats::{batch_means, norm_sq, Estimate};

/// `(L^H b)(q, p) = Db(q) p`.
pub fn liouville_first(model: &TargetModel, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    model.jacobian_apply(q, p)
}

/// `((L^H)^2 b)(q, p) = D^2 b_i(q)[p, p] e_i + Db(q) b(q)`.
pub fn liouville_second(model: &TargetModel, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let mut out = model.hessian_form(q, p)?;
    let b = model.drift(q)?;
    for (o, v) in out.iter_mut().zip(model.jacobian_apply(q, &b)?) {
        *o += v;
    }
    Ok(out)
}

/// A Monte-Carlo mean next to the value it should equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub estimate: Estimate,
    pub target: f64,
}

impl IdentityCheck {
    /// Within `sigmas` standard errors, allowing rounding slack for
    /// integrands that do not depend on the momentum.
    pub fn holds(&self, sigmas: f64) -> bool {
        let slack = 1e-9 * self.target.abs().max(1.0);
        (self.estimate.value - self.target).abs() <= sigmas * self.estimate.stderr + slack
    }
}

fn momentum_average(
    model: &TargetModel,
    q: &[f64],
    n: usize,
    stream: &RngStream,
    f: impl Fn(&[f64]) -> Result<f64>,
) -> Result<Estimate> {
    check_dim(model.dimension(), q.len())?;
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut rng = stream.generator();
    let values = (0..n)
        .map(|_| f(&rng.normal_vec(q.len())))
        .collect::<Result<Vec<_>>>()?;
    Ok(batch_means(&values))
}

/// `E_p |L^H b(q, p)|^2 = ||Db(q)||_F^2`.
pub fn check_first_identity(model: &TargetModel, q: &[f64], n: usize, stream: &RngStream) -> Result<IdentityCheck> {
    let estimate = momentum_average(model, q, n, stream, |p| Ok(norm_sq(&liouville_first(model, q, p)?)))?;
    Ok(IdentityCheck {
        estimate,
        target: model.jacobian_frobenius_sq(q)?,
    })
}

/// `E_p |(L^H)^2 b(q, p)|^2 = |L^L b(q)|^2 + 2 ||D^2 b(q)||_F^2`.
pub fn check_second_identity(model: &TargetModel, q: &[f64], n: usize, stream: &RngStream) -> Result<IdentityCheck> {
    let estimate = momentum_average(model, q, n, stream, |p| Ok(norm_sq(&liouville_second(model, q, p)?)))?;
    let hess = model
        .hessian_frobenius_sq(q)?
        .ok_or_else(|| Error::invalid("model has no second-derivative oracle"))?;
    Ok(IdentityCheck {
        estimate,
        target: norm_sq(&model.generator_on_drift(q)?) + 2.0 * hess,
    })
}

/// Componentwise check of `E_p (L^H)^2 b(q, p) = L^L b(q)`.
pub fn check_second_mean(model: &TargetModel, q: &[f64], n: usize, stream: &RngStream) -> Result<Vec<IdentityCheck>> {
    check_dim(model.dimension(), q.len())?;
    let mut rng = stream.generator();
    let draws = (0..n)
        .map(|_| liouville_second(model, q, &rng.normal_vec(q.len())))
        .collect::<Result<Vec<_>>>()?;
    let target = model.generator_on_drift(q)?;
    Ok((0..q.len())
        .map(|i| IdentityCheck {
            estimate: batch_means(&draws.iter().map(|v| v[i]).collect::<Vec<_>>()),
            target: target[i],
        })
        .collect())
}

/// `E (p^T A p)^2 = 2 ||A||_F^2 + Tr(A)^2` for symmetric `A`.
pub fn check_quadratic_form_moment(a: &[Vec<f64>], n: usize, stream: &RngStream) -> Result<IdentityCheck> {
    let d = a.len();
    for (i, row) in a.iter().enumerate() {
        check_dim(d, row.len())?;
        for j in 0..d {
            if (row[j] - a[j][i]).abs() > 1e-12 * (1.0 + row[j].abs()) {
                return Err(Error::invalid("matrix must be symmetric"));
            }
        }
    }
    let mut rng = stream.generator();
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let p = rng.normal_vec(d);
            let form: f64 = (0..d).map(|i| p[i] * a[i].iter().zip(&p).map(|(x, y)| x * y).sum::<f64>()).sum();
            form * form
        })
        .collect();
    let frob: f64 = a.iter().flatten().map(|v| v * v).sum();
    let trace: f64 = (0..d).map(|i| a[i][i]).sum();
    Ok(IdentityCheck {
        estimate: batch_means(&values),
        target: 2.0 * frob + trace * trace,
    })
}
