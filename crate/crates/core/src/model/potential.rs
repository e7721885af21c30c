//! One-dimensional potentials `V` used to build product and mean-field drifts.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar potential with hand-coded derivatives.
///
/// `value` is only needed for the exact 1D marginal sampler; the drift
/// constructors require `first`, `second` and `third`.
#[derive(Clone)]
pub struct ScalarPotential {
    pub name: String,
    pub value: Option<ScalarFn>,
    pub first: Option<ScalarFn>,
    pub second: Option<ScalarFn>,
    pub third: Option<ScalarFn>,
    /// Known global suprema, used instead of a grid search when present.
    pub sup_abs_second: Option<f64>,
    pub sup_neg_second: Option<f64>,
    pub sup_abs_third: Option<f64>,
    /// Set when `exp(-V)` is a centered Gaussian with this variance.
    pub gaussian_variance: Option<f64>,
}

impl fmt::Debug for ScalarPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarPotential")
            .field("name", &self.name)
            .field("has_value", &self.value.is_some())
            .field("has_first", &self.first.is_some())
            .field("has_second", &self.second.is_some())
            .field("has_third", &self.third.is_some())
            .finish()
    }
}

/// Derivatives of a potential that passed validation.
#[derive(Clone)]
pub(crate) struct Derivatives {
    pub first: ScalarFn,
    pub second: ScalarFn,
    pub third: ScalarFn,
}

impl ScalarPotential {
    /// `V(x) = x^2 / 2`.
    pub fn gaussian() -> Self {
        ScalarPotential {
            name: "gaussian".into(),
            value: Some(Arc::new(|x| 0.5 * x * x)),
            first: Some(Arc::new(|x| x)),
            second: Some(Arc::new(|_| 1.0)),
            third: Some(Arc::new(|_| 0.0)),
            sup_abs_second: Some(1.0),
            sup_neg_second: Some(-1.0),
            sup_abs_third: Some(0.0),
            gaussian_variance: Some(1.0),
        }
    }

    /// `V(x) = x^4 / 4 - x^2 / 2`.
    pub fn double_well() -> Self {
        ScalarPotential {
            name: "double-well".into(),
            value: Some(Arc::new(|x| 0.25 * x.powi(4) - 0.5 * x * x)),
            first: Some(Arc::new(|x| x * x * x - x)),
            second: Some(Arc::new(|x| 3.0 * x * x - 1.0)),
            third: Some(Arc::new(|x| 6.0 * x)),
            sup_abs_second: None,
            sup_neg_second: Some(1.0),
            sup_abs_third: None,
            gaussian_variance: None,
        }
    }

    /// `W(z) = log cosh(z)`: a smooth, globally Lipschitz interaction.
    pub fn log_cosh() -> Self {
        ScalarPotential {
            name: "log-cosh".into(),
            value: Some(Arc::new(|x: f64| {
                let a = x.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            })),
            first: Some(Arc::new(|x: f64| {
                let e = (-2.0 * x.abs()).exp();
                x.signum() * (1.0 - e) / (1.0 + e)
            })),
            // sech^2 x = 4e / (1 + e)^2 and tanh x = sgn(x) (1 - e) / (1 + e), e = exp(-2|x|)
            second: Some(Arc::new(|x: f64| {
                let e = (-2.0 * x.abs()).exp();
                4.0 * e / ((1.0 + e) * (1.0 + e))
            })),
            third: Some(Arc::new(|x: f64| {
                let e = (-2.0 * x.abs()).exp();
                let d = 1.0 + e;
                -8.0 * x.signum() * (1.0 - e) * e / (d * d * d)
            })),
            sup_abs_second: Some(1.0),
            sup_neg_second: Some(0.0),
            // max of 2 tanh sech^2 is at tanh = 1/sqrt(3)
            sup_abs_third: Some(4.0 / (3.0 * 3f64.sqrt())),
            gaussian_variance: None,
        }
    }

    pub(crate) fn derivatives(&self) -> Result<Derivatives> {
        let missing = |what: &str| {
            Error::invalid(format!(
                "potential `{}` is missing its {what} derivative",
                self.name
            ))
        };
        Ok(Derivatives {
            first: self.first.clone().ok_or_else(|| missing("first"))?,
            second: self.second.clone().ok_or_else(|| missing("second"))?,
            third: self.third.clone().ok_or_else(|| missing("third"))?,
        })
    }

    pub fn sup_abs_second_on(&self, radius: f64) -> Result<f64> {
        match self.sup_abs_second {
            Some(s) => Ok(s),
            None => grid_sup(self.derivatives()?.second.as_ref(), radius, f64::abs),
        }
    }

    /// `sup_x (-V''(x))`, the one-sided Lipschitz constant of `-V'`.
    pub fn sup_neg_second_on(&self, radius: f64) -> Result<f64> {
        match self.sup_neg_second {
            Some(s) => Ok(s),
            None => grid_sup(self.derivatives()?.second.as_ref(), radius, |v| -v),
        }
    }

    pub fn sup_abs_third_on(&self, radius: f64) -> Result<f64> {
        match self.sup_abs_third {
            Some(s) => Ok(s),
            None => grid_sup(self.derivatives()?.third.as_ref(), radius, f64::abs),
        }
    }
}

const GRID_POINTS: usize = 100_001;

/// Supremum of `g(f(x))` over `[-radius, radius]` on a uniform grid that
/// includes both endpoints.
fn grid_sup(f: &(dyn Fn(f64) -> f64 + Send + Sync), radius: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("box radius must be positive and finite"));
    }
    let h = 2.0 * radius / (GRID_POINTS - 1) as f64;
    Ok((0..GRID_POINTS)
        .map(|i| g(f(-radius + i as f64 * h)))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_suprema_on_default_box() {
        let v = ScalarPotential::double_well();
        assert_eq!(v.sup_abs_third_on(10.0).unwrap(), 60.0);
        assert_eq!(v.sup_abs_second_on(10.0).unwrap(), 299.0);
        assert_eq!(v.sup_neg_second_on(10.0).unwrap(), 1.0);
    }

    #[test]
    fn log_cosh_third_sup_matches_grid() {
        let w = ScalarPotential::log_cosh();
        let mut grid_only = w.clone();
        grid_only.sup_abs_third = None;
        let g = grid_only.sup_abs_third_on(10.0).unwrap();
        let a = w.sup_abs_third_on(10.0).unwrap();
        assert!(g <= a && a - g < 1e-8, "grid {g} analytic {a}");
    }

    #[test]
    fn log_cosh_value_is_stable_for_large_arguments() {
        let w = ScalarPotential::log_cosh();
        let v = w.value.as_ref().unwrap();
        assert!((v(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-9);
        assert!(v(0.0).abs() < 1e-15);
    }

    #[test]
    fn missing_derivative_is_rejected() {
        let mut v = ScalarPotential::gaussian();
        v.third = None;
        assert!(matches!(v.derivatives(), Err(Error::InvalidArgument(_))));
    }
}
