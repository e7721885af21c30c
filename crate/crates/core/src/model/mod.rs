//! Target distributions described through their drift `b = -grad U` and
//! hand-coded derivative oracles.

pub mod class;
pub mod fd;
mod fields;
pub mod marginal;
pub mod potential;
pub mod spec;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
pub use class::{class_constants, ModelClass};
pub use fields::{GaussianField, MeanFieldField, ProductField};
pub use marginal::MarginalSampler;
pub use potential::ScalarPotential;
pub use spec::{ModelSpec, PotentialName};

/// Default half-width of the box on which suprema of unbounded derivatives
/// are taken.
pub const DEFAULT_BOX_RADIUS: f64 = 10.0;

/// Floor applied to the one-sided Lipschitz constant wherever a formula
/// divides by it.
pub const KAPPA_FLOOR: f64 = 1e-12;

/// A vector field `b: R^d -> R^d` with exact first and second derivatives.
pub trait DriftField: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;

    fn drift_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = Db(x) v`, i.e. `out_i = sum_j d_j b_i(x) v_j`.
    fn jacobian_apply_into(&self, x: &[f64], v: &[f64], out: &mut [f64]);

    /// `||Db(x)||_F^2`.
    fn jacobian_frobenius_sq(&self, x: &[f64]) -> f64;

    /// `out_i = Delta b_i(x)`.
    fn laplacian_into(&self, x: &[f64], out: &mut [f64]);

    /// `out_i = D^2 b_i(x)[v, v]`.
    fn hessian_form_into(&self, x: &[f64], v: &[f64], out: &mut [f64]);

    /// `||D^2 b(x)||_F^2 = sum_{i,j,k} (d_jk b_i)^2`, when available.
    fn hessian_frobenius_sq(&self, x: &[f64]) -> Option<f64>;
}

/// How the taming error `|b~_gamma - b|` is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TamingBound {
    /// The kernel uses `b` itself.
    #[default]
    Exact,
    /// `Gamma(x) = |b(x)|^2 / (1 + gamma |b(x)|)` at the kernel's step size.
    NormSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// Global Lipschitz constant `L` of the drift.
    pub lipschitz_l: f64,
    /// One-sided Lipschitz constant; may be negative for contractive drifts.
    pub one_sided_kappa: f64,
    /// Bound `K` on `|Delta b|^2`.
    pub laplacian_bound_k: f64,
    /// Bound `J` on `||D^2 b||_F^2`.
    pub hessian_bound_j: f64,
    pub taming: TamingBound,
    pub contract_k: Option<f64>,
    pub contract_r: Option<f64>,
    /// Box on which suprema were taken, if any were taken numerically.
    pub box_radius: Option<f64>,
    /// Structural class used to certify `K` and `J`.
    pub class: Option<ModelClass>,
}

impl RegularityConstants {
    pub fn kappa_for_division(&self) -> f64 {
        self.one_sided_kappa.max(KAPPA_FLOOR)
    }

    fn validate(&self) -> Result<()> {
        let nonneg = [
            ("L", self.lipschitz_l),
            ("K", self.laplacian_bound_k),
            ("J", self.hessian_bound_j),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("constant {name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    IsotropicGaussian,
}

/// A stationary law known in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormLaw {
    pub kind: LawKind,
    pub mean: Vec<f64>,
    /// Covariance is `variance_scale * I_d`.
    pub variance_scale: f64,
}

impl ClosedFormLaw {
    pub fn isotropic_gaussian(d: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("variance_scale must be positive"));
        }
        Ok(ClosedFormLaw {
            kind: LawKind::IsotropicGaussian,
            mean: vec![0.0; d],
            variance_scale: variance,
        })
    }

    pub fn sample_into(&self, rng: &mut crate::sampler::GaussianSource, out: &mut [f64]) {
        let s = self.variance_scale.sqrt();
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o = m + s * rng.normal();
        }
    }
}

/// A target distribution `pi ~ exp(-U)` described by its drift.
#[derive(Clone)]
pub struct TargetModel {
    name: String,
    field: Arc<dyn DriftField>,
    constants: RegularityConstants,
    stationary_law: Option<ClosedFormLaw>,
    /// One-dimensional marginal potential when the model is a product of
    /// identical coordinates.
    marginal: Option<ScalarPotential>,
}

impl fmt::Debug for TargetModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetModel")
            .field("name", &self.name)
            .field("dimension", &self.dimension())
            .field("constants", &self.constants)
            .field("stationary_law", &self.stationary_law)
            .finish()
    }
}

impl TargetModel {
    /// Wraps a user-supplied field, e.g. a non-reversible drift `-J grad U`.
    pub fn custom(
        name: impl Into<String>,
        field: Arc<dyn DriftField>,
        constants: RegularityConstants,
        stationary_law: Option<ClosedFormLaw>,
    ) -> Result<Self> {
        if field.dimension() == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        constants.validate()?;
        if let Some(law) = &stationary_law {
            check_dim(field.dimension(), law.mean.len())?;
        }
        Ok(TargetModel {
            name: name.into(),
            field,
            constants,
            stationary_law,
            marginal: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.field.dimension()
    }

    pub fn constants(&self) -> &RegularityConstants {
        &self.constants
    }

    pub fn stationary_law(&self) -> Option<&ClosedFormLaw> {
        self.stationary_law.as_ref()
    }

    /// Marginal potential of each coordinate for product-structured models.
    pub fn marginal(&self) -> Option<&ScalarPotential> {
        self.marginal.as_ref()
    }

    /// Variance of the target when it is a centered isotropic Gaussian.
    pub fn gaussian_variance(&self) -> Option<f64> {
        self.stationary_law
            .as_ref()
            .filter(|l| l.kind == LawKind::IsotropicGaussian && l.mean.iter().all(|m| *m == 0.0))
            .map(|l| l.variance_scale)
    }

    pub fn field(&self) -> &dyn DriftField {
        self.field.as_ref()
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.field.drift_into(x, out)
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.field.drift_into(x, &mut out);
        Ok(out)
    }

    pub fn jacobian_frobenius_sq(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dimension(), x.len())?;
        Ok(self.field.jacobian_frobenius_sq(x))
    }

    pub fn jacobian_apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension(), x.len())?;
        check_dim(self.dimension(), v.len())?;
        let mut out = vec![0.0; x.len()];
        self.field.jacobian_apply_into(x, v, &mut out);
        Ok(out)
    }

    pub fn laplacian_of_drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.field.laplacian_into(x, &mut out);
        Ok(out)
    }

    pub fn hessian_form(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension(), x.len())?;
        check_dim(self.dimension(), v.len())?;
        let mut out = vec![0.0; x.len()];
        self.field.hessian_form_into(x, v, &mut out);
        Ok(out)
    }

    pub fn hessian_frobenius_sq(&self, x: &[f64]) -> Result<Option<f64>> {
        check_dim(self.dimension(), x.len())?;
        Ok(self.field.hessian_frobenius_sq(x))
    }

    /// `(L b)(x)` with `L f = <b, grad f> + Delta f`, applied componentwise:
    /// `Db(x) b(x) + Delta b(x)`.
    pub fn generator_on_drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        let b = self.drift(x)?;
        let mut out = vec![0.0; x.len()];
        self.field.jacobian_apply_into(x, &b, &mut out);
        let mut lap = vec![0.0; x.len()];
        self.field.laplacian_into(x, &mut lap);
        out.iter_mut().zip(&lap).for_each(|(o, l)| *o += l);
        Ok(out)
    }
}

/// Isotropic Gaussian target `N(0, variance I_d)`, drift `b(x) = -x / variance`.
pub fn make_gaussian_model(d: usize, variance: f64) -> Result<TargetModel> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance must be positive, got {variance}")));
    }
    let precision = 1.0 / variance;
    let constants = RegularityConstants {
        lipschitz_l: precision,
        one_sided_kappa: -precision,
        laplacian_bound_k: 0.0,
        hessian_bound_j: 0.0,
        taming: TamingBound::Exact,
        contract_k: Some(precision),
        contract_r: Some(0.0),
        box_radius: None,
        class: Some(ModelClass::FiniteRange {
            n: 1,
            sup_diag: 0.0,
            sup_off: 0.0,
        }),
    };
    let mut model = TargetModel::custom(
        format!("gaussian(variance={variance})"),
        Arc::new(GaussianField::new(d, variance)),
        constants,
        Some(ClosedFormLaw::isotropic_gaussian(d, variance)?),
    )?;
    let mut marginal = ScalarPotential::gaussian();
    marginal.gaussian_variance = Some(variance);
    let p = precision;
    marginal.value = Some(Arc::new(move |x| 0.5 * p * x * x));
    marginal.first = Some(Arc::new(move |x| p * x));
    marginal.second = Some(Arc::new(move |_| p));
    model.marginal = Some(marginal);
    Ok(model)
}

/// Product target `U(x) = sum_i V(x_i)`, drift `b_i(x) = -V'(x_i)`.
///
/// Suprema of `|V''|`, `-V''` and `|V'''|` that are not known analytically
/// are taken over `[-box_radius, box_radius]`.
pub fn make_product_model(d: usize, potential: ScalarPotential, box_radius: f64) -> Result<TargetModel> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let derivs = potential.derivatives()?;
    let sup3 = potential.sup_abs_third_on(box_radius)?;
    let numeric_box = potential.sup_abs_third.is_none() || potential.sup_abs_second.is_none();
    let constants = RegularityConstants {
        lipschitz_l: potential.sup_abs_second_on(box_radius)?,
        one_sided_kappa: potential.sup_neg_second_on(box_radius)?,
        laplacian_bound_k: d as f64 * sup3 * sup3,
        hessian_bound_j: d as f64 * sup3 * sup3,
        taming: TamingBound::Exact,
        contract_k: None,
        contract_r: None,
        box_radius: numeric_box.then_some(box_radius),
        class: Some(ModelClass::FiniteRange {
            n: 1,
            sup_diag: sup3,
            sup_off: sup3,
        }),
    };
    let law = match potential.gaussian_variance {
        Some(v) => Some(ClosedFormLaw::isotropic_gaussian(d, v)?),
        None => None,
    };
    let mut model = TargetModel::custom(
        format!("product({})", potential.name),
        Arc::new(ProductField::new(d, derivs)),
        constants,
        law,
    )?;
    model.marginal = Some(potential);
    Ok(model)
}

/// Interacting particle system on `R^{n k}` with
/// `b_i(x) = -grad V(x_i) + delta / n * sum_{j != i} grad W(x_j - x_i)`.
///
/// `V` and `W` act componentwise (`V(y) = sum_c v(y_c)`), so the `k`
/// components decouple and each is an `n`-particle system on the line.
pub fn make_mean_field_model(
    n: usize,
    k: usize,
    confinement: ScalarPotential,
    interaction: ScalarPotential,
    delta: f64,
    box_radius: f64,
) -> Result<TargetModel> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("particle count and particle dimension must be positive"));
    }
    if !delta.is_finite() {
        return Err(Error::invalid("delta must be finite"));
    }
    let v = confinement.derivatives()?;
    let w = interaction.derivatives()?;
    let d = n * k;
    let ad = delta.abs();
    let v2 = confinement.sup_abs_second_on(box_radius)?;
    let v2neg = confinement.sup_neg_second_on(box_radius)?;
    let v3 = confinement.sup_abs_third_on(box_radius)?;
    let w2 = interaction.sup_abs_second_on(box_radius)?;
    let w3 = interaction.sup_abs_third_on(box_radius)?;
    let frac = (n - 1) as f64 / n as f64;
    // |d_ii b_i| <= v3 + |delta| w3 (n-1)/n and |d_ij b_k| <= |delta| w3 / n = (|delta| k w3) / d
    let c = (v3 + ad * w3 * frac).max(ad * k as f64 * w3);
    let class = ModelClass::MeanField { c };
    let (kk, jj) = class_constants(&class, d)?;
    let constants = RegularityConstants {
        lipschitz_l: v2 + 2.0 * ad * w2 * frac,
        one_sided_kappa: v2neg + 2.0 * ad * w2 * frac,
        laplacian_bound_k: kk,
        hessian_bound_j: jj,
        taming: TamingBound::Exact,
        contract_k: None,
        contract_r: None,
        box_radius: (confinement.sup_abs_third.is_none() || interaction.sup_abs_third.is_none())
            .then_some(box_radius),
        class: Some(class),
    };
    let mut model = if delta == 0.0 {
        // no interaction: exactly the product model of the confinement
        let mut m = make_product_model(d, confinement.clone(), box_radius)?;
        m.constants = constants;
        m
    } else {
        TargetModel::custom(
            format!("mean-field({}, {}, delta={delta})", confinement.name, interaction.name),
            Arc::new(MeanFieldField::new(n, k, v, w, delta)),
            constants,
            None,
        )?
    };
    if delta == 0.0 {
        model.name = format!("mean-field({}, delta=0)", confinement.name);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{Purpose, RngStream};
    use approx::assert_relative_eq;

    fn gaussian(d: usize) -> TargetModel {
        make_gaussian_model(d, 1.0).unwrap()
    }

    #[test]
    fn gaussian_drift_is_linear() {
        let m = gaussian(1);
        assert_eq!(m.drift(&[2.0]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn gaussian_generator_on_drift_is_identity() {
        let m = gaussian(3);
        let x = [0.3, -1.2, 2.5];
        let g = m.generator_on_drift(&x).unwrap();
        for (a, b) in g.iter().zip(&x) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        assert_eq!(m.jacobian_frobenius_sq(&x).unwrap(), 3.0);
        assert_eq!(m.laplacian_of_drift(&x).unwrap(), vec![0.0; 3]);
        assert_eq!(m.hessian_frobenius_sq(&x).unwrap(), Some(0.0));
    }

    #[test]
    fn gaussian_constants() {
        let m = make_gaussian_model(4, 2.0).unwrap();
        let c = m.constants();
        assert_eq!(c.lipschitz_l, 0.5);
        assert_eq!(c.one_sided_kappa, -0.5);
        assert_eq!((c.laplacian_bound_k, c.hessian_bound_j), (0.0, 0.0));
        assert_eq!(m.gaussian_variance(), Some(2.0));
        assert_eq!(c.kappa_for_division(), KAPPA_FLOOR);
    }

    #[test]
    fn invalid_arguments() {
        assert!(matches!(make_gaussian_model(0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_gaussian_model(2, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_gaussian_model(2, -1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            gaussian(2).drift(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn gaussian_one_sided_lipschitz_is_exact() {
        let m = make_gaussian_model(5, 1.7).unwrap();
        let mut rng = RngStream::derive(3, 0, Purpose::Initial).generator();
        for _ in 0..100 {
            let x = rng.normal_vec(5);
            let y = rng.normal_vec(5);
            let bx = m.drift(&x).unwrap();
            let by = m.drift(&y).unwrap();
            let ip: f64 = (0..5).map(|i| (bx[i] - by[i]) * (x[i] - y[i])).sum();
            let dist2: f64 = (0..5).map(|i| (x[i] - y[i]).powi(2)).sum();
            assert_relative_eq!(ip, -dist2 / 1.7, max_relative = 1e-12);
        }
    }

    #[test]
    fn product_examples() {
        let g = make_product_model(4, ScalarPotential::gaussian(), DEFAULT_BOX_RADIUS).unwrap();
        assert_eq!(g.drift(&[1.0; 4]).unwrap(), vec![-1.0; 4]);
        let dw = make_product_model(2, ScalarPotential::double_well(), DEFAULT_BOX_RADIUS).unwrap();
        assert_eq!(dw.drift(&[2.0, 0.0]).unwrap(), vec![-6.0, 0.0]);
        // K = d sup|V'''|^2 = 2 * 60^2
        assert_eq!(dw.constants().laplacian_bound_k, 7200.0);
        assert_eq!(dw.constants().box_radius, Some(10.0));
        assert!(dw.stationary_law().is_none());
        assert!(g.stationary_law().is_some());
    }

    #[test]
    fn product_is_coordinatewise() {
        let d = 6;
        let m = make_product_model(d, ScalarPotential::double_well(), DEFAULT_BOX_RADIUS).unwrap();
        let one = make_product_model(1, ScalarPotential::double_well(), DEFAULT_BOX_RADIUS).unwrap();
        let x = [0.1, -2.0, 1.5, 0.0, 3.3, -0.7];
        let full = m.drift(&x).unwrap();
        for i in 0..d {
            assert_eq!(full[i], one.drift(&[x[i]]).unwrap()[0]);
        }
    }

    #[test]
    fn missing_oracle_is_rejected() {
        let mut v = ScalarPotential::double_well();
        v.second = None;
        assert!(matches!(make_product_model(2, v, 10.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mean_field_quadratic_example() {
        // V = W = x^2/2, n = 2, k = 1, delta = 1
        let m = make_mean_field_model(
            2,
            1,
            ScalarPotential::gaussian(),
            ScalarPotential::gaussian(),
            1.0,
            DEFAULT_BOX_RADIUS,
        )
        .unwrap();
        let b = m.drift(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(b[0], -1.5, epsilon = 1e-15);
        assert_relative_eq!(b[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mean_field_without_interaction_is_product() {
        let mf = make_mean_field_model(
            3,
            2,
            ScalarPotential::double_well(),
            ScalarPotential::log_cosh(),
            0.0,
            DEFAULT_BOX_RADIUS,
        )
        .unwrap();
        let prod = make_product_model(6, ScalarPotential::double_well(), DEFAULT_BOX_RADIUS).unwrap();
        let x = [0.5, -1.0, 2.0, 0.25, -0.3, 1.1];
        assert_eq!(mf.drift(&x).unwrap(), prod.drift(&x).unwrap());
        assert_eq!(mf.dimension(), 6);
    }

    #[test]
    fn mean_field_class_constants_follow_c() {
        let m = make_mean_field_model(
            10,
            1,
            ScalarPotential::gaussian(),
            ScalarPotential::log_cosh(),
            0.5,
            DEFAULT_BOX_RADIUS,
        )
        .unwrap();
        let c = match m.constants().class {
            Some(ModelClass::MeanField { c }) => c,
            ref other => panic!("unexpected class {other:?}"),
        };
        assert_relative_eq!(m.constants().laplacian_bound_k, 2.0 * c * c * 10.0);
        assert_eq!(m.constants().laplacian_bound_k, m.constants().hessian_bound_j);
    }
}
