//! Structural model classes whose second-derivative budgets `K` and `J`
//! grow linearly in the dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelClass {
    /// Interaction graph of maximal degree `n`; `sup_diag` bounds
    /// `|d_ii b|`, `sup_off` bounds `|d_ij b|`.
    FiniteRange { n: usize, sup_diag: f64, sup_off: f64 },
    /// `|d_ii b_i| <= C` and `|d_ij b_k| <= C / d` for `k != i`.
    MeanField { c: f64 },
    /// `b = b_1 + b_2`.
    SumOf { first: Box<ModelClass>, second: Box<ModelClass> },
}

/// Returns `(K, J)` for a model of the given class in dimension `d`.
pub fn class_constants(class: &ModelClass, d: usize) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let d = d as f64;
    match class {
        ModelClass::FiniteRange { n, sup_diag, sup_off } => {
            if *sup_diag < 0.0 || *sup_off < 0.0 {
                return Err(Error::invalid("suprema must be nonnegative"));
            }
            let n2 = (*n as f64).powi(2);
            Ok((d * n2 * sup_diag * sup_diag, d * n2 * sup_off * sup_off))
        }
        ModelClass::MeanField { c } => {
            if *c < 0.0 {
                return Err(Error::invalid("mean-field constant C must be nonnegative"));
            }
            let k = 2.0 * c * c * d;
            Ok((k, k))
        }
        ModelClass::SumOf { first: a, second: b } => {
            let (ka, ja) = class_constants(a, d as usize)?;
            let (kb, jb) = class_constants(b, d as usize)?;
            // (a + b)^2 <= 2 a^2 + 2 b^2 termwise
            Ok((2.0 * (ka + kb), 2.0 * (ja + jb)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_field_example() {
        assert_eq!(class_constants(&ModelClass::MeanField { c: 2.0 }, 50).unwrap(), (400.0, 400.0));
    }

    #[test]
    fn finite_range_examples() {
        let zero = ModelClass::FiniteRange { n: 1, sup_diag: 0.0, sup_off: 0.0 };
        assert_eq!(class_constants(&zero, 10).unwrap().0, 0.0);
        let three = ModelClass::FiniteRange { n: 3, sup_diag: 1.0, sup_off: 0.5 };
        assert_eq!(class_constants(&three, 100).unwrap(), (900.0, 225.0));
    }

    #[test]
    fn composition_stays_linear_in_d() {
        let sum = ModelClass::SumOf {
            first: Box::new(ModelClass::MeanField { c: 1.0 }),
            second: Box::new(ModelClass::FiniteRange { n: 2, sup_diag: 1.0, sup_off: 1.0 }),
        };
        let (k10, _) = class_constants(&sum, 10).unwrap();
        let (k1000, _) = class_constants(&sum, 1000).unwrap();
        assert_eq!(k1000 / k10, 100.0);
        assert_eq!(k10, 2.0 * (20.0 + 40.0));
    }

    #[test]
    fn negative_inputs_rejected() {
        assert!(class_constants(&ModelClass::MeanField { c: -1.0 }, 3).is_err());
        let bad = ModelClass::FiniteRange { n: 1, sup_diag: -1.0, sup_off: 0.0 };
        assert!(class_constants(&bad, 3).is_err());
    }
}
