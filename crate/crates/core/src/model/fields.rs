use super::potential::{Derivatives, ScalarFn};
use super::DriftField;

#[derive(Debug, Clone)]
pub struct GaussianField {
    dimension: usize,
    precision: f64,
}

impl GaussianField {
    pub fn new(dimension: usize, variance: f64) -> Self {
        GaussianField {
            dimension,
            precision: 1.0 / variance,
        }
    }
}

impl DriftField for GaussianField {
    fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -self.precision * xi;
        }
    }

    fn jacobian_apply_into(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o = -self.precision * vi;
        }
    }

    fn jacobian_frobenius_sq(&self, _x: &[f64]) -> f64 {
        self.dimension as f64 * self.precision * self.precision
    }

    fn laplacian_into(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn hessian_form_into(&self, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn hessian_frobenius_sq(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

/// `b_i(x) = -V'(x_i)`.
#[derive(Clone)]
pub struct ProductField {
    dimension: usize,
    first: ScalarFn,
    second: ScalarFn,
    third: ScalarFn,
}

impl std::fmt::Debug for ProductField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProductField").field("dimension", &self.dimension).finish()
    }
}

impl ProductField {
    pub(crate) fn new(dimension: usize, d: Derivatives) -> Self {
        ProductField {
            dimension,
            first: d.first,
            second: d.second,
            third: d.third,
        }
    }
}

impl DriftField for ProductField {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -(self.first)(*xi);
        }
    }

    fn jacobian_apply_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.dimension {
            out[i] = -(self.second)(x[i]) * v[i];
        }
    }

    fn jacobian_frobenius_sq(&self, x: &[f64]) -> f64 {
        x.iter().map(|xi| (self.second)(*xi).powi(2)).sum()
    }

    fn laplacian_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -(self.third)(*xi);
        }
    }

    fn hessian_form_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.dimension {
            out[i] = -(self.third)(x[i]) * v[i] * v[i];
        }
    }

    fn hessian_frobenius_sq(&self, x: &[f64]) -> Option<f64> {
        Some(x.iter().map(|xi| (self.third)(*xi).powi(2)).sum())
    }
}

/// `n` particles in `R^k`, flattened particle-major: coordinate `(i, c)`
/// lives at index `i * k + c`.
#[derive(Clone)]
pub struct MeanFieldField {
    n: usize,
    k: usize,
    v: Derivatives,
    w: Derivatives,
    coupling: f64,
}

impl std::fmt::Debug for MeanFieldField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeanFieldField")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("coupling", &self.coupling)
            .finish()
    }
}

impl MeanFieldField {
    pub(crate) fn new(n: usize, k: usize, v: Derivatives, w: Derivatives, delta: f64) -> Self {
        MeanFieldField {
            n,
            k,
            v,
            w,
            coupling: delta / n as f64,
        }
    }

    #[inline]
    fn at(&self, i: usize, c: usize) -> usize {
        i * self.k + c
    }
}

impl DriftField for MeanFieldField {
    fn dimension(&self) -> usize {
        self.n * self.k
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            for c in 0..self.k {
                let xi = x[self.at(i, c)];
                let s: f64 = (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| (self.w.first)(x[self.at(j, c)] - xi))
                    .sum();
                out[self.at(i, c)] = -(self.v.first)(xi) + self.coupling * s;
            }
        }
    }

    fn jacobian_apply_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            for c in 0..self.k {
                let ic = self.at(i, c);
                let xi = x[ic];
                let mut diag = -(self.v.second)(xi);
                let mut off = 0.0;
                for j in (0..self.n).filter(|&j| j != i) {
                    let jc = self.at(j, c);
                    let w2 = (self.w.second)(x[jc] - xi);
                    diag -= self.coupling * w2;
                    off += self.coupling * w2 * v[jc];
                }
                out[ic] = diag * v[ic] + off;
            }
        }
    }

    fn jacobian_frobenius_sq(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            for c in 0..self.k {
                let xi = x[self.at(i, c)];
                let mut diag = -(self.v.second)(xi);
                for j in (0..self.n).filter(|&j| j != i) {
                    let off = self.coupling * (self.w.second)(x[self.at(j, c)] - xi);
                    diag -= off;
                    total += off * off;
                }
                total += diag * diag;
            }
        }
        total
    }

    fn laplacian_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            for c in 0..self.k {
                let xi = x[self.at(i, c)];
                let s: f64 = (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| (self.w.third)(x[self.at(j, c)] - xi))
                    .sum();
                out[self.at(i, c)] = -(self.v.third)(xi) + 2.0 * self.coupling * s;
            }
        }
    }

    fn hessian_form_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            for c in 0..self.k {
                let ic = self.at(i, c);
                let xi = x[ic];
                let s: f64 = (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let jc = self.at(j, c);
                        (self.w.third)(x[jc] - xi) * (v[jc] - v[ic]).powi(2)
                    })
                    .sum();
                out[ic] = -(self.v.third)(xi) * v[ic] * v[ic] + self.coupling * s;
            }
        }
    }

    fn hessian_frobenius_sq(&self, x: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for i in 0..self.n {
            for c in 0..self.k {
                let xi = x[self.at(i, c)];
                let mut diag = -(self.v.third)(xi);
                let mut cross = 0.0;
                for j in (0..self.n).filter(|&j| j != i) {
                    let t = self.coupling * (self.w.third)(x[self.at(j, c)] - xi);
                    diag += t;
                    // d_ic d_jc appears twice, d_jc d_jc once
                    cross += 3.0 * t * t;
                }
                total += diag * diag + cross;
            }
        }
        Some(total)
    }
}
