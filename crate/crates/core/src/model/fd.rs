//! Central finite-difference checks of the derivative oracles, using only
//! evaluations of the drift itself.

use super::TargetModel;

/// Step used for coordinate `i`: `1e-4 * max(1, |x_i|)`.
pub fn step(xi: f64) -> f64 {
    1e-4 * xi.abs().max(1.0)
}

/// Finite-difference Jacobian, `jac[i][j] = d_j b_i(x)`.
pub fn jacobian(model: &TargetModel, x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut jac = vec![vec![0.0; d]; d];
    let mut xp = x.to_vec();
    let mut bp = vec![0.0; d];
    let mut bm = vec![0.0; d];
    for j in 0..d {
        let h = step(x[j]);
        xp[j] = x[j] + h;
        model.drift_into(&xp, &mut bp);
        xp[j] = x[j] - h;
        model.drift_into(&xp, &mut bm);
        xp[j] = x[j];
        for i in 0..d {
            jac[i][j] = (bp[i] - bm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Finite-difference Laplacian of each drift component.
pub fn laplacian(model: &TargetModel, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = vec![0.0; d];
    let mut b0 = vec![0.0; d];
    model.drift_into(x, &mut b0);
    let mut xp = x.to_vec();
    let mut bp = vec![0.0; d];
    let mut bm = vec![0.0; d];
    for j in 0..d {
        let h = step(x[j]);
        xp[j] = x[j] + h;
        model.drift_into(&xp, &mut bp);
        xp[j] = x[j] - h;
        model.drift_into(&xp, &mut bm);
        xp[j] = x[j];
        for i in 0..d {
            out[i] += (bp[i] - 2.0 * b0[i] + bm[i]) / (h * h);
        }
    }
    out
}

/// Finite-difference `||D^2 b(x)||_F^2` from the four-point mixed stencil.
pub fn hessian_frobenius_sq(model: &TargetModel, x: &[f64]) -> f64 {
    let d = x.len();
    let mut total = 0.0;
    let mut xs = x.to_vec();
    let mut b = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    for j in 0..d {
        for k in 0..d {
            let (hj, hk) = (step(x[j]), step(x[k]));
            let signs = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
            for (slot, (sj, sk)) in signs.iter().enumerate() {
                xs.copy_from_slice(x);
                xs[j] += sj * hj;
                xs[k] += sk * hk;
                model.drift_into(&xs, &mut b[slot]);
            }
            for i in 0..d {
                let v = (b[0][i] - b[1][i] - b[2][i] + b[3][i]) / (4.0 * hj * hk);
                total += v * v;
            }
        }
    }
    total
}

/// `Db(x) b(x) + Delta b(x)` from finite differences.
pub fn generator_on_drift(model: &TargetModel, x: &[f64]) -> Vec<f64> {
    let jac = jacobian(model, x);
    let lap = laplacian(model, x);
    let b = model.drift(x).expect("dimension checked by caller");
    (0..x.len())
        .map(|i| jac[i].iter().zip(&b).map(|(a, bj)| a * bj).sum::<f64>() + lap[i])
        .collect()
}

/// Mixed relative/absolute agreement: `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
