use super::liouville::*;
use super::*;
use crate::model::{make_gaussian_model, make_mean_field_model, make_product_model, ScalarPotential};
use crate::sampler::{KernelSpec, Purpose, RngStream};
use approx::assert_relative_eq;

fn stream(k: u64) -> RngStream {
    RngStream::derive(9, k, Purpose::Reference)
}

fn gaussian_samples(d: usize, variance: f64, n: usize, k: u64) -> Vec<Vec<f64>> {
    let mut g = stream(k).generator();
    let s = variance.sqrt();
    (0..n).map(|_| g.normal_vec(d).into_iter().map(|x| s * x).collect()).collect()
}

#[test]
fn lemma1_examples() {
    assert_eq!(lemma1_bound(|_| 0.0, |_| 0.3, 10), 0.3);
    assert_eq!(lemma1_bound(|_| 1.0, |_| 0.3, 10), f64::INFINITY);
    let phi = |n: usize| (-0.01 * n as f64).exp();
    let eps = |n: usize| 0.01 * (0.02 * n as f64).exp();
    let v = lemma1_bound(phi, eps, 10_000);
    assert_relative_eq!(v, 0.06750413337463809, epsilon = 1e-14);
    assert_relative_eq!(eps(41) / (1.0 - phi(41)), v, epsilon = 1e-15);
}

#[test]
fn example2_examples() {
    let v = example2_bound(1.0, 1.0, 2.0, 0.01, 1.0).unwrap();
    assert_relative_eq!(v, 0.08319584291892893, epsilon = 1e-15);
    assert_eq!(example2_bound(1.0, 1.0, 2.0, 0.01, 0.0).unwrap(), 0.0);
    assert!(v >= 0.06750413337463809);
    assert!(example2_bound(1.0, 0.0, 2.0, 0.01, 1.0).is_err());
}

#[test]
fn example3_examples() {
    let t = relaxation_time(&|t: f64| (-t).exp(), 100.0).unwrap();
    assert_relative_eq!(t, std::f64::consts::LN_2, epsilon = 1e-12);
    let v = example3_bound(t, 2.0, 0.01, 1.0).unwrap();
    assert_relative_eq!(v, 0.08161610720214046, epsilon = 1e-12);
    assert_eq!(example3_bound(t, 2.0, 0.01, 0.0).unwrap(), 0.0);
    assert_relative_eq!(example3_bound(t, 2.0, 0.01, 0.5).unwrap(), 0.5 * v, epsilon = 1e-15);
    assert!(relaxation_time(&|_| 0.9, 100.0).is_err());
    let conv = ContractionInput {
        psi: Some(ProfileSpec::Exponential { a: 1.0, c: 1.0 }),
        ..Default::default()
    };
    assert!(matches!(conv.resolve().unwrap(), Convergence::Subgeometric { .. }));
    assert!(ContractionInput { a: Some(1.0), ..Default::default() }.resolve().is_err());
}

#[test]
fn prop4_examples() {
    let (lambda, _) = prop4_constants(1.0, 0.1, 0.1, 0.0, 0.0, 0.0).unwrap();
    assert_relative_eq!(lambda, 2.15, epsilon = 1e-15);
    let (_, m) = prop4_constants(1.0, 0.1, 0.1, 10.0, 10.0, 0.0).unwrap();
    assert_relative_eq!(m, 17.416666666666668, epsilon = 1e-12);
    assert_eq!(prop4_constants(1.0, 0.1, 0.1, 0.0, 0.0, 0.0).unwrap().1, 0.0);
}

#[test]
fn thm5_examples() {
    let metric = MetricSpec::euclidean(2.0).unwrap();
    let conv = Convergence::Geometric { a: 1.0, c: 1.0 };
    let v = thm5_bound(&metric, 10, &conv, 2.15, 17.416666666666668, 0.01).unwrap();
    assert_relative_eq!(v, 0.3651109744350778, epsilon = 1e-12);
    assert_eq!(thm5_bound(&metric, 10, &conv, 2.15, 0.0, 0.01).unwrap(), 0.0);
    let v2 = thm5_bound(&metric, 10, &conv, 2.15, 17.416666666666668, 0.02).unwrap();
    assert!((v2 / v - 2.0).abs() < 0.05);
    // dominates the true Gaussian bias at d = 10, gamma = 0.01
    let bias = crate::metrics::gaussian_w(2.0, 10, 1.0, (1.0f64 - 0.005).powf(-0.5)).unwrap().value;
    assert!(v > bias);
}

#[test]
fn prop10_and_thm11_examples() {
    let (lambda, m) = prop10_constants(1.0, 0.1, 10.0, 10.0, 0.0, 0.0).unwrap();
    assert_relative_eq!(lambda, 1.0525, epsilon = 1e-15);
    assert_relative_eq!(m, 20.1, epsilon = 1e-12);
    assert_eq!(prop10_constants(1.0, 0.1, 0.0, 0.0, 0.0, 0.0).unwrap().1, 0.0);
    let metric = MetricSpec::euclidean(2.0).unwrap();
    let v = thm11_bound(&metric, 10, 0.5, 1.0, 1.0, lambda, m, 0.1).unwrap();
    assert_relative_eq!(v, 0.2568756668062398, epsilon = 1e-12);
    assert_eq!(thm11_bound(&metric, 10, 0.5, 1.0, 1.0, lambda, 0.0, 0.1).unwrap(), 0.0);
    assert!(thm11_bound(&metric, 10, 1.5, 1.0, 1.0, lambda, m, 0.1).is_err());
    assert!(thm11_bound(&metric, 10, 0.0, 1.0, 1.0, lambda, m, 0.1).is_err());
    // gamma^2 scaling with recomputed lambda_H
    let (l1, m1) = prop10_constants(1.0, 0.01, 10.0, 10.0, 0.0, 0.0).unwrap();
    let (l4, m4) = prop10_constants(1.0, 0.04, 10.0, 10.0, 0.0, 0.0).unwrap();
    let a = thm11_bound(&metric, 10, 0.5, 1.0, 1.0, l1, m1, 0.01).unwrap();
    let b = thm11_bound(&metric, 10, 0.5, 1.0, 1.0, l4, m4, 0.04).unwrap();
    assert!((b / a / 16.0 - 1.0).abs() < 0.05);
}

#[test]
fn ctv_examples() {
    let c = thm8_ctv(1.0).unwrap();
    assert_relative_eq!(c, 1.138856810029555, epsilon = 1e-12);
    let closed = (1.0 / std::f64::consts::PI).sqrt() * 2.0 / (1.0 - (-4.0f64).exp()).sqrt();
    assert_relative_eq!(c, closed, epsilon = 1e-14);
    for k in [1e-3, 0.01, 0.5, 3.0, 10.0] {
        let v = thm8_ctv(k).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!((thm8_ctv_grid(k, 20_000).unwrap() - v).abs() < 1e-6);
    }
    assert!(thm8_ctv(0.0).is_err());
}

#[test]
fn thm9_examples() {
    let v = thm9_bound(1.0, 0.1, 16, 0.0, 0.0, 0.0, 0.0).unwrap();
    assert_relative_eq!(v, 2f64.powf(-1.5) * 0.1 * 4.0, epsilon = 1e-15);
    assert_eq!(halving_count(0.125).unwrap(), 3);
    assert_eq!(halving_count(0.1).unwrap(), 4);
    let v = thm9_bound(0.0, 0.125, 1, 0.0, 0.0, 0.0, 1.0).unwrap();
    assert_relative_eq!(v, 0.125 * 3.0, epsilon = 1e-15);
    assert!(thm9_bound(1.0, 1.0, 1, 0.0, 0.0, 0.0, 0.0).is_err());
    assert_relative_eq!(mtilde7(1.0, 1.0, 0.0).unwrap(), 4.0);
}

#[test]
fn lyapunov_examples() {
    let (s, _) = lyapunov_bounds(0.5, 1.0, 0.1, 1.0, 0.0, 0.0, 0.0).unwrap();
    assert_relative_eq!(s, 3.0924845187150067, epsilon = 1e-12);
    let (s, _) = lyapunov_bounds(0.5, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0).unwrap();
    assert_eq!(s, 0.0);
    let (_, p) = lyapunov_bounds(0.5, 1.0, 0.1, 2.0, 3.0, 10.0, 1e3).unwrap();
    assert_relative_eq!(p, 1.5, epsilon = 1e-12);
    assert!(lyapunov_bounds(1.0, 1.0, 0.1, 1.0, 0.0, 0.0, 0.0).is_err());
}

#[test]
fn m_quantities_gaussian() {
    let model = make_gaussian_model(10, 1.0).unwrap();
    let xs = gaussian_samples(10, 1.0, 20_000, 1);
    let m = estimate_m_quantities(&model, &xs, 0.1, false).unwrap();
    assert!(m.m1.within(10.0, 3.0), "{:?}", m.m1);
    assert_eq!(m.m2.value, 10.0);
    assert_eq!(m.m4.value, 0.0);
    assert_eq!(m.m3.value, 0.0);
    assert!(estimate_m_quantities(&model, &xs[..10], 0.1, false).is_err());
}

#[test]
fn m5_zero_without_taming() {
    let model = make_gaussian_model(3, 1.0).unwrap();
    let xs = gaussian_samples(3, 1.0, 1000, 2);
    let e = estimate_m5(&model, 1.0, 0.25, &xs, &stream(3), &|_| 0.0).unwrap();
    assert_eq!(e.value, 0.0);
    // Lambda(q) = |q|: the sup over the Verlet orbit of E|q_t|^2 is at least d
    let e = estimate_m5(&model, 1.0, 0.25, &xs, &stream(3), &|q| crate::stats::norm(q)).unwrap();
    assert!(e.value > 2.7);
}

#[test]
fn prop6_gaussian() {
    let d = 10;
    let gamma = 0.1;
    let model = make_gaussian_model(d, 1.0).unwrap();
    let kernel = KernelSpec::ula(model, gamma).unwrap();
    let xs = gaussian_samples(d, 1.0 / (1.0 - gamma / 2.0), 20_000, 4);
    let mt = prop6_quantities(&kernel, gamma, &xs, &stream(5), 16, SemigroupApprox::Exact).unwrap();
    let target = d as f64 / 0.95;
    assert!(mt.mt1.within(target, 3.0), "{:?}", mt.mt1);
    assert_eq!(mt.mt2.value, 10.0);
    assert_eq!(mt.mt4.value, 10.0);
    assert_eq!(mt.mt5.value, 0.0);
    assert!(mt.mt6.within(target, 3.0));
    assert!(mt.mt3.within(target, 3.0));
    assert_eq!(mt.argmax_t[0], 0.0);
    assert!(prop6_quantities(&kernel, gamma, &xs, &stream(5), 4, SemigroupApprox::Exact).is_err());
}

#[test]
fn u_grid_shape() {
    let g = u_grid(0.1, 16);
    assert_eq!(g.len(), 16);
    assert_relative_eq!(g[0], 0.1 / 256.0);
    assert_relative_eq!(g[15], 0.1, epsilon = 1e-15);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn liouville_identities_gaussian_and_double_well() {
    let gauss = make_gaussian_model(5, 1.0).unwrap();
    let q = [0.3, -1.0, 0.7, 2.0, -0.1];
    let c1 = check_first_identity(&gauss, &q, 50_000, &stream(6)).unwrap();
    assert!(c1.holds(4.0) && c1.target == 5.0);
    let c2 = check_second_identity(&gauss, &q, 50_000, &stream(7)).unwrap();
    assert!(c2.holds(4.0), "{c2:?}");
    let dw = make_product_model(3, ScalarPotential::double_well(), 10.0).unwrap();
    let q = [0.5, -1.2, 0.9];
    for (k, c) in [
        check_first_identity(&dw, &q, 100_000, &stream(8)).unwrap(),
        check_second_identity(&dw, &q, 100_000, &stream(9)).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        assert!(c.holds(4.0), "{k}: {c:?}");
    }
    for c in check_second_mean(&dw, &q, 100_000, &stream(10)).unwrap() {
        assert!(c.holds(4.0), "{c:?}");
    }
}

#[test]
fn quadratic_form_fourth_moment() {
    let a = vec![vec![2.0, 0.5, -1.0], vec![0.5, 1.0, 0.25], vec![-1.0, 0.25, -0.5]];
    let c = check_quadratic_form_moment(&a, 200_000, &stream(11)).unwrap();
    assert!(c.holds(4.0), "{c:?}");
    let bad = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
    assert!(check_quadratic_form_moment(&bad, 10, &stream(11)).is_err());
}

#[test]
fn report_requires_contraction() {
    let model = make_gaussian_model(10, 1.0).unwrap();
    let inputs = ReportInputs {
        gamma: 0.1,
        gamma_bar: 0.1,
        duration: None,
        metric: MetricSpec::euclidean(2.0).unwrap(),
        ula: None,
        diffusion: None,
        hmc_c: None,
        tv: None,
    };
    assert!(matches!(assemble_report(&model, &inputs, None, None), Err(crate::Error::Config(_))));
}

#[test]
fn report_gaussian_assembly() {
    let model = make_gaussian_model(10, 1.0).unwrap();
    let xs = gaussian_samples(10, 1.0, 5000, 12);
    let m = estimate_m_quantities(&model, &xs, 0.1, false).unwrap();
    let inputs = ReportInputs {
        gamma: 0.1,
        gamma_bar: 0.1,
        duration: Some(1.0),
        metric: MetricSpec::euclidean(2.0).unwrap(),
        ula: Some(ContractionInput::geometric(1.0, 1.0)),
        diffusion: None,
        hmc_c: Some(0.5),
        tv: None,
    };
    let r = assemble_report(&model, &inputs, Some(m), None).unwrap();
    assert_relative_eq!(r.key_quantities.lambda_l.unwrap(), 2.15, epsilon = 1e-12);
    assert!(r.bounds.thm5.unwrap() > 0.0 && r.bounds.thm11.unwrap() > 0.0);
    let json = serde_json::to_value(&r).unwrap();
    for key in ["lambda_L", "M_L", "lambda_H", "M_H", "M1", "M2"] {
        assert!(json["key_quantities"].get(key).is_some(), "{key} missing: {json}");
    }
}

#[test]
fn mean_field_ml_per_dimension_budget() {
    // Constants-only budget: M2 <= d L^2 and M1 <= 2K + 4L^2(|b(0)|^2 + L^2 E|x|^2)
    // with E|x|^2 <= d for a confinement at least as strong as the Gaussian.
    let mut ratios = Vec::new();
    for n in [10, 100, 1000] {
        let m = make_mean_field_model(
            n,
            1,
            ScalarPotential::gaussian(),
            ScalarPotential::log_cosh(),
            0.5,
            10.0,
        )
        .unwrap();
        let c = m.constants();
        let d = n as f64;
        let m1 = 2.0 * c.laplacian_bound_k + 4.0 * c.lipschitz_l.powi(2) * c.lipschitz_l.powi(2) * d;
        let m2 = d * c.lipschitz_l.powi(2);
        let (_, ml) = prop4_constants(c.lipschitz_l, 0.1, 0.1, m1, m2, 0.0).unwrap();
        ratios.push(ml / d);
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo <= 2.0, "{ratios:?}");
}
