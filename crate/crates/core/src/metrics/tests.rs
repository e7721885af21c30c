use super::*;
use approx::assert_relative_eq;

fn stream(k: u64) -> RngStream {
    RngStream::derive(42, k, Purpose::Reference)
}

#[test]
fn base_distance_examples() {
    let l1 = MetricSpec::new(1.0, BaseMetric::Lq { q: 1.0 }).unwrap();
    let nl1 = MetricSpec::new(1.0, BaseMetric::NormalizedLq { q: 1.0 }).unwrap();
    assert_eq!(base_distance(&l1, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), 3.0);
    assert_eq!(base_distance(&nl1, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), 1.5);
    let nl2 = MetricSpec::new(2.0, BaseMetric::NormalizedLq { q: 2.0 }).unwrap();
    assert_relative_eq!(base_distance(&nl2, &[1.0; 4], &[0.0; 4]).unwrap(), 1.0);
    assert_eq!(base_distance(&nl2, &[0.3, 7.0], &[0.3, 7.0]).unwrap(), 0.0);
    assert!(base_distance(&nl2, &[0.3], &[0.3, 7.0]).is_err());
}

#[test]
fn metric_validation_and_constants() {
    assert!(MetricSpec::new(2.5, BaseMetric::Euclidean).is_err());
    assert!(MetricSpec::new(1.0, BaseMetric::Lq { q: 0.5 }).is_err());
    let l1 = MetricSpec::new(1.0, BaseMetric::Lq { q: 1.0 }).unwrap();
    assert_relative_eq!(l1.c_d(100), 10.0, epsilon = 1e-12);
    assert_eq!(MetricSpec::euclidean(2.0).unwrap().c_d(100), 1.0);
    let spec: MetricSpec = serde_json::from_str(r#"{"p": 1, "base": {"kind": "normalized-lq", "q": 1.5}}"#).unwrap();
    assert_eq!(spec.base, BaseMetric::NormalizedLq { q: 1.5 });
}

#[test]
fn w1d_examples() {
    let e = w1d_empirical(&[0.0, 1.0], &[10.0, 11.0], 1.0, &stream(0)).unwrap();
    assert_eq!(e.value, 10.0);
    let e = w1d_empirical(&[3.0, -1.0, 2.0], &[2.0, 3.0, -1.0], 2.0, &stream(0)).unwrap();
    assert_eq!(e.value, 0.0);
    assert!(w1d_empirical(&[0.0, 1.0], &[1.0], 1.0, &stream(0)).is_err());
    assert!(w1d_empirical(&[0.0], &[1.0], 1.0, &stream(0)).is_err());
}

#[test]
fn w1d_matches_gaussian_closed_form() {
    let n = 100_000;
    let mut ga = stream(1).generator();
    let mut gb = stream(2).generator();
    let s = 0.95f64.powf(-0.5);
    let a: Vec<f64> = (0..n).map(|_| ga.normal()).collect();
    let b: Vec<f64> = (0..n).map(|_| s * gb.normal()).collect();
    let e = w1d_empirical(&a, &b, 2.0, &stream(3)).unwrap();
    let exact = gaussian_w(2.0, 1, 1.0, s).unwrap().value;
    assert_relative_eq!(exact, 0.025978352085154, epsilon = 1e-12);
    assert!((e.value - exact).abs() <= 3.0 * e.stderr, "{e:?} vs {exact}");
}

#[test]
fn gaussian_w_examples() {
    assert_eq!(gaussian_w(2.0, 4, 1.0, 1.0).unwrap().value, 0.0);
    assert_relative_eq!(gaussian_w(2.0, 4, 1.0, 2.0).unwrap().value, 2.0, epsilon = 1e-15);
    let ula = gaussian_w(2.0, 100, 1.0, 0.95f64.powf(-0.5)).unwrap().value;
    assert_relative_eq!(ula, 0.259783520851542, epsilon = 1e-12);
    // E|G| in one dimension is sqrt(2/pi)
    assert_relative_eq!(gaussian_abs_moment(1, 1.0), (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-14);
    assert_relative_eq!(gaussian_abs_moment(7, 2.0), 7.0, epsilon = 1e-12);
    assert!(gaussian_w(0.5, 1, 1.0, 2.0).is_err());
}

#[test]
fn gaussian_w_metric_scaling() {
    let s = 1.1;
    let l1 = MetricSpec::new(1.0, BaseMetric::Lq { q: 1.0 }).unwrap();
    let nl2 = MetricSpec::new(2.0, BaseMetric::NormalizedLq { q: 2.0 }).unwrap();
    let w1 = gaussian_w(1.0, 1, 1.0, s).unwrap().value;
    assert_relative_eq!(gaussian_w_metric(&l1, 50, 1.0, s).unwrap().value, 50.0 * w1, epsilon = 1e-12);
    assert_relative_eq!(gaussian_w_metric(&nl2, 50, 1.0, s).unwrap().value, 0.1, epsilon = 1e-12);
    let mixed = MetricSpec::new(2.0, BaseMetric::Lq { q: 1.0 }).unwrap();
    assert!(gaussian_w_metric(&mixed, 50, 1.0, s).is_err());
}

#[test]
fn product_w2_examples() {
    assert_eq!(product_w2(0.0, 10).unwrap(), 0.0);
    assert_relative_eq!(product_w2(0.0259784, 100).unwrap(), 0.259784, epsilon = 1e-12);
    assert_eq!(product_w2(0.3, 1).unwrap(), 0.3);
    assert!(product_w2(-1.0, 1).is_err());
}

#[test]
fn sliced_examples() {
    let mut g = stream(5).generator();
    let a: Vec<Vec<f64>> = (0..2000).map(|_| g.normal_vec(4)).collect();
    let e = sliced_w(&a, &a, 1.0, 16, &stream(6)).unwrap();
    assert_eq!(e.value, 0.0);
    assert_eq!(e.method, DistanceMethod::SlicedProxy);
    let v = [0.5, -1.0, 0.25, 2.0];
    let shifted: Vec<Vec<f64>> = a.iter().map(|x| x.iter().zip(&v).map(|(x, v)| x + v).collect()).collect();
    let e = sliced_w(&a, &shifted, 1.0, 32, &stream(7)).unwrap();
    assert!(e.value <= norm(&v) + 1e-12);
    assert!(sliced_w(&a, &a, 1.0, 8, &stream(6)).is_err());
}

#[test]
fn sliced_gaussian_scale() {
    let mut g = stream(8).generator();
    let a: Vec<Vec<f64>> = (0..20_000).map(|_| g.normal_vec(4)).collect();
    let b: Vec<Vec<f64>> = (0..20_000).map(|_| g.normal_vec(4).iter().map(|x| 2.0 * x).collect()).collect();
    let e = sliced_w(&a, &b, 1.0, 16, &stream(9)).unwrap();
    let target = (2.0 / std::f64::consts::PI).sqrt();
    assert!((e.value - target).abs() < 4.0 * e.stderr + 1e-3, "{e:?}");
}

#[test]
fn tv_crossing_point_oracle() {
    let c = ((8.0 / 3.0) * std::f64::consts::LN_2).sqrt();
    let phi = |x: f64| 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let oracle = 2.0 * (phi(c) - phi(c / 2.0));
    let tv = tv_isotropic_gaussians(1, 1.0, 2.0).unwrap();
    assert_relative_eq!(oracle, 0.32267456883476866, epsilon = 1e-14);
    assert!((tv - oracle).abs() < 1e-8, "{tv}");
}

#[test]
fn tv_regularized_gamma_oracle() {
    // P(d/2, c^2 / 2 lo^2) - P(d/2, c^2 / 2 hi^2), high-precision reference values
    let s = 0.95f64.powf(-0.5);
    let cases = [
        (10, 1.0, s, 0.044976843503336116),
        (100, 1.0, s, 0.14366687122084429),
        (1000, 1.0, s, 0.43360608579799938),
        (3, 1.0, 1.5, 0.36030267257318787),
        (50, 2.0, 1.9, 0.20173598644779276),
    ];
    for (d, s1, s2, expected) in cases {
        let tv = tv_isotropic_gaussians(d, s1, s2).unwrap();
        assert!((tv - expected).abs() < 1e-7, "d={d}: {tv} vs {expected}");
        assert_eq!(tv, tv_isotropic_gaussians(d, s2, s1).unwrap());
    }
}

#[test]
fn tv_edge_cases() {
    assert_eq!(tv_isotropic_gaussians(5, 1.3, 1.3).unwrap(), 0.0);
    assert!(tv_isotropic_gaussians(5, 0.0, 1.3).is_err());
    let tiny = tv_isotropic_gaussians(5, 1.0, 1.0 + 1e-9).unwrap();
    assert!(tiny < 1e-7);
    let far = tv_isotropic_gaussians(2, 1.0, 1e4).unwrap();
    assert!(far <= 1.0 && far > 0.99);
}
