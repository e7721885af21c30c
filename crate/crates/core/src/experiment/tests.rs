use super::*;
use crate::metrics::BaseMetric;
use crate::model::PotentialName;

fn gaussian_spec(dims: Vec<usize>, gammas: Vec<f64>, kernel: KernelChoice) -> SweepSpec {
    let mut s = SweepSpec::new(ModelSpec::default(), dims, gammas, kernel);
    s.seed = 11;
    s
}

fn uhmc(t: f64) -> KernelChoice {
    KernelChoice {
        kind: KernelKind::Uhmc,
        duration: Some(t),
    }
}

#[test]
fn ula_single_cell() {
    let mut s = gaussian_spec(vec![1], vec![0.1], KernelChoice::default());
    s.samples = 100_000;
    let r = run_sweep(&s).unwrap();
    let rec = &r.records[0];
    assert!(rec.status.is_ok());
    let cf = rec.closed_form_bias.unwrap();
    assert!((cf - 0.0259783520851542).abs() < 1e-12);
    eprintln!("ula d=1: {} +- {}", rec.bias, rec.stderr);
    assert!((rec.bias - cf).abs() <= 3.0 * rec.stderr, "{} +- {}", rec.bias, rec.stderr);
    assert!(rec.theory_bound.unwrap() >= rec.bias - 3.0 * rec.stderr);
    assert_eq!(rec.route, "product-aggregate/coupled-exact");
}

#[test]
fn uhmc_single_cell() {
    let mut s = gaussian_spec(vec![1], vec![0.2], uhmc(1.0));
    s.samples = 100_000;
    let r = run_sweep(&s).unwrap();
    let rec = &r.records[0];
    let cf = rec.closed_form_bias.unwrap();
    assert!((cf - 0.005037815259212097).abs() < 1e-12);
    eprintln!("uhmc d=1: {} +- {}", rec.bias, rec.stderr);
    assert!((rec.bias - cf).abs() <= 3.0 * rec.stderr, "{} +- {}", rec.bias, rec.stderr);
    assert!(rec.theory_bound.unwrap() >= rec.bias - 3.0 * rec.stderr);
}

#[test]
fn validation_errors() {
    let s = gaussian_spec(vec![1], vec![], KernelChoice::default());
    assert!(matches!(run_sweep(&s), Err(Error::Config(_))));
    let s = gaussian_spec(vec![], vec![0.1], KernelChoice::default());
    assert!(s.validate().is_err());
    let s = gaussian_spec(vec![1], vec![1.5], KernelChoice::default());
    assert!(s.validate().is_err());
    let s = gaussian_spec(vec![1], vec![0.3], uhmc(1.0));
    assert!(s.validate().is_err(), "T / gamma is not an integer");
    let mut s = gaussian_spec(vec![1000], vec![0.01], KernelChoice::default());
    s.budget = 1e6;
    assert!(s.validate().is_err());
    let s = SweepSpec::new(
        ModelSpec::Product {
            potential: PotentialName::DoubleWell,
            box_radius: 10.0,
        },
        vec![2],
        vec![0.1],
        KernelChoice::default(),
    );
    let err = s.validate().unwrap_err().to_string();
    assert!(err.contains("burn_in"), "{err}");
}

#[test]
fn divergent_cell_is_recorded() {
    let mut s = SweepSpec::new(ModelSpec::Gaussian { variance: 0.1 }, vec![2], vec![0.05, 0.5], KernelChoice::default());
    s.samples = 1000;
    s.burn_in = Some(100);
    let r = run_sweep(&s).unwrap();
    assert_eq!(r.records.len(), 2);
    assert!(r.records[0].status.is_ok());
    assert!(matches!(r.records[1].status, CellStatus::Diverged { .. }));
    assert!(r.records[1].bias.is_nan());
}

#[test]
fn sweep_is_deterministic_and_sorted() {
    let mut s = gaussian_spec(vec![3, 1], vec![0.2, 0.1], KernelChoice::default());
    s.samples = 2000;
    s.metrics.push(MetricSpec::new(1.0, BaseMetric::Lq { q: 1.0 }).unwrap());
    let a = run_sweep(&s).unwrap();
    let b = run_sweep(&s).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_csv(&a.records, &mut ca).unwrap();
    write_csv(&b.records, &mut cb).unwrap();
    assert_eq!(ca, cb);
    let keys: Vec<(usize, f64)> = a.records.iter().map(|r| (r.d, r.gamma)).collect();
    assert_eq!(keys, vec![(1, 0.1), (1, 0.1), (1, 0.2), (1, 0.2), (3, 0.1), (3, 0.1), (3, 0.2), (3, 0.2)]);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with(&CSV_HEADER.join(",")));
    assert!(!text.contains('\r'));
}

#[test]
fn product_identity_small_d() {
    // full-vector radial estimate against sqrt(d) times the pooled one
    let mut s = gaussian_spec(vec![4], vec![0.2], KernelChoice::default());
    s.samples = 50_000;
    s.metrics = vec![MetricSpec::euclidean(2.0).unwrap()];
    let r = run_sweep(&s).unwrap();
    let pooled = &r.records[0];
    let plan = &s.plan().unwrap()[0];
    let h = harvest::harvest(plan, &plan.stream(s.seed)).unwrap();
    let nx: Vec<f64> = h.x.chunks_exact(4).map(crate::stats::norm).collect();
    let ny: Vec<f64> = h.y.chunks_exact(4).map(crate::stats::norm).collect();
    let mut sx = nx.clone();
    let mut sy = ny.clone();
    sx.sort_by(f64::total_cmp);
    sy.sort_by(f64::total_cmp);
    let radial = crate::metrics::w1d_sorted(&sx, &sy, 2.0);
    let tol = 3.0 * pooled.stderr + 0.05 * pooled.bias;
    assert!((radial - pooled.bias).abs() <= tol, "{radial} vs {}", pooled.bias);
}

#[test]
fn product_model_uses_exact_marginal() {
    let mut s = SweepSpec::new(
        ModelSpec::Product {
            potential: PotentialName::DoubleWell,
            box_radius: 10.0,
        },
        vec![2],
        vec![0.05],
        KernelChoice::default(),
    );
    s.burn_in = Some(2000);
    s.samples = 4000;
    s.contraction = Some(ContractionInput::geometric(2.0, 0.5));
    let r = run_sweep(&s).unwrap();
    let rec = &r.records[0];
    assert!(rec.status.is_ok(), "{:?}", rec.status);
    assert_eq!(rec.route, "product-aggregate/exact-marginal");
    assert!(rec.bias >= 0.0 && rec.bias < 0.5);
    assert!(rec.theory_bound.unwrap() >= rec.bias - 3.0 * rec.stderr);
    assert!(rec.closed_form_bias.is_none());
}

#[test]
fn mean_field_uses_sliced_proxy() {
    let mut s = SweepSpec::new(
        ModelSpec::MeanField {
            confinement: PotentialName::DoubleWell,
            interaction: PotentialName::LogCosh,
            delta: 0.5,
            particle_dim: 1,
            box_radius: 10.0,
        },
        vec![3],
        vec![0.1],
        KernelChoice::default(),
    );
    s.burn_in = Some(500);
    s.samples = 1000;
    s.sliced_directions = 16;
    let r = run_sweep(&s).unwrap();
    let rec = &r.records[0];
    assert!(rec.status.is_ok(), "{:?}", rec.status);
    assert_eq!(rec.route, "sliced-proxy/fine-chain");
    assert!(rec.theory_bound.is_none());
}

#[test]
fn fit_slope_on_exact_power() {
    let pts: Vec<(f64, f64)> = [0.02, 0.05, 0.1, 0.2].iter().map(|g| (*g, 0.25 * g)).collect();
    let f = fit_slope(Axis::Gamma, &pts).unwrap();
    assert!((f.slope - 1.0).abs() < 1e-12);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!(f.warning.is_none());
    let few = [(1.0, 1.0), (2.0, -1.0), (3.0, 0.0), (4.0, 2.0)];
    assert!(fit_slope(Axis::Gamma, &few).is_err());
    let noisy = [(1.0, 1.0), (2.0, 5.0), (3.0, 0.5), (4.0, 3.0)];
    assert!(fit_slope(Axis::Dimension, &noisy).unwrap().warning.is_some());
}

#[test]
fn uhmc_contraction_factor() {
    // gamma -> 0 recovers |cos T|
    let c = gaussian_uhmc_contraction(1.0, 1.0, 1e-4).unwrap();
    assert!((c - 1f64.cos()).abs() < 1e-7);
}
