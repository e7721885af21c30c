//! Synchronous couplings of the discrete kernels with their continuous-time
//! references, and empirical contraction rates.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::metrics::{base_distance, MetricSpec};
use crate::model::TargetModel;
use crate::parallel::{chunks, map_indexed};
use crate::sampler::{
    leapfrog_count, run_chain_visit, GaussianSource, KernelKind, KernelSpec, Purpose, RngStream, DIVERGENCE_NORM,
};
use crate::stats::{least_squares, norm, norm_sq};

pub const DEFAULT_REFINEMENT: usize = 64;
pub const MIN_REFINEMENT: usize = 8;

/// Fraction of the coupled path discarded before fitting a rate.
pub const TRANSIENT_FRACTION: f64 = 0.1;

/// Tolerated relative drift of the running second moment over the last half
/// of an equilibration run.
pub const EQUILIBRATION_DRIFT: f64 = 0.01;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reference {
    /// Exact transition of the diffusion or Hamiltonian flow (Gaussian
    /// targets).
    Exact,
    /// The same scheme on a grid `refinement` times finer.
    FineGrid { refinement: usize },
}

impl Reference {
    pub fn label(&self) -> String {
        match self {
            Reference::Exact => "exact".into(),
            Reference::FineGrid { refinement } => format!("fine-grid({refinement})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialLaw {
    /// Draw from the target's closed-form law.
    ClosedFormPi,
    /// Draw from a long run of the discrete chain after `burn_in` steps.
    ChainEquilibrated { burn_in: usize },
}

/// Evidence that a chain reached stationarity: the running mean of `|x|^2`
/// over the last half of the run moved by less than
/// [`EQUILIBRATION_DRIFT`] relative to its final value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibrationCertificate {
    pub burn_in: usize,
    pub relative_drift: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub times: Vec<f64>,
    /// `E^{1/2} |Y_t - Ybar_t|^2`.
    pub rmse: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `E |Y_t - Ybar_t|^2` and its standard error.
    pub mse: Vec<f64>,
    pub mse_stderr: Vec<f64>,
    pub replicas: usize,
    pub reference: Reference,
    pub certificate: Option<EquilibrationCertificate>,
}

/// Per-time sums over one chunk of replicas.
#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    fn push(&mut self, k: usize, v: f64) {
        self.sum[k] += v;
        self.sum_sq[k] += v * v;
    }

    fn merge(parts: Vec<Result<Moments>>, len: usize) -> Result<Moments> {
        let mut total = Moments::new(len);
        for p in parts {
            let p = p?;
            for k in 0..len {
                total.sum[k] += p.sum[k];
                total.sum_sq[k] += p.sum_sq[k];
            }
        }
        Ok(total)
    }

    fn into_curve(
        self,
        times: Vec<f64>,
        replicas: usize,
        reference: Reference,
        certificate: Option<EquilibrationCertificate>,
    ) -> AccuracyCurve {
        let n = replicas as f64;
        let mut curve = AccuracyCurve {
            times,
            rmse: Vec::new(),
            stderr: Vec::new(),
            mse: Vec::new(),
            mse_stderr: Vec::new(),
            replicas,
            reference,
            certificate,
        };
        for k in 0..self.sum.len() {
            let m = self.sum[k] / n;
            let var = if replicas > 1 {
                ((self.sum_sq[k] - n * m * m) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            let se = (var / n).sqrt();
            let r = m.max(0.0).sqrt();
            curve.mse.push(m);
            curve.mse_stderr.push(se);
            curve.rmse.push(r);
            curve.stderr.push(if r > 0.0 { se / (2.0 * r) } else { 0.0 });
        }
        curve
    }
}

fn check_state(x: &[f64], step: usize) -> Result<()> {
    let n = norm(x);
    if n <= DIVERGENCE_NORM {
        Ok(())
    } else {
        Err(Error::Divergence { step, norm: n })
    }
}

/// Initial points for `count` replicas, plus the certificate when a chain
/// was used.
pub fn initial_points(
    kernel: &KernelSpec,
    law: InitialLaw,
    count: usize,
    stream: &RngStream,
) -> Result<(Vec<Vec<f64>>, Option<EquilibrationCertificate>)> {
    let model = kernel.model();
    let d = model.dimension();
    match law {
        InitialLaw::ClosedFormPi => {
            let pi = model
                .stationary_law()
                .ok_or_else(|| Error::invalid(format!("model {} has no closed-form law", model.name())))?;
            let pts = (0..count)
                .map(|r| {
                    let mut g = stream.child(r as u64, Purpose::Initial).generator();
                    let mut x = vec![0.0; d];
                    pi.sample_into(&mut g, &mut x);
                    x
                })
                .collect();
            Ok((pts, None))
        }
        InitialLaw::ChainEquilibrated { burn_in } => {
            let thin = (1.0 / kernel.time_per_transition()).ceil().max(1.0) as usize;
            let (pts, cert) = equilibrate(kernel, burn_in, count, thin, &stream.child(0, Purpose::Initial))?;
            Ok((pts, Some(cert)))
        }
    }
}

/// Runs `kernel` from the origin for `burn_in` steps, certifies the burn-in
/// and returns `count` states spaced `thin` steps apart.
pub fn equilibrate(
    kernel: &KernelSpec,
    burn_in: usize,
    count: usize,
    thin: usize,
    stream: &RngStream,
) -> Result<(Vec<Vec<f64>>, EquilibrationCertificate)> {
    let d = kernel.dimension();
    let x0 = vec![0.0; d];
    let mut second = Vec::with_capacity(burn_in + 1);
    let mut last = x0.clone();
    run_chain_visit(kernel, &x0, burn_in, 0, 1, &stream.child(0, Purpose::Chain), |_, x| {
        second.push(norm_sq(x));
        last.copy_from_slice(x);
    })?;
    let certificate = certify(&second, burn_in);
    let mut pts = Vec::with_capacity(count);
    if count > 0 {
        run_chain_visit(kernel, &last, count - 1, 0, thin, &stream.child(1, Purpose::Chain), |_, x| {
            pts.push(x.to_vec())
        })?;
    }
    Ok((pts, certificate))
}

fn certify(second_moments: &[f64], burn_in: usize) -> EquilibrationCertificate {
    let n = second_moments.len();
    if n < 4 {
        return EquilibrationCertificate {
            burn_in,
            relative_drift: f64::INFINITY,
            passed: false,
        };
    }
    let half = n / 2;
    let mid: f64 = second_moments[half..half + half / 2].iter().sum::<f64>() / (half / 2) as f64;
    let end: f64 = second_moments[half + half / 2..].iter().sum::<f64>() / (n - half - half / 2) as f64;
    let drift = (end - mid).abs() / end.abs().max(f64::MIN_POSITIVE);
    EquilibrationCertificate {
        burn_in,
        relative_drift: drift,
        passed: drift < EQUILIBRATION_DRIFT,
    }
}

/// Draws `(I, B)` with `I = int_0^gamma e^{-(gamma - s)/v} dB_s` and
/// `B = B_gamma` for one coordinate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OuIncrement {
    b_scale: f64,
    i_from_b: f64,
    i_own: f64,
}

impl OuIncrement {
    pub(crate) fn new(gamma: f64, v: f64) -> Self {
        let var_i = 0.5 * v * -(-2.0 * gamma / v).exp_m1();
        let cov = v * -(-gamma / v).exp_m1();
        let i_from_b = cov / gamma.sqrt();
        OuIncrement {
            b_scale: gamma.sqrt(),
            i_from_b,
            i_own: (var_i - i_from_b * i_from_b).max(0.0).sqrt(),
        }
    }

    pub(crate) fn draw(&self, g: &mut GaussianSource) -> (f64, f64) {
        let z1 = g.normal();
        let z2 = g.normal();
        (self.i_from_b * z1 + self.i_own * z2, self.b_scale * z1)
    }
}

fn euler_kernel_check(kernel: &KernelSpec) -> Result<bool> {
    match kernel.kind() {
        KernelKind::Ula => Ok(false),
        KernelKind::TamedUla => Ok(true),
        other => Err(Error::invalid(format!("kernel {other} is not an Euler scheme"))),
    }
}

fn euler_drift(model: &TargetModel, tamed: bool, gamma: f64, x: &[f64], out: &mut [f64]) {
    model.drift_into(x, out);
    if tamed {
        let s = 1.0 / (1.0 + gamma * norm(out));
        out.iter_mut().for_each(|v| *v *= s);
    }
}

fn check_refinement(reference: Reference) -> Result<()> {
    if let Reference::FineGrid { refinement } = reference {
        if refinement < MIN_REFINEMENT {
            return Err(Error::invalid(format!(
                "refinement must be at least {MIN_REFINEMENT}, got {refinement}"
            )));
        }
    }
    Ok(())
}

/// Mean-square distance between the Euler chain and the diffusion started
/// at the same point and driven by the same Brownian path, at times
/// `n gamma` for `n = 0..=horizon_steps`.
pub fn coupled_em_accuracy(
    kernel: &KernelSpec,
    horizon_steps: usize,
    replicas: usize,
    initial_law: InitialLaw,
    reference: Reference,
    stream: &RngStream,
) -> Result<AccuracyCurve> {
    let tamed = euler_kernel_check(kernel)?;
    check_refinement(reference)?;
    if replicas == 0 {
        return Err(Error::invalid("need at least one replica"));
    }
    let model = kernel.model();
    let gamma = kernel.gamma().unwrap_or_default();
    let ou = match reference {
        Reference::Exact => Some(OuIncrement::new(
            gamma,
            model
                .gaussian_variance()
                .ok_or_else(|| Error::invalid("the exact reference needs a centered isotropic Gaussian target"))?,
        )),
        Reference::FineGrid { .. } => None,
    };
    let (starts, certificate) = initial_points(kernel, initial_law, replicas, stream)?;
    let len = horizon_steps + 1;
    let parts = map_indexed(chunks(replicas, CHUNK).len(), |c| {
        let (start, count) = chunks(replicas, CHUNK)[c];
        let mut acc = Moments::new(len);
        for r in start..start + count {
            let mut g = stream.child(r as u64, Purpose::Replica).generator();
            let path = em_pair(model, tamed, gamma, &starts[r], horizon_steps, reference, ou, &mut g)?;
            for (k, v) in path.into_iter().enumerate() {
                acc.push(k, v);
            }
        }
        Ok(acc)
    });
    let total = Moments::merge(parts, len)?;
    let times = (0..len).map(|n| n as f64 * gamma).collect();
    Ok(total.into_curve(times, replicas, reference, certificate))
}

#[allow(clippy::too_many_arguments)]
fn em_pair(
    model: &TargetModel,
    tamed: bool,
    gamma: f64,
    start: &[f64],
    steps: usize,
    reference: Reference,
    ou: Option<OuIncrement>,
    g: &mut GaussianSource,
) -> Result<Vec<f64>> {
    let d = start.len();
    let mut x = start.to_vec();
    let mut y = start.to_vec();
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut brown = vec![0.0; d];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    let sqrt2 = std::f64::consts::SQRT_2;
    for n in 1..=steps {
        euler_drift(model, tamed, gamma, &x, &mut bx);
        match (reference, ou) {
            (Reference::Exact, Some(ou)) => {
                let v = model.gaussian_variance().unwrap_or(1.0);
                let decay = (-gamma / v).exp();
                for j in 0..d {
                    let (i, b) = ou.draw(g);
                    y[j] = decay * y[j] + sqrt2 * i;
                    brown[j] = b;
                }
            }
            (Reference::FineGrid { refinement }, _) => {
                let h = gamma / refinement as f64;
                let sh = h.sqrt();
                brown.iter_mut().for_each(|v| *v = 0.0);
                for _ in 0..refinement {
                    model.drift_into(&y, &mut by);
                    for j in 0..d {
                        let db = sh * g.normal();
                        y[j] += h * by[j] + sqrt2 * db;
                        brown[j] += db;
                    }
                }
            }
            (Reference::Exact, None) => unreachable!("exact reference is resolved before the loop"),
        }
        for j in 0..d {
            x[j] += gamma * bx[j] + sqrt2 * brown[j];
        }
        check_state(&x, n)?;
        check_state(&y, n)?;
        out.push(x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum());
    }
    Ok(out)
}

/// Where the coupled HMC comparison starts.
#[derive(Debug, Clone, PartialEq)]
pub enum HmcStart {
    /// `q` from `initial_law`, `p ~ N(0, I)`.
    Random(InitialLaw),
    Fixed { q: Vec<f64>, p: Vec<f64> },
}

/// Mean-square position error between `T / gamma` Verlet steps and the
/// reference Hamiltonian flow from a shared `(q, p)`, at times `k gamma`.
pub fn coupled_hmc_accuracy(
    model: &TargetModel,
    duration: f64,
    gamma: f64,
    replicas: usize,
    start: HmcStart,
    reference: Reference,
    stream: &RngStream,
) -> Result<AccuracyCurve> {
    let steps = leapfrog_count(duration, gamma)?;
    check_refinement(reference)?;
    if replicas == 0 {
        return Err(Error::invalid("need at least one replica"));
    }
    let d = model.dimension();
    let variance = match reference {
        Reference::Exact => Some(
            model
                .gaussian_variance()
                .ok_or_else(|| Error::invalid("the exact reference needs a centered isotropic Gaussian target"))?,
        ),
        Reference::FineGrid { .. } => None,
    };
    let (starts, certificate) = match &start {
        HmcStart::Random(law) => {
            let kernel = KernelSpec::uhmc(model.clone(), duration, gamma)?;
            let (qs, cert) = initial_points(&kernel, *law, replicas, stream)?;
            (Some(qs), cert)
        }
        HmcStart::Fixed { q, p } => {
            check_dim(d, q.len())?;
            check_dim(d, p.len())?;
            (None, None)
        }
    };
    let len = steps + 1;
    let parts = map_indexed(chunks(replicas, CHUNK).len(), |c| {
        let (first, count) = chunks(replicas, CHUNK)[c];
        let mut acc = Moments::new(len);
        for r in first..first + count {
            let (q, p) = match (&start, &starts) {
                (HmcStart::Fixed { q, p }, _) => (q.clone(), p.clone()),
                (_, Some(qs)) => {
                    let mut g = stream.child(r as u64, Purpose::Momentum).generator();
                    (qs[r].clone(), g.normal_vec(d))
                }
                _ => unreachable!("random starts are drawn above"),
            };
            let path = hmc_pair(model, gamma, steps, &q, &p, reference, variance)?;
            for (k, v) in path.into_iter().enumerate() {
                acc.push(k, v);
            }
        }
        Ok(acc)
    });
    let total = Moments::merge(parts, len)?;
    let times = (0..len).map(|k| k as f64 * gamma).collect();
    Ok(total.into_curve(times, replicas, reference, certificate))
}

fn hmc_pair(
    model: &TargetModel,
    gamma: f64,
    steps: usize,
    q0: &[f64],
    p0: &[f64],
    reference: Reference,
    variance: Option<f64>,
) -> Result<Vec<f64>> {
    let d = q0.len();
    let (mut q, mut p) = (q0.to_vec(), p0.to_vec());
    let (mut rq, mut rp) = (q0.to_vec(), p0.to_vec());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    for k in 1..=steps {
        (q, p) = crate::sampler::verlet_step(model, gamma, &q, &p).map_err(|e| e.at_step(k))?;
        match reference {
            Reference::Exact => {
                let omega = 1.0 / variance.unwrap_or(1.0).sqrt();
                let (s, c) = (omega * k as f64 * gamma).sin_cos();
                for j in 0..d {
                    rq[j] = c * q0[j] + s / omega * p0[j];
                }
            }
            Reference::FineGrid { refinement } => {
                let h = gamma / refinement as f64;
                for _ in 0..refinement {
                    (rq, rp) = crate::sampler::verlet_step(model, h, &rq, &rp).map_err(|e| e.at_step(k))?;
                }
            }
        }
        out.push(q.iter().zip(&rq).map(|(a, b)| (a - b) * (a - b)).sum());
    }
    Ok(out)
}

/// Metric distance along a synchronously coupled pair started at `(x, y)`,
/// for `n = 0..=n_steps`.
pub fn coupled_distance_path(
    kernel: &KernelSpec,
    metric: &MetricSpec,
    x: &[f64],
    y: &[f64],
    n_steps: usize,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    let d = kernel.dimension();
    check_dim(d, x.len())?;
    check_dim(d, y.len())?;
    let mut g = stream.generator();
    let (mut x, mut y) = (x.to_vec(), y.to_vec());
    let mut noise = vec![0.0; d];
    let mut sx = kernel.scratch();
    let mut sy = kernel.scratch();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(base_distance(metric, &x, &y)?);
    for n in 1..=n_steps {
        g.fill_normal(&mut noise);
        kernel.apply(&mut x, &noise, &mut sx).map_err(|e| e.at_step(n))?;
        kernel.apply(&mut y, &noise, &mut sy).map_err(|e| e.at_step(n))?;
        out.push(base_distance(metric, &x, &y)?);
    }
    Ok(out)
}

/// Initial pairs for [`estimate_contraction`].
#[derive(Debug, Clone, PartialEq)]
pub enum PairInit {
    Fixed { x: Vec<f64>, y: Vec<f64> },
    /// Both points drawn independently from `N(0, scale^2 I)`.
    Gaussian { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionEstimate {
    /// `-slope / h`, or `+inf` when the coupled points met exactly
    /// before three post-transient steps were available.
    pub rate_per_unit_time: f64,
    /// First step at which every pair had met exactly.
    pub coalesced_at: Option<usize>,
    pub metric: MetricSpec,
    pub pairs: usize,
    pub steps: usize,
    /// Root-mean-square residual of the log-linear fit.
    pub fit_residual: f64,
    /// Mean coupled distance per step.
    pub mean_distance: Vec<f64>,
}

/// Fits `log E d(X_n, Y_n)` against `n` on the synchronously coupled pair,
/// after discarding the first [`TRANSIENT_FRACTION`] of the steps and
/// stopping where the pairs meet.
pub fn estimate_contraction(
    kernel: &KernelSpec,
    metric: &MetricSpec,
    n_pairs: usize,
    n_steps: usize,
    init: &PairInit,
    stream: &RngStream,
) -> Result<ContractionEstimate> {
    metric.validate()?;
    if n_pairs == 0 || n_steps < 3 {
        return Err(Error::invalid("need at least one pair and three steps"));
    }
    let d = kernel.dimension();
    let paths = map_indexed(n_pairs, |i| {
        let s = stream.child(i as u64, Purpose::Replica);
        let (x, y) = match init {
            PairInit::Fixed { x, y } => (x.clone(), y.clone()),
            PairInit::Gaussian { scale } => {
                let mut g = s.child(0, Purpose::Initial).generator();
                let x: Vec<f64> = g.normal_vec(d).iter().map(|v| scale * v).collect();
                let y: Vec<f64> = g.normal_vec(d).iter().map(|v| scale * v).collect();
                (x, y)
            }
        };
        coupled_distance_path(kernel, metric, &x, &y, n_steps, &s)
    });
    let mut mean = vec![0.0; n_steps + 1];
    for p in paths {
        for (m, v) in mean.iter_mut().zip(p?) {
            *m += v / n_pairs as f64;
        }
    }
    let first = ((n_steps as f64) * TRANSIENT_FRACTION).floor() as usize;
    let coalesced_at = mean.iter().position(|v| *v <= 0.0);
    let last = coalesced_at.map_or(n_steps, |n| n.saturating_sub(1));
    let window: Vec<(f64, f64)> = (first..=last.max(first)).map(|n| (n as f64, mean[n])).collect();
    let h = kernel.time_per_transition();
    let (rate, residual) = if window.len() < 3 || window.iter().any(|(_, v)| *v <= 0.0) {
        (f64::INFINITY, 0.0)
    } else {
        let pts: Vec<(f64, f64)> = window.iter().map(|(n, v)| (*n, v.ln())).collect();
        let (slope, intercept) = least_squares(&pts);
        let res = (pts.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
        (-slope / h, res)
    };
    Ok(ContractionEstimate {
        rate_per_unit_time: rate,
        coalesced_at,
        metric: *metric,
        pairs: n_pairs,
        steps: n_steps,
        fit_residual: residual,
        mean_distance: mean,
    })
}
