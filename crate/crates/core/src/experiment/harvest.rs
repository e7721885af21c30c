//! Stationary sample harvesting and the per-metric bias estimators.

use serde::{Deserialize, Serialize};

use super::CellPlan;
use crate::coupling::OuIncrement;
use crate::error::{Error, Result};
use crate::metrics::{
    product_aggregate, sliced_w, w1d_sorted, BaseMetric, DistanceEstimate, DistanceMethod, MetricSpec,
};
use crate::model::MarginalSampler;
use crate::sampler::{GaussianSource, KernelKind, KernelSpec, Purpose, RngStream, DIVERGENCE_NORM};
use crate::stats::{norm, norm_sq, stderr_of_batches, BATCHES};

/// How the reference sample of `pi` was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Exact dynamics driven by the chain's own noise.
    CoupledExact,
    /// Independent draws from the exact one-dimensional marginal.
    ExactMarginal,
    /// A chain with a step size [`super::REFERENCE_REFINEMENT`] times smaller.
    FineChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasRoute {
    /// Pooled one-dimensional `W_p` over coordinates, lifted to the product.
    ProductAggregate,
    /// One-dimensional `W_p` between the laws of `|x|` (isotropic laws).
    Radial,
    /// Sliced-Wasserstein proxy.
    SlicedProxy,
}

pub(crate) fn route_label(route: BiasRoute, reference: ReferenceKind) -> String {
    let r = match route {
        BiasRoute::ProductAggregate => "product-aggregate",
        BiasRoute::Radial => "radial",
        BiasRoute::SlicedProxy => "sliced-proxy",
    };
    let s = match reference {
        ReferenceKind::CoupledExact => "coupled-exact",
        ReferenceKind::ExactMarginal => "exact-marginal",
        ReferenceKind::FineChain => "fine-chain",
    };
    format!("{r}/{s}")
}

/// Retained chain states `x` and reference states `y`, row-major in time.
pub(crate) struct Harvest {
    pub d: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub reference: ReferenceKind,
}

impl Harvest {
    fn rows(v: &[f64], d: usize) -> Vec<Vec<f64>> {
        v.chunks_exact(d).map(<[f64]>::to_vec).collect()
    }

    pub fn x_rows(&self) -> Vec<Vec<f64>> {
        Self::rows(&self.x, self.d)
    }

    /// `|x|^2 / d` per retained state.
    pub fn second_moments(&self) -> Vec<f64> {
        self.x.chunks_exact(self.d).map(|r| norm_sq(r) / self.d as f64).collect()
    }
}

fn check(x: &[f64], step: usize) -> Result<()> {
    let n = norm(x);
    if n <= DIVERGENCE_NORM {
        Ok(())
    } else {
        Err(Error::Divergence { step, norm: n })
    }
}

/// Advances a chain and, for Gaussian targets, the exact dynamics it is
/// coupled with.
enum Stepper {
    CoupledEuler {
        kernel: KernelSpec,
        tamed: bool,
        ou: OuIncrement,
        decay: f64,
        drift: Vec<f64>,
    },
    CoupledHmc {
        kernel: KernelSpec,
        exact: KernelSpec,
        momentum: Vec<f64>,
        sx: crate::sampler::Scratch,
        sy: crate::sampler::Scratch,
    },
    Single {
        kernel: KernelSpec,
        noise: Vec<f64>,
        scratch: crate::sampler::Scratch,
    },
}

impl Stepper {
    fn step(&mut self, x: &mut [f64], y: &mut [f64], g: &mut GaussianSource, index: usize) -> Result<()> {
        match self {
            Stepper::CoupledEuler {
                kernel,
                tamed,
                ou,
                decay,
                drift,
            } => {
                let gamma = kernel.gamma().unwrap_or_default();
                kernel.model().drift_into(x, drift);
                if *tamed {
                    let s = 1.0 / (1.0 + gamma * norm(drift));
                    drift.iter_mut().for_each(|v| *v *= s);
                }
                let r2 = std::f64::consts::SQRT_2;
                for j in 0..x.len() {
                    let (i, b) = ou.draw(g);
                    y[j] = *decay * y[j] + r2 * i;
                    x[j] += gamma * drift[j] + r2 * b;
                }
                check(x, index)
            }
            Stepper::CoupledHmc {
                kernel,
                exact,
                momentum,
                sx,
                sy,
            } => {
                g.fill_normal(momentum);
                kernel.apply(x, momentum, sx).map_err(|e| e.at_step(index))?;
                exact.apply(y, momentum, sy).map_err(|e| e.at_step(index))
            }
            Stepper::Single { kernel, noise, scratch } => {
                g.fill_normal(noise);
                kernel.apply(x, noise, scratch).map_err(|e| e.at_step(index))
            }
        }
    }
}

fn coupled_stepper(kernel: &KernelSpec, variance: f64) -> Result<Stepper> {
    let d = kernel.dimension();
    Ok(match kernel.kind() {
        KernelKind::Ula | KernelKind::TamedUla => {
            let gamma = kernel.gamma().unwrap_or_default();
            Stepper::CoupledEuler {
                kernel: kernel.clone(),
                tamed: kernel.kind() == KernelKind::TamedUla,
                ou: OuIncrement::new(gamma, variance),
                decay: (-gamma / variance).exp(),
                drift: vec![0.0; d],
            }
        }
        KernelKind::Uhmc => Stepper::CoupledHmc {
            kernel: kernel.clone(),
            exact: KernelSpec::exact_hmc(kernel.model().clone(), kernel.duration().unwrap_or_default())?,
            momentum: vec![0.0; d],
            sx: kernel.scratch(),
            sy: kernel.scratch(),
        },
        other => return Err(Error::invalid(format!("kernel {other} cannot be swept"))),
    })
}

fn single_stepper(kernel: &KernelSpec) -> Stepper {
    Stepper::Single {
        kernel: kernel.clone(),
        noise: vec![0.0; kernel.dimension()],
        scratch: kernel.scratch(),
    }
}

/// Runs `burn_in` transitions, then stores `count` states `thin` apart.
#[allow(clippy::too_many_arguments)]
fn collect(
    stepper: &mut Stepper,
    x: &mut [f64],
    y: &mut [f64],
    burn_in: usize,
    thin: usize,
    count: usize,
    g: &mut GaussianSource,
    out_x: &mut Vec<f64>,
    out_y: Option<&mut Vec<f64>>,
) -> Result<()> {
    let mut k = 0;
    for _ in 0..burn_in {
        k += 1;
        stepper.step(x, y, g, k)?;
    }
    let mut out_y = out_y;
    for _ in 0..count {
        for _ in 0..thin {
            k += 1;
            stepper.step(x, y, g, k)?;
        }
        out_x.extend_from_slice(x);
        if let Some(oy) = out_y.as_deref_mut() {
            oy.extend_from_slice(y);
        }
    }
    Ok(())
}

pub(crate) fn harvest(plan: &CellPlan, stream: &RngStream) -> Result<Harvest> {
    let kernel = &plan.kernel;
    let model = kernel.model();
    let d = model.dimension();
    let n = plan.n_samples;
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n * d);
    let counts = plan.replica_counts();
    let reference = plan.reference;
    let marginal = match reference {
        ReferenceKind::ExactMarginal => Some(MarginalSampler::new(
            model.marginal().ok_or_else(|| Error::invalid("model has no one-dimensional marginal"))?,
        )?),
        _ => None,
    };
    for (r, &count) in counts.iter().enumerate() {
        let rs = stream.child(r as u64, Purpose::Replica);
        let mut g = rs.child(0, Purpose::Chain).generator();
        match reference {
            ReferenceKind::CoupledExact => {
                let v = model.gaussian_variance().unwrap_or(1.0);
                let mut x = vec![0.0; d];
                let mut init = rs.child(0, Purpose::Initial).generator();
                init.fill_normal(&mut x);
                x.iter_mut().for_each(|c| *c *= v.sqrt());
                let mut y = x.clone();
                let mut st = coupled_stepper(kernel, v)?;
                collect(&mut st, &mut x, &mut y, plan.burn_in, plan.thin, count, &mut g, &mut xs, Some(&mut ys))?;
            }
            ReferenceKind::ExactMarginal | ReferenceKind::FineChain => {
                let mut x = vec![0.0; d];
                let mut unused = Vec::new();
                let mut st = single_stepper(kernel);
                collect(&mut st, &mut x, &mut unused, plan.burn_in, plan.thin, count, &mut g, &mut xs, None)?;
                if let Some(m) = &marginal {
                    let mut gr = rs.child(0, Purpose::Reference).generator();
                    let start = ys.len();
                    ys.resize(start + count * d, 0.0);
                    m.fill(&mut gr, &mut ys[start..]);
                } else {
                    let fine = plan
                        .fine_kernel
                        .as_ref()
                        .ok_or_else(|| Error::invalid("no reference kernel for this cell"))?;
                    let f = super::REFERENCE_REFINEMENT;
                    let mut y = vec![0.0; d];
                    let mut gr = rs.child(1, Purpose::Reference).generator();
                    let mut st = single_stepper(fine);
                    collect(&mut st, &mut y, &mut unused, plan.burn_in * f, plan.thin * f, count, &mut gr, &mut ys, None)?;
                }
            }
        }
    }
    Ok(Harvest {
        d,
        n,
        x: xs,
        y: ys,
        reference,
    })
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Sorted-coupling `W_p` on the full sample, with a standard error from
/// [`BATCHES`] contiguous time batches.
fn batched_w1d(a: &[f64], b: &[f64], rows: usize, per_row: usize, p: f64) -> (f64, f64) {
    let value = w1d_sorted(&sorted(a), &sorted(b), p);
    let size = rows / BATCHES;
    if size < 2 {
        return (value, f64::NAN);
    }
    let batch_values: Vec<f64> = (0..BATCHES)
        .map(|k| {
            let r = k * size * per_row..(k + 1) * size * per_row;
            w1d_sorted(&sorted(&a[r.clone()]), &sorted(&b[r]), p)
        })
        .collect();
    (value, stderr_of_batches(&batch_values))
}

pub(crate) fn estimate_bias(
    h: &Harvest,
    metric: &MetricSpec,
    directions: usize,
    stream: &RngStream,
) -> Result<(DistanceEstimate, BiasRoute)> {
    metric.validate()?;
    let separable = metric.product_exponent().is_some() || h.d == 1;
    let coordinatewise = matches!(h.reference, ReferenceKind::CoupledExact | ReferenceKind::ExactMarginal);
    if separable && coordinatewise {
        let (value, stderr) = batched_w1d(&h.x, &h.y, h.n, h.d, metric.p);
        let per = DistanceEstimate {
            value,
            stderr,
            method: DistanceMethod::Empirical1d,
            n_a: h.n * h.d,
            n_b: h.n * h.d,
        };
        let est = if h.d == 1 { per } else { product_aggregate(metric, per, h.d)? };
        return Ok((est, BiasRoute::ProductAggregate));
    }
    if metric.base == BaseMetric::Euclidean && h.reference == ReferenceKind::CoupledExact {
        let nx: Vec<f64> = h.x.chunks_exact(h.d).map(norm).collect();
        let ny: Vec<f64> = h.y.chunks_exact(h.d).map(norm).collect();
        let (value, stderr) = batched_w1d(&nx, &ny, h.n, 1, metric.p);
        return Ok((
            DistanceEstimate {
                value,
                stderr,
                method: DistanceMethod::Empirical1d,
                n_a: h.n,
                n_b: h.n,
            },
            BiasRoute::Radial,
        ));
    }
    let est = sliced_w(&h.x_rows(), &Harvest::rows(&h.y, h.d), metric.p, directions, stream)?;
    Ok((est, BiasRoute::SlicedProxy))
}
