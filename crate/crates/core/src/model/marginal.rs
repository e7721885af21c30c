//! Exact sampling from a one-dimensional density `exp(-V)` by a tabulated
//! inverse distribution function.

use crate::error::{Error, Result};
use crate::sampler::GaussianSource;

use super::ScalarPotential;

const GRID: usize = 1 << 16;
/// The support is cut where `V - min V` exceeds this.
const TAIL_LOG_RATIO: f64 = 40.0;
const MAX_RADIUS: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct MarginalSampler {
    left: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl MarginalSampler {
    pub fn new(potential: &ScalarPotential) -> Result<Self> {
        let v = potential
            .value
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("potential {} has no value oracle", potential.name)))?;
        let mut radius = 1.0;
        let (left, step, logd) = loop {
            let step = 2.0 * radius / GRID as f64;
            let xs: Vec<f64> = (0..=GRID).map(|i| -radius + i as f64 * step).collect();
            let vs: Vec<f64> = xs.iter().map(|&x| v(x)).collect();
            if vs.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("potential {} is not finite on [-{radius}, {radius}]", potential.name)));
            }
            let vmin = vs.iter().copied().fold(f64::INFINITY, f64::min);
            if vs[0] - vmin > TAIL_LOG_RATIO && vs[GRID] - vmin > TAIL_LOG_RATIO {
                break (-radius, step, vs.into_iter().map(|x| vmin - x).collect::<Vec<_>>());
            }
            radius *= 2.0;
            if radius > MAX_RADIUS {
                return Err(Error::invalid(format!("exp(-{}) is not normalizable", potential.name)));
            }
        };
        let dens: Vec<f64> = logd.iter().map(|l| l.exp()).collect();
        let mut cdf = Vec::with_capacity(GRID + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in dens.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(MarginalSampler { left, step, cdf })
    }

    /// Inverse distribution function, linear between grid points.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.left + (i as f64 - 1.0 + frac) * self.step
    }

    pub fn sample(&self, g: &mut GaussianSource) -> f64 {
        self.quantile(g.uniform())
    }

    pub fn fill(&self, g: &mut GaussianSource, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = self.sample(g));
    }
}
