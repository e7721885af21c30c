//! Strict JSON configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{ContractionInput, SemigroupApprox, TvInputs};
use crate::coupling::{InitialLaw, Reference, DEFAULT_REFINEMENT};
use crate::error::{Error, Result};
use crate::experiment::{KernelChoice, SlopeWindows, SweepSpec};
use crate::metrics::MetricSpec;
use crate::model::{ModelSpec, TargetModel};
use crate::sampler::{KernelKind, KernelSpec, DEFAULT_GAMMA_CAP};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "MCMCLAB_SEED";

fn default_kind() -> KernelKind {
    KernelKind::Ula
}
fn default_cap() -> f64 {
    DEFAULT_GAMMA_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_kind")]
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default = "default_cap")]
    pub gamma_cap: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            kind: KernelKind::Ula,
            gamma: None,
            duration: None,
            gamma_cap: DEFAULT_GAMMA_CAP,
        }
    }
}

impl KernelSection {
    pub fn gamma(&self) -> Result<f64> {
        self.gamma
            .ok_or_else(|| Error::Config(format!("kernel `{}` needs `kernel.gamma`", self.kind)))
    }

    pub fn build(&self, model: TargetModel) -> Result<KernelSpec> {
        let gamma = match self.kind {
            KernelKind::ExactHmc => None,
            _ => Some(self.gamma()?),
        };
        KernelSpec::new(self.kind, model, gamma, self.duration, self.gamma_cap).map_err(config_error)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// Falls back to the top-level `metric`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<MetricSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pooled: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sliced_directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_windows: Option<SlopeWindows>,
    #[serde(default)]
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    /// Defaults to `kernel.gamma_cap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ula: Option<ContractionInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<ContractionInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv: Option<TvInputs>,
}

fn default_horizon() -> usize {
    100
}
fn default_replicas() -> usize {
    10_000
}
fn default_law() -> InitialLaw {
    InitialLaw::ClosedFormPi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default = "default_horizon")]
    pub horizon_steps: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_law")]
    pub initial_law: InitialLaw,
    /// Exact for Gaussian targets, otherwise a fine grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            horizon_steps: default_horizon(),
            replicas: default_replicas(),
            initial_law: default_law(),
            reference: None,
        }
    }
}

impl CouplingSection {
    pub fn reference_for(&self, model: &TargetModel) -> Reference {
        self.reference.unwrap_or(if model.gaussian_variance().is_some() {
            Reference::Exact
        } else {
            Reference::FineGrid {
                refinement: DEFAULT_REFINEMENT,
            }
        })
    }
}

fn default_pairs() -> usize {
    16
}
fn default_steps() -> usize {
    1000
}
fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionSection {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Standard deviation of the random initial points.
    #[serde(default = "default_scale")]
    pub init_scale: f64,
    /// A fixed initial pair replaces the random ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

impl Default for ContractionSection {
    fn default() -> Self {
        ContractionSection {
            pairs: default_pairs(),
            steps: default_steps(),
            init_scale: default_scale(),
            x: None,
            y: None,
        }
    }
}

fn default_q_samples() -> usize {
    10_000
}
fn default_u_grid() -> usize {
    16
}
fn default_points() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantitiesSection {
    /// Samples of `pi` (and of `pi_gamma`) behind each integral.
    #[serde(default = "default_q_samples")]
    pub samples: usize,
    #[serde(default = "default_u_grid")]
    pub u_grid: usize,
    /// Exact for Gaussian targets, otherwise Euler with step `gamma / 64`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<SemigroupApprox>,
    /// Burn-in of the chain that samples `pi_gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// Points at which the momentum-average identities are checked.
    #[serde(default = "default_points")]
    pub identity_points: usize,
}

impl Default for QuantitiesSection {
    fn default() -> Self {
        QuantitiesSection {
            samples: default_q_samples(),
            u_grid: default_u_grid(),
            semigroup: None,
            burn_in: None,
            identity_points: default_points(),
        }
    }
}

fn default_sidecar() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Written to standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Write `<path>` with extension `json` next to CSV output.
    #[serde(default = "default_sidecar")]
    pub sidecar: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            path: None,
            sidecar: true,
        }
    }
}

/// Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelSpec,
    /// Dimension for single-cell commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(rename = "bounds-inputs", default, skip_serializing_if = "Option::is_none")]
    pub bounds_inputs: Option<BoundsSection>,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub contraction: ContractionSection,
    #[serde(default)]
    pub quantities: QuantitiesSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSection,
}

pub(crate) fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) | Error::Config(m) => Error::Config(m),
        other => other,
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Seed precedence: explicit flag, then [`SEED_ENV`], then the file.
    pub fn resolve_seed(&mut self, flag: Option<u64>, env: Option<&str>) -> Result<u64> {
        let seed = match (flag, env) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer")))?,
            (None, None) => self.seed.unwrap_or(0),
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn dimension(&self) -> usize {
        self.dimension.unwrap_or(1)
    }

    pub fn metric(&self) -> MetricSpec {
        self.metric.unwrap_or(MetricSpec {
            p: 2.0,
            base: crate::metrics::BaseMetric::Euclidean,
            equivalence_m: None,
        })
    }

    pub fn build_model(&self) -> Result<TargetModel> {
        self.model.build(self.dimension()).map_err(config_error)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let sw = self
            .sweep
            .clone()
            .ok_or_else(|| Error::Config("missing `sweep` section".into()))?;
        let kernel = KernelChoice {
            kind: self.kernel.kind,
            duration: self.kernel.duration,
        };
        let mut spec = SweepSpec::new(self.model.clone(), sw.dims, sw.gammas, kernel);
        spec.metrics = sw.metrics.unwrap_or_else(|| vec![self.metric()]);
        spec.gamma_cap = self.kernel.gamma_cap;
        spec.seed = self.seed();
        spec.burn_in = sw.burn_in;
        spec.contraction = sw.contraction;
        spec.hmc_c = sw.hmc_c;
        spec.record_wall_time = sw.record_wall_time;
        if let Some(v) = sw.samples {
            spec.samples = v;
        }
        if let Some(v) = sw.replicas {
            spec.replicas = v;
        }
        if let Some(v) = sw.budget {
            spec.budget = v;
        }
        if let Some(v) = sw.max_pooled {
            spec.max_pooled = v;
        }
        if let Some(v) = sw.sliced_directions {
            spec.sliced_directions = v;
        }
        if let Some(v) = sw.slope_windows {
            spec.slope_windows = v;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_parsing() {
        assert!(Config::from_json("{}").is_ok());
        assert!(Config::from_json(r#"{"sed": 3}"#).is_err());
        assert!(Config::from_json(r#"{"kernel": {"kind": "ula", "gama": 0.1}}"#).is_err());
        let c = Config::from_json(
            r#"{"model": {"kind": "gaussian", "variance": 2}, "kernel": {"kind": "uhmc", "gamma": 0.1, "T": 1},
                "bounds-inputs": {"ula": {"A": 1, "c": 1}}, "seed": 5}"#,
        )
        .unwrap();
        assert_eq!(c.kernel.duration, Some(1.0));
        assert_eq!(c.seed(), 5);
    }

    #[test]
    fn seed_precedence() {
        let mut c = Config::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(c.resolve_seed(None, None).unwrap(), 5);
        assert_eq!(c.resolve_seed(None, Some("9")).unwrap(), 9);
        assert_eq!(c.resolve_seed(Some(1), Some("9")).unwrap(), 1);
        assert!(c.resolve_seed(None, Some("x")).is_err());
    }

    #[test]
    fn sweep_defaults_to_top_level_metric() {
        let c = Config::from_json(
            r#"{"metric": {"p": 1, "base": {"kind": "lq", "q": 1}}, "sweep": {"dims": [1], "gammas": [0.1]}}"#,
        )
        .unwrap();
        let s = c.sweep_spec().unwrap();
        assert_eq!(s.metrics[0].p, 1.0);
    }
}
