//! Serializable model descriptions, built per dimension.

use serde::{Deserialize, Serialize};

use super::{
    make_gaussian_model, make_mean_field_model, make_product_model, ScalarPotential, TargetModel, DEFAULT_BOX_RADIUS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialName {
    Gaussian,
    DoubleWell,
    LogCosh,
}

impl PotentialName {
    pub fn potential(self) -> ScalarPotential {
        match self {
            PotentialName::Gaussian => ScalarPotential::gaussian(),
            PotentialName::DoubleWell => ScalarPotential::double_well(),
            PotentialName::LogCosh => ScalarPotential::log_cosh(),
        }
    }
}

fn default_variance() -> f64 {
    1.0
}

fn default_box() -> f64 {
    DEFAULT_BOX_RADIUS
}

fn default_particle_dim() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian {
        #[serde(default = "default_variance")]
        variance: f64,
    },
    Product {
        potential: PotentialName,
        #[serde(default = "default_box")]
        box_radius: f64,
    },
    MeanField {
        confinement: PotentialName,
        interaction: PotentialName,
        delta: f64,
        /// Dimension of each particle; the particle count is `d / particle_dim`.
        #[serde(default = "default_particle_dim")]
        particle_dim: usize,
        #[serde(default = "default_box")]
        box_radius: f64,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Gaussian { variance: 1.0 }
    }
}

impl ModelSpec {
    pub fn build(&self, d: usize) -> Result<TargetModel> {
        match self {
            ModelSpec::Gaussian { variance } => make_gaussian_model(d, *variance),
            ModelSpec::Product { potential, box_radius } => make_product_model(d, potential.potential(), *box_radius),
            ModelSpec::MeanField {
                confinement,
                interaction,
                delta,
                particle_dim,
                box_radius,
            } => {
                if *particle_dim == 0 || d % particle_dim != 0 {
                    return Err(Error::invalid(format!(
                        "dimension {d} is not a multiple of the particle dimension {particle_dim}"
                    )));
                }
                make_mean_field_model(
                    d / particle_dim,
                    *particle_dim,
                    confinement.potential(),
                    interaction.potential(),
                    *delta,
                    *box_radius,
                )
            }
        }
    }

    /// Short tag used in record identifiers.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Gaussian { .. } => "gaussian",
            ModelSpec::Product { .. } => "product",
            ModelSpec::MeanField { .. } => "mean-field",
        }
    }
}
