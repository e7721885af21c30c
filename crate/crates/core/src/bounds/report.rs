//! Assembly of every constant and bound into one serializable report.

use serde::{Deserialize, Serialize};

use super::{
    mtilde7, mtilde_l, prop10_bound, prop10_constants, prop4_constants, thm11_bound, thm5_bound, thm7_bound,
    thm8_ctv, thm9_bound, ContractionInput, MQuantities, MTildeQuantities, TvInputs,
};
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::model::TargetModel;
use crate::stats::Estimate;

/// User-side inputs: step sizes, metric and contraction assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportInputs {
    pub gamma: f64,
    pub gamma_bar: f64,
    /// Integration time of one HMC transition.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub metric: MetricSpec,
    /// Contraction of the Euler chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ula: Option<ContractionInput>,
    /// Contraction of the Langevin diffusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<ContractionInput>,
    /// One-transition contraction `c` of unadjusted HMC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv: Option<TvInputs>,
}

/// Estimated integrals plus the constants derived from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyQuantities {
    #[serde(flatten)]
    pub m: Option<MQuantities>,
    #[serde(flatten)]
    pub mtilde: Option<MTildeQuantities>,
    #[serde(rename = "Mtilde7", skip_serializing_if = "Option::is_none")]
    pub mtilde7: Option<f64>,
    #[serde(rename = "lambda_L", skip_serializing_if = "Option::is_none")]
    pub lambda_l: Option<f64>,
    #[serde(rename = "M_L", skip_serializing_if = "Option::is_none")]
    pub m_l: Option<f64>,
    #[serde(rename = "Mtilde_L", skip_serializing_if = "Option::is_none")]
    pub mtilde_l: Option<f64>,
    #[serde(rename = "lambda_H", skip_serializing_if = "Option::is_none")]
    pub lambda_h: Option<f64>,
    #[serde(rename = "M_H", skip_serializing_if = "Option::is_none")]
    pub m_h: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AssembledBounds {
    /// One-step-from-stationarity Euler accuracy `gamma M_L^{1/2} e^{lambda_L gamma}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop4_one_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thm5: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thm7: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thm9: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop10: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thm11: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub model: String,
    pub d: usize,
    pub inputs: ReportInputs,
    #[serde(rename = "L")]
    pub l: f64,
    pub kappa: f64,
    #[serde(rename = "C_d")]
    pub c_d: f64,
    #[serde(rename = "C_tv", skip_serializing_if = "Option::is_none")]
    pub c_tv: Option<f64>,
    pub key_quantities: KeyQuantities,
    pub bounds: AssembledBounds,
}

fn value(e: &Estimate) -> f64 {
    e.value.max(0.0)
}

/// Computes every constant available from `m` (samples of `pi`) and
/// `mtilde` (samples of `pi_gamma`) and every bound whose contraction
/// assumption was supplied. Fails when no contraction assumption is given.
pub fn assemble_report(
    model: &TargetModel,
    inputs: &ReportInputs,
    m: Option<MQuantities>,
    mtilde: Option<MTildeQuantities>,
) -> Result<BoundReport> {
    if inputs.ula.is_none() && inputs.diffusion.is_none() && inputs.hmc_c.is_none() {
        return Err(Error::Config(
            "no contraction assumption supplied: give `ula` (A and c, or psi) for the Euler chain's \
             contraction towards its invariant law, `diffusion` for the Langevin diffusion's contraction, \
             or `hmc_c` for the one-transition contraction of unadjusted HMC"
                .into(),
        ));
    }
    inputs.metric.validate()?;
    let d = model.dimension();
    let consts = model.constants();
    let l = consts.lipschitz_l;
    let (gamma, gamma_bar) = (inputs.gamma, inputs.gamma_bar);
    if !(gamma > 0.0 && gamma <= gamma_bar) {
        return Err(Error::invalid("need 0 < gamma <= gamma_bar"));
    }
    let c_d = inputs.metric.c_d(d);
    let mut bounds = AssembledBounds::default();
    let mut kq = KeyQuantities {
        m,
        mtilde: mtilde.clone(),
        mtilde7: None,
        lambda_l: None,
        m_l: None,
        mtilde_l: None,
        lambda_h: None,
        m_h: None,
    };

    if let Some(m) = &m {
        let (lambda_l, m_l) = prop4_constants(l, gamma, gamma_bar, value(&m.m1), value(&m.m2), value(&m.m3))?;
        kq.lambda_l = Some(lambda_l);
        kq.m_l = Some(m_l);
        bounds.prop4_one_step = Some(super::prop4_curve(lambda_l, m_l, gamma, gamma));
        if let Some(ula) = &inputs.ula {
            bounds.thm5 = Some(thm5_bound(&inputs.metric, d, &ula.resolve()?, lambda_l, m_l, gamma)?);
        }
        let (lambda_h, m_h) = prop10_constants(l, gamma, value(&m.m1), value(&m.m2), value(&m.m4), value(&m.m5))?;
        kq.lambda_h = Some(lambda_h);
        kq.m_h = Some(m_h);
        if let Some(t) = inputs.duration {
            crate::sampler::leapfrog_count(t, gamma)?;
            bounds.prop10 = Some(prop10_bound(l, t, lambda_h, m_h, gamma)?);
            if let Some(c) = inputs.hmc_c {
                bounds.thm11 = Some(thm11_bound(&inputs.metric, d, c, l, t, lambda_h, m_h, gamma)?);
            }
        }
    }

    let kappa = consts.kappa_for_division();
    let mut c_tv = None;
    if let Some(mt) = &mtilde {
        let ml = mtilde_l(
            gamma,
            [value(&mt.mt1), value(&mt.mt2), value(&mt.mt3), value(&mt.mt4), value(&mt.mt5)],
        )?;
        kq.mtilde_l = Some(ml);
        if let Some(diff) = &inputs.diffusion {
            bounds.thm7 = Some(thm7_bound(&inputs.metric, d, &diff.resolve()?, kappa, ml, gamma)?);
        }
        if let Some(tv) = &inputs.tv {
            let ctv = match tv.c_tv {
                Some(c) => c,
                None => thm8_ctv(kappa)?,
            };
            let m7 = mtilde7(ctv, tv.a_tv, tv.lambda_tv)?;
            kq.mtilde7 = Some(m7);
            c_tv = Some(ctv);
            bounds.thm9 = Some(thm9_bound(l, gamma, d, value(&mt.mt6), ctv, tv.b_tv, m7)?);
        }
    }

    Ok(BoundReport {
        model: model.name().to_string(),
        d,
        inputs: inputs.clone(),
        l,
        kappa: consts.one_sided_kappa,
        c_d,
        c_tv,
        key_quantities: kq,
        bounds,
    })
}
