use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::config::config_error;
use super::{Config, Outcome, Status};
use crate::bounds::liouville::{check_first_identity, check_second_identity, IdentityCheck};
use crate::bounds::{
    assemble_report, estimate_m_quantities, mtilde_l, prop10_bound,
    prop10_constants, prop4_constants, prop4_curve, prop6_curve, prop6_quantities, MQuantities,
    MTildeQuantities, ReportInputs, SemigroupApprox, MIN_SAMPLES,
};
use crate::coupling::{
    coupled_em_accuracy, coupled_hmc_accuracy, equilibrate, estimate_contraction, AccuracyCurve, HmcStart, InitialLaw,
    PairInit,
};
use crate::error::{Error, Result};
use crate::experiment::{
    exact_pi_samples, format_float, run_sweep, sweep_slopes, write_csv, CellStatus, KernelChoice, SweepSpec,
};
use crate::metrics::MetricSpec;
use crate::model::{class_constants, ModelSpec, TargetModel};
use crate::sampler::{default_burn_in, KernelKind, KernelSpec, Purpose, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GaussianCheck,
    BiasScan,
    Coupling,
    Bounds,
    Contraction,
    Quantities,
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian-check" => Command::GaussianCheck,
            "bias-scan" => Command::BiasScan,
            "coupling" => Command::Coupling,
            "bounds" => Command::Bounds,
            "contraction" => Command::Contraction,
            "quantities" => Command::Quantities,
            other => return Err(Error::Config(format!("unknown subcommand `{other}`"))),
        })
    }
}

/// Flags accepted by `gaussian-check` on top of the configuration file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianCheckArgs {
    pub gamma: Option<f64>,
    pub dim: Option<usize>,
    pub kernel: Option<KernelKind>,
    pub p: Option<f64>,
    pub samples: Option<usize>,
}

/// Runs a subcommand; errors become the matching exit status with the
/// message on standard output.
pub fn run(command: Command, config: &Config, args: &GaussianCheckArgs) -> Outcome {
    let result = match command {
        Command::GaussianCheck => gaussian_check(config, args),
        Command::BiasScan => bias_scan(config),
        Command::Coupling => coupling(config),
        Command::Bounds => bounds(config),
        Command::Contraction => contraction(config),
        Command::Quantities => quantities(config),
    };
    result.unwrap_or_else(|e| Outcome {
        status: Status::of_error(&e),
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
    })
}

/// Writes `text` to the configured path, or returns it for standard output.
fn emit(config: &Config, text: String) -> Result<String> {
    match &config.output.path {
        Some(p) => {
            std::fs::write(p, text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

pub fn gaussian_check(config: &Config, args: &GaussianCheckArgs) -> Result<Outcome> {
    let variance = match config.model {
        ModelSpec::Gaussian { variance } => variance,
        _ => return Err(Error::Config("gaussian-check needs a gaussian model".into())),
    };
    let kind = args.kernel.unwrap_or(config.kernel.kind);
    if !matches!(kind, KernelKind::Ula | KernelKind::Uhmc) {
        return Err(Error::Config(format!("gaussian-check supports ula and uhmc, not {kind}")));
    }
    let gamma = match args.gamma {
        Some(g) => g,
        None => config.kernel.gamma()?,
    };
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let d = args.dim.or(config.dimension).unwrap_or(1);
    let p = args.p.unwrap_or(config.metric().p);
    let duration = match kind {
        KernelKind::Uhmc => Some(config.kernel.duration.unwrap_or(1.0)),
        _ => None,
    };
    let mut spec = SweepSpec::new(
        ModelSpec::Gaussian { variance },
        vec![d],
        vec![gamma],
        KernelChoice { kind, duration },
    );
    spec.metrics = vec![MetricSpec::euclidean(p).map_err(config_error)?];
    spec.gamma_cap = config.kernel.gamma_cap;
    spec.seed = config.seed();
    spec.samples = args
        .samples
        .or(config.sweep.as_ref().and_then(|s| s.samples))
        .unwrap_or(100_000);
    let result = run_sweep(&spec)?;
    let rec = &result.records[0];
    let cell = &result.cells[0];
    if let CellStatus::Diverged { step } = rec.status {
        return Ok(Outcome {
            status: Status::Diverged,
            stdout: String::new(),
            stderr: format!("diverged at step {step}
"),
        });
    }
    let closed = rec.closed_form_bias.unwrap_or(f64::NAN);
    let z = (rec.bias - closed) / rec.stderr;
    let pass = z.abs() <= 3.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "kernel {}  d {d}  gamma {gamma}  W_{p} euclidean  samples {}  burn_in {}",
        spec.kernel.label(),
        rec.n_samples,
        rec.burn_in
    );
    let _ = writeln!(out, "{:<22}{:>14}{:>14}{:>14}", "quantity", "measured", "stderr", "closed_form");
    if let (Some(m), Some(c)) = (cell.second_moment, cell.closed_form_second_moment) {
        let _ = writeln!(
            out,
            "{:<22}{:>14.7}{:>14.2e}{:>14.7}",
            "stationary_variance", m.value, m.stderr, c
        );
    }
    let _ = writeln!(out, "{:<22}{:>14.7}{:>14.2e}{:>14.7}", "bias", rec.bias, rec.stderr, closed);
    let _ = writeln!(out, "z_score {z:.3}");
    let _ = writeln!(out, "{}", if pass { "PASS" } else { "FAIL" });
    Ok(Outcome {
        status: if pass { Status::Pass } else { Status::CheckFailed },
        stdout: out,
        stderr: String::new(),
    })
}

pub fn bias_scan(config: &Config) -> Result<Outcome> {
    let spec = config.sweep_spec()?;
    let started = spec.record_wall_time.then(Instant::now);
    let result = run_sweep(&spec)?;
    let fits = sweep_slopes(&spec, &result.records);
    let mut csv = Vec::new();
    write_csv(&result.records, &mut csv)?;
    let text = String::from_utf8(csv).map_err(|e| Error::Io(e.to_string()))?;
    let stdout = emit(config, text)?;
    if let (Some(path), true) = (&config.output.path, config.output.sidecar) {
        let sidecar = json!({
            "config": config,
            "sweep": spec,
            "slope_fits": fits,
            "cells": result.cells,
            "wall_time_s": started.map(|s| s.elapsed().as_secs_f64()),
        });
        std::fs::write(sidecar_path(path), to_json(&sidecar)?)?;
    }
    let status = if result.records.iter().any(|r| matches!(r.status, CellStatus::Diverged { .. })) {
        Status::Diverged
    } else if result.records.iter().any(|r| !r.status.is_ok()) || fits.iter().any(|f| f.within_window == Some(false))
    {
        Status::CheckFailed
    } else {
        Status::Pass
    };
    Ok(Outcome {
        status,
        stdout,
        stderr: String::new(),
    })
}

/// Draws of `pi` for the M-quantities; a long run of `kernel` stands in
/// when no exact sampler exists.
fn pi_draws(config: &Config, kernel: &KernelSpec, n: usize, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    if let Some(s) = exact_pi_samples(kernel.model(), n, stream)? {
        return Ok(s);
    }
    pi_gamma_draws(config, kernel, n, stream)
}

fn pi_gamma_draws(config: &Config, kernel: &KernelSpec, n: usize, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    let burn_in = match config.quantities.burn_in {
        Some(b) => b,
        None => default_burn_in(kernel, None).map_err(|_| {
            Error::Config(format!(
                "model {} is not strongly contractive; set `quantities.burn_in`",
                kernel.model().name()
            ))
        })?,
    };
    let thin = (1.0 / kernel.time_per_transition()).ceil().max(1.0) as usize;
    let (pts, _) = equilibrate(kernel, burn_in, n, thin, &stream.child(1, Purpose::Chain))?;
    Ok(pts)
}

fn semigroup(config: &Config, model: &TargetModel, gamma: f64) -> SemigroupApprox {
    config.quantities.semigroup.unwrap_or(if model.gaussian_variance().is_some() {
        SemigroupApprox::Exact
    } else {
        SemigroupApprox::FineEuler { step: gamma / 64.0 }
    })
}

fn m_quantities(config: &Config, kernel: &KernelSpec, stream: &RngStream) -> Result<MQuantities> {
    let n = config.quantities.samples.max(MIN_SAMPLES);
    let samples = pi_draws(config, kernel, n, stream)?;
    let gamma = kernel.gamma().unwrap_or(config.kernel.gamma_cap);
    estimate_m_quantities(kernel.model(), &samples, gamma, kernel.kind() == KernelKind::TamedUla)
}

fn mtilde_quantities(config: &Config, kernel: &KernelSpec, gamma_bar: f64, stream: &RngStream) -> Result<MTildeQuantities> {
    let n = config.quantities.samples.max(MIN_SAMPLES);
    let samples = pi_gamma_draws(config, kernel, n, stream)?;
    let gamma = kernel.gamma().unwrap_or_default();
    prop6_quantities(
        kernel,
        gamma_bar,
        &samples,
        &stream.child(2, Purpose::Smoothing),
        config.quantities.u_grid,
        semigroup(config, kernel.model(), gamma),
    )
}

#[derive(Serialize)]
struct CouplingRow {
    n: usize,
    t: f64,
    rmse: f64,
    stderr: f64,
    mse: f64,
    mse_stderr: f64,
    bound: Option<f64>,
}

pub fn coupling(config: &Config) -> Result<Outcome> {
    let model = config.build_model()?;
    let kernel = config.kernel.build(model.clone())?;
    let stream = RngStream::derive(config.seed(), 0, Purpose::Replica);
    let sec = &config.coupling;
    let reference = sec.reference_for(&model);
    let gamma = config.kernel.gamma()?;
    let (curve, bound_kind, bounds): (AccuracyCurve, &str, Vec<Option<f64>>) = match kernel.kind() {
        KernelKind::Ula | KernelKind::TamedUla => {
            let curve = coupled_em_accuracy(&kernel, sec.horizon_steps, sec.replicas, sec.initial_law, reference, &stream)?;
            let l = model.constants().lipschitz_l;
            match sec.initial_law {
                InitialLaw::ClosedFormPi => {
                    let m = m_quantities(config, &kernel, &stream.child(1, Purpose::Reference))?;
                    let (lambda, ml) = prop4_constants(
                        l,
                        gamma,
                        config.kernel.gamma_cap,
                        m.m1.value.max(0.0),
                        m.m2.value.max(0.0),
                        m.m3.value.max(0.0),
                    )?;
                    let b = curve.times.iter().map(|&t| Some(prop4_curve(lambda, ml, gamma, t))).collect();
                    (curve, "stationary-start", b)
                }
                InitialLaw::ChainEquilibrated { .. } => {
                    let mt = mtilde_quantities(config, &kernel, config.kernel.gamma_cap, &stream.child(1, Purpose::Reference))?;
                    let v = |e: &crate::stats::Estimate| e.value.max(0.0);
                    let ml = mtilde_l(gamma, [v(&mt.mt1), v(&mt.mt2), v(&mt.mt3), v(&mt.mt4), v(&mt.mt5)])?;
                    let kappa = model.constants().kappa_for_division();
                    let b = curve.times.iter().map(|&t| Some(prop6_curve(kappa, ml, gamma, t))).collect();
                    (curve, "chain-start", b)
                }
            }
        }
        KernelKind::Uhmc => {
            let t = config.kernel.duration.unwrap_or_default();
            let curve = coupled_hmc_accuracy(&model, t, gamma, sec.replicas, HmcStart::Random(sec.initial_law), reference, &stream)?;
            let m = m_quantities(config, &kernel, &stream.child(1, Purpose::Reference))?;
            let l = model.constants().lipschitz_l;
            let (lh, mh) = prop10_constants(l, gamma, m.m1.value.max(0.0), m.m2.value.max(0.0), m.m4.value.max(0.0), m.m5.value.max(0.0))?;
            let last = prop10_bound(l, t, lh, mh, gamma)?;
            let mut b = vec![None; curve.times.len()];
            if let Some(x) = b.last_mut() {
                *x = Some(last);
            }
            (curve, "one-transition", b)
        }
        other => return Err(Error::Config(format!("coupling needs ula, tamed-ula or uhmc, not {other}"))),
    };
    let mut w = crate::experiment::csv_writer(Vec::new());
    let header = ["n", "t", "rmse", "stderr", "mse", "mse_stderr", "bound", "bound_kind"];
    w.write_record(header).map_err(crate::experiment::csv_error)?;
    let mut violated = false;
    for (k, t) in curve.times.iter().enumerate() {
        let bound = bounds[k];
        if let Some(b) = bound {
            violated |= curve.rmse[k] - 3.0 * curve.stderr[k] > b;
        }
        let row = CouplingRow {
            n: k,
            t: *t,
            rmse: curve.rmse[k],
            stderr: curve.stderr[k],
            mse: curve.mse[k],
            mse_stderr: curve.mse_stderr[k],
            bound,
        };
        w.write_record([
            row.n.to_string(),
            format_float(row.t),
            format_float(row.rmse),
            format_float(row.stderr),
            format_float(row.mse),
            format_float(row.mse_stderr),
            row.bound.map(format_float).unwrap_or_default(),
            if row.bound.is_some() { bound_kind.to_string() } else { String::new() },
        ])
        .map_err(crate::experiment::csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    let stdout = emit(config, String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?)?;
    if let (Some(path), true) = (&config.output.path, config.output.sidecar) {
        let sidecar = json!({
            "config": config,
            "reference": curve.reference,
            "replicas": curve.replicas,
            "certificate": curve.certificate,
        });
        std::fs::write(sidecar_path(path), to_json(&sidecar)?)?;
    }
    let status = match curve.certificate {
        Some(c) if !c.passed => Status::CheckFailed,
        _ if violated => Status::CheckFailed,
        _ => Status::Pass,
    };
    Ok(Outcome {
        status,
        stdout,
        stderr: String::new(),
    })
}

pub fn bounds(config: &Config) -> Result<Outcome> {
    let sec = config.bounds_inputs.clone().unwrap_or_default();
    let model = config.build_model()?;
    let gamma = config.kernel.gamma()?;
    let inputs = ReportInputs {
        gamma,
        gamma_bar: sec.gamma_bar.unwrap_or(config.kernel.gamma_cap),
        duration: config.kernel.duration,
        metric: config.metric(),
        ula: sec.ula,
        diffusion: sec.diffusion,
        hmc_c: sec.hmc_c,
        tv: sec.tv,
    };
    // refuse before any sampling when no contraction assumption is given
    assemble_report(&model, &inputs, None, None).map_err(config_error)?;
    let stream = RngStream::derive(config.seed(), 0, Purpose::Reference);
    let euler_kind = match config.kernel.kind {
        KernelKind::TamedUla => KernelKind::TamedUla,
        _ => KernelKind::Ula,
    };
    let euler = KernelSpec::new(euler_kind, model.clone(), Some(gamma), None, inputs.gamma_bar).map_err(config_error)?;
    let m = m_quantities(config, &euler, &stream)?;
    let mtilde = if inputs.diffusion.is_some() || inputs.tv.is_some() {
        Some(mtilde_quantities(config, &euler, inputs.gamma_bar, &stream.child(3, Purpose::Reference))?)
    } else {
        None
    };
    let report = assemble_report(&model, &inputs, Some(m), mtilde).map_err(config_error)?;
    Ok(Outcome {
        status: Status::Pass,
        stdout: emit(config, to_json(&report)?)?,
        stderr: String::new(),
    })
}

pub fn contraction(config: &Config) -> Result<Outcome> {
    let model = config.build_model()?;
    let kernel = config.kernel.build(model)?;
    let sec = &config.contraction;
    let init = match (&sec.x, &sec.y) {
        (Some(x), Some(y)) => PairInit::Fixed { x: x.clone(), y: y.clone() },
        (None, None) => PairInit::Gaussian { scale: sec.init_scale },
        _ => return Err(Error::Config("give both `contraction.x` and `contraction.y`, or neither".into())),
    };
    let stream = RngStream::derive(config.seed(), 0, Purpose::Replica);
    let est = estimate_contraction(&kernel, &config.metric(), sec.pairs, sec.steps, &init, &stream).map_err(config_error)?;
    let out = json!({
        "kernel": kernel.kind(),
        "gamma": kernel.gamma(),
        "T": kernel.duration(),
        "rate_per_unit_time": if est.rate_per_unit_time.is_finite() { json!(est.rate_per_unit_time) } else { json!("inf") },
        "fit_residual": est.fit_residual,
        "coalesced_at": est.coalesced_at,
        "metric": est.metric,
        "pairs": est.pairs,
        "steps": est.steps,
        "mean_distance": est.mean_distance,
    });
    Ok(Outcome {
        status: Status::Pass,
        stdout: emit(config, to_json(&out)?)?,
        stderr: String::new(),
    })
}

#[derive(Serialize)]
struct IdentityRow {
    point: usize,
    first: IdentityCheck,
    second: IdentityCheck,
}

pub fn quantities(config: &Config) -> Result<Outcome> {
    let model = config.build_model()?;
    let d = model.dimension();
    let gamma = config.kernel.gamma.unwrap_or(config.kernel.gamma_cap);
    let stream = RngStream::derive(config.seed(), 0, Purpose::Reference);
    let euler_kind = match config.kernel.kind {
        KernelKind::TamedUla => KernelKind::TamedUla,
        _ => KernelKind::Ula,
    };
    let euler = KernelSpec::new(euler_kind, model.clone(), Some(gamma), None, config.kernel.gamma_cap).map_err(config_error)?;
    let m = m_quantities(config, &euler, &stream)?;
    let mtilde = mtilde_quantities(config, &euler, config.kernel.gamma_cap, &stream.child(3, Purpose::Reference)).ok();
    let class = match &model.constants().class {
        Some(c) => {
            let (k, j) = class_constants(c, d)?;
            Some(json!({ "class": c, "K": k, "J": j }))
        }
        None => None,
    };
    let points = pi_draws(config, &euler, config.quantities.identity_points.max(1), &stream.child(4, Purpose::Reference))?;
    let n = config.quantities.samples.max(2);
    let mut rows = Vec::new();
    for (i, q) in points.iter().take(config.quantities.identity_points).enumerate() {
        let s = stream.child(10 + i as u64, Purpose::Momentum);
        rows.push(IdentityRow {
            point: i,
            first: check_first_identity(&model, q, n, &s.child(0, Purpose::Momentum))?,
            second: check_second_identity(&model, q, n, &s.child(1, Purpose::Momentum))?,
        });
    }
    let pass = rows.iter().all(|r| r.first.holds(4.0) && r.second.holds(4.0));
    let out = json!({
        "model": model.name(),
        "d": d,
        "gamma": gamma,
        "constants": model.constants(),
        "M": m,
        "Mtilde": mtilde,
        "class_constants": class,
        "identities": rows,
        "identities_hold": pass,
    });
    Ok(Outcome {
        status: if pass { Status::Pass } else { Status::CheckFailed },
        stdout: emit(config, to_json(&out)?)?,
        stderr: String::new(),
    })
}
