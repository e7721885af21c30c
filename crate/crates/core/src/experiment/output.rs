//! CSV emission for sweep records.

use std::io::Write;

use super::ExperimentRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 17] = [
    "experiment_id",
    "model",
    "d",
    "gamma",
    "kernel",
    "metric_p",
    "metric_base",
    "bias",
    "stderr",
    "theory_bound",
    "route",
    "n_samples",
    "burn_in",
    "seed",
    "wall_time_s",
    "status",
    "closed_form_bias",
];

/// Seventeen significant digits; empty for `NaN`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in records {
        out.write_record([
            r.experiment_id.clone(),
            r.model.clone(),
            r.d.to_string(),
            format_float(r.gamma),
            r.kernel.clone(),
            format_float(r.metric.p),
            r.metric.base.to_string(),
            format_float(r.bias),
            format_float(r.stderr),
            opt(r.theory_bound),
            r.route.clone(),
            r.n_samples.to_string(),
            r.burn_in.to_string(),
            r.seed.to_string(),
            opt(r.wall_time_s),
            r.status.to_string(),
            opt(r.closed_form_bias),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}
