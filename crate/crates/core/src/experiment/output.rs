use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::value::RawValue;

use super::config::{ExperimentConfig, Format, Units};
use crate::error::{Error, Result};

/// Column names in output order.
pub const COLUMNS: [&str; 13] = [
    "experiment",
    "model",
    "seed",
    "k",
    "param_kind",
    "param",
    "series",
    "rate",
    "distortion",
    "h_x_given_data",
    "h_x",
    "n_active",
    "converged",
];

const COLUMN_DOCS: [(&str, &str); 13] = [
    ("experiment", "experiment kind"),
    ("model", "model label: generator and seed, grid size, or a content hash of explicit tables"),
    ("seed", "solver seed (empty when the run is deterministic)"),
    ("k", "sample count (batch, scaling) or round index (streaming; the last round for -total and -final rows)"),
    ("param_kind", "beta | rate_budget | weight | schedule"),
    ("param", "sweep value: beta, rate budget (configured units), comprehensive weight, or schedule coefficient"),
    ("series", "curve name; -total rows sum rate and distortion over rounds, -final rows pair total rate with the last-round distortion"),
    ("rate", "rate in the configured units"),
    ("distortion", "cross-entropy loss in the configured units"),
    ("h_x_given_data", "lower end of the distortion bracket for this row"),
    ("h_x", "upper end of the distortion bracket for this row"),
    ("n_active", "retained encoder components (Gaussian) or used encoder outputs (discrete)"),
    ("converged", "false when the solver stopped early or a rate target was unreachable"),
];

/// One curve point. Rate, distortion and the bracket are stored in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub model: String,
    pub seed: Option<u64>,
    pub k: usize,
    pub param_kind: &'static str,
    pub param: f64,
    pub series: String,
    pub rate: f64,
    pub distortion: f64,
    pub h_x_given_data: f64,
    pub h_x: f64,
    pub n_active: usize,
    pub converged: bool,
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fields(row: &Row, units: Units) -> [String; 13] {
    let s = units.scale();
    [
        row.experiment.clone(),
        row.model.clone(),
        row.seed.map(|s| s.to_string()).unwrap_or_default(),
        row.k.to_string(),
        row.param_kind.to_string(),
        format_float(row.param),
        row.series.clone(),
        format_float(row.rate / s),
        format_float(row.distortion / s),
        format_float(row.h_x_given_data / s),
        format_float(row.h_x / s),
        row.n_active.to_string(),
        row.converged.to_string(),
    ]
}

pub fn write_csv<W: Write>(out: W, rows: &[Row], units: Units) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(COLUMNS).map_err(io)?;
    for row in rows {
        w.write_record(fields(row, units)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRow<'a> {
    experiment: &'a str,
    model: &'a str,
    seed: Option<u64>,
    k: usize,
    param_kind: &'a str,
    param: Box<RawValue>,
    series: &'a str,
    rate: Box<RawValue>,
    distortion: Box<RawValue>,
    h_x_given_data: Box<RawValue>,
    h_x: Box<RawValue>,
    n_active: usize,
    converged: bool,
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { format_float(x) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

pub fn write_json<W: Write>(mut out: W, rows: &[Row], units: Units) -> Result<()> {
    let s = units.scale();
    let records: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            experiment: &r.experiment,
            model: &r.model,
            seed: r.seed,
            k: r.k,
            param_kind: r.param_kind,
            param: raw(r.param),
            series: &r.series,
            rate: raw(r.rate / s),
            distortion: raw(r.distortion / s),
            h_x_given_data: raw(r.h_x_given_data / s),
            h_x: raw(r.h_x / s),
            n_active: r.n_active,
            converged: r.converged,
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &records).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Render the data file exactly as written to disk.
pub fn render(rows: &[Row], format: Format, units: Units) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(&mut buf, rows, units)?,
        Format::Json => write_json(&mut buf, rows, units)?,
    }
    Ok(buf)
}

const AUDIT_TOL: f64 = 1e-8;

/// A row whose distortion falls outside its bracket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditViolation {
    pub row: usize,
    pub series: String,
    pub k: usize,
    pub distortion: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Check `h_x_given_data − tol ≤ distortion ≤ h_x + tol` for every row.
pub fn audit(rows: &[Row]) -> Vec<AuditViolation> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| {
            let tol = AUDIT_TOL * (1.0 + r.h_x.abs().max(r.h_x_given_data.abs()));
            !(r.distortion >= r.h_x_given_data - tol && r.distortion <= r.h_x + tol)
        })
        .map(|(i, r)| AuditViolation {
            row: i,
            series: r.series.clone(),
            k: r.k,
            distortion: r.distortion,
            lower: r.h_x_given_data,
            upper: r.h_x,
        })
        .collect()
}

/// Path of the metadata file that accompanies a data file.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    data.with_file_name(name)
}

#[derive(Serialize)]
pub struct Sidecar<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub config_text: Option<&'a str>,
    pub data_file: String,
    pub format: Format,
    pub units: Units,
    pub columns: Vec<ColumnDoc>,
    pub rows: usize,
    pub non_converged: usize,
    pub audit_violations: &'a [AuditViolation],
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

#[derive(Serialize)]
pub struct ColumnDoc {
    pub name: &'static str,
    pub description: &'static str,
}

pub fn column_docs() -> Vec<ColumnDoc> {
    COLUMN_DOCS.iter().map(|&(name, description)| ColumnDoc { name, description }).collect()
}
