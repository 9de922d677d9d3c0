use std::fs::File;
use std::io::Write;
use std::path::Path;

use repalign_core::io;
use repalign_core::metrics::AlignmentReport;
use repalign_core::stitching::StitchReport;
use repalign_core::{AlignError, Result};
use serde::Serialize;

use crate::args::Format;

/// 17 significant digits, the same form as the JSON reports.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> AlignError {
    AlignError::Serialization(e.to_string())
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Scalar metrics as `name,x,value` with an empty `x`; series points fill it.
pub fn alignment_rows(r: &AlignmentReport) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = r
        .metrics
        .iter()
        .map(|(k, v)| vec![k.clone(), String::new(), num(*v)])
        .collect();
    for (k, pts) in &r.series {
        for (x, v) in pts {
            rows.push(vec![k.clone(), num(*x), num(*v)]);
        }
    }
    rows
}

pub fn stitch_rows(r: &StitchReport) -> Vec<Vec<String>> {
    r.inequalities
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.relation.symbol().to_string(),
                num(c.lhs),
                num(c.rhs),
                num(c.slack),
                c.satisfied.to_string(),
                c.asserted.to_string(),
            ]
        })
        .collect()
}

pub const STITCH_HEADER: [&str; 7] = [
    "name",
    "relation",
    "lhs",
    "rhs",
    "slack",
    "satisfied",
    "asserted",
];
pub const ALIGN_HEADER: [&str; 3] = ["name", "x", "value"];

/// Writes the JSON report, or `rows` when CSV is requested.
pub fn emit<T: Serialize>(
    report: &T,
    out: Option<&Path>,
    format: Format,
    header: &[&str],
    rows: impl FnOnce() -> Vec<Vec<String>>,
) -> Result<()> {
    let Some(path) = out else { return Ok(()) };
    match format {
        Format::Json => io::write_report(report, path),
        Format::Csv => write_rows(path, header, &rows()),
    }
}

pub fn print_alignment(r: &AlignmentReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "n = {}", r.n);
    for (k, v) in &r.config {
        let _ = writeln!(out, "{k} = {v}");
    }
    let width = r
        .metrics
        .keys()
        .chain(r.series.keys())
        .map(String::len)
        .max()
        .unwrap_or(0);
    for (k, v) in &r.metrics {
        let _ = writeln!(out, "{k:<width$}  {}", num(*v));
    }
    for (k, pts) in &r.series {
        for (x, v) in pts {
            let _ = writeln!(out, "{k:<width$}  {}  @ {}", num(*v), num(*x));
        }
    }
    for (k, code) in &r.skipped {
        let _ = writeln!(out, "{k:<width$}  skipped ({code})");
    }
}

pub fn print_stitch(r: &StitchReport) {
    let mut out = std::io::stdout().lock();
    for (k, v) in &r.config {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "a_tilde  {}", num(r.a_tilde));
    let optional = [
        ("stitch_risk", r.stitch_risk),
        ("r1", r.reference_risks.r1),
        ("r2", r.reference_risks.r2),
        ("kappa", r.kappa),
        ("bound", r.bound_value),
    ];
    for (k, v) in optional {
        if let Some(v) = v {
            let _ = writeln!(out, "{k}  {}", num(v));
        }
    }
    for c in &r.inequalities {
        let status = match (c.asserted, c.satisfied) {
            (_, true) => "ok",
            (true, false) => "VIOLATED",
            (false, false) => "fails (not asserted)",
        };
        let _ = writeln!(
            out,
            "{}: {} {} {}  slack {}  {status}",
            c.name,
            num(c.lhs),
            c.relation.symbol(),
            num(c.rhs),
            num(c.slack)
        );
    }
    for note in &r.notes {
        let _ = writeln!(out, "note: {note}");
    }
}
