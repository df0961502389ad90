use std::io::{self, Write};

use super::config::Format;
use crate::solver::{IterRecord, Solution};

/// Iterate log field names, in output order.
pub const LOG_FIELDS: [&str; 9] = [
    "iter",
    "mu",
    "phi",
    "f",
    "viol_ineq",
    "viol_eq",
    "stationarity",
    "step",
    "qp_status",
];

/// Summary record field names, in output order.
pub const SUMMARY_FIELDS: [&str; 7] = [
    "example",
    "termination",
    "f",
    "max_violation",
    "iterations",
    "wall_time",
    "seed",
];

enum Field {
    Int(u64),
    Float(f64),
    MaybeFloat(Option<f64>),
    Text(String),
}

/// 17 significant digits, enough to round-trip every finite `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn json_value(field: &Field) -> String {
    match field {
        Field::Int(v) => v.to_string(),
        Field::Float(v) | Field::MaybeFloat(Some(v)) if v.is_finite() => format_float(*v),
        Field::Float(_) | Field::MaybeFloat(_) => "null".to_string(),
        Field::Text(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
    }
}

fn csv_value(field: &Field) -> String {
    match field {
        Field::Int(v) => v.to_string(),
        Field::Float(v) | Field::MaybeFloat(Some(v)) => format_float(*v),
        Field::MaybeFloat(None) => String::new(),
        Field::Text(s) => s.clone(),
    }
}

fn write_record(
    w: &mut dyn Write,
    format: Format,
    names: &[&str],
    values: &[Field],
) -> io::Result<()> {
    match format {
        Format::JsonLines => {
            let body: Vec<String> = names
                .iter()
                .zip(values)
                .map(|(n, v)| format!("\"{n}\":{}", json_value(v)))
                .collect();
            writeln!(w, "{{{}}}", body.join(","))
        }
        Format::Csv => {
            let row: Vec<String> = values.iter().map(csv_value).collect();
            writeln!(w, "{}", row.join(","))
        }
    }
}

fn log_values(r: &IterRecord) -> [Field; 9] {
    [
        Field::Int(r.iter as u64),
        Field::Float(r.mu),
        Field::Float(r.phi),
        Field::Float(r.f),
        Field::Float(r.viol_ineq),
        Field::Float(r.viol_eq),
        Field::MaybeFloat(r.stationarity),
        Field::Float(r.step),
        Field::Text(r.qp_status.to_string()),
    ]
}

/// Writes the iterate log; CSV output starts with a header row.
pub fn write_log(w: &mut dyn Write, format: Format, log: &[IterRecord]) -> io::Result<()> {
    if format == Format::Csv {
        writeln!(w, "{}", LOG_FIELDS.join(","))?;
    }
    for r in log {
        write_record(w, format, &LOG_FIELDS, &log_values(r))?;
    }
    Ok(())
}

/// Writes the one-record summary of a run.
pub fn write_summary(
    w: &mut dyn Write,
    format: Format,
    example: &str,
    seed: u64,
    sol: &Solution,
) -> io::Result<()> {
    if format == Format::Csv {
        writeln!(w, "{}", SUMMARY_FIELDS.join(","))?;
    }
    let values = [
        Field::Text(example.to_string()),
        Field::Text(sol.termination.to_string()),
        Field::Float(sol.best.f),
        Field::Float(sol.best.max_violation()),
        Field::Int(sol.iterations() as u64),
        Field::Float(sol.wall_time.as_secs_f64()),
        Field::Int(seed),
    ];
    write_record(w, format, &SUMMARY_FIELDS, &values)
}

/// Human-readable summary for standard error.
pub fn write_summary_table(
    w: &mut dyn Write,
    example: &str,
    seed: u64,
    sol: &Solution,
) -> io::Result<()> {
    let rows = [
        ("example", example.to_string()),
        ("termination", sol.termination.to_string()),
        ("iterations", sol.iterations().to_string()),
        ("f", format!("{:.10e}", sol.best.f)),
        ("max violation", format!("{:.3e}", sol.best.max_violation())),
        ("wall time", format!("{:.3} s", sol.wall_time.as_secs_f64())),
        ("seed", seed.to_string()),
    ];
    for (name, value) in rows {
        writeln!(w, "{name:<14} {value}")?;
    }
    Ok(())
}
