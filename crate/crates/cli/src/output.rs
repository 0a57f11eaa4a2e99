//! Rendering reports and tables as CSV or JSON.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliResult;
use crate::tables::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Reals as printed in CSV: scientific below 1e-3, otherwise four significant digits.
pub fn format_real(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs();
    if magnitude < 1e-3 {
        return format!("{x:.3e}");
    }
    let decimals = (3 - magnitude.log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (_, Some(i), _) => i.to_string(),
            (_, _, Some(f)) => format_real(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell_text).collect::<Vec<_>>().join("; "),
        Value::Object(_) => v.to_string(),
    }
}

/// Flattens nested objects into dotted keys, in document order.
fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        _ => out.push((prefix.to_string(), value.clone())),
    }
}

/// A report as one CSV header row and one value row.
pub fn report_csv<T: Serialize>(report: &T) -> CliResult<String> {
    let mut fields = Vec::new();
    flatten("", &serde_json::to_value(report)?, &mut fields);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields.iter().map(|(k, _)| k.as_str()))?;
    w.write_record(fields.iter().map(|(_, v)| cell_text(v)))?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
}

pub fn table_csv(table: &Table) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
}

pub fn render_report<T: Serialize>(report: &T, format: Format) -> CliResult<String> {
    match format {
        Format::Csv => report_csv(report),
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
    }
}

pub fn render_table(table: &Table, format: Format) -> CliResult<String> {
    match format {
        Format::Csv => table_csv(table),
        Format::Json => Ok(serde_json::to_string_pretty(table)? + "\n"),
    }
}

/// Writes to `path`, or stdout when absent.
pub fn write_output(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => File::create(p)?.write_all(text.as_bytes())?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(6.276e-3), "0.006276");
        assert_eq!(format_real(1.2924e-5), "1.292e-5");
        assert_eq!(format_real(7.918e-4), "7.918e-4");
        assert_eq!(format_real(19.7916), "19.79");
        assert_eq!(format_real(4400.2), "4400");
        assert_eq!(format_real(-0.5), "-0.5000");
    }

    #[test]
    fn report_flattening() {
        #[derive(Serialize)]
        struct Inner {
            b: u32,
        }
        #[derive(Serialize)]
        struct Outer {
            name: &'static str,
            inner: Inner,
            notes: Vec<&'static str>,
            value: f64,
        }
        let csv = report_csv(&Outer {
            name: "x",
            inner: Inner { b: 3 },
            notes: vec!["a", "b"],
            value: 0.25,
        })
        .unwrap();
        assert_eq!(csv, "name,inner.b,notes,value\nx,3,a; b,0.2500\n");
    }
}
