//! Report rows and the CSV/JSON emitters.
//!
//! Both formats carry the same ten fields per row. Numbers print with 17
//! significant digits ({:.16e}), which round-trips every finite f64
//! bit for bit, so re-running a subcommand can be checked by comparing
//! output files directly.

use devbound::{Error, Result};
use std::io::Write;

pub const CSV_HEADER: &str =
    "experiment,sequence,n,quantity,value,regime,argmax_log_index,std_error,ci_lo,ci_hi";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub sequence: String,
    pub n: u64,
    pub quantity: String,
    pub value: f64,
    pub regime: Option<String>,
    pub argmax_log_index: Option<f64>,
    pub std_error: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

impl ReportRow {
    /// Row with every optional cell empty; builders fill what applies.
    pub fn new(experiment: &str, sequence: &str, n: u64, quantity: &str, value: f64) -> Self {
        ReportRow {
            experiment: experiment.to_string(),
            sequence: sequence.to_string(),
            n,
            quantity: quantity.to_string(),
            value,
            regime: None,
            argmax_log_index: None,
            std_error: None,
            ci_lo: None,
            ci_hi: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// 17 significant digits; parses back to the same bits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// JSON value for an f64 cell; infinities and NaN have no JSON number
/// form, so they fall back to strings.
fn json_num(x: f64) -> String {
    if x.is_finite() {
        fmt_float(x)
    } else {
        format!("\"{x}\"")
    }
}

fn json_opt(x: Option<f64>) -> String {
    x.map(json_num).unwrap_or_else(|| "null".to_string())
}

fn json_str(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

/// Renders rows in the requested format.
///
/// # Errors
/// `Domain` when rows is empty.
pub fn render(rows: &[ReportRow], format: Format) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::domain("report has no rows"));
    }
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    csv_escape(&r.experiment),
                    csv_escape(&r.sequence),
                    r.n,
                    csv_escape(&r.quantity),
                    fmt_float(r.value),
                    r.regime.as_deref().unwrap_or(""),
                    csv_opt(r.argmax_log_index),
                    csv_opt(r.std_error),
                    csv_opt(r.ci_lo),
                    csv_opt(r.ci_hi),
                ));
            }
        }
        Format::Json => {
            out.push_str("[\n");
            for (i, r) in rows.iter().enumerate() {
                out.push_str(&format!(
                    "  {{\"experiment\":{},\"sequence\":{},\"n\":{},\"quantity\":{},\
                     \"value\":{},\"regime\":{},\"argmax_log_index\":{},\"std_error\":{},\
                     \"ci_lo\":{},\"ci_hi\":{}}}{}\n",
                    json_str(&r.experiment),
                    json_str(&r.sequence),
                    r.n,
                    json_str(&r.quantity),
                    json_num(r.value),
                    r.regime.as_deref().map(json_str).unwrap_or_else(|| "null".to_string()),
                    json_opt(r.argmax_log_index),
                    json_opt(r.std_error),
                    json_opt(r.ci_lo),
                    json_opt(r.ci_hi),
                    if i + 1 < rows.len() { "," } else { "" },
                ));
            }
            out.push(']');
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn emit(rows: &[ReportRow], format: Format, out: &mut dyn Write) -> Result<()> {
    let text = render(rows, format)?;
    out.write_all(text.as_bytes())?;
    Ok(())
}
