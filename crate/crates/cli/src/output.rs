//! Report assembly and file output.

use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::OutArgs;

/// Failure to write an output artifact (exit status 1).
#[derive(Debug)]
pub struct OutputError(pub String);

impl std::error::Error for OutputError {}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// The machine-readable record of one run: command, resolved configuration, result.
pub fn report<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> Result<Value> {
    Ok(json!({
        "command": command,
        "config": serde_json::to_value(config)?,
        "result": serde_json::to_value(result)?,
    }))
}

/// Alternative renderings of a report for the non-JSON extensions.
#[derive(Default)]
pub struct Renderings {
    pub csv: Option<String>,
    pub markdown: Option<String>,
    pub svg: Option<String>,
}

pub fn write_outputs(out: &OutArgs, report: &Value, r: Renderings) -> Result<()> {
    let Some(path) = &out.out else {
        return Ok(());
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let body = match ext.as_str() {
        "json" => serde_json::to_string_pretty(report)? + "\n",
        "csv" => match r.csv {
            Some(s) => s,
            None => bail!("this command has no CSV output; use .json"),
        },
        "md" => match r.markdown {
            Some(s) => s,
            None => bail!("this command has no markdown output; use .json"),
        },
        "svg" => match r.svg {
            Some(s) => s,
            None => bail!("this command has no SVG output; use .json"),
        },
        _ => bail!(
            "unsupported output extension for {} (use .json, .csv, .md or .svg)",
            path.display()
        ),
    };
    write_file(path, &body)
}

pub fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body)
        .map_err(|e| OutputError(format!("cannot write {}: {e}", path.display())).into())
}

/// Fixed two-decimal cell.
pub fn f2(v: f64) -> String {
    format!("{v:.2}")
}

pub fn ci2(lo: f64, hi: f64) -> String {
    format!("[{lo:.2}, {hi:.2}]")
}

/// Short number for labels: at most six decimals, trailing zeros dropped.
pub fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}
