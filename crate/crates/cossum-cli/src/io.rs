//! File formats: parameter and config TOML, sample CSV, JSON reports.

use cossum::model::CosineSum;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Failures mapped onto the exit-code contract: usage 2, input parse 3,
/// solver 4; anything else (I/O) exits 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Defaults for any flag left off the command line; flags always win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub method: Option<String>,
    pub n: Option<usize>,
    pub k: Option<f64>,
    pub tol: Option<f64>,
    pub eps: Option<f64>,
    pub fixed_m: Option<usize>,
    pub upper_l: Option<usize>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub amplitude: Option<f64>,
    pub trials: Option<usize>,
    pub error_interval: Option<f64>,
    pub half_spectrum: Option<bool>,
}

pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    gamma: Vec<f64>,
    phi: Vec<f64>,
}

/// Reads a cosine-sum parameter file (`gamma = [...]`, `phi = [...]`).
pub fn read_params(path: &Path) -> Result<CosineSum, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let params: ParamsFile =
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    CosineSum::new(params.gamma, params.phi)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// 17 significant digits: round-trip safe for binary64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a sample CSV (`k,t,value`, extra columns ignored) into the time
/// and value columns, with line-numbered errors.
pub fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let label = path.display();
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(CliError::Parse(format!("{label}: empty file")));
    };
    if !header.trim_end().starts_with("k,t,value") {
        return Err(CliError::Parse(format!(
            "{label}: line 1: expected a `k,t,value` header, found `{header}`"
        )));
    }
    let mut ts = Vec::new();
    let mut values = Vec::new();
    for (index, line) in lines {
        let row = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(CliError::Parse(format!(
                "{label}: line {row}: expected at least 3 fields, found {}",
                fields.len()
            )));
        }
        let k: usize = fields[0].trim().parse().map_err(|_| {
            CliError::Parse(format!("{label}: line {row}: bad index `{}`", fields[0]))
        })?;
        if k != ts.len() {
            return Err(CliError::Parse(format!(
                "{label}: line {row}: index {k} out of order (expected {})",
                ts.len()
            )));
        }
        let t: f64 = fields[1].trim().parse().map_err(|_| {
            CliError::Parse(format!("{label}: line {row}: bad time `{}`", fields[1]))
        })?;
        let value: f64 = fields[2].trim().parse().map_err(|_| {
            CliError::Parse(format!("{label}: line {row}: bad value `{}`", fields[2]))
        })?;
        ts.push(t);
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::Parse(format!("{label}: no sample rows")));
    }
    Ok((ts, values))
}

/// Writes rows of already-formatted fields under a header line.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let _ = writeln!(text, "{}", row.join(","));
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Per-stage wall-clock milliseconds.
#[derive(Debug, Serialize)]
pub struct Timings {
    pub parse: f64,
    pub solve: f64,
    pub total: f64,
}

#[derive(Debug, Serialize)]
pub struct ErrorsJson {
    pub e_f: f64,
    pub e_phi: Option<f64>,
    pub e_gamma: Option<f64>,
}

/// The JSON document every recovery-style command emits.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub method: String,
    pub m: usize,
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<ErrorsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    pub timings_ms: Timings,
    pub diagnostics: Vec<String>,
}

/// Serializes the report to the given path, or stdout when absent.
pub fn emit_report(report: &RunReport, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io(format!("report serialization: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
