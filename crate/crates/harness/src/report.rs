//! The `report` subcommand: a text summary of a run directory or a sweep.

use std::fmt::Write as _;
use std::path::Path;

use toml::Table;

use crate::config::{config_error, get_dotted};
use crate::HarnessError;

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// `traj_error` rows of `errors.csv` as `errors[k][n]`.
pub fn parse_errors(text: &str) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || config_error("errors.csv", format!("malformed line {}", i + 1));
        let mut fields = line.split(',');
        let k: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let _n: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let e: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        if k == rows.len() {
            rows.push(Vec::new());
        }
        rows.get_mut(k).ok_or_else(bad)?.push(e);
    }
    Ok(rows)
}

fn run_report(dir: &Path) -> Result<String, HarnessError> {
    let manifest: Table = read(&dir.join("manifest.toml"))?
        .parse()
        .map_err(|e: toml::de::Error| config_error("manifest.toml", e.message()))?;
    let errors = parse_errors(&read(&dir.join("errors.csv"))?)?;
    let mut out = String::new();
    let field = |key: &str| get_dotted(&manifest, key).map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    writeln!(out, "run        {}", dir.display()).unwrap();
    writeln!(out, "hash       {}", field("hash").trim_matches('"')).unwrap();
    writeln!(out, "problem    {}", field("config.problem.id").trim_matches('"')).unwrap();
    writeln!(out, "theta      {}", field("config.theta.kind").trim_matches('"')).unwrap();
    writeln!(out, "N, K, s    {}, {}, {}", field("config.parareal.N"), field("config.parareal.K"), field("config.parareal.windows"))
        .unwrap();
    let report_step = get_dotted(&manifest, "config.output.report_step").and_then(|v| v.as_integer());
    writeln!(out, "{:>4} {:>14} {:>14} {:>14}", "k", "max_n", "final", "report").unwrap();
    for (k, row) in errors.iter().enumerate() {
        let max = row.iter().cloned().fold(0.0, f64::max);
        let last = row.last().copied().unwrap_or(f64::NAN);
        let rep = report_step.and_then(|m| row.get(m as usize)).copied().unwrap_or(f64::NAN);
        writeln!(out, "{k:>4} {max:>14.6e} {last:>14.6e} {rep:>14.6e}").unwrap();
    }
    if let Ok(cost) = read(&dir.join("cost.toml")) {
        if let Ok(cost) = cost.parse::<Table>() {
            for key in ["modeled.c_p", "modeled.c_sp", "modeled.sequential", "counts.fine_eval_count", "measured.wall_seconds"] {
                if let Some(v) = get_dotted(&cost, key) {
                    writeln!(out, "{key:<24} {v}").unwrap();
                }
            }
        }
    }
    Ok(out)
}

/// Summarizes a run directory, or prints `summary.csv` of a sweep directory.
pub fn report(dir: &Path) -> Result<String, HarnessError> {
    if dir.join("manifest.toml").exists() {
        run_report(dir)
    } else if dir.join("summary.csv").exists() {
        read(&dir.join("summary.csv"))
    } else {
        Err(config_error("--out", format!("{} holds neither a run nor a sweep", dir.display())))
    }
}
