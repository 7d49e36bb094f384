//! Cross-product sweeps over configuration keys.
//!
//! Runs are executed one after another into `run-000`, `run-001`, … below
//! the output directory. Runs that share a fine problem reuse its sequential
//! solution. `summary.csv` has the columns `run`, one per swept key,
//! `status`, `final_error`, `report_error` and `report_error_by_k` (values
//! for `k = 0, 1, …` separated by `;`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use theta_parareal::State;
use toml::{Table, Value};

use crate::artifacts::{write_atomic, write_run};
use crate::config::{config_error, parse_literal, set_dotted, ExperimentConfig};
use crate::experiment::{assemble, execute};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

/// Parses `key=v1,v2,…`.
pub fn parse_axis(spec: &str) -> Result<Axis, HarnessError> {
    let (key, list) = spec.split_once('=').ok_or_else(|| config_error(spec, "sweep axis must look like key=v1,v2"))?;
    let key = key.trim().to_string();
    let values: Vec<Value> =
        list.split(',').map(str::trim).filter(|v| !v.is_empty()).map(parse_literal).collect();
    if values.is_empty() {
        return Err(config_error(key, "empty sweep list"));
    }
    Ok(Axis { key, values })
}

/// All assignments of the cross product, first axis slowest.
pub fn cross_product(axes: &[Axis]) -> Vec<Vec<(String, Value)>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((axis.key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    out
}

fn display(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: usize,
    pub succeeded: usize,
    pub oracle_hits: usize,
    pub summary: String,
}

/// Runs every point of the cross product and writes `summary.csv`.
///
/// Fails only when the sweep itself is malformed or every run failed.
pub fn run_sweep(base: &Table, axes: &[Axis], out: &Path) -> Result<SweepResult, HarnessError> {
    if axes.is_empty() {
        return Err(config_error("--vary", "no sweep axis given"));
    }
    for axis in axes {
        if axis.values.is_empty() {
            return Err(config_error(axis.key.as_str(), "empty sweep list"));
        }
        let mut probe = base.clone();
        set_dotted(&mut probe, &axis.key, axis.values[0].clone())?;
        ExperimentConfig::from_table(&probe).map_err(|e| match e {
            HarnessError::Config { key, msg } => config_error(key, format!("{msg} (sweep axis `{}`)", axis.key)),
            other => other,
        })?;
    }
    let mut summary = String::from("run");
    for axis in axes {
        write!(summary, ",{}", axis.key).unwrap();
    }
    summary.push_str(",status,final_error,report_error,report_error_by_k\n");

    let mut cache: HashMap<String, Arc<Vec<State>>> = HashMap::new();
    let points = cross_product(axes);
    let mut succeeded = 0;
    let mut oracle_hits = 0;
    let mut first_error = None;
    for (i, point) in points.iter().enumerate() {
        let name = format!("run-{i:03}");
        write!(summary, "{name}").unwrap();
        for (_, v) in point {
            write!(summary, ",{}", display(v)).unwrap();
        }
        let result = (|| {
            let mut table = base.clone();
            for (k, v) in point {
                set_dotted(&mut table, k, v.clone())?;
            }
            let cfg = ExperimentConfig::from_table(&table)?;
            let exp = assemble(&cfg)?;
            let key = cfg.oracle_key();
            let cached = cache.get(&key).cloned();
            let hit = cached.is_some();
            let outcome = execute(&exp, cached)?;
            cache.entry(key).or_insert_with(|| outcome.run.fine_oracle.clone());
            let s = write_run(&exp, &outcome, &out.join(&name))?;
            Ok::<_, HarnessError>((s, hit))
        })();
        match result {
            Ok((s, hit)) => {
                succeeded += 1;
                oracle_hits += hit as usize;
                let by_k: Vec<String> = s.report_by_k.iter().map(f64::to_string).collect();
                writeln!(summary, ",ok,{},{},{}", s.final_error, s.report_error, by_k.join(";")).unwrap();
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], " ");
                writeln!(summary, ",failed: {msg},,,").unwrap();
                first_error.get_or_insert(e);
            }
        }
    }
    write_atomic(&out.join("summary.csv"), summary.as_bytes())?;
    match (succeeded, first_error) {
        (0, Some(e)) => Err(e),
        _ => Ok(SweepResult { rows: points.len(), succeeded, oracle_hits, summary }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_and_products() {
        let a = parse_axis("theta.value=1, 0.5,0.1").unwrap();
        assert_eq!(a.values, vec![Value::Integer(1), Value::Float(0.5), Value::Float(0.1)]);
        let b = parse_axis("theta.form=anchored,compact").unwrap();
        let p = cross_product(&[a, b]);
        assert_eq!(p.len(), 6);
        assert_eq!(p[1][1].1, Value::String("compact".into()));
        assert!(matches!(parse_axis("theta.value="), Err(HarnessError::Config { .. })));
    }
}
