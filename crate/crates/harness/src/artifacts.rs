//! Run artifacts. Every file is written to a temporary sibling and renamed
//! into place.
//!
//! - `errors.csv`: header `k,n,traj_error,energy_error`, one row per
//!   `(k, n)` with `k` outer. Values use the shortest decimal that parses
//!   back to the same `f64`; `energy_error` is `NaN` for problems without an
//!   energy.
//! - `manifest.toml`: `hash` (hex SHA-256 of the canonical resolved
//!   configuration) and that configuration as `[config]`; both leave out
//!   the thread count.
//! - `cost.toml`: modeled costs, evaluation counts and measured times.
//! - `states.bin` (when `output.states = true`): little-endian; the bytes
//!   `PRST`, a `u32` version (1), then `u64` counts `K+1`, `N+1`, `d`,
//!   followed by `(K+1)(N+1)d` `f64` values ordered by `k`, then `n`, then
//!   component.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;
use theta_parareal::engine::cost_report;

use crate::experiment::{Experiment, Outcome};
use crate::HarnessError;

pub const STATES_MAGIC: &[u8; 4] = b"PRST";
pub const STATES_VERSION: u32 = 1;

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    let ctx = || path.display().to_string();
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(ctx(), e))?;
    tmp.write_all(bytes).map_err(|e| HarnessError::io(ctx(), e))?;
    tmp.as_file().sync_all().map_err(|e| HarnessError::io(ctx(), e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(ctx(), e.error))?;
    Ok(())
}

pub fn errors_csv(outcome: &Outcome) -> String {
    let mut out = String::from("k,n,traj_error,energy_error\n");
    for (k, (traj, energy)) in outcome.traj.iter().zip(&outcome.energy).enumerate() {
        for (n, (t, e)) in traj.iter().zip(energy).enumerate() {
            writeln!(out, "{k},{n},{t},{e}").unwrap();
        }
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    hash: String,
    config: &'a crate::ExperimentConfig,
}

/// The thread count is left out so the manifest, like the hash, only
/// depends on what determines the results.
pub fn manifest(exp: &Experiment) -> String {
    let mut config = exp.config.clone();
    config.parareal.threads = None;
    toml::to_string(&Manifest { hash: exp.config.hash(), config: &config }).expect("manifest serializes")
}

#[derive(Serialize)]
struct CostFile {
    modeled: Modeled,
    counts: Counts,
    measured: Measured,
}

#[derive(Serialize)]
struct Modeled {
    n_cpu: usize,
    c_com: f64,
    c_p: f64,
    c_sp: f64,
    c_sp_windows: f64,
    sequential: f64,
}

#[derive(Serialize)]
struct Counts {
    iterations: usize,
    iterations_kept: usize,
    windows: usize,
    fine_eval_count: usize,
    coarse_eval_count: usize,
}

#[derive(Serialize)]
struct Measured {
    oracle_seconds: f64,
    coarse_sweep_seconds: f64,
    wall_seconds: f64,
    phase1_seconds: f64,
    iteration_seconds: Vec<f64>,
    phase1_iteration_seconds: Vec<f64>,
}

pub fn cost_toml(exp: &Experiment, outcome: &Outcome) -> Result<String, HarnessError> {
    let out = &exp.config.output;
    let run = &outcome.run;
    let c = cost_report(run, out.n_cpu, out.c_com)?;
    let file = CostFile {
        modeled: Modeled {
            n_cpu: out.n_cpu,
            c_com: out.c_com,
            c_p: c.c_p,
            c_sp: c.c_sp,
            c_sp_windows: c.c_sp_windows,
            sequential: c.sequential,
        },
        counts: Counts {
            iterations: run.iterations,
            iterations_kept: outcome.kept,
            windows: run.windows,
            fine_eval_count: run.fine_eval_count,
            coarse_eval_count: run.coarse_eval_count,
        },
        measured: Measured {
            oracle_seconds: run.oracle_time.as_secs_f64(),
            coarse_sweep_seconds: run.coarse_sweep_time.as_secs_f64(),
            wall_seconds: c.wall_total.as_secs_f64(),
            phase1_seconds: c.phase1_total.as_secs_f64(),
            iteration_seconds: run.wall_times.iter().map(|d| d.as_secs_f64()).collect(),
            phase1_iteration_seconds: run.phase1_times.iter().map(|d| d.as_secs_f64()).collect(),
        },
    };
    Ok(toml::to_string(&file).expect("cost report serializes"))
}

pub fn states_bin(outcome: &Outcome) -> Vec<u8> {
    let states = &outcome.run.states[..=outcome.kept];
    let rows = states.first().map_or(0, |r| r.len());
    let dim = states.first().and_then(|r| r.first()).map_or(0, |u| u.len());
    let mut out = Vec::with_capacity(32 + states.len() * rows * dim * 8);
    out.extend_from_slice(STATES_MAGIC);
    out.extend_from_slice(&STATES_VERSION.to_le_bytes());
    for count in [states.len(), rows, dim] {
        out.extend_from_slice(&(count as u64).to_le_bytes());
    }
    for row in states {
        for u in row {
            for x in u.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

/// Decodes `states.bin` into `states[k][n][i]`.
pub fn read_states(bytes: &[u8]) -> Option<Vec<Vec<Vec<f64>>>> {
    if bytes.len() < 32 || &bytes[..4] != STATES_MAGIC {
        return None;
    }
    if u32::from_le_bytes(bytes[4..8].try_into().ok()?) != STATES_VERSION {
        return None;
    }
    let count = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap()) as usize;
    let (ks, ns, d) = (count(0), count(1), count(2));
    let body = &bytes[32..];
    if body.len() != ks * ns * d * 8 {
        return None;
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    Some((0..ks).map(|_| (0..ns).map(|_| values.by_ref().take(d).collect()).collect()).collect())
}

/// Short description of a finished run, as printed by the CLI and used by
/// the sweep summary.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub hash: String,
    pub kept: usize,
    pub final_error: f64,
    pub report_error: f64,
    /// `traj_error[k][report_step]` for each kept `k`.
    pub report_by_k: Vec<f64>,
}

pub fn summarize(exp: &Experiment, outcome: &Outcome, dir: &Path) -> RunSummary {
    let n = exp.config.steps();
    let m = exp.config.output.report_step.unwrap_or(n);
    let last = &outcome.traj[outcome.kept];
    RunSummary {
        dir: dir.to_path_buf(),
        hash: exp.config.hash(),
        kept: outcome.kept,
        final_error: last[n],
        report_error: last[m],
        report_by_k: outcome.traj.iter().map(|row| row[m]).collect(),
    }
}

/// Writes every artifact of a run into `dir`.
pub fn write_run(exp: &Experiment, outcome: &Outcome, dir: &Path) -> Result<RunSummary, HarnessError> {
    write_atomic(&dir.join("errors.csv"), errors_csv(outcome).as_bytes())?;
    write_atomic(&dir.join("cost.toml"), cost_toml(exp, outcome)?.as_bytes())?;
    if exp.config.output.states {
        write_atomic(&dir.join("states.bin"), &states_bin(outcome))?;
    }
    write_atomic(&dir.join("manifest.toml"), manifest(exp).as_bytes())?;
    Ok(summarize(exp, outcome, dir))
}
