use std::path::Path;
use std::process::{Command, Output};

use parareal_harness::artifacts::{errors_csv, read_states};
use parareal_harness::config::{apply_override, ExperimentConfig};
use parareal_harness::sweep::{parse_axis, run_sweep};
use parareal_harness::{assemble, execute};
use toml::Table;

fn parareal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parareal")).args(args).output().expect("binary runs")
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = configs().join("kepler1.toml");
    let o = parareal(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "parareal.K=20",
        "--set",
        "parareal.T=2",
        "--set",
        "output.states=true",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out.join("errors.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,n,traj_error,energy_error"));
    assert_eq!(lines.count(), 21 * 101);
    let manifest: Table = read(&out.join("manifest.toml")).parse().unwrap();
    assert_eq!(manifest["hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["parareal"]["K"].as_integer(), Some(20));
    let cost: Table = read(&out.join("cost.toml")).parse().unwrap();
    assert_eq!(cost["counts"]["fine_eval_count"].as_integer(), Some(20 * 100));
    let states = read_states(&std::fs::read(out.join("states.bin")).unwrap()).unwrap();
    assert_eq!((states.len(), states[0].len(), states[0][0].len()), (21, 101, 4));
    assert_eq!(states[0][0], vec![0.5, 0.0, 0.0, 3f64.sqrt()]);
    let report = parareal(&["report", out.to_str().unwrap()]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("kepler1"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("forced.toml");
    let mut csvs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}"));
        let o = parareal(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        csvs.push((read(&out.join("errors.csv")), read(&out.join("manifest.toml"))));
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn missing_problem_id_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = parareal(&["run", "--set", "parareal.K=2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("problem.id"));
}

#[test]
fn bad_values_name_their_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("heat.toml");
    let o = parareal(&["run", "--config", cfg.to_str().unwrap(), "--set", "theta.kind=magic", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta.kind"));
}

#[test]
fn numerical_failures_exit_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    // Forward Euler on a huge negative λ overflows within one coarse step.
    let o = parareal(&[
        "run",
        "--set",
        "problem.id=scalar",
        "--set",
        "problem.lambda_re=-1e300",
        "--set",
        "problem.lambda_im=0",
        "--set",
        "coarse.scheme=trap",
        "--set",
        "fine.scheme=fe",
        "--set",
        "parareal.K=1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn empty_sweep_list_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("heat.toml");
    let o = parareal(&["sweep", "--config", cfg.to_str().unwrap(), "--vary", "theta.value=", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stability_command_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = parareal(&[
        "stability",
        "--lambda-h",
        "0.1i",
        "--coarse",
        "be",
        "--fine",
        "exact",
        "--steps",
        "2",
        "--resolution",
        "32",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("stability.txt"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 32 * 32);
    // With N = 2 the factor is the mismatch |F - θC| alone.
    let f = (0.1f64.cos(), 0.1f64.sin());
    let c = (1.0 / 1.01, 0.1 / 1.01);
    for row in rows.iter().step_by(97) {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        let tc = (v[0] * c.0 - v[1] * c.1, v[0] * c.1 + v[1] * c.0);
        let expected = ((f.0 - tc.0).powi(2) + (f.1 - tc.1).powi(2)).sqrt();
        assert!((v[2] - expected).abs() < 1e-14);
    }
    let bad = parareal(&["stability", "--lambda-h", "0.1q", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

fn table(path: &Path, sets: &[&str]) -> Table {
    let mut t: Table = read(path).parse().unwrap();
    for s in sets {
        apply_override(&mut t, s).unwrap();
    }
    t
}

#[test]
fn cached_fine_solution_gives_identical_errors() {
    let t = table(&configs().join("kepler2.toml"), &["parareal.T=2", "parareal.K=4"]);
    let cfg = ExperimentConfig::from_table(&t).unwrap();
    let exp = assemble(&cfg).unwrap();
    let fresh = execute(&exp, None).unwrap();
    let cached = execute(&exp, Some(fresh.run.fine_oracle.clone())).unwrap();
    assert_eq!(errors_csv(&fresh), errors_csv(&cached));
}

#[test]
fn sweep_rows_and_cache_hits() {
    let dir = tempfile::tempdir().unwrap();
    let t = table(&configs().join("kepler2.toml"), &["parareal.T=2", "parareal.K=4"]);
    let axes = vec![parse_axis("theta.tol=1e-14,1e-10,1e-6").unwrap()];
    let r = run_sweep(&t, &axes, dir.path()).unwrap();
    assert_eq!((r.rows, r.succeeded, r.oracle_hits), (3, 3, 2));
    let summary = read(&dir.path().join("summary.csv"));
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("run,theta.tol,status,final_error,report_error,report_error_by_k\n"));
    for i in 0..3 {
        assert!(dir.path().join(format!("run-{i:03}/errors.csv")).exists());
    }
}

#[test]
fn sweep_records_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let t = table(&configs().join("heat.toml"), &["parareal.K=1", "parareal.N=10", "output.report_step=5"]);
    let axes = vec![parse_axis("coarse.scheme=cn,rk4").unwrap()];
    let r = run_sweep(&t, &axes, dir.path()).unwrap();
    assert_eq!((r.rows, r.succeeded), (2, 1));
    assert!(r.summary.lines().nth(2).unwrap().contains("failed"));
}

#[test]
fn early_stop_truncates_iterations() {
    let t = table(&configs().join("harmonic.toml"), &["parareal.T=20", "parareal.K=8", "parareal.early_stop=1e-10"]);
    let cfg = ExperimentConfig::from_table(&t).unwrap();
    let outcome = execute(&assemble(&cfg).unwrap(), None).unwrap();
    // The ratio weight is exact after one iteration.
    assert_eq!(outcome.kept, 1);
    assert_eq!(errors_csv(&outcome).lines().count(), 1 + 2 * 41);
}

#[test]
fn every_example_config_resolves() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_table(&table(&path, &[])).unwrap();
        assemble(&cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
