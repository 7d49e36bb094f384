use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parareal_harness::config::{apply_override, config_error, load_table, set_dotted};
use parareal_harness::stability::{spec_from_args, write_grid, StabilityArgs};
use parareal_harness::sweep::{parse_axis, run_sweep};
use parareal_harness::{assemble, execute, report, write_run, ExperimentConfig, HarnessError};
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "parareal", version, about = "Weighted parareal experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted override such as `parareal.K=20`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the fine propagations (0: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the randomized problem data.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run(Common),
    /// Sweep a cross product of configuration values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=v1,v2,...`; repeatable, one axis each.
        #[arg(long = "vary", value_name = "KEY=V1,V2")]
        vary: Vec<String>,
    },
    /// Write the stability grid `Q_{N,0}` over complex θ.
    Stability {
        #[command(flatten)]
        common: Common,
        /// λH, e.g. `0.1i` or `-0.02+0.1i`.
        #[arg(long = "lambda-h", default_value = "0.1i", allow_hyphen_values = true)]
        lambda_h: String,
        #[arg(long, default_value = "fe")]
        coarse: String,
        /// Fine scheme, or `exact` for e^{λH}.
        #[arg(long, default_value = "fe")]
        fine: String,
        /// Fine steps per coarse step.
        #[arg(long, default_value_t = 20)]
        substeps: u32,
        /// Number of coarse steps N.
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long = "re-range", default_value = "-2,2", allow_hyphen_values = true)]
        re_range: String,
        #[arg(long = "im-range", default_value = "-2,2", allow_hyphen_values = true)]
        im_range: String,
    },
    /// Summarize a run or sweep directory.
    Report {
        /// Directory to summarize; defaults to `--out`.
        dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<Table, HarnessError> {
    let mut table = match &common.config {
        Some(path) => load_table(path)?,
        None => Table::new(),
    };
    for assignment in &common.set {
        apply_override(&mut table, assignment)?;
    }
    if let Some(t) = common.threads {
        set_dotted(&mut table, "parareal.threads", Value::Integer(t as i64))?;
    }
    if let Some(s) = common.seed {
        let s = i64::try_from(s).map_err(|_| config_error("--seed", "too large"))?;
        table.insert("seed".into(), Value::Integer(s));
    }
    Ok(table)
}

fn cmd_run(common: &Common) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::from_table(&load(common)?)?;
    let exp = assemble(&cfg)?;
    let outcome = execute(&exp, None)?;
    let s = write_run(&exp, &outcome, &common.out)?;
    println!(
        "{}: k = {} final error {:e}, step {} error {:e} ({})",
        s.dir.display(),
        s.kept,
        s.final_error,
        cfg.output.report_step.unwrap_or(0),
        s.report_error,
        &s.hash[..12]
    );
    Ok(())
}

fn cmd_sweep(common: &Common, vary: &[String]) -> Result<(), HarnessError> {
    let table = load(common)?;
    let axes = vary.iter().map(|v| parse_axis(v)).collect::<Result<Vec<_>, _>>()?;
    let r = run_sweep(&table, &axes, &common.out)?;
    print!("{}", r.summary);
    println!("{} of {} runs succeeded; {} reused a cached fine solution", r.succeeded, r.rows, r.oracle_hits);
    Ok(())
}

fn cmd_stability(common: &Common, args: &StabilityArgs) -> Result<(), HarnessError> {
    let spec = spec_from_args(args)?;
    let path = common.out.join("stability.txt");
    let grid = write_grid(&spec, &path)?;
    let ratio = grid.fine_gain / grid.coarse_gain;
    println!(
        "{}: F = {}, C = {}, F/C = {}, Q(1) = {:e}, {} of {} samples inside",
        path.display(),
        grid.fine_gain,
        grid.coarse_gain,
        ratio,
        grid.evaluate(1.0.into()),
        grid.inside_count(),
        grid.q.len()
    );
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<(), HarnessError> {
    print!("{}", report::report(dir)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Sweep { common, vary } => cmd_sweep(common, vary),
        Command::Stability { common, lambda_h, coarse, fine, substeps, steps, resolution, re_range, im_range } => {
            let args = StabilityArgs {
                lambda_h: lambda_h.clone(),
                coarse: coarse.clone(),
                fine: fine.clone(),
                substeps: *substeps,
                steps: *steps,
                resolution: *resolution,
                re_range: re_range.clone(),
                im_range: im_range.clone(),
            };
            cmd_stability(common, &args)
        }
        Command::Report { dir, common } => cmd_report(dir.as_deref().unwrap_or(&common.out)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
