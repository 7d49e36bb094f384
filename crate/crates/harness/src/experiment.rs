//! Turns a resolved configuration into an engine configuration and runs it.

use std::sync::Arc;

use theta_parareal::engine::{run_with_oracle, PararealConfig};
use theta_parareal::problems::{
    energy_error, GridTransfer, HeatBoundary, HeatParams, TransferPropagator, WaveParams, WaveSchedule,
};
use theta_parareal::theta::{linearized_ratio_theta, ratio_strategy, InterpForm, InterpSettings};
use theta_parareal::{
    Complex64, Error, PararealRun, ProblemKind, ProblemSpec, Propagate, Propagator, SchemeId, State, ThetaStrategy,
};

use crate::config::{config_error, ExperimentConfig};
use crate::HarnessError;

/// Everything the engine needs, plus what the artifacts need to report.
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Problem on the grid the parareal states live on.
    pub problem: Arc<ProblemSpec>,
    pub engine: PararealConfig,
    /// Errors are reported relative to the fine solution's norm.
    pub relative: bool,
}

pub struct Outcome {
    pub run: PararealRun,
    /// Iterations kept after the optional early stop.
    pub kept: usize,
    /// `traj_error[k][n]`.
    pub traj: Vec<Vec<f64>>,
    /// `energy_error[k][n]`, NaN where the problem has no energy.
    pub energy: Vec<Vec<f64>>,
}

fn scheme(key: &str, name: &Option<String>) -> Result<SchemeId, HarnessError> {
    let name = name.as_deref().unwrap_or_default();
    name.parse().map_err(|e: Error| config_error(key, e.to_string()))
}

fn problem(cfg: &ExperimentConfig, kind: ProblemKind) -> Result<Arc<ProblemSpec>, HarnessError> {
    theta_parareal::problems::make_problem(kind)
        .map(Arc::new)
        .map_err(|e| config_error(format!("problem.{}", cfg.problem.id), e.to_string()))
}

fn propagator(
    key: &str,
    scheme: SchemeId,
    problem: Arc<ProblemSpec>,
    span: f64,
    substeps: usize,
) -> Result<Propagator, HarnessError> {
    Propagator::with_substeps(scheme, problem, span, substeps).map_err(|e| config_error(key, e.to_string()))
}

fn heat_params(cfg: &ExperimentConfig) -> Result<HeatParams, HarnessError> {
    let p = &cfg.problem;
    let boundary = match p.boundary.as_deref().unwrap_or("dirichlet") {
        "dirichlet" => HeatBoundary::Dirichlet,
        "neumann" => HeatBoundary::Neumann,
        "periodic" => HeatBoundary::Periodic,
        other => return Err(config_error("problem.boundary", format!("unknown boundary `{other}`"))),
    };
    Ok(HeatParams {
        a0: p.a0.unwrap_or(1.01),
        eps: p.eps.unwrap_or(0.04),
        dx: p.dx.unwrap_or(0.002),
        gamma: p.gamma.unwrap_or(0.0),
        boundary,
    })
}

/// The assembled propagators. `plain` holds the pair when both act on the
/// same state space as the problem, so the ratio weight can be formed
/// directly.
struct Pair {
    problem: Arc<ProblemSpec>,
    fine: Arc<dyn Propagate>,
    coarse: Arc<dyn Propagate>,
    plain: Option<(Propagator, Propagator)>,
}

fn propagators(cfg: &ExperimentConfig) -> Result<Pair, HarnessError> {
    let p = &cfg.problem;
    let span = cfg.span();
    let fine_scheme = scheme("fine.scheme", &cfg.fine.scheme)?;
    let coarse_scheme = scheme("coarse.scheme", &cfg.coarse.scheme)?;
    let fine_sub = cfg.fine.substeps.unwrap_or(1);
    let coarse_sub = cfg.coarse.substeps.unwrap_or(1);
    let kind = match p.id.as_str() {
        "scalar" => ProblemKind::ScalarModel {
            lambda: Complex64::new(p.lambda_re.unwrap_or(0.0), p.lambda_im.unwrap_or(0.0)),
        },
        "harmonic" => ProblemKind::HarmonicOscillator { omega: p.omega.unwrap_or(1.0) },
        "forced" => ProblemKind::ForcedNonAutonomous {
            seed: cfg.seed,
            t_final: p.t_final.unwrap_or(cfg.steps() as f64 * span),
            pulses: p.pulses.unwrap_or(40),
            force_both: p.force_both.unwrap_or(false),
        },
        "spin_orbit" => ProblemKind::SpinOrbit {
            eps: p.eps.unwrap_or(0.01),
            alpha: p.alpha.unwrap_or(1e-4),
            phi: p.phi.unwrap_or(0.2),
        },
        "kepler1" => ProblemKind::Kepler1Body { e: p.e.unwrap_or(0.5) },
        "kepler2" => ProblemKind::Kepler2Body3D {
            e1: p.e1.unwrap_or(0.4),
            e2: p.e2.unwrap_or(0.5),
            g12: p.g12.unwrap_or(1e-5),
        },
        "heat" => {
            if fine_scheme != SchemeId::CrankNicolsonHeat {
                return Err(config_error("fine.scheme", "the oscillatory heat model is integrated with `cn`"));
            }
            if coarse_sub != 1 {
                return Err(config_error("coarse.substeps", "the homogenized heat model takes one coarse step"));
            }
            let params = heat_params(cfg)?;
            let (fine, coarse) = theta_parareal::problems::heat_operators(&params, coarse_scheme, span, fine_sub)
                .map_err(|e| config_error("problem.heat", e.to_string()))?;
            return Ok(Pair {
                problem: coarse.problem.clone(),
                fine: Arc::new(fine.clone()),
                coarse: Arc::new(coarse.clone()),
                plain: Some((fine, coarse)),
            });
        }
        "wave" => {
            for (key, s) in [("fine.scheme", fine_scheme), ("coarse.scheme", coarse_scheme)] {
                if s != SchemeId::DampedLeapfrogWave {
                    return Err(config_error(key, "the wave problem is integrated with `leapfrog`"));
                }
            }
            let dx = p.dx.unwrap_or(0.02);
            let ratio = p.ratio.unwrap_or(40);
            if ratio == 0 {
                return Err(config_error("problem.ratio", "must be positive"));
            }
            let alpha = p.alpha.unwrap_or(1.0 / 30.0);
            let coarse_problem = problem(cfg, ProblemKind::Wave(WaveParams { alpha, dx, bumps: false }))?;
            let fine_problem = problem(
                cfg,
                ProblemKind::Wave(WaveParams { alpha, dx: dx / ratio as f64, bumps: p.bumps.unwrap_or(true) }),
            )?;
            let coarse = propagator("coarse", coarse_scheme, coarse_problem.clone(), span, coarse_sub)?;
            let fine = propagator("fine", fine_scheme, fine_problem, span, fine_sub)?;
            let points = coarse_problem.dim() / 2;
            let fine = TransferPropagator::new(fine, GridTransfer::new(points, ratio, 2))
                .map_err(|e| config_error("problem.ratio", e.to_string()))?;
            return Ok(Pair { problem: coarse_problem, fine: Arc::new(fine), coarse: Arc::new(coarse), plain: None });
        }
        other => return Err(config_error("problem.id", format!("unknown problem `{other}`"))),
    };
    let problem = problem(cfg, kind)?;
    let fine = propagator("fine", fine_scheme, problem.clone(), span, fine_sub)?;
    let coarse = propagator("coarse", coarse_scheme, problem.clone(), span, coarse_sub)?;
    Ok(Pair {
        problem,
        fine: Arc::new(fine.clone()),
        coarse: Arc::new(coarse.clone()),
        plain: Some((fine, coarse)),
    })
}

fn theta(cfg: &ExperimentConfig, pair: &Pair) -> Result<ThetaStrategy, HarnessError> {
    let t = &cfg.theta;
    let strategy = match t.kind.as_str() {
        "identity" => ThetaStrategy::Identity,
        "real" => ThetaStrategy::RealScalar(t.value.unwrap_or(1.0)),
        "complex" => {
            if !pair.problem.complex {
                return Err(config_error("theta.kind", "a complex weight needs a complex-valued problem"));
            }
            ThetaStrategy::ComplexScalar(Complex64::new(t.value.unwrap_or(1.0), t.im.unwrap_or(0.0)))
        }
        "ratio" => match &pair.plain {
            Some((fine, coarse)) if pair.problem.is_linear() => ratio_strategy(fine, coarse, 0.0, cfg.steps())?,
            _ => {
                // Exact for linear maps at any increment; a Jacobian ratio at
                // the initial state otherwise.
                let delta = if pair.problem.is_linear() || pair.plain.is_none() { 1.0 } else { 1e-6 };
                let about = if pair.plain.is_none() { State::zeros(pair.problem.dim()) } else { pair.problem.initial.clone() };
                ThetaStrategy::ConstantMatrix(linearized_ratio_theta(&*pair.fine, &*pair.coarse, &about, 0.0, delta)?)
            }
        },
        "interp" => {
            let form = match t.form.as_deref().unwrap_or("anchored") {
                "anchored" => InterpForm::Anchored,
                "compact" => InterpForm::Compact,
                other => return Err(config_error("theta.form", format!("unknown form `{other}`"))),
            };
            let tol = t.tol.unwrap_or(1e-14);
            if !(tol > 0.0 && tol < 1.0) {
                return Err(config_error("theta.tol", format!("must lie in (0, 1), got {tol}")));
            }
            if t.window == Some(0) {
                return Err(config_error("theta.window", "must be positive"));
            }
            ThetaStrategy::Interpolative(InterpSettings { tol, depth: t.window, form })
        }
        "schedule" => {
            if cfg.problem.id != "wave" {
                return Err(config_error("theta.kind", "the scheduled weight is defined for the wave problem"));
            }
            ThetaStrategy::ScheduledScalar(WaveSchedule::new(cfg.span(), cfg.steps()).as_fn())
        }
        other => return Err(config_error("theta.kind", format!("unknown kind `{other}`"))),
    };
    strategy.validate(pair.problem.dim(), cfg.steps()).map_err(|e| config_error("theta", e.to_string()))?;
    Ok(strategy)
}

/// Builds the problem, propagators and weight strategy described by `cfg`.
pub fn assemble(cfg: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    let pair = propagators(cfg)?;
    let theta = theta(cfg, &pair)?;
    let mut engine = PararealConfig::new(
        pair.fine.clone(),
        pair.coarse.clone(),
        pair.problem.initial.clone(),
        cfg.steps(),
        cfg.parareal.iterations,
    )
    .with_theta(theta);
    engine.windows = cfg.parareal.windows;
    engine.norm = pair.problem.norm;
    engine.threads = cfg.parareal.threads.unwrap_or(0);
    engine.skip_converged = cfg.parareal.skip_converged;
    engine.validate().map_err(|e| config_error("parareal", e.to_string()))?;
    let relative = matches!(pair.problem.kind, ProblemKind::HeatOscillatory(_) | ProblemKind::HeatHomogenized(_) | ProblemKind::Wave(_));
    Ok(Experiment { config: cfg.clone(), problem: pair.problem, engine, relative })
}

/// Runs the experiment, optionally with a cached fine solution.
pub fn execute(exp: &Experiment, oracle: Option<Arc<Vec<State>>>) -> Result<Outcome, HarnessError> {
    let run = run_with_oracle(&exp.engine, oracle)?;
    let kept = match exp.config.parareal.early_stop {
        Some(tol) => (0..=run.iterations).find(|&k| run.max_error(k) < tol).unwrap_or(run.iterations),
        None => run.iterations,
    };
    let traj = (0..=kept)
        .map(|k| (0..=run.steps).map(|n| if exp.relative { run.relative_error(k, n) } else { run.errors[k][n] }).collect())
        .collect();
    let energy = (0..=kept)
        .map(|k| {
            run.states[k]
                .iter()
                .map(|u| if exp.problem.energy.is_some() { energy_error(&exp.problem, u).unwrap_or(f64::NAN) } else { f64::NAN })
                .collect()
        })
        .collect();
    Ok(Outcome { run, kept, traj, energy })
}
