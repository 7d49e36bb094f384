//! Parareal iteration: the zeroth coarse sweep, θ-weighted corrections,
//! sequential windows and the thread pool for fine propagations.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::integrators::Propagate;
use crate::problems::Norm;
use crate::theta::{InterpStats, ThetaState, ThetaStrategy};
use crate::{Error, Result, State};

#[derive(Clone)]
pub struct PararealConfig {
    /// Number of coarse steps `N`.
    pub steps: usize,
    /// Number of iterations `K`.
    pub iterations: usize,
    /// Coarse span `H`.
    pub span: f64,
    pub fine: Arc<dyn Propagate>,
    pub coarse: Arc<dyn Propagate>,
    pub theta: ThetaStrategy,
    /// Number of sequential windows `s`; must divide `steps`.
    pub windows: usize,
    pub u0: State,
    pub t0: f64,
    pub norm: Norm,
    /// Worker pool width for fine propagations; 0 picks the machine default.
    pub threads: usize,
    /// Reuse already-exact entries (`n ≤ k`) instead of recomputing them.
    pub skip_converged: bool,
}

impl std::fmt::Debug for PararealConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PararealConfig")
            .field("steps", &self.steps)
            .field("iterations", &self.iterations)
            .field("span", &self.span)
            .field("theta", &self.theta)
            .field("windows", &self.windows)
            .field("t0", &self.t0)
            .field("threads", &self.threads)
            .finish_non_exhaustive()
    }
}

impl PararealConfig {
    pub fn new(
        fine: Arc<dyn Propagate>,
        coarse: Arc<dyn Propagate>,
        u0: State,
        steps: usize,
        iterations: usize,
    ) -> Self {
        PararealConfig {
            steps,
            iterations,
            span: coarse.span(),
            fine,
            coarse,
            theta: ThetaStrategy::Identity,
            windows: 1,
            u0,
            t0: 0.0,
            norm: Norm::Euclidean,
            threads: 0,
            skip_converged: false,
        }
    }

    pub fn with_theta(mut self, theta: ThetaStrategy) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(Error::bad(format!("coarse span must be positive, got {}", self.span)));
        }
        if !close(self.fine.span(), self.span) || !close(self.coarse.span(), self.span) {
            return Err(Error::bad(format!(
                "fine span {} and coarse span {} must both equal H = {}",
                self.fine.span(),
                self.coarse.span(),
                self.span
            )));
        }
        if self.windows == 0 || self.steps % self.windows != 0 {
            return Err(Error::bad(format!("{} windows do not divide {} steps", self.windows, self.steps)));
        }
        if self.u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::bad("initial state is not finite"));
        }
        self.theta.validate(self.u0.len(), self.steps)
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.steps)
    }

    fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.span
    }

    fn pool(&self) -> Result<ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::bad(format!("cannot start worker pool: {e}")))
    }
}

/// Every iterate of a run together with its errors against the sequential
/// fine solution.
#[derive(Debug, Clone)]
pub struct PararealRun {
    /// `states[k][n] = u_n^{(k)}`.
    pub states: Vec<Vec<State>>,
    /// `(F_H)^n u₀`.
    pub fine_oracle: Arc<Vec<State>>,
    /// `errors[k][n] = ‖u_n^{(k)} - (F_H)^n u₀‖` in the problem norm.
    pub errors: Vec<Vec<f64>>,
    /// Fine propagations performed by the iterations (the oracle excluded).
    pub fine_eval_count: usize,
    pub coarse_eval_count: usize,
    /// Duration of each iteration, summed over windows.
    pub wall_times: Vec<Duration>,
    /// Duration of the parallel fine phase of each iteration, summed over windows.
    pub phase1_times: Vec<Duration>,
    pub coarse_sweep_time: Duration,
    pub oracle_time: Duration,
    pub steps: usize,
    pub iterations: usize,
    pub windows: usize,
    pub span: f64,
    pub fine_step: f64,
    pub norm: Norm,
    /// Interpolation statistics per window (empty for other strategies).
    pub interp_stats: Vec<InterpStats>,
}

impl PararealRun {
    /// `errors[k][n] / ‖(F_H)^n u₀‖`, or the absolute error where the
    /// reference vanishes.
    pub fn relative_error(&self, k: usize, n: usize) -> f64 {
        let scale = self.norm.of(&self.fine_oracle[n]);
        if scale > 0.0 {
            self.errors[k][n] / scale
        } else {
            self.errors[k][n]
        }
    }

    pub fn final_errors(&self) -> &[f64] {
        &self.errors[self.iterations]
    }

    /// `max_n errors[k][n]`.
    pub fn max_error(&self, k: usize) -> f64 {
        self.errors[k].iter().cloned().fold(0.0, f64::max)
    }
}

/// Modeled and measured cost of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    /// `K (T/H + T/(n_cpu h) + c_com)`.
    pub c_p: f64,
    /// `C_p + s K c_com`.
    pub c_sp: f64,
    /// `s K (T/(H s) + T/(n_cpu h s) + c_com)`, the cost of `s` windows
    /// each run with `K` iterations.
    pub c_sp_windows: f64,
    /// `T / h`, the sequential fine solve.
    pub sequential: f64,
    pub wall_total: Duration,
    pub phase1_total: Duration,
    pub fine_eval_count: usize,
}

/// `(u₀, C u₀, …, C^N u₀)`.
pub fn coarse_sweep(cfg: &PararealConfig) -> Result<Vec<State>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.steps + 1);
    out.push(cfg.u0.clone());
    for n in 0..cfg.steps {
        let next = cfg.coarse.propagate(&out[n], cfg.time(n))?;
        out.push(next);
    }
    Ok(out)
}

/// `(u₀, F u₀, …, F^N u₀)`, evaluated sequentially.
pub fn fine_oracle(cfg: &PararealConfig) -> Result<Vec<State>> {
    let mut out = Vec::with_capacity(cfg.steps + 1);
    out.push(cfg.u0.clone());
    for n in 0..cfg.steps {
        let next = cfg.fine.propagate(&out[n], cfg.time(n))?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "fine solution", step: n + 1 });
        }
        out.push(next);
    }
    Ok(out)
}

/// One θ-parareal iteration `k → k+1` over the whole interval, starting
/// from a fresh strategy state. Interpolative weights fall back to the
/// standard correction here since their window only sees `prev`.
pub fn iterate(cfg: &PararealConfig, prev: &[State], k: usize) -> Result<Vec<State>> {
    cfg.validate()?;
    if prev.len() != cfg.steps + 1 {
        return Err(Error::DimensionMismatch { expected: cfg.steps + 1, found: prev.len() });
    }
    let pool = cfg.pool()?;
    let mut window = Window::new(cfg, cfg.u0.clone(), 0, cfg.steps);
    let coarse_prev = (0..cfg.steps)
        .map(|n| cfg.coarse.propagate(&prev[n], cfg.time(n)))
        .collect::<Result<Vec<_>>>()?;
    let step = window.advance(&pool, prev, &coarse_prev, k)?;
    Ok(step.states)
}

struct Window<'a> {
    cfg: &'a PararealConfig,
    u0: State,
    offset: usize,
    len: usize,
    theta: ThetaState,
}

struct Advance {
    states: Vec<State>,
    coarse: Vec<State>,
    fine_evals: usize,
    coarse_evals: usize,
    wall: Duration,
    phase1: Duration,
}

impl<'a> Window<'a> {
    fn new(cfg: &'a PararealConfig, u0: State, offset: usize, len: usize) -> Self {
        let theta = ThetaState::new(&cfg.theta, len, u0.len(), offset);
        Window { cfg, u0, offset, len, theta }
    }

    fn time(&self, n: usize) -> f64 {
        self.cfg.time(self.offset + n)
    }

    // Zeroth iterate and the coarse values C u_n^{(0)}.
    fn coarse_sweep(&self) -> Result<(Vec<State>, Vec<State>)> {
        let mut states = Vec::with_capacity(self.len + 1);
        states.push(self.u0.clone());
        for n in 0..self.len {
            let next = self.cfg.coarse.propagate(&states[n], self.time(n))?;
            states.push(next);
        }
        let coarse = states[1..].to_vec();
        Ok((states, coarse))
    }

    fn advance(&mut self, pool: &ThreadPool, prev: &[State], coarse_prev: &[State], k: usize) -> Result<Advance> {
        let start = Instant::now();
        let cfg = self.cfg;
        let skip = |n: usize| cfg.skip_converged && n < k;
        let fine_prev: Vec<State> = pool.install(|| {
            (0..self.len)
                .into_par_iter()
                .map(|n| if skip(n) { Ok(prev[n + 1].clone()) } else { cfg.fine.propagate(&prev[n], self.time(n)) })
                .collect::<Result<Vec<_>>>()
        })?;
        let phase1 = start.elapsed();
        let fine_evals = (0..self.len).filter(|&n| !skip(n)).count();

        self.theta.observe(&prev[..self.len], &fine_prev, coarse_prev);

        let mut states = Vec::with_capacity(self.len + 1);
        let mut coarse = Vec::with_capacity(self.len);
        states.push(self.u0.clone());
        let mut coarse_evals = 0;
        for n in 0..self.len {
            if skip(n) {
                coarse.push(coarse_prev[n].clone());
                states.push(prev[n + 1].clone());
                continue;
            }
            let c = cfg.coarse.propagate(&states[n], self.time(n))?;
            coarse_evals += 1;
            let next = self.theta.combine(n, k, &states[n], &c, &prev[n], &fine_prev[n], &coarse_prev[n]);
            coarse.push(c);
            states.push(next);
        }
        Ok(Advance { states, coarse, fine_evals, coarse_evals, wall: start.elapsed(), phase1 })
    }
}

/// Runs the zeroth sweep and `K` iterations, window by window.
pub fn run(cfg: &PararealConfig) -> Result<PararealRun> {
    run_with_oracle(cfg, None)
}

/// As [`run`], reusing a precomputed fine solution when one is given.
pub fn run_with_oracle(cfg: &PararealConfig, oracle: Option<Arc<Vec<State>>>) -> Result<PararealRun> {
    cfg.validate()?;
    let pool = cfg.pool()?;
    let k_max = cfg.iterations;
    let m = cfg.steps / cfg.windows;

    let oracle_start = Instant::now();
    let fine_oracle = match oracle {
        Some(o) => {
            if o.len() != cfg.steps + 1 {
                return Err(Error::DimensionMismatch { expected: cfg.steps + 1, found: o.len() });
            }
            o
        }
        None => Arc::new(fine_oracle(cfg)?),
    };
    let oracle_time = oracle_start.elapsed();

    let mut states: Vec<Vec<State>> = vec![vec![cfg.u0.clone()]; k_max + 1];
    let mut wall_times = vec![Duration::ZERO; k_max];
    let mut phase1_times = vec![Duration::ZERO; k_max];
    let mut coarse_sweep_time = Duration::ZERO;
    let mut fine_eval_count = 0;
    let mut coarse_eval_count = 0;
    let mut interp_stats = Vec::new();
    let mut u0 = cfg.u0.clone();

    for w in 0..cfg.windows {
        let mut window = Window::new(cfg, u0.clone(), w * m, m);
        let sweep_start = Instant::now();
        let (mut prev, mut coarse_prev) = window.coarse_sweep()?;
        coarse_sweep_time += sweep_start.elapsed();
        coarse_eval_count += m;
        states[0].extend_from_slice(&prev[1..]);
        for k in 0..k_max {
            let step = window.advance(&pool, &prev, &coarse_prev, k)?;
            fine_eval_count += step.fine_evals;
            coarse_eval_count += step.coarse_evals;
            wall_times[k] += step.wall;
            phase1_times[k] += step.phase1;
            states[k + 1].extend_from_slice(&step.states[1..]);
            prev = step.states;
            coarse_prev = step.coarse;
        }
        if matches!(cfg.theta, ThetaStrategy::Interpolative(_)) {
            interp_stats.push(window.theta.stats.clone());
        }
        u0 = prev[m].clone();
    }

    let errors = states
        .iter()
        .map(|row| row.iter().zip(fine_oracle.iter()).map(|(u, f)| cfg.norm.distance(u, f)).collect())
        .collect();

    Ok(PararealRun {
        states,
        fine_oracle,
        errors,
        fine_eval_count,
        coarse_eval_count,
        wall_times,
        phase1_times,
        coarse_sweep_time,
        oracle_time,
        steps: cfg.steps,
        iterations: k_max,
        windows: cfg.windows,
        span: cfg.span,
        fine_step: cfg.fine.substep(),
        norm: cfg.norm,
        interp_stats,
    })
}

/// Cost model of a run on `n_cpu` processors with communication cost
/// `c_com` per iteration, in units of one step of either propagator.
pub fn cost_report(run: &PararealRun, n_cpu: usize, c_com: f64) -> Result<CostEstimate> {
    if n_cpu == 0 {
        return Err(Error::bad("n_cpu must be at least 1"));
    }
    let t = run.steps as f64 * run.span;
    let fine_steps = t / run.fine_step;
    let (c_p, c_sp, c_sp_windows) = modeled_cost(run.iterations, run.windows, run.steps as f64, fine_steps, n_cpu, c_com);
    Ok(CostEstimate {
        c_p,
        c_sp,
        c_sp_windows,
        sequential: fine_steps,
        wall_total: run.wall_times.iter().sum::<Duration>() + run.coarse_sweep_time,
        phase1_total: run.phase1_times.iter().sum(),
        fine_eval_count: run.fine_eval_count,
    })
}

/// `(C_p, C_sp, C_sp per windows)` from `K`, `s`, `T/H`, `T/h`, `n_cpu` and `c_com`.
pub fn modeled_cost(k: usize, s: usize, coarse_steps: f64, fine_steps: f64, n_cpu: usize, c_com: f64) -> (f64, f64, f64) {
    let (k, s, n) = (k as f64, s as f64, n_cpu as f64);
    let c_p = k * (coarse_steps + fine_steps / n + c_com);
    (c_p, c_p + s * k * c_com, s * k * (coarse_steps / s + fine_steps / (n * s) + c_com))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{LinearMap, Propagator, SchemeId};
    use crate::problems::{make_problem, ProblemKind};
    use nalgebra::{DMatrix, DVector};

    fn scalar_maps(f: f64, c: f64) -> (Arc<dyn Propagate>, Arc<dyn Propagate>) {
        (
            Arc::new(LinearMap { matrix: DMatrix::from_element(1, 1, f), span: 1.0 }),
            Arc::new(LinearMap { matrix: DMatrix::from_element(1, 1, c), span: 1.0 }),
        )
    }

    #[test]
    fn empty_sweep() {
        let (f, c) = scalar_maps(0.5, 0.4);
        let cfg = PararealConfig::new(f, c, DVector::from_element(1, 1.0), 0, 0);
        assert_eq!(coarse_sweep(&cfg).unwrap(), vec![DVector::from_element(1, 1.0)]);
    }

    #[test]
    fn trapezoidal_sweep_on_decay() {
        let p = Arc::new(make_problem(ProblemKind::ScalarModel { lambda: num_complex::Complex64::new(-3.0, 0.0) }).unwrap());
        let c: Arc<dyn Propagate> = Arc::new(Propagator::new(SchemeId::Trapezoidal, p.clone(), 1.0, 1.0).unwrap());
        let cfg = PararealConfig::new(c.clone(), c, p.initial.clone(), 2, 0);
        let sweep = coarse_sweep(&cfg).unwrap();
        assert!((sweep[1][0] + 0.2).abs() < 1e-15);
        assert!((sweep[2][0] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn standard_update_by_hand() {
        let (f, c) = scalar_maps(0.5, 0.4);
        let cfg = PararealConfig::new(f, c, DVector::from_element(1, 1.0), 3, 1);
        let r = run(&cfg).unwrap();
        // u1 = 0.4*1 + 0.5 - 0.4 = 0.5; u2 = 0.4*0.5 + 0.5*0.4 - 0.4*0.4
        assert_eq!(r.states[1][1][0], 0.4 + (0.5 - 0.4));
        assert!((r.states[1][2][0] - (0.2 + 0.2 - 0.16)).abs() < 1e-16);
        assert_eq!(r.fine_eval_count, 3);
        assert_eq!(r.errors.len(), 2);
        assert_eq!(r.errors[0].len(), 4);
    }

    #[test]
    fn windows_must_divide_steps() {
        let (f, c) = scalar_maps(0.5, 0.4);
        let mut cfg = PararealConfig::new(f, c, DVector::from_element(1, 1.0), 3, 1);
        cfg.windows = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cost_model_examples() {
        let (c_p, _, _) = modeled_cost(4, 1, 100.0, 1e4, 10, 0.0);
        assert_eq!(c_p, 4400.0);
        let (c_p, c_sp, windows) = modeled_cost(4, 4, 100.0, 1e4, 10, 5.0);
        assert_eq!(c_p, 4420.0);
        assert_eq!(c_sp, 4500.0);
        assert_eq!(windows, 4480.0);
        let (c_p, _, windows) = modeled_cost(3, 1, 50.0, 500.0, 2, 7.0);
        assert_eq!(windows, c_p);
    }

    #[test]
    fn overflowing_fine_solution_is_an_error() {
        let (f, c) = scalar_maps(1e300, 1.0);
        let cfg = PararealConfig::new(f, c, DVector::from_element(1, 1.0), 4, 1);
        assert!(matches!(run(&cfg), Err(Error::NonFinite { what: "fine solution", step: 2 })));
    }
}
