//! One-step schemes and the fine/coarse propagators built from them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linalg::solve_dense;
use crate::problems::{ProblemSpec, Rhs};
use crate::{Error, Result, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    ForwardEuler,
    BackwardEuler,
    Trapezoidal,
    ExplicitMidpoint,
    RK4,
    VelocityVerlet,
    CrankNicolsonHeat,
    ImplicitEulerHeat,
    DampedLeapfrogWave,
}

impl SchemeId {
    pub const ALL: [SchemeId; 9] = [
        SchemeId::ForwardEuler,
        SchemeId::BackwardEuler,
        SchemeId::Trapezoidal,
        SchemeId::ExplicitMidpoint,
        SchemeId::RK4,
        SchemeId::VelocityVerlet,
        SchemeId::CrankNicolsonHeat,
        SchemeId::ImplicitEulerHeat,
        SchemeId::DampedLeapfrogWave,
    ];

    pub fn is_implicit(self) -> bool {
        matches!(
            self,
            SchemeId::BackwardEuler | SchemeId::Trapezoidal | SchemeId::CrankNicolsonHeat | SchemeId::ImplicitEulerHeat
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ForwardEuler => "fe",
            SchemeId::BackwardEuler => "be",
            SchemeId::Trapezoidal => "trap",
            SchemeId::ExplicitMidpoint => "midpoint",
            SchemeId::RK4 => "rk4",
            SchemeId::VelocityVerlet => "verlet",
            SchemeId::CrankNicolsonHeat => "cn",
            SchemeId::ImplicitEulerHeat => "ie",
            SchemeId::DampedLeapfrogWave => "leapfrog",
        }
    }

    /// Nominal order of accuracy.
    pub fn order(self) -> u32 {
        match self {
            SchemeId::ForwardEuler | SchemeId::BackwardEuler | SchemeId::ImplicitEulerHeat => 1,
            SchemeId::RK4 => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let id = match lower.as_str() {
            "fe" | "forward_euler" | "forwardeuler" => SchemeId::ForwardEuler,
            "be" | "backward_euler" | "backwardeuler" => SchemeId::BackwardEuler,
            "trap" | "tm" | "trapezoidal" => SchemeId::Trapezoidal,
            "midpoint" | "explicit_midpoint" => SchemeId::ExplicitMidpoint,
            "rk4" => SchemeId::RK4,
            "verlet" | "velocity_verlet" => SchemeId::VelocityVerlet,
            "cn" | "crank_nicolson" => SchemeId::CrankNicolsonHeat,
            "ie" | "implicit_euler" => SchemeId::ImplicitEulerHeat,
            "leapfrog" | "wave" => SchemeId::DampedLeapfrogWave,
            _ => return Err(Error::bad(format!("unknown scheme `{s}`"))),
        };
        Ok(id)
    }
}

fn incompatible(scheme: SchemeId, reason: &str) -> Error {
    Error::IncompatibleScheme { scheme, reason: reason.to_string() }
}

/// Checks that `scheme` can be applied to `problem`.
pub fn check_compatible(scheme: SchemeId, problem: &ProblemSpec) -> Result<()> {
    use SchemeId::*;
    let ok = match (scheme, &problem.rhs) {
        (DampedLeapfrogWave, Rhs::Wave(_)) => true,
        (_, Rhs::Wave(_)) => return Err(incompatible(scheme, "wave problems only support the damped leapfrog scheme")),
        (DampedLeapfrogWave, _) => return Err(incompatible(scheme, "requires a wave problem")),
        (CrankNicolsonHeat | ImplicitEulerHeat, Rhs::Diffusion(_)) => true,
        (CrankNicolsonHeat | ImplicitEulerHeat, _) => {
            return Err(incompatible(scheme, "requires a diffusion (tridiagonal) problem"))
        }
        (BackwardEuler | Trapezoidal, Rhs::Nonlinear(_)) => {
            return Err(incompatible(scheme, "implicit schemes require a linear right-hand side"))
        }
        (VelocityVerlet, _) => problem.acceleration.is_some(),
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(incompatible(scheme, "requires a separable q' = p, p' = a(q, t) structure"))
    }
}

fn axpy(u: &State, a: f64, k: &State) -> State {
    let mut out = u.clone();
    out.axpy(a, k, 1.0);
    out
}

/// One step of `scheme` from `(state, t)` with step `dt`.
pub fn step(scheme: SchemeId, problem: &ProblemSpec, state: &State, t: f64, dt: f64) -> Result<State> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::bad(format!("step size must be positive, got {dt}")));
    }
    if state.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), found: state.len() });
    }
    check_compatible(scheme, problem)?;
    use SchemeId::*;
    match scheme {
        ForwardEuler => Ok(axpy(state, dt, &problem.eval(state, t)?)),
        ExplicitMidpoint => {
            let k1 = problem.eval(state, t)?;
            let k2 = problem.eval(&axpy(state, 0.5 * dt, &k1), t + 0.5 * dt)?;
            Ok(axpy(state, dt, &k2))
        }
        RK4 => {
            let k1 = problem.eval(state, t)?;
            let k2 = problem.eval(&axpy(state, 0.5 * dt, &k1), t + 0.5 * dt)?;
            let k3 = problem.eval(&axpy(state, 0.5 * dt, &k2), t + 0.5 * dt)?;
            let k4 = problem.eval(&axpy(state, dt, &k3), t + dt)?;
            let incr = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            Ok(state + incr)
        }
        BackwardEuler | ImplicitEulerHeat => implicit_theta_step(problem, state, t, dt, 1.0),
        Trapezoidal | CrankNicolsonHeat => implicit_theta_step(problem, state, t, dt, 0.5),
        VelocityVerlet => verlet_step(problem, state, t, dt),
        DampedLeapfrogWave => match &problem.rhs {
            Rhs::Wave(op) => op.step(state, dt),
            _ => unreachable!("checked above"),
        },
    }
}

// (I - w dt A(t+dt)) u1 = (I + (1-w) dt A(t)) u0 + dt ((1-w) b(t) + w b(t+dt))
fn implicit_theta_step(problem: &ProblemSpec, u: &State, t: f64, dt: f64, w: f64) -> Result<State> {
    match &problem.rhs {
        Rhs::Linear(lin) => {
            let n = u.len();
            let a1 = (lin.matrix)(t + dt);
            let mut rhs = u.clone();
            if w < 1.0 {
                let a0 = (lin.matrix)(t);
                rhs += a0 * u * ((1.0 - w) * dt);
            }
            if let Some(b) = &lin.forcing {
                if w < 1.0 {
                    rhs += b(t) * ((1.0 - w) * dt);
                }
                rhs += b(t + dt) * (w * dt);
            }
            let lhs = DMatrix::identity(n, n) - a1 * (w * dt);
            solve_dense(lhs, &rhs)
        }
        Rhs::Diffusion(op) => {
            let rhs = if w < 1.0 { op.shifted(1.0, (1.0 - w) * dt).apply(u) } else { u.clone() };
            op.shifted(1.0, -w * dt).solve(&rhs)
        }
        _ => unreachable!("implicit schemes are checked to have linear right-hand sides"),
    }
}

fn verlet_step(problem: &ProblemSpec, u: &State, t: f64, dt: f64) -> Result<State> {
    let accel = problem.acceleration.as_ref().expect("checked compatible");
    let d = u.len() / 2;
    let (q, p) = u.as_slice().split_at(d);
    let mut a0 = vec![0.0; d];
    accel(q, t, &mut a0);
    let q1: Vec<f64> = (0..d).map(|i| q[i] + dt * p[i] + 0.5 * dt * dt * a0[i]).collect();
    let mut a1 = vec![0.0; d];
    accel(&q1, t + dt, &mut a1);
    let mut out = DVector::zeros(2 * d);
    for i in 0..d {
        out[i] = q1[i];
        out[d + i] = p[i] + 0.5 * dt * (a0[i] + a1[i]);
    }
    Ok(out)
}

/// Anything that advances a state over a fixed span `H` from time `t`.
pub trait Propagate: Send + Sync {
    fn propagate(&self, state: &State, t: f64) -> Result<State>;

    fn span(&self) -> f64;

    /// Size of the underlying time step; used by the cost model.
    fn substep(&self) -> f64 {
        self.span()
    }
}

impl<P: Propagate + ?Sized> Propagate for Arc<P> {
    fn propagate(&self, state: &State, t: f64) -> Result<State> {
        (**self).propagate(state, t)
    }

    fn span(&self) -> f64 {
        (**self).span()
    }

    fn substep(&self) -> f64 {
        (**self).substep()
    }
}

/// `span / step` applications of one scheme on one problem.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub scheme: SchemeId,
    pub problem: Arc<ProblemSpec>,
    step: f64,
    substeps: usize,
}

impl Propagator {
    /// `span` must be a positive integer multiple of `step` (to 1e-9 relative).
    pub fn new(scheme: SchemeId, problem: Arc<ProblemSpec>, step: f64, span: f64) -> Result<Self> {
        if !(step > 0.0 && span > 0.0 && step.is_finite() && span.is_finite()) {
            return Err(Error::bad(format!("step {step} and span {span} must be positive")));
        }
        let ratio = span / step;
        let substeps = ratio.round();
        if substeps < 1.0 || (ratio - substeps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::bad(format!("span {span} is not an integer multiple of step {step}")));
        }
        Self::with_substeps(scheme, problem, span, substeps as usize)
    }

    pub fn with_substeps(scheme: SchemeId, problem: Arc<ProblemSpec>, span: f64, substeps: usize) -> Result<Self> {
        if substeps == 0 || !(span > 0.0) {
            return Err(Error::bad("a propagator needs a positive span and at least one substep"));
        }
        check_compatible(scheme, &problem)?;
        Ok(Propagator { scheme, problem, step: span / substeps as f64, substeps })
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }
}

impl Propagate for Propagator {
    fn propagate(&self, state: &State, t: f64) -> Result<State> {
        let mut u = step(self.scheme, &self.problem, state, t, self.step)?;
        for i in 1..self.substeps {
            u = step(self.scheme, &self.problem, &u, t + i as f64 * self.step, self.step)?;
        }
        Ok(u)
    }

    fn span(&self) -> f64 {
        self.step * self.substeps as f64
    }

    fn substep(&self) -> f64 {
        self.step
    }
}

/// A fixed matrix acting as a propagator; used for linear test problems and
/// the block-matrix oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
    pub span: f64,
}

impl Propagate for LinearMap {
    fn propagate(&self, state: &State, _t: f64) -> Result<State> {
        if state.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: self.matrix.ncols(), found: state.len() });
        }
        Ok(&self.matrix * state)
    }

    fn span(&self) -> f64 {
        self.span
    }
}

/// The complex multiplier a scheme applies to `u` for `u' = λu` over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGain {
    pub value: Complex64,
}

impl ScalarGain {
    /// Gain of `substeps` consecutive steps.
    pub fn composed(self, substeps: u32) -> ScalarGain {
        ScalarGain { value: self.value.powu(substeps) }
    }
}

/// Closed-form one-step gain at `z = λΔt`.
pub fn scalar_gain(scheme: SchemeId, lambda_dt: Complex64) -> Result<ScalarGain> {
    let z = lambda_dt;
    let one = Complex64::new(1.0, 0.0);
    let value = match scheme {
        SchemeId::ForwardEuler => one + z,
        SchemeId::BackwardEuler => one / (one - z),
        SchemeId::Trapezoidal => (one + z * 0.5) / (one - z * 0.5),
        SchemeId::ExplicitMidpoint => one + z + z * z * 0.5,
        SchemeId::RK4 => {
            let z2 = z * z;
            one + z + z2 / 2.0 + z2 * z / 6.0 + z2 * z2 / 24.0
        }
        other => return Err(incompatible(other, "no scalar-gain form")),
    };
    Ok(ScalarGain { value })
}
