//! Benchmark systems.
//!
//! Every problem is a [`ProblemSpec`]: a right-hand side in one of a few
//! structural forms (the integrators dispatch on the form), initial data,
//! the norm used for error reporting and, for Hamiltonian systems, the
//! energy functional.

mod grid;
pub mod heat;
pub mod wave;

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Tridiagonal;
use crate::{Error, Result, State};

pub use grid::GridTransfer;
pub use heat::{heat_operators, homogenized_coefficient, HeatBoundary, HeatParams};
pub use wave::{wave_parareal_update, wave_step, TransferPropagator, WaveOperator, WaveParams, WaveSchedule};

pub type RhsFn = Arc<dyn Fn(&State, f64) -> State + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type ForcingFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;
/// Acceleration `a(q, t)` of a system `q' = p, p' = a(q, t)`.
pub type AccelFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;
pub type EnergyFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// `u' = A(t) u + b(t)`.
#[derive(Clone)]
pub struct LinearRhs {
    pub matrix: MatrixFn,
    pub forcing: Option<ForcingFn>,
    pub autonomous: bool,
}

impl LinearRhs {
    pub fn constant(a: DMatrix<f64>) -> Self {
        LinearRhs { matrix: Arc::new(move |_| a.clone()), forcing: None, autonomous: true }
    }
}

/// Structural form of the right-hand side.
#[derive(Clone)]
pub enum Rhs {
    Linear(LinearRhs),
    Nonlinear(RhsFn),
    /// `u' = L u` with a tridiagonal `L`.
    Diffusion(Tridiagonal),
    /// Staggered damped leapfrog; only [`SchemeId::DampedLeapfrogWave`](crate::SchemeId) applies.
    Wave(WaveOperator),
}

/// Norm used for trajectory errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Euclidean,
    /// `(Σ |u_j|² Δx)^{1/2}`.
    Grid { dx: f64 },
}

impl Norm {
    pub fn of(&self, v: &State) -> f64 {
        match *self {
            Norm::Euclidean => v.norm(),
            Norm::Grid { dx } => (v.norm_squared() * dx).sqrt(),
        }
    }

    pub fn distance(&self, a: &State, b: &State) -> f64 {
        self.of(&(a - b))
    }
}

/// Identifier and parameters of a benchmark problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    /// `u' = λ u` on the complex plane, `u(0) = 1`.
    ScalarModel { lambda: Complex64 },
    HarmonicOscillator { omega: f64 },
    /// `x' = y, y' = -(cos²t + 1) x + b(t)` with Gaussian pulses at seeded random times.
    ForcedNonAutonomous { seed: u64, t_final: f64, pulses: usize, force_both: bool },
    HeatOscillatory(HeatParams),
    HeatHomogenized(HeatParams),
    Wave(WaveParams),
    SpinOrbit { eps: f64, alpha: f64, phi: f64 },
    Kepler1Body { e: f64 },
    Kepler2Body3D { e1: f64, e2: f64, g12: f64 },
}

/// A fully assembled problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub rhs: Rhs,
    pub acceleration: Option<AccelFn>,
    pub initial: State,
    pub norm: Norm,
    pub energy: Option<EnergyFn>,
    /// State holds interleaved `(re, im)` pairs of a complex vector.
    pub complex: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("dim", &self.dim())
            .field("norm", &self.norm)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.rhs, Rhs::Linear(_) | Rhs::Diffusion(_))
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.rhs {
            Rhs::Linear(l) => l.autonomous,
            Rhs::Diffusion(_) | Rhs::Wave(_) => true,
            Rhs::Nonlinear(_) => !matches!(self.kind, ProblemKind::ForcedNonAutonomous { .. }),
        }
    }

    /// Evaluates `f(u, t)`.
    pub fn eval(&self, u: &State, t: f64) -> Result<State> {
        match &self.rhs {
            Rhs::Linear(l) => {
                let mut out = (l.matrix)(t) * u;
                if let Some(b) = &l.forcing {
                    out += b(t);
                }
                Ok(out)
            }
            Rhs::Nonlinear(f) => Ok(f(u, t)),
            Rhs::Diffusion(op) => Ok(op.apply(u)),
            Rhs::Wave(_) => Err(Error::bad("wave problems have no pointwise right-hand side")),
        }
    }

    pub fn energy(&self, u: &State) -> Result<f64> {
        self.energy.as_ref().map(|h| h(u)).ok_or(Error::NoEnergy)
    }
}

/// Relative energy drift `|H(u) - H(u₀)| / max(1, |H(u₀)|)`.
pub fn energy_error(problem: &ProblemSpec, state: &State) -> Result<f64> {
    let h0 = problem.energy(&problem.initial)?;
    let h = problem.energy(state)?;
    Ok((h - h0).abs() / h0.abs().max(1.0))
}

/// Builds the problem described by `kind`.
pub fn make_problem(kind: ProblemKind) -> Result<ProblemSpec> {
    match kind.clone() {
        ProblemKind::ScalarModel { lambda } => Ok(scalar_model(kind, lambda)),
        ProblemKind::HarmonicOscillator { omega } => harmonic_oscillator(kind, omega),
        ProblemKind::ForcedNonAutonomous { seed, t_final, pulses, force_both } => {
            forced_nonautonomous(kind, seed, t_final, pulses, force_both)
        }
        ProblemKind::HeatOscillatory(p) => heat::oscillatory_problem(p),
        ProblemKind::HeatHomogenized(p) => heat::homogenized_problem(p),
        ProblemKind::Wave(p) => wave::wave_problem(p),
        ProblemKind::SpinOrbit { eps, alpha, phi } => Ok(spin_orbit(kind, eps, alpha, phi)),
        ProblemKind::Kepler1Body { e } => kepler_1body(kind, e),
        ProblemKind::Kepler2Body3D { e1, e2, g12 } => kepler_2body(kind, e1, e2, g12),
    }
}

fn scalar_model(kind: ProblemKind, lambda: Complex64) -> ProblemSpec {
    let a = DMatrix::from_row_slice(2, 2, &[lambda.re, -lambda.im, lambda.im, lambda.re]);
    ProblemSpec {
        kind,
        rhs: Rhs::Linear(LinearRhs::constant(a)),
        acceleration: None,
        initial: DVector::from_vec(vec![1.0, 0.0]),
        norm: Norm::Euclidean,
        energy: None,
        complex: true,
    }
}

fn harmonic_oscillator(kind: ProblemKind, omega: f64) -> Result<ProblemSpec> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::bad(format!("omega must be positive, got {omega}")));
    }
    let w2 = omega * omega;
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -w2, 0.0]);
    Ok(ProblemSpec {
        kind,
        rhs: Rhs::Linear(LinearRhs::constant(a)),
        acceleration: Some(Arc::new(move |q, _, acc| acc[0] = -w2 * q[0])),
        initial: DVector::from_vec(vec![1.0, -1.0]),
        norm: Norm::Euclidean,
        energy: Some(Arc::new(move |u| 0.5 * u[1] * u[1] + 0.5 * w2 * u[0] * u[0])),
        complex: false,
    })
}

/// Pulse centres of the forced system, drawn uniformly from `[0, t_final]`.
pub fn pulse_times(seed: u64, t_final: f64, pulses: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pulses).map(|_| rng.random::<f64>() * t_final).collect()
}

fn forced_nonautonomous(
    kind: ProblemKind,
    seed: u64,
    t_final: f64,
    pulses: usize,
    force_both: bool,
) -> Result<ProblemSpec> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::bad(format!("t_final must be positive, got {t_final}")));
    }
    let times = Arc::new(pulse_times(seed, t_final, pulses));
    let pulse = {
        let times = times.clone();
        move |t: f64| times.iter().map(|ti| (-50.0 * (t - ti) * (t - ti)).exp()).sum::<f64>()
    };
    let stiffness = |t: f64| t.cos() * t.cos() + 1.0;
    let forcing: ForcingFn = {
        let pulse = pulse.clone();
        Arc::new(move |t| {
            let b = pulse(t);
            DVector::from_vec(vec![if force_both { b } else { 0.0 }, b])
        })
    };
    let matrix: MatrixFn = Arc::new(move |t| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -stiffness(t), 0.0]));
    let acceleration: Option<AccelFn> = if force_both {
        None
    } else {
        Some(Arc::new(move |q, t, acc| acc[0] = -stiffness(t) * q[0] + pulse(t)))
    };
    Ok(ProblemSpec {
        kind,
        rhs: Rhs::Linear(LinearRhs { matrix, forcing: Some(forcing), autonomous: false }),
        acceleration,
        initial: DVector::from_vec(vec![1.0, 0.0]),
        norm: Norm::Euclidean,
        energy: None,
        complex: false,
    })
}

fn spin_orbit(kind: ProblemKind, eps: f64, alpha: f64, phi: f64) -> ProblemSpec {
    let force = move |q: f64| -2.0 * eps * q.sin() - 2.0 * alpha * (2.0 * q + phi).sin() + 14.0 * alpha * (2.0 * q - phi).sin();
    let potential = move |q: f64| -2.0 * eps * q.cos() - alpha * (2.0 * q + phi).cos() + 7.0 * alpha * (2.0 * q - phi).cos();
    ProblemSpec {
        kind,
        rhs: Rhs::Nonlinear(Arc::new(move |u, _| DVector::from_vec(vec![u[1], force(u[0])]))),
        acceleration: Some(Arc::new(move |q, _, acc| acc[0] = force(q[0]))),
        initial: DVector::from_vec(vec![1.0, 0.0]),
        norm: Norm::Euclidean,
        energy: Some(Arc::new(move |u| 0.5 * u[1] * u[1] + potential(u[0]))),
        complex: false,
    }
}

fn check_eccentricity(e: f64) -> Result<()> {
    if (0.0..1.0).contains(&e) {
        Ok(())
    } else {
        Err(Error::bad(format!("eccentricity must lie in [0, 1), got {e}")))
    }
}

fn kepler_accel(q: &[f64], acc: &mut [f64]) {
    let r2: f64 = q.iter().map(|x| x * x).sum();
    let inv_r3 = 1.0 / (r2 * r2.sqrt());
    for (a, x) in acc.iter_mut().zip(q) {
        *a = -x * inv_r3;
    }
}

fn kepler_1body(kind: ProblemKind, e: f64) -> Result<ProblemSpec> {
    check_eccentricity(e)?;
    let accel = |q: &[f64], _: f64, acc: &mut [f64]| kepler_accel(q, acc);
    Ok(ProblemSpec {
        kind,
        rhs: Rhs::Nonlinear(Arc::new(move |u, t| {
            let mut acc = [0.0; 2];
            accel(&[u[0], u[1]], t, &mut acc);
            DVector::from_vec(vec![u[2], u[3], acc[0], acc[1]])
        })),
        acceleration: Some(Arc::new(accel)),
        initial: DVector::from_vec(vec![1.0 - e, 0.0, 0.0, ((1.0 + e) / (1.0 - e)).sqrt()]),
        norm: Norm::Euclidean,
        energy: Some(Arc::new(|u| {
            0.5 * (u[2] * u[2] + u[3] * u[3]) - 1.0 / (u[0] * u[0] + u[1] * u[1]).sqrt()
        })),
        complex: false,
    })
}

fn two_body_accel(g12: f64, q: &[f64], acc: &mut [f64]) {
    let (q1, q2) = q.split_at(3);
    let (a1, a2) = acc.split_at_mut(3);
    kepler_accel(q1, a1);
    kepler_accel(q2, a2);
    let d = [q1[0] - q2[0], q1[1] - q2[1], q1[2] - q2[2]];
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let s = g12 / (r2 * r2.sqrt());
    for i in 0..3 {
        a1[i] -= s * d[i];
        a2[i] += s * d[i];
    }
}

fn kepler_2body(kind: ProblemKind, e1: f64, e2: f64, g12: f64) -> Result<ProblemSpec> {
    check_eccentricity(e1)?;
    check_eccentricity(e2)?;
    let (c, s) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
    let initial = DVector::from_vec(vec![
        1.0 - e1,
        0.0,
        0.0,
        c * (1.0 - e2),
        0.0,
        s * (1.0 - e2),
        0.0,
        ((1.0 + e1) / (1.0 - e1)).sqrt(),
        0.0,
        0.0,
        ((1.0 + e2) / (1.0 - e2)).sqrt(),
        0.0,
    ]);
    Ok(ProblemSpec {
        kind,
        rhs: Rhs::Nonlinear(Arc::new(move |u, _| {
            let mut out = DVector::zeros(12);
            let mut acc = [0.0; 6];
            two_body_accel(g12, &u.as_slice()[..6], &mut acc);
            for i in 0..6 {
                out[i] = u[6 + i];
                out[6 + i] = acc[i];
            }
            out
        })),
        acceleration: Some(Arc::new(move |q, _, acc| two_body_accel(g12, q, acc))),
        initial,
        norm: Norm::Euclidean,
        energy: Some(Arc::new(move |u| {
            let kinetic = 0.5 * u.as_slice()[6..].iter().map(|v| v * v).sum::<f64>();
            let r = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let q1 = &u.as_slice()[0..3];
            let q2 = &u.as_slice()[3..6];
            let d = [q1[0] - q2[0], q1[1] - q2[1], q1[2] - q2[2]];
            kinetic - 1.0 / r(q1) - 1.0 / r(q2) - g12 / r(&d)
        })),
        complex: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kepler_initial_data_and_energy() {
        let p = make_problem(ProblemKind::Kepler1Body { e: 0.5 }).unwrap();
        assert_eq!(p.initial[0], 0.5);
        assert_eq!(p.initial[1], 0.0);
        assert!((p.initial[3] - 3f64.sqrt()).abs() < 1e-15);
        assert!((p.energy(&p.initial).unwrap() + 0.5).abs() < 1e-14);
        assert_eq!(energy_error(&p, &p.initial).unwrap(), 0.0);
    }

    #[test]
    fn kepler_rejects_open_orbits() {
        for e in [1.0, 1.5, -0.1] {
            assert!(matches!(make_problem(ProblemKind::Kepler1Body { e }), Err(Error::BadParameter(_))));
            assert!(make_problem(ProblemKind::Kepler2Body3D { e1: 0.4, e2: e, g12: 1e-5 }).is_err());
        }
    }

    #[test]
    fn documented_initial_conditions() {
        let h = make_problem(ProblemKind::HarmonicOscillator { omega: 1.0 }).unwrap();
        assert_eq!(h.initial.as_slice(), &[1.0, -1.0]);
        let s = make_problem(ProblemKind::SpinOrbit { eps: 0.01, alpha: 1e-4, phi: 0.2 }).unwrap();
        assert_eq!(s.initial.as_slice(), &[1.0, 0.0]);
        let f = make_problem(ProblemKind::ForcedNonAutonomous { seed: 1, t_final: 100.0, pulses: 40, force_both: false })
            .unwrap();
        assert_eq!(f.initial.as_slice(), &[1.0, 0.0]);
        assert!(!f.is_autonomous());
    }

    #[test]
    fn spin_orbit_force_is_minus_potential_gradient() {
        let s = make_problem(ProblemKind::SpinOrbit { eps: 0.01, alpha: 1e-4, phi: 0.2 }).unwrap();
        let h = 1e-6;
        for q in [-1.0, 0.3, 2.0] {
            let e = |q: f64| s.energy(&DVector::from_vec(vec![q, 0.0])).unwrap();
            let grad = (e(q + h) - e(q - h)) / (2.0 * h);
            let f = s.eval(&DVector::from_vec(vec![q, 0.0]), 0.0).unwrap()[1];
            assert!((f + grad).abs() < 1e-9, "{f} vs {grad}");
        }
    }

    #[test]
    fn two_body_forces_derive_from_hamiltonian() {
        let p = make_problem(ProblemKind::Kepler2Body3D { e1: 0.4, e2: 0.5, g12: 1e-2 }).unwrap();
        let u = p.initial.clone();
        let f = p.eval(&u, 0.0).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            let grad = (p.energy(&up).unwrap() - p.energy(&dn).unwrap()) / (2.0 * h);
            assert!((f[6 + i] + grad).abs() < 1e-7);
        }
    }

    #[test]
    fn pulse_times_are_seeded() {
        assert_eq!(pulse_times(9, 100.0, 40), pulse_times(9, 100.0, 40));
        assert_ne!(pulse_times(9, 100.0, 40), pulse_times(10, 100.0, 40));
        assert!(pulse_times(9, 100.0, 40).iter().all(|t| (0.0..=100.0).contains(t)));
    }

    #[test]
    fn grid_norm_scales_with_spacing() {
        let v = DVector::from_element(4, 2.0);
        assert_eq!(Norm::Grid { dx: 0.25 }.of(&v), 2.0);
        assert_eq!(Norm::Euclidean.of(&v), 4.0);
    }
}
