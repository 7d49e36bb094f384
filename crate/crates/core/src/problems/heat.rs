//! Heat equation with a highly oscillatory coefficient and its homogenized
//! counterpart.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;

use super::{Norm, ProblemKind, ProblemSpec, Rhs};
use crate::integrators::{Propagator, SchemeId};
use crate::linalg::Tridiagonal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatBoundary {
    /// `u(0) = u(1) = 0`; only interior nodes are unknowns.
    Dirichlet,
    /// Zero flux at both ends; nodes `0..=M` are unknowns.
    Neumann,
    /// Nodes `0..M` on the unit circle.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    pub a0: f64,
    pub eps: f64,
    pub dx: f64,
    /// Optional linear damping `-γ u` added to both models.
    pub gamma: f64,
    pub boundary: HeatBoundary,
}

impl HeatParams {
    pub fn new(a0: f64) -> Self {
        let eps = 0.04;
        HeatParams { a0, eps, dx: eps / 20.0, gamma: 0.0, boundary: HeatBoundary::Dirichlet }
    }

    /// Number of grid intervals `M = 1/Δx`.
    pub fn intervals(&self) -> Result<usize> {
        if !(self.dx > 0.0 && self.dx < 1.0) {
            return Err(Error::bad(format!("dx must lie in (0, 1), got {}", self.dx)));
        }
        let m = (1.0 / self.dx).round();
        if (m * self.dx - 1.0).abs() > 1e-9 {
            return Err(Error::bad(format!("dx = {} does not evenly divide [0, 1]", self.dx)));
        }
        Ok(m as usize)
    }

    /// Coefficient `a(x, x/ε) = a₀ + sin(2πx/ε)(1 - e^{-100(x-0.133104)²})`.
    pub fn coefficient(&self, x: f64) -> f64 {
        let y = x / self.eps;
        self.a0 + (2.0 * PI * y).sin() * (1.0 - (-100.0 * (x - 0.133104).powi(2)).exp())
    }
}

/// Effective diffusivity of the homogenized equation.
///
/// The two tabulated values are the harmonic means of `a₀ + sin(2πy)` for
/// `a₀ = 1.1` and `a₀ = 1.01`; other `a₀ > 1` use the same closed form
/// `√(a₀² - 1)`.
pub fn homogenized_coefficient(a0: f64) -> Result<f64> {
    if a0 == 1.1 {
        Ok(0.21f64.sqrt())
    } else if a0 == 1.01 {
        Ok(0.141774)
    } else if a0 > 1.0 {
        Ok((a0 * a0 - 1.0).sqrt())
    } else {
        Err(Error::bad(format!("a0 must exceed 1 for a positive coefficient, got {a0}")))
    }
}

/// Nodes carrying unknowns for the given boundary treatment.
pub fn nodes(params: &HeatParams) -> Result<Vec<f64>> {
    let m = params.intervals()?;
    let dx = params.dx;
    Ok(match params.boundary {
        HeatBoundary::Dirichlet => (1..m).map(|j| j as f64 * dx).collect(),
        HeatBoundary::Neumann => (0..=m).map(|j| j as f64 * dx).collect(),
        HeatBoundary::Periodic => (0..m).map(|j| j as f64 * dx).collect(),
    })
}

/// Conservative 3-point discretisation of `∂x(a(x) ∂x u) - γu`, with `a`
/// sampled at cell midpoints.
pub fn diffusion_operator(params: &HeatParams, coeff: impl Fn(f64) -> f64) -> Result<Tridiagonal> {
    let m = params.intervals()?;
    let dx = params.dx;
    let inv = 1.0 / (dx * dx);
    let mid = |j: f64| coeff((j + 0.5) * dx) * inv;
    let (lower, upper): (Vec<f64>, Vec<f64>) = match params.boundary {
        HeatBoundary::Dirichlet => (1..m).map(|j| (mid(j as f64 - 1.0), mid(j as f64))).unzip(),
        HeatBoundary::Neumann => (0..=m)
            .map(|j| {
                let lo = if j == 0 { 0.0 } else { mid(j as f64 - 1.0) };
                let up = if j == m { 0.0 } else { mid(j as f64) };
                (lo, up)
            })
            .unzip(),
        HeatBoundary::Periodic => (0..m).map(|j| (mid((j + m - 1) as f64 % m as f64), mid(j as f64))).unzip(),
    };
    let diag = lower.iter().zip(&upper).map(|(l, u)| -(l + u) - params.gamma).collect();
    Ok(Tridiagonal { lower, diag, upper, periodic: params.boundary == HeatBoundary::Periodic })
}

fn heat_spec(kind: ProblemKind, params: &HeatParams, op: Tridiagonal) -> Result<ProblemSpec> {
    let x = nodes(params)?;
    Ok(ProblemSpec {
        kind,
        rhs: Rhs::Diffusion(op),
        acceleration: None,
        initial: DVector::from_iterator(x.len(), x.iter().map(|x| x * (1.0 - x))),
        norm: Norm::Grid { dx: params.dx },
        energy: None,
        complex: false,
    })
}

pub(super) fn oscillatory_problem(params: HeatParams) -> Result<ProblemSpec> {
    if !(params.eps > 0.0) {
        return Err(Error::bad("eps must be positive"));
    }
    let op = diffusion_operator(&params, |x| params.coefficient(x))?;
    heat_spec(ProblemKind::HeatOscillatory(params), &params, op)
}

pub(super) fn homogenized_problem(params: HeatParams) -> Result<ProblemSpec> {
    let abar = homogenized_coefficient(params.a0)?;
    let op = diffusion_operator(&params, |_| abar)?;
    heat_spec(ProblemKind::HeatHomogenized(params), &params, op)
}

/// Fine and coarse heat propagators over one coarse span.
///
/// The fine map takes `fine_substeps` Crank–Nicolson steps of the
/// oscillatory-coefficient model; the coarse map takes one `coarse_scheme`
/// step (implicit Euler or Crank–Nicolson) of the homogenized model.
pub fn heat_operators(
    params: &HeatParams,
    coarse_scheme: SchemeId,
    span: f64,
    fine_substeps: usize,
) -> Result<(Propagator, Propagator)> {
    if !matches!(coarse_scheme, SchemeId::ImplicitEulerHeat | SchemeId::CrankNicolsonHeat) {
        return Err(Error::IncompatibleScheme {
            scheme: coarse_scheme,
            reason: "the homogenized coarse model uses implicit Euler or Crank-Nicolson".into(),
        });
    }
    let fine = Arc::new(super::make_problem(ProblemKind::HeatOscillatory(*params))?);
    let coarse = Arc::new(super::make_problem(ProblemKind::HeatHomogenized(*params))?);
    Ok((
        Propagator::with_substeps(SchemeId::CrankNicolsonHeat, fine, span, fine_substeps)?,
        Propagator::with_substeps(coarse_scheme, coarse, span, 1)?,
    ))
}
