//! Periodic 1-D wave equation with a staggered, damped leapfrog scheme.
//!
//! The state is `[u; p]` on a periodic grid of `M` points. The scheme
//!
//! ```text
//! p_{n+1} = p_n + Δt c² D₊D₋ u_n - α Δt Δx³ D₋ᵗ (D₊D₋)² u_n
//! u_{n+1} = u_n + Δt p_{n+1}
//! ```
//!
//! satisfies `u_n - u_{n-1} = Δt p_n`, so the backward time difference of
//! `(D₊D₋)² u` is exactly `(D₊D₋)² p_n`. Storing `(u, p)` therefore makes
//! the scheme a one-step map without carrying the previous fourth
//! difference separately.

use std::sync::Arc;

use nalgebra::DVector;

use super::{GridTransfer, Norm, ProblemKind, ProblemSpec, Rhs};
use crate::integrators::{Propagate, Propagator};
use crate::{Error, Result, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub alpha: f64,
    pub dx: f64,
    /// Use the variable speed with two narrow dips; otherwise `c ≡ 1`.
    pub bumps: bool,
}

/// `c²(x) = 1 - 0.2 e^{-2000(x-0.133104)²} - 0.1 e^{-2000(x-0.733104)²}`.
pub fn bumpy_speed_squared(x: f64) -> f64 {
    1.0 - 0.2 * (-2000.0 * (x - 0.133104).powi(2)).exp() - 0.1 * (-2000.0 * (x - 0.733104).powi(2)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveOperator {
    pub c2: Vec<f64>,
    pub dx: f64,
    pub alpha: f64,
}

fn second_difference(u: &[f64], inv_dx2: f64, out: &mut [f64]) {
    let m = u.len();
    for j in 0..m {
        let l = u[(j + m - 1) % m];
        let r = u[(j + 1) % m];
        out[j] = (r - 2.0 * u[j] + l) * inv_dx2;
    }
}

impl WaveOperator {
    pub fn points(&self) -> usize {
        self.c2.len()
    }

    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        let m = self.points();
        if state.len() != 2 * m {
            return Err(Error::DimensionMismatch { expected: 2 * m, found: state.len() });
        }
        let limit = self.dx / 2.0;
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        let (u, p) = state.as_slice().split_at(m);
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let mut lap_u = vec![0.0; m];
        second_difference(u, inv_dx2, &mut lap_u);
        let mut out = DVector::zeros(2 * m);
        if self.alpha != 0.0 {
            let mut lap_p = vec![0.0; m];
            let mut bilap_p = vec![0.0; m];
            second_difference(p, inv_dx2, &mut lap_p);
            second_difference(&lap_p, inv_dx2, &mut bilap_p);
            let damp = self.alpha * dt * self.dx.powi(3);
            for j in 0..m {
                out[m + j] = p[j] + dt * self.c2[j] * lap_u[j] - damp * bilap_p[j];
            }
        } else {
            for j in 0..m {
                out[m + j] = p[j] + dt * self.c2[j] * lap_u[j];
            }
        }
        for j in 0..m {
            out[j] = u[j] + dt * out[m + j];
        }
        Ok(out)
    }
}

/// One step of the damped leapfrog scheme on `[u; p]`.
pub fn wave_step(state: &State, _t: f64, dx: f64, dt: f64, c2: &[f64], alpha: f64) -> Result<State> {
    WaveOperator { c2: c2.to_vec(), dx, alpha }.step(state, dt)
}

pub(super) fn wave_problem(params: WaveParams) -> Result<ProblemSpec> {
    if !(params.alpha >= 0.0 && params.alpha < 1.0 / 15.0) {
        return Err(Error::bad(format!("alpha must lie in [0, 1/15), got {}", params.alpha)));
    }
    let m = (1.0 / params.dx).round();
    if !(params.dx > 0.0) || (m * params.dx - 1.0).abs() > 1e-9 || m < 4.0 {
        return Err(Error::bad(format!("dx = {} must evenly divide [0, 1)", params.dx)));
    }
    let m = m as usize;
    let x = |j: usize| j as f64 * params.dx;
    let c2 = (0..m).map(|j| if params.bumps { bumpy_speed_squared(x(j)) } else { 1.0 }).collect();
    let mut initial = DVector::zeros(2 * m);
    for j in 0..m {
        initial[j] = 0.1 * (-50.0 * (x(j) - 0.5).powi(2)).exp();
    }
    Ok(ProblemSpec {
        kind: ProblemKind::Wave(params),
        rhs: Rhs::Wave(WaveOperator { c2, dx: params.dx, alpha: params.alpha }),
        acceleration: None,
        initial,
        norm: Norm::Grid { dx: params.dx },
        energy: None,
        complex: false,
    })
}

/// `P ∘ F_H ∘ R`: a fine propagator on a refined grid seen from the coarse grid.
#[derive(Debug, Clone)]
pub struct TransferPropagator {
    pub fine: Propagator,
    pub transfer: GridTransfer,
}

impl TransferPropagator {
    pub fn new(fine: Propagator, transfer: GridTransfer) -> Result<Self> {
        let expected = transfer.fine_points() * transfer.components;
        if fine.dim() != expected {
            return Err(Error::DimensionMismatch { expected, found: fine.dim() });
        }
        Ok(TransferPropagator { fine, transfer })
    }
}

impl Propagate for TransferPropagator {
    fn propagate(&self, state: &State, t: f64) -> Result<State> {
        let fine_state = DVector::from_vec(self.transfer.reconstruct(state.as_slice()));
        let out = self.fine.propagate(&fine_state, t)?;
        Ok(DVector::from_vec(self.transfer.restrict(out.as_slice())))
    }

    fn span(&self) -> f64 {
        self.fine.span()
    }

    fn substep(&self) -> f64 {
        self.fine.step_size()
    }
}

/// Weight schedule for the wave experiment, expressed on a reference run of
/// `reference_steps` coarse steps and rescaled to `n_steps`:
/// `θ = 1` when the rescaled step is at most `threshold` and `k > early`,
/// otherwise `1 - slope · τ` with `τ` the rescaled time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSchedule {
    pub span: f64,
    pub n_steps: usize,
    pub reference_steps: usize,
    pub threshold: usize,
    pub early: usize,
    pub slope: f64,
}

impl WaveSchedule {
    pub fn new(span: f64, n_steps: usize) -> Self {
        WaveSchedule { span, n_steps, reference_steps: 800, threshold: 750, early: 3, slope: 0.75e-3 }
    }

    /// Weight used with source step `n` at previous iteration `k`.
    pub fn value(&self, n: usize, k: usize) -> f64 {
        let scale = self.reference_steps as f64 / self.n_steps as f64;
        let n_ref = n as f64 * scale;
        if n_ref <= self.threshold as f64 && k > self.early {
            1.0
        } else {
            1.0 - self.slope * n_ref * self.span
        }
    }

    pub fn as_fn(self) -> Arc<dyn Fn(usize, usize) -> f64 + Send + Sync> {
        Arc::new(move |n, k| self.value(n, k))
    }
}

/// `θ C_H u_{n+1}^{(k+1)} + P F_H R u_n^{(k)} - θ C_H u_n^{(k)}`.
pub fn wave_parareal_update(theta: f64, coarse_new: &State, projected_fine: &State, coarse_prev: &State) -> State {
    coarse_new * theta + (projected_fine - coarse_prev * theta)
}
