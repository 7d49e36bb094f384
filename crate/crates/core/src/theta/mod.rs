//! Weight rules for the θ-parareal update
//!
//! `u_{n+1}^{(k+1)} = θ C_H u_n^{(k+1)} + F_H u_n^{(k)} - θ C_H u_n^{(k)}`.

mod interp;
mod ratio;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result, State};

pub use interp::{truncate, Fallback, InterpForm, InterpOutcome, InterpWindow, SvdTruncation};
pub use ratio::{linearized_ratio_theta, make_ratio_theta, ratio_schedule, ratio_strategy};

/// Scalar weight as a function of `(n, k)`: the source step `n` of the
/// update `u_n → u_{n+1}` and the previous iteration `k`.
pub type ScheduleFn = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpSettings {
    /// Relative singular-value threshold.
    pub tol: f64,
    /// Window depth; `None` means `d + 1`.
    pub depth: Option<usize>,
    pub form: InterpForm,
}

impl InterpSettings {
    pub fn new(tol: f64) -> Self {
        InterpSettings { tol, depth: None, form: InterpForm::Anchored }
    }
}

#[derive(Clone)]
pub enum ThetaStrategy {
    Identity,
    RealScalar(f64),
    /// Acts on states stored as interleaved `(re, im)` pairs.
    ComplexScalar(Complex64),
    ConstantMatrix(DMatrix<f64>),
    /// One matrix per global coarse step, indexed by the source step `n`.
    PerStepMatrix(Arc<Vec<DMatrix<f64>>>),
    ScheduledScalar(ScheduleFn),
    Interpolative(InterpSettings),
}

impl fmt::Debug for ThetaStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaStrategy::Identity => write!(f, "Identity"),
            ThetaStrategy::RealScalar(v) => write!(f, "RealScalar({v})"),
            ThetaStrategy::ComplexScalar(v) => write!(f, "ComplexScalar({v})"),
            ThetaStrategy::ConstantMatrix(m) => write!(f, "ConstantMatrix({}x{})", m.nrows(), m.ncols()),
            ThetaStrategy::PerStepMatrix(ms) => write!(f, "PerStepMatrix(len {})", ms.len()),
            ThetaStrategy::ScheduledScalar(_) => write!(f, "ScheduledScalar"),
            ThetaStrategy::Interpolative(s) => write!(f, "Interpolative({s:?})"),
        }
    }
}

impl ThetaStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            ThetaStrategy::Identity => "identity",
            ThetaStrategy::RealScalar(_) => "real",
            ThetaStrategy::ComplexScalar(_) => "complex",
            ThetaStrategy::ConstantMatrix(_) | ThetaStrategy::PerStepMatrix(_) => "ratio",
            ThetaStrategy::ScheduledScalar(_) => "schedule",
            ThetaStrategy::Interpolative(_) => "interp",
        }
    }

    /// Checks the strategy against a state dimension and the number of
    /// global coarse steps it will be asked about.
    pub fn validate(&self, dim: usize, steps: usize) -> Result<()> {
        let square = |m: &DMatrix<f64>| {
            if m.nrows() != dim || m.ncols() != dim {
                Err(Error::DimensionMismatch { expected: dim, found: m.nrows().max(m.ncols()) })
            } else {
                Ok(())
            }
        };
        match self {
            ThetaStrategy::ComplexScalar(_) if dim % 2 != 0 => {
                Err(Error::bad("a complex weight needs states stored as (re, im) pairs"))
            }
            ThetaStrategy::ConstantMatrix(m) => square(m),
            ThetaStrategy::PerStepMatrix(ms) => {
                if ms.len() < steps {
                    return Err(Error::bad(format!("{} per-step weights for {steps} steps", ms.len())));
                }
                ms.iter().try_for_each(square)
            }
            ThetaStrategy::Interpolative(s) => {
                if !(s.tol > 0.0 && s.tol < 1.0) {
                    return Err(Error::bad(format!("interpolation tol must lie in (0, 1), got {}", s.tol)));
                }
                if s.depth == Some(0) {
                    return Err(Error::bad("interpolation window depth must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `θ · coarse_value` for the multiplicative strategies.
///
/// For [`ThetaStrategy::Interpolative`] the weight is an additive
/// correction `C u + Ĩ [u; 1]` that needs the window of step `n`; this
/// function returns `coarse_value` unchanged in that case and
/// [`ThetaState::apply`] should be used instead.
pub fn apply_theta(strategy: &ThetaStrategy, n: usize, k: usize, coarse_value: &State, _raw_state: &State) -> State {
    match strategy {
        ThetaStrategy::Identity | ThetaStrategy::Interpolative(_) => coarse_value.clone(),
        ThetaStrategy::RealScalar(v) => coarse_value * *v,
        ThetaStrategy::ComplexScalar(z) => complex_scale(*z, coarse_value),
        ThetaStrategy::ConstantMatrix(m) => m * coarse_value,
        ThetaStrategy::PerStepMatrix(ms) => &ms[n] * coarse_value,
        ThetaStrategy::ScheduledScalar(f) => coarse_value * f(n, k),
    }
}

fn complex_scale(z: Complex64, v: &State) -> State {
    let mut out = v.clone();
    for pair in out.as_mut_slice().chunks_exact_mut(2) {
        let w = z * Complex64::new(pair[0], pair[1]);
        pair[0] = w.re;
        pair[1] = w.im;
    }
    out
}

/// Counters for the interpolative strategy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterpStats {
    pub accepted: usize,
    pub rank_one: usize,
    pub degenerate: usize,
    pub guarded: usize,
    /// Retained rank per update, indexed `[k][n]` with `k` the previous
    /// iteration and `n` the local source step.
    pub ranks: Vec<Vec<usize>>,
}

/// Per-run state of a strategy: the interpolation windows (one per local
/// coarse step) and the global index of local step 0.
#[derive(Debug, Clone)]
pub struct ThetaState {
    strategy: ThetaStrategy,
    offset: usize,
    windows: Vec<InterpWindow>,
    pub stats: InterpStats,
}

impl ThetaState {
    pub fn new(strategy: &ThetaStrategy, steps: usize, dim: usize, offset: usize) -> Self {
        let windows = match strategy {
            ThetaStrategy::Interpolative(s) => {
                let depth = s.depth.unwrap_or(dim + 1);
                vec![InterpWindow::new(dim, depth); steps]
            }
            _ => Vec::new(),
        };
        ThetaState { strategy: strategy.clone(), offset, windows, stats: InterpStats::default() }
    }

    pub fn strategy(&self) -> &ThetaStrategy {
        &self.strategy
    }

    pub fn window(&self, n: usize) -> Option<&InterpWindow> {
        self.windows.get(n)
    }

    /// Records iterate `k` at every local step: `(u_n^{(k)}, F u_n^{(k)} - C u_n^{(k)})`.
    pub fn observe(&mut self, states: &[State], fine: &[State], coarse: &[State]) {
        for (n, w) in self.windows.iter_mut().enumerate() {
            w.insert(&states[n], &(&fine[n] - &coarse[n]));
        }
    }

    /// `θ C u` at local step `n` and iteration `k`.
    pub fn apply(&self, n: usize, k: usize, coarse_value: &State, raw_state: &State) -> State {
        match &self.strategy {
            ThetaStrategy::Interpolative(s) => {
                let w = &self.windows[n];
                let (interp, _) = w.interpolant(s.tol);
                let d = w.dim();
                let mut x = State::from_element(d + 1, 1.0);
                x.rows_mut(0, d).copy_from(raw_state);
                coarse_value + interp * x
            }
            other => apply_theta(other, self.offset + n, k, coarse_value, raw_state),
        }
    }

    /// New iterate `u_{n+1}^{(k+1)}` from the local source step `n` and the
    /// previous iteration `k`.
    #[allow(clippy::too_many_arguments)]
    pub fn combine(
        &mut self,
        n: usize,
        k: usize,
        u_new: &State,
        coarse_new: &State,
        u_prev: &State,
        fine_prev: &State,
        coarse_prev: &State,
    ) -> State {
        match &self.strategy {
            ThetaStrategy::Identity => coarse_new + (fine_prev - coarse_prev),
            ThetaStrategy::Interpolative(s) => {
                let plain = fine_prev - coarse_prev;
                let out = self.windows[n].correction(s.form, u_new, u_prev, &plain, s.tol);
                let stats = &mut self.stats;
                match out.fallback {
                    None => stats.accepted += 1,
                    Some(Fallback::RankOne) => stats.rank_one += 1,
                    Some(Fallback::DegenerateWindow) => stats.degenerate += 1,
                    Some(Fallback::Guard) => stats.guarded += 1,
                }
                if stats.ranks.len() <= k {
                    stats.ranks.resize(k + 1, Vec::new());
                }
                let row = &mut stats.ranks[k];
                if row.len() <= n {
                    row.resize(n + 1, 0);
                }
                row[n] = out.rank;
                coarse_new + out.correction
            }
            other => {
                let g = self.offset + n;
                apply_theta(other, g, k, coarse_new, u_new) + (fine_prev - apply_theta(other, g, k, coarse_prev, u_prev))
            }
        }
    }
}
