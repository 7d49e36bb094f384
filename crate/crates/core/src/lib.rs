//! Weighted ("θ") parareal iterations for parallel-in-time integration.
//!
//! The crate is organised bottom-up:
//!
//! - [`integrators`]: one-step schemes, fine/coarse [`Propagator`]s and the
//!   scalar gains used by the linear stability theory.
//! - [`problems`]: the benchmark systems (oscillators, a forced
//!   non-autonomous system, heat and wave discretisations, spin-orbit and
//!   Kepler problems) with their grid-transfer and energy diagnostics.
//! - [`theta`]: the weight strategies, from the identity (standard parareal)
//!   to the subspace-interpolation correction.
//! - [`engine`]: coarse sweep, the weighted update, sequential windows, the
//!   parallel fine-propagation phase and the cost model.
//! - [`analysis`]: amplification factors, stability regions over complex θ
//!   and a dense block-matrix oracle for the error recursion.
//!
//! States are real vectors. Complex scalar problems are stored as
//! interleaved `(re, im)` pairs so that every propagator shares one type.

pub mod analysis;
pub mod engine;
mod error;
pub mod integrators;
pub mod linalg;
pub mod problems;
pub mod theta;

pub use engine::{CostEstimate, PararealConfig, PararealRun};
pub use error::{Error, Result};
pub use integrators::{Propagate, Propagator, SchemeId};
pub use problems::{Norm, ProblemKind, ProblemSpec};
pub use theta::ThetaStrategy;

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

/// The solution vector at one coarse time point.
pub type State = DVector<f64>;
