//! The ratio weight `θ = F̃_H C̃_H⁻¹` built from the dense matrices of the
//! two propagators.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::ThetaStrategy;
use crate::integrators::{Propagate, Propagator};
use crate::linalg::condition_number;
use crate::{Error, Result, State};

const MAX_CONDITION: f64 = 1e12;

// Columns `P(e_j) - P(0)`: the linear part of an affine map, so forcing terms
// drop out.
fn affine_matrix(p: &dyn Propagate, dim: usize, t: f64) -> Result<DMatrix<f64>> {
    let zero = DVector::zeros(dim);
    let base = p.propagate(&zero, t)?;
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut e = zero.clone();
        e[j] = 1.0;
        let col = p.propagate(&e, t)? - &base;
        m.set_column(j, &col);
    }
    Ok(m)
}

fn ratio(f: DMatrix<f64>, c: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(&c);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCoarse { condition });
    }
    // θ C = F  ⇔  Cᵀ θᵀ = Fᵀ
    let theta_t = c.transpose().lu().solve(&f.transpose()).ok_or(Error::SingularCoarse { condition })?;
    Ok(theta_t.transpose())
}

/// `F̃_H C̃_H⁻¹` for propagators of linear (possibly forced or
/// time-dependent) problems, assembled from time `t`.
pub fn make_ratio_theta(fine: &Propagator, coarse: &Propagator, t: f64) -> Result<DMatrix<f64>> {
    for p in [fine, coarse] {
        if !p.problem.is_linear() {
            return Err(Error::bad("the ratio weight needs a linear right-hand side; use the linearized variant"));
        }
    }
    let dim = fine.dim();
    if coarse.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: coarse.dim() });
    }
    ratio(affine_matrix(fine, dim, t)?, affine_matrix(coarse, dim, t)?)
}

/// Ratio of the Jacobians of two arbitrary propagators at `about`, by
/// central differences with increment `delta`.
pub fn linearized_ratio_theta(
    fine: &dyn Propagate,
    coarse: &dyn Propagate,
    about: &State,
    t: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let dim = about.len();
    let jac = |p: &dyn Propagate| -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut plus = about.clone();
            let mut minus = about.clone();
            plus[j] += delta;
            minus[j] -= delta;
            let col = (p.propagate(&plus, t)? - p.propagate(&minus, t)?) / (2.0 * delta);
            m.set_column(j, &col);
        }
        Ok(m)
    };
    ratio(jac(fine)?, jac(coarse)?)
}

/// Ratio weights at `t0 + nH` for `n = 0..steps`, computed in parallel.
pub fn ratio_schedule(fine: &Propagator, coarse: &Propagator, t0: f64, steps: usize) -> Result<Vec<DMatrix<f64>>> {
    let span = coarse.span();
    (0..steps).into_par_iter().map(|n| make_ratio_theta(fine, coarse, t0 + n as f64 * span)).collect()
}

/// A constant matrix when both problems are autonomous, otherwise one
/// matrix per coarse step.
pub fn ratio_strategy(fine: &Propagator, coarse: &Propagator, t0: f64, steps: usize) -> Result<ThetaStrategy> {
    if fine.problem.is_autonomous() && coarse.problem.is_autonomous() {
        Ok(ThetaStrategy::ConstantMatrix(make_ratio_theta(fine, coarse, t0)?))
    } else {
        Ok(ThetaStrategy::PerStepMatrix(Arc::new(ratio_schedule(fine, coarse, t0, steps)?)))
    }
}
