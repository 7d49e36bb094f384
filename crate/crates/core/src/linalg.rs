//! Small linear-algebra helpers: banded solves for the heat operators and a
//! dense solve wrapper.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A tridiagonal matrix, optionally with periodic corner entries.
///
/// Row `i` reads `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`.
/// For non-periodic matrices `lower[0]` and `upper[n-1]` are ignored; for
/// periodic ones they couple the first and last unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: bool,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.len();
        let mut y = DVector::zeros(n);
        if n == 0 {
            return y;
        }
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            } else if self.periodic && n > 1 {
                acc += self.lower[0] * x[n - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            } else if self.periodic && n > 1 {
                acc += self.upper[n - 1] * x[0];
            }
            y[i] = acc;
        }
        y
    }

    /// `a * I + b * self`.
    pub fn shifted(&self, a: f64, b: f64) -> Tridiagonal {
        Tridiagonal {
            lower: self.lower.iter().map(|v| b * v).collect(),
            diag: self.diag.iter().map(|v| a + b * v).collect(),
            upper: self.upper.iter().map(|v| b * v).collect(),
            periodic: self.periodic,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.diag[i];
            if i > 0 {
                m[(i, i - 1)] += self.lower[i];
            } else if self.periodic && n > 1 {
                m[(0, n - 1)] += self.lower[0];
            }
            if i + 1 < n {
                m[(i, i + 1)] += self.upper[i];
            } else if self.periodic && n > 1 {
                m[(n - 1, 0)] += self.upper[n - 1];
            }
        }
        m
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if self.periodic && self.len() > 2 {
            self.solve_cyclic(rhs)
        } else if self.periodic {
            self.to_dense().lu().solve(rhs).ok_or(Error::SingularSystem)
        } else {
            thomas(&self.lower, &self.diag, &self.upper, rhs)
        }
    }

    // Sherman-Morrison on top of the Thomas algorithm.
    fn solve_cyclic(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.len();
        let alpha = self.upper[n - 1];
        let beta = self.lower[0];
        let gamma = -self.diag[0];
        let mut diag = self.diag.clone();
        diag[0] -= gamma;
        diag[n - 1] -= alpha * beta / gamma;
        let x = thomas(&self.lower, &diag, &self.upper, rhs)?;
        let mut u = DVector::zeros(n);
        u[0] = gamma;
        u[n - 1] = alpha;
        let z = thomas(&self.lower, &diag, &self.upper, &u)?;
        let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
        if !fact.is_finite() {
            return Err(Error::SingularSystem);
        }
        Ok(x - z * fact)
    }
}

/// Thomas algorithm for a non-periodic tridiagonal system.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::SingularSystem);
    }
    c[0] = if n > 1 { upper[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularSystem);
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = DVector::zeros(n);
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Dense LU solve, mapping failure to [`Error::SingularSystem`].
pub fn solve_dense(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a.lu().solve(b).ok_or(Error::SingularSystem)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem)
    }
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
