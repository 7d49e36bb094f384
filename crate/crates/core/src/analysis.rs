//! Linear stability of θ-parareal on the scalar model `u' = λu`:
//! amplification factors, stability regions over complex θ, and a dense
//! block-matrix model of the error recursion.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::integrators::{scalar_gain, SchemeId};
use crate::{Error, Result, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationQuery {
    pub fine: Complex64,
    pub coarse: Complex64,
    pub theta: Complex64,
    /// `N ≥ 2`.
    pub steps: usize,
    /// `0 ≤ k ≤ N`.
    pub k: usize,
}

/// `Σ_{j=0}^{terms-1} r^j`.
pub fn geometric_sum(r: f64, terms: usize) -> f64 {
    if terms == 0 {
        return 0.0;
    }
    if r == 1.0 {
        return terms as f64;
    }
    let x = r - 1.0;
    (terms as f64 * x.ln_1p()).exp_m1() / x
}

/// `Q_{N,k} = |F - θC| Σ_{j=0}^{N-k-2} |θC|^j`.
pub fn amplification(q: &AmplificationQuery) -> f64 {
    let theta_c = q.theta * q.coarse;
    let terms = q.steps.saturating_sub(q.k + 1);
    (q.fine - theta_c).norm() * geometric_sum(theta_c.norm(), terms)
}

/// How the fine gain of a stability map is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FineModel {
    /// `e^{λH}`.
    Exact,
    /// `substeps` steps of a scheme over `H`.
    Scheme { scheme: SchemeId, substeps: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySpec {
    pub lambda_h: Complex64,
    pub coarse: SchemeId,
    pub fine: FineModel,
    pub steps: usize,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub resolution: usize,
}

impl StabilitySpec {
    pub fn new(lambda_h: Complex64, coarse: SchemeId, fine: FineModel, steps: usize) -> Self {
        StabilitySpec { lambda_h, coarse, fine, steps, re_range: (-2.0, 2.0), im_range: (-2.0, 2.0), resolution: 256 }
    }

    pub fn gains(&self) -> Result<(Complex64, Complex64)> {
        let coarse = scalar_gain(self.coarse, self.lambda_h)?.value;
        let fine = match self.fine {
            FineModel::Exact => self.lambda_h.exp(),
            FineModel::Scheme { scheme, substeps } => {
                if substeps == 0 {
                    return Err(Error::bad("fine model needs at least one substep"));
                }
                scalar_gain(scheme, self.lambda_h / substeps as f64)?.composed(substeps).value
            }
        };
        Ok((fine, coarse))
    }
}

/// `Q_{N,0}` sampled on a rectangle of the θ plane, row-major with rows
/// indexed by the imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    pub spec: StabilitySpec,
    pub fine_gain: Complex64,
    pub coarse_gain: Complex64,
    pub q: Vec<f64>,
}

fn axis(range: (f64, f64), res: usize, i: usize) -> f64 {
    range.0 + (range.1 - range.0) * i as f64 / (res - 1) as f64
}

impl StabilityGrid {
    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    /// θ at row `i` (imaginary axis) and column `j` (real axis).
    pub fn theta_at(&self, i: usize, j: usize) -> Complex64 {
        let res = self.spec.resolution;
        Complex64::new(axis(self.spec.re_range, res, j), axis(self.spec.im_range, res, i))
    }

    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.spec.resolution + j]
    }

    pub fn mask(&self, i: usize, j: usize) -> bool {
        self.q_at(i, j) <= 1.0
    }

    /// Grid indices of the sample closest to `theta`.
    pub fn nearest(&self, theta: Complex64) -> (usize, usize) {
        let res = self.spec.resolution;
        let idx = |v: f64, (lo, hi): (f64, f64)| {
            let x = ((v - lo) / (hi - lo) * (res - 1) as f64).round();
            x.clamp(0.0, (res - 1) as f64) as usize
        };
        (idx(theta.im, self.spec.im_range), idx(theta.re, self.spec.re_range))
    }

    /// `Q_{N,0}` at an arbitrary θ with this grid's gains.
    pub fn evaluate(&self, theta: Complex64) -> f64 {
        amplification(&AmplificationQuery {
            fine: self.fine_gain,
            coarse: self.coarse_gain,
            theta,
            steps: self.spec.steps,
            k: 0,
        })
    }

    pub fn contains(&self, theta: Complex64) -> bool {
        self.evaluate(theta) <= 1.0
    }

    pub fn inside_count(&self) -> usize {
        self.q.iter().filter(|&&q| q <= 1.0).count()
    }

    /// Header lines, then one `re,im,Q` row per sample.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        let s = &self.spec;
        let fine = match s.fine {
            FineModel::Exact => "exact".to_string(),
            FineModel::Scheme { scheme, substeps } => format!("{scheme}/{substeps}"),
        };
        writeln!(out, "# lambda_H {} {}", s.lambda_h.re, s.lambda_h.im)?;
        writeln!(out, "# schemes coarse={} fine={}", s.coarse, fine)?;
        writeln!(out, "# N {}", s.steps)?;
        writeln!(out, "# re_axis {} {} {}", s.re_range.0, s.re_range.1, s.resolution)?;
        writeln!(out, "# im_axis {} {} {}", s.im_range.0, s.im_range.1, s.resolution)?;
        writeln!(out, "re_theta,im_theta,Q")?;
        for i in 0..s.resolution {
            for j in 0..s.resolution {
                let t = self.theta_at(i, j);
                writeln!(out, "{},{},{}", t.re, t.im, self.q_at(i, j))?;
            }
        }
        Ok(())
    }
}

pub fn stability_region(spec: &StabilitySpec) -> Result<StabilityGrid> {
    if spec.resolution < 32 {
        return Err(Error::bad(format!("grid resolution must be at least 32, got {}", spec.resolution)));
    }
    if spec.steps < 2 {
        return Err(Error::bad("the amplification factor needs N >= 2"));
    }
    if !(spec.re_range.1 > spec.re_range.0 && spec.im_range.1 > spec.im_range.0) {
        return Err(Error::bad("grid ranges must be increasing"));
    }
    let (fine_gain, coarse_gain) = spec.gains()?;
    let res = spec.resolution;
    let mut grid = StabilityGrid { spec: *spec, fine_gain, coarse_gain, q: Vec::new() };
    grid.q = (0..res * res)
        .into_par_iter()
        .map(|idx| grid.evaluate(grid.theta_at(idx / res, idx % res)))
        .collect();
    Ok(grid)
}

/// Error norms `‖E_n^{(k)}‖` of θ-parareal on the linear maps `F`, `C` with a
/// fixed matrix weight, from the block recursion `A E^{(k+1)} = B E^{(k)}`.
///
/// `A` has identity blocks on the diagonal and `-θC` below it; `B` has
/// `F - θC` below the diagonal. `E_n^{(0)} = (C^n - F^n) u₀`.
pub fn error_recursion_oracle(
    f: &DMatrix<f64>,
    c: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    steps: usize,
    iterations: usize,
    u0: &State,
) -> Result<Vec<Vec<f64>>> {
    let d = u0.len();
    if steps > 64 || d > 8 {
        return Err(Error::bad(format!("dense oracle limited to N <= 64 and d <= 8, got N = {steps}, d = {d}")));
    }
    for m in [f, c, theta] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
    }
    let size = (steps + 1) * d;
    let theta_c = theta * c;
    let mismatch = f - &theta_c;
    let mut a = DMatrix::<f64>::identity(size, size);
    let mut b = DMatrix::<f64>::zeros(size, size);
    for n in 0..steps {
        a.view_mut(((n + 1) * d, n * d), (d, d)).copy_from(&(-&theta_c));
        b.view_mut(((n + 1) * d, n * d), (d, d)).copy_from(&mismatch);
    }
    let lu = a.lu();
    let mut e = DVector::zeros(size);
    let (mut fu, mut cu) = (u0.clone(), u0.clone());
    for n in 1..=steps {
        fu = f * fu;
        cu = c * cu;
        e.rows_mut(n * d, d).copy_from(&(&cu - &fu));
    }
    let norms = |e: &DVector<f64>| (0..=steps).map(|n| e.rows(n * d, d).norm()).collect::<Vec<_>>();
    let mut out = vec![norms(&e)];
    for _ in 0..iterations {
        e = lu.solve(&(&b * &e)).ok_or(Error::SingularSystem)?;
        out.push(norms(&e));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unimodular_sum_counts_terms() {
        let q = AmplificationQuery {
            fine: Complex64::new(0.0, 1.0),
            coarse: Complex64::new(1.0, 0.0),
            theta: Complex64::new(1.0, 0.0),
            steps: 10,
            k: 2,
        };
        assert!((amplification(&q) - 2f64.sqrt() * 7.0).abs() < 1e-14);
    }

    #[test]
    fn ideal_weight_gives_zero() {
        let fine = Complex64::new(0.3, 0.8);
        let coarse = Complex64::new(0.9, -0.1);
        let q = AmplificationQuery { fine, coarse, theta: fine / coarse, steps: 1000, k: 0 };
        assert!(amplification(&q) < 1e-15);
    }

    #[test]
    fn decay_sum_is_bounded() {
        // |C_H| = 1/5 for trapezoidal with λH = -3.
        for n in [1, 2, 10, 20, 100, 10_000] {
            let s = geometric_sum(0.2, n);
            assert!(if n <= 20 { s < 1.25 } else { s <= 1.25 });
            assert!((s - 1.25 * (1.0 - 0.2f64.powi(n as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn sum_edge_cases() {
        assert_eq!(geometric_sum(3.0, 0), 0.0);
        assert_eq!(geometric_sum(0.0, 5), 1.0);
        assert_eq!(geometric_sum(1.0, 5), 5.0);
        assert!((geometric_sum(2.0, 10) - 1023.0).abs() < 1e-10);
    }

    #[test]
    fn grid_rejects_coarse_resolution() {
        let mut spec = StabilitySpec::new(Complex64::new(0.0, 0.1), SchemeId::ForwardEuler, FineModel::Exact, 10);
        spec.resolution = 8;
        assert!(stability_region(&spec).is_err());
    }

    #[test]
    fn two_step_grid_is_mismatch_magnitude() {
        let mut spec = StabilitySpec::new(Complex64::new(0.0, 0.1), SchemeId::BackwardEuler, FineModel::Exact, 2);
        spec.resolution = 32;
        let grid = stability_region(&spec).unwrap();
        for (i, j) in [(0, 0), (5, 17), (31, 31)] {
            let t = grid.theta_at(i, j);
            assert!((grid.q_at(i, j) - (grid.fine_gain - t * grid.coarse_gain).norm()).abs() < 1e-15);
        }
        assert_eq!(grid.nearest(grid.theta_at(7, 9)), (7, 9));
    }

    #[test]
    fn zero_initial_error_stays_zero() {
        let f = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]);
        let z = error_recursion_oracle(&f, &f, &DMatrix::identity(2, 2), 8, 4, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(z.iter().flatten().all(|&e| e == 0.0));
    }

    #[test]
    fn oracle_size_limits() {
        let i = DMatrix::identity(2, 2);
        assert!(error_recursion_oracle(&i, &i, &i, 65, 1, &DVector::zeros(2)).is_err());
    }
}
