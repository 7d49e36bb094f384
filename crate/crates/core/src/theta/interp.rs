//! Affine interpolation of the propagator mismatch `κ(u) = F_H u - C_H u`
//! over the most recent iterates at one coarse step, computed in the
//! subspace of the dominant singular vectors of the window matrix.

use nalgebra::{DMatrix, DVector};

use crate::State;

/// Last `depth` iterates at one coarse step, stored as homogeneous columns
/// `[u; 1]` (column 0 newest) together with their mismatches `κ(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpWindow {
    points: DMatrix<f64>,
    kappas: DMatrix<f64>,
    filled: usize,
}

/// Truncated SVD of a window matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTruncation {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
    /// Largest discarded singular value, zero when nothing was dropped.
    pub residual: f64,
}

/// Why an interpolated correction was not used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// Only one direction survived truncation.
    RankOne,
    /// Every stored column is the same point although several were inserted.
    DegenerateWindow,
    /// The interpolated correction exceeded twice the largest stored mismatch.
    Guard,
}

/// Which state the interpolated correction is anchored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpForm {
    /// `κ(u_prev) + Ĩ [u_new - u_prev; 0]`: the weighted update with
    /// `θC(w) = C w + Ĩ [w; 1]` applied to both the new and previous iterate.
    #[default]
    Anchored,
    /// `Ĩ [u_new; 1]`, which assumes `Ĩ` reproduces `κ` at the window's newest column.
    Compact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpOutcome {
    pub correction: State,
    pub rank: usize,
    pub fallback: Option<Fallback>,
}

impl InterpOutcome {
    pub fn accepted(&self) -> bool {
        self.fallback.is_none()
    }
}

impl InterpWindow {
    pub fn new(dim: usize, depth: usize) -> Self {
        assert!(depth >= 1);
        InterpWindow { points: DMatrix::zeros(dim + 1, depth), kappas: DMatrix::zeros(dim, depth), filled: 0 }
    }

    pub fn depth(&self) -> usize {
        self.points.ncols()
    }

    pub fn dim(&self) -> usize {
        self.kappas.nrows()
    }

    /// Number of insertions so far (capped at the depth).
    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn kappas(&self) -> &DMatrix<f64> {
        &self.kappas
    }

    /// Puts `(u, κ(u))` in column 0, shifting older columns right and
    /// dropping the oldest. The first insertion fills every column.
    pub fn insert(&mut self, u: &State, kappa: &State) {
        let d = self.dim();
        assert_eq!(u.len(), d);
        assert_eq!(kappa.len(), d);
        let depth = self.depth();
        let first = self.filled == 0;
        if !first {
            for j in (1..depth).rev() {
                self.points.swap_columns(j, j - 1);
                self.kappas.swap_columns(j, j - 1);
            }
        }
        let cols = if first { 0..depth } else { 0..1 };
        for j in cols {
            self.points.view_mut((0, j), (d, 1)).copy_from(u);
            self.points[(d, j)] = 1.0;
            self.kappas.set_column(j, kappa);
        }
        self.filled = (self.filled + 1).min(depth);
    }

    /// SVD of the window keeping the directions with `σ_i / σ_1 > tol`
    /// (at least one).
    pub fn truncated_svd(&self, tol: f64) -> SvdTruncation {
        truncate(&self.points, tol)
    }

    /// `Ĩ = K Ṽ Σ̃⁻¹ Ũᵀ`, a `d × (d+1)` matrix, and the retained rank.
    pub fn interpolant(&self, tol: f64) -> (DMatrix<f64>, usize) {
        let svd = self.truncated_svd(tol);
        let mut scaled_v = svd.v.clone();
        for (j, s) in svd.sigma.iter().enumerate() {
            scaled_v.column_mut(j).scale_mut(1.0 / s);
        }
        (&self.kappas * scaled_v * svd.u.transpose(), svd.rank)
    }

    fn all_columns_equal(&self) -> bool {
        let first = self.points.column(0);
        self.points.column_iter().all(|c| c == first)
    }

    fn max_kappa_norm(&self) -> f64 {
        self.kappas.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Interpolated correction at `u_new` using the compact form, falling
    /// back to `plain` (the standard parareal correction) when the window is
    /// rank one or the guard trips.
    pub fn interp_update(&self, u_new: &State, plain: &State, tol: f64) -> InterpOutcome {
        self.correction(InterpForm::Compact, u_new, u_new, plain, tol)
    }

    pub fn correction(&self, form: InterpForm, u_new: &State, u_prev: &State, plain: &State, tol: f64) -> InterpOutcome {
        let fallback = |rank, why| InterpOutcome { correction: plain.clone(), rank, fallback: Some(why) };
        if self.filled >= 2 && self.all_columns_equal() {
            return fallback(1, Fallback::DegenerateWindow);
        }
        let (interp, rank) = self.interpolant(tol);
        if rank <= 1 {
            return fallback(rank, Fallback::RankOne);
        }
        let d = self.dim();
        let kappa = match form {
            InterpForm::Compact => {
                let mut x = DVector::from_element(d + 1, 1.0);
                x.rows_mut(0, d).copy_from(u_new);
                &interp * x
            }
            InterpForm::Anchored => plain + interp.columns(0, d) * (u_new - u_prev),
        };
        let norm = kappa.norm();
        if !norm.is_finite() || norm > 2.0 * self.max_kappa_norm() {
            return fallback(rank, Fallback::Guard);
        }
        InterpOutcome { correction: kappa, rank, fallback: None }
    }
}

/// Truncated SVD of an arbitrary matrix, singular values in descending order.
pub fn truncate(a: &DMatrix<f64>, tol: f64) -> SvdTruncation {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma_max = svd.singular_values[order[0]];
    let rank = if sigma_max > 0.0 {
        order.iter().take_while(|&&i| svd.singular_values[i] / sigma_max > tol).count().max(1)
    } else {
        1
    };
    let keep = &order[..rank];
    let residual = order.get(rank).map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    SvdTruncation {
        u: DMatrix::from_fn(u.nrows(), rank, |r, c| u[(r, keep[c])]),
        sigma: DVector::from_fn(rank, |c, _| svd.singular_values[keep[c]]),
        v: DMatrix::from_fn(v_t.ncols(), rank, |r, c| v_t[(keep[c], r)]),
        rank,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec(v: &[f64]) -> State {
        DVector::from_row_slice(v)
    }

    #[test]
    fn first_insert_pads_and_later_inserts_shift() {
        let mut w = InterpWindow::new(2, 3);
        w.insert(&vec(&[1.0, 2.0]), &vec(&[0.1, 0.2]));
        for j in 0..3 {
            assert_eq!(w.points().column(j).as_slice(), &[1.0, 2.0, 1.0]);
        }
        w.insert(&vec(&[3.0, 4.0]), &vec(&[0.3, 0.4]));
        w.insert(&vec(&[5.0, 6.0]), &vec(&[0.5, 0.6]));
        w.insert(&vec(&[7.0, 8.0]), &vec(&[0.7, 0.8]));
        assert_eq!(w.points().column(0).as_slice(), &[7.0, 8.0, 1.0]);
        assert_eq!(w.points().column(2).as_slice(), &[3.0, 4.0, 1.0]);
        assert_eq!(w.kappas().column(1).as_slice(), &[0.5, 0.6]);
        assert_eq!(w.filled(), 3);
    }

    #[test]
    fn rank_one_window_falls_back_to_plain_correction() {
        let mut w = InterpWindow::new(2, 3);
        let u = vec(&[0.4, -0.2]);
        w.insert(&u, &vec(&[1.0, 1.0]));
        let plain = vec(&[0.25, 0.5]);
        let out = w.interp_update(&u, &plain, 1e-14);
        assert_eq!(out.correction, plain);
        assert_eq!(out.rank, 1);
        assert_eq!(out.fallback, Some(Fallback::RankOne));
    }

    #[test]
    fn identical_reinserts_are_degenerate() {
        let mut w = InterpWindow::new(2, 3);
        let u = vec(&[0.4, -0.2]);
        w.insert(&u, &vec(&[1.0, 1.0]));
        w.insert(&u, &vec(&[1.0, 1.0]));
        assert_eq!(w.interp_update(&u, &u, 1e-14).fallback, Some(Fallback::DegenerateWindow));
    }

    #[test]
    fn affine_mismatch_is_interpolated_exactly() {
        // κ(u) = (F - C) u for a linear 2×2 problem.
        let f = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.3, 0.8]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, -0.1, 1.0]);
        let kappa = |u: &State| (&f - &c) * u;
        let mut w = InterpWindow::new(2, 3);
        for u in [vec(&[1.0, 0.0]), vec(&[0.3, 0.7]), vec(&[-0.5, 0.2])] {
            w.insert(&u, &kappa(&u));
        }
        let u_new = vec(&[0.11, -0.42]);
        let out = w.interp_update(&u_new, &DVector::zeros(2), 1e-14);
        assert!(out.accepted());
        assert_eq!(out.rank, 3);
        assert!((out.correction - kappa(&u_new)).amax() < 1e-14);
    }

    #[test]
    fn guard_rejects_wild_extrapolation() {
        let mut w = InterpWindow::new(1, 2);
        w.insert(&vec(&[0.0]), &vec(&[0.0]));
        w.insert(&vec(&[1e-3]), &vec(&[1.0]));
        let out = w.interp_update(&vec(&[1.0]), &vec(&[0.5]), 1e-14);
        assert_eq!(out.fallback, Some(Fallback::Guard));
        assert_eq!(out.correction, vec(&[0.5]));
    }

    #[test]
    fn truncation_discards_relative_small_directions() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-8, 1e-16]));
        assert_eq!(truncate(&a, 1e-14).rank, 2);
        assert_eq!(truncate(&a, 1e-6).rank, 1);
        assert_eq!(truncate(&a, 1e-6).residual, 1e-8);
        assert_eq!(truncate(&DMatrix::zeros(2, 2), 1e-14).rank, 1);
    }

    proptest! {
        #[test]
        fn full_rank_window_reproduces_its_columns(seed in proptest::collection::vec(-1.0f64..1.0, 9 + 9)) {
            let d = 3;
            let mut w = InterpWindow::new(d, d + 1);
            let pts: Vec<State> = (0..d + 1).map(|j| {
                let mut u = DVector::zeros(d);
                for i in 0..d { u[i] = seed[(j * d + i) % seed.len()] + if i == j { 2.0 } else { 0.0 }; }
                u
            }).collect();
            let kap = |u: &State| DVector::from_fn(d, |i, _| (u[i] * u[(i + 1) % d]).sin() + u[i] * u[i]);
            for u in &pts { w.insert(u, &kap(u)); }
            let (interp, rank) = w.interpolant(1e-14);
            prop_assume!(rank == d + 1);
            let k_norm = w.kappas().norm();
            for j in 0..=d {
                let col = w.points().column(j).into_owned();
                let err = (&interp * col - w.kappas().column(j)).norm();
                prop_assert!(err <= 1e-10 * k_norm.max(1.0), "column {j}: {err}");
            }
        }

        #[test]
        fn guarded_correction_is_bounded(seed in proptest::collection::vec(-1.0f64..1.0, 12), scale in 1e-6f64..10.0) {
            let d = 2;
            let mut w = InterpWindow::new(d, d + 1);
            for j in 0..3 {
                let u = vec(&[seed[2 * j], seed[2 * j + 1]]);
                let k = vec(&[seed[6 + 2 * j], seed[7 + 2 * j]]) * scale;
                w.insert(&u, &k);
            }
            let u_new = vec(&[seed[0] * 5.0, seed[1] * 5.0]);
            let plain = w.kappas().column(0).into_owned();
            let out = w.interp_update(&u_new, &plain, 1e-14);
            let bound = 2.0 * w.kappas().column_iter().map(|c| c.norm()).fold(0.0, f64::max);
            prop_assert!(out.correction.norm() <= bound * (1.0 + 1e-12));
        }
    }
}
