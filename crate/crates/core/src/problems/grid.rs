/// Transfer between a periodic coarse grid `HZ ∩ [0,1)` and a fine grid
/// `hZ ∩ [0,1)` with `H = ratio · h`.
///
/// Reconstruction is four-point (cubic) Lagrange interpolation with periodic
/// wrap-around; projection is pointwise restriction. A state may stack
/// several grid functions (`components`), each transferred independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridTransfer {
    pub coarse_points: usize,
    pub ratio: usize,
    pub components: usize,
}

impl GridTransfer {
    pub fn new(coarse_points: usize, ratio: usize, components: usize) -> Self {
        assert!(coarse_points >= 4, "cubic reconstruction needs at least four coarse points");
        assert!(ratio >= 1 && components >= 1);
        GridTransfer { coarse_points, ratio, components }
    }

    pub fn fine_points(&self) -> usize {
        self.coarse_points * self.ratio
    }

    fn reconstruct_component(&self, coarse: &[f64], fine: &mut [f64]) {
        let m = self.coarse_points;
        let r = self.ratio;
        for i in 0..m {
            let um = coarse[(i + m - 1) % m];
            let u0 = coarse[i];
            let u1 = coarse[(i + 1) % m];
            let u2 = coarse[(i + 2) % m];
            fine[i * r] = u0;
            for s in 1..r {
                let t = s as f64 / r as f64;
                let wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
                let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
                let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
                let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
                fine[i * r + s] = wm * um + w0 * u0 + w1 * u1 + w2 * u2;
            }
        }
    }

    /// Coarse → fine.
    pub fn reconstruct(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), self.coarse_points * self.components);
        let mut fine = vec![0.0; self.fine_points() * self.components];
        for (c, f) in coarse.chunks(self.coarse_points).zip(fine.chunks_mut(self.fine_points())) {
            self.reconstruct_component(c, f);
        }
        fine
    }

    /// Fine → coarse.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        assert_eq!(fine.len(), self.fine_points() * self.components);
        fine.chunks(self.fine_points()).flat_map(|f| f.iter().step_by(self.ratio).copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn restriction_inverts_reconstruction(values in proptest::collection::vec(-10.0f64..10.0, 16)) {
            let t = GridTransfer::new(8, 5, 2);
            prop_assert_eq!(t.restrict(&t.reconstruct(&values)), values);
        }
    }

    #[test]
    fn constants_are_preserved() {
        let t = GridTransfer::new(10, 40, 1);
        let fine = t.reconstruct(&[0.7; 10]);
        assert!(fine.iter().all(|v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn cubic_polynomials_are_reproduced_away_from_the_seam() {
        let t = GridTransfer::new(32, 4, 1);
        let h = 1.0 / 32.0;
        let p = |x: f64| 1.0 - 2.0 * x + 3.0 * x * x - x * x * x;
        let coarse: Vec<f64> = (0..32).map(|i| p(i as f64 * h)).collect();
        let fine = t.reconstruct(&coarse);
        for (j, v) in fine.iter().enumerate().take(120).skip(8) {
            assert!((v - p(j as f64 * h / 4.0)).abs() < 1e-13);
        }
    }
}
