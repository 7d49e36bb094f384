use std::sync::Arc;

use theta_parareal::engine::{run, PararealConfig};
use theta_parareal::problems::make_problem;
use theta_parareal::theta::{InterpSettings, InterpWindow, ThetaStrategy};
use theta_parareal::{DMatrix, DVector, ProblemKind, Propagator, SchemeId, State};

fn kappa(w: &State) -> State {
    let (x, y, z) = (w[0], w[1], w[2]);
    DVector::from_vec(vec![
        0.5 * x - y + 2.0 * x * x - 0.7 * y * z + 0.1,
        x + 0.3 * z + 1.5 * y * y + x * z,
        -0.2 * x + y - z * z + 0.4 * x * y - 0.3,
    ])
}

fn interpolation_error(eps: f64) -> f64 {
    let x = DVector::from_vec(vec![0.3, -0.2, 0.5]);
    let s = 1.0 / 3f64.sqrt();
    let offsets = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-s, -s, -s]];
    let mut window = InterpWindow::new(3, 4);
    for o in offsets {
        let p = &x + DVector::from_row_slice(&o) * eps;
        window.insert(&p, &kappa(&p));
    }
    let (interp, rank) = window.interpolant(1e-14);
    assert_eq!(rank, 4);
    let mut xh = DVector::from_element(4, 1.0);
    xh.rows_mut(0, 3).copy_from(&x);
    (interp * xh - kappa(&x)).norm()
}

#[test]
fn affine_interpolation_is_second_order() {
    let eps: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
    let pts: Vec<(f64, f64)> = eps.iter().map(|&e| (e.log10(), interpolation_error(e).log10())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() <= 0.25, "slope {slope}, points {pts:?}");
}

#[test]
fn affine_maps_are_reproduced_exactly() {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.3, 0.2, 0.0, -0.7]);
    let b = DVector::from_vec(vec![0.1, -0.2, 0.3]);
    let mut window = InterpWindow::new(3, 4);
    for p in [[0.1, 0.2, 0.3], [0.4, -0.1, 0.0], [0.0, 0.5, -0.2], [0.3, 0.3, 0.3]] {
        let p = DVector::from_row_slice(&p);
        window.insert(&p, &(&a * &p + &b));
    }
    let (interp, _) = window.interpolant(1e-14);
    let q = DVector::from_vec(vec![-0.3, 0.8, 0.25]);
    let mut qh = DVector::from_element(4, 1.0);
    qh.rows_mut(0, 3).copy_from(&q);
    assert!((interp * qh - (&a * &q + &b)).norm() < 1e-12);
}

fn spin_orbit(theta: ThetaStrategy) -> Vec<f64> {
    let p = Arc::new(make_problem(ProblemKind::SpinOrbit { eps: 0.01, alpha: 1e-4, phi: 0.2 }).unwrap());
    let fine = Propagator::new(SchemeId::VelocityVerlet, p.clone(), 1e-2, 1.0).unwrap();
    let coarse = Propagator::new(SchemeId::VelocityVerlet, p.clone(), 1.0, 1.0).unwrap();
    let cfg = PararealConfig::new(Arc::new(fine), Arc::new(coarse), p.initial.clone(), 200, 4).with_theta(theta);
    let r = run(&cfg).unwrap();
    (0..=4).map(|k| r.max_error(k)).collect()
}

#[test]
fn interpolation_contracts_quadratically_on_spin_orbit() {
    let interp = spin_orbit(ThetaStrategy::Interpolative(InterpSettings::new(1e-14)));
    let standard = spin_orbit(ThetaStrategy::Identity);
    // Once the window holds d + 1 = 3 distinct iterates the error is squared.
    assert!(interp[2] < 1e-4);
    assert!(interp[3] <= 100.0 * interp[2] * interp[2], "{interp:?}");
    assert!(standard[3] > 100.0 * standard[2] * standard[2], "{standard:?}");
    assert!(interp[3] < standard[3] / 100.0);
}
