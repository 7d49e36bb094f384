use std::sync::Arc;

use theta_parareal::engine::{run, PararealConfig};
use theta_parareal::problems::make_problem;
use theta_parareal::theta::{make_ratio_theta, ratio_strategy};
use theta_parareal::{DMatrix, ProblemKind, Propagator, SchemeId, ThetaStrategy};

fn a(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -(t.cos().powi(2) + 1.0), 0.0])
}

fn midpoint_matrix(t: f64, dt: f64) -> DMatrix<f64> {
    let i = DMatrix::identity(2, 2);
    let half = a(t + dt / 2.0);
    &i + &half * dt + &half * a(t) * (dt * dt / 2.0)
}

fn rk4_matrix(t: f64, dt: f64) -> DMatrix<f64> {
    let i = DMatrix::identity(2, 2);
    let k1 = a(t);
    let k2 = a(t + dt / 2.0) * (&i + &k1 * (dt / 2.0));
    let k3 = a(t + dt / 2.0) * (&i + &k2 * (dt / 2.0));
    let k4 = a(t + dt) * (&i + &k3 * dt);
    &i + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn forced() -> (Propagator, Propagator) {
    let p = Arc::new(
        make_problem(ProblemKind::ForcedNonAutonomous { seed: 3, t_final: 20.0, pulses: 40, force_both: false }).unwrap(),
    );
    (
        Propagator::new(SchemeId::RK4, p.clone(), 1e-2, 0.5).unwrap(),
        Propagator::new(SchemeId::ExplicitMidpoint, p, 0.5, 0.5).unwrap(),
    )
}

#[test]
fn forced_weight_matches_unforced_step_matrices() {
    let (fine, coarse) = forced();
    for t in [0.0, 1.0, 7.5] {
        let theta = make_ratio_theta(&fine, &coarse, t).unwrap();
        let mut f = DMatrix::identity(2, 2);
        for j in 0..50 {
            f = rk4_matrix(t + j as f64 * 1e-2, 1e-2) * f;
        }
        let c = midpoint_matrix(t, 0.5);
        let expected = f * c.try_inverse().unwrap();
        assert!((theta - expected).amax() < 1e-10, "t = {t}");
    }
}

#[test]
fn forced_weight_depends_on_time() {
    let (fine, coarse) = forced();
    let strategy = ratio_strategy(&fine, &coarse, 0.0, 40).unwrap();
    let ThetaStrategy::PerStepMatrix(ms) = strategy else { panic!("expected one matrix per step") };
    assert_eq!(ms.len(), 40);
    assert!((&ms[0] - &ms[3]).amax() > 1e-3);

    let cfg = PararealConfig::new(Arc::new(fine.clone()), Arc::new(coarse.clone()), fine.problem.initial.clone(), 40, 1)
        .with_theta(ThetaStrategy::PerStepMatrix(ms));
    let r = run(&cfg).unwrap();
    let scale = r.fine_oracle.iter().map(|u| u.norm()).fold(0.0, f64::max);
    assert!(r.max_error(1) < 1e-10 * scale);
    let standard = run(&PararealConfig::new(Arc::new(fine.clone()), Arc::new(coarse), fine.problem.initial.clone(), 40, 1)).unwrap();
    assert!(standard.max_error(1) > 1e-4 * scale);
}

fn verlet_matrix(dt: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0 - dt * dt / 2.0, dt, -dt + dt.powi(3) / 4.0, 1.0 - dt * dt / 2.0])
}

#[test]
fn harmonic_weight_is_power_of_step_matrix_over_coarse_matrix() {
    let p = Arc::new(make_problem(ProblemKind::HarmonicOscillator { omega: 1.0 }).unwrap());
    let fine = Propagator::new(SchemeId::VelocityVerlet, p.clone(), 1e-2, 0.5).unwrap();
    let coarse = Propagator::new(SchemeId::VelocityVerlet, p, 0.5, 0.5).unwrap();
    let theta = make_ratio_theta(&fine, &coarse, 0.0).unwrap();
    let expected = verlet_matrix(1e-2).pow(50) * verlet_matrix(0.5).try_inverse().unwrap();
    assert!((theta - expected).amax() < 1e-12);
}
