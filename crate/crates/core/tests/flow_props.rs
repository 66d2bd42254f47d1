mod common;

use common::*;
use proptest::prelude::*;
use proxflow::flow::{
    flow_diagnostics, integrate, isotropic_lambda_oracle, FlowConfig, FlowStatus, Trajectory,
};
use proxflow::operators::{make_isotropic, make_logistic1d, make_rotation, MonotoneOperator};
use rand::Rng;

fn check_invariants(traj: &Trajectory, op: &dyn MonotoneOperator, rel_tol: f64) {
    let theta = traj.theta;
    assert!(traj.max_constraint_residual <= rel_tol, "constraint {:e}", traj.max_constraint_residual);
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(b.t > a.t);
        assert!(b.lambda >= a.lambda - 1e-9 * theta, "lambda decreased at t={}", b.t);
        assert!(b.speed <= a.speed + 1e-9 * theta, "speed increased at t={}", b.t);
    }
    // Caps over all sample pairs reduce to consecutive ones plus transitivity,
    // but check a sparse set of long-range pairs too.
    let n = traj.samples.len();
    let stride = (n / 20).max(1);
    for i in (0..n).step_by(stride) {
        for j in (i..n).step_by(stride) {
            let (a, b) = (&traj.samples[i], &traj.samples[j]);
            let dt = b.t - a.t;
            assert!(b.lambda <= (dt).exp() * a.lambda * (1.0 + 1e-6));
            assert!(b.speed >= a.speed * (-dt).exp() * (1.0 - 1e-6));
        }
    }
    if let Some(zs) = op.zero_set() {
        for z in zs.representatives() {
            let mut prev = f64::INFINITY;
            for s in &traj.samples {
                let d = (&s.x - &z).norm();
                assert!(d <= prev + 1e-9, "distance to a zero increased at t={}", s.t);
                prev = d;
            }
        }
    }
    let rep = flow_diagnostics(traj, op).unwrap();
    assert!(rep.max_violation() <= 1e-6, "{rep:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_trajectories_keep_invariants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let op = random_closed_form(&mut r);
        let x0 = random_vector(&mut r, op.dim(), 3.0);
        let theta = log_uniform(&mut r, -1.0, 1.0);
        let cfg = FlowConfig { h: 0.02, sample_stride: 5, ..FlowConfig::default() };
        let traj = integrate(op.as_ref(), &x0, theta, 3.0, &cfg).unwrap();
        check_invariants(&traj, op.as_ref(), 1e-10);
    }
}

#[test]
fn logistic_trajectory_keeps_invariants() {
    let op = make_logistic1d();
    let mut r = rng(41);
    for _ in 0..4 {
        let x0 = vec_of(&[r.gen_range(-8.0..8.0)]);
        let cfg = FlowConfig { h: 0.05, ..FlowConfig::default() };
        let traj = integrate(&op, &x0, 0.5, 4.0, &cfg).unwrap();
        check_invariants(&traj, &op, 1e-6);
    }
}

#[test]
fn isotropic_matches_oracle_along_the_way() {
    let op = make_isotropic(2.0, 3).unwrap();
    let x0 = vec_of(&[0.3, -1.0, 0.5]);
    let traj = integrate(&op, &x0, 1.0, 4.0, &FlowConfig::default()).unwrap();
    let l0 = traj.samples[0].lambda;
    for s in &traj.samples {
        let want = isotropic_lambda_oracle(2.0, l0, s.t);
        assert!((s.lambda - want).abs() <= 1e-7 * want);
    }
}

#[test]
fn step_halving_order() {
    let op = make_isotropic(1.0, 2).unwrap();
    let x0 = vec_of(&[1.0, 0.0]);
    let run = |h: f64| {
        let cfg = FlowConfig { h, rel_tol: Some(1e-14), resolvent_tol: 1e-14, ..FlowConfig::default() };
        integrate(&op, &x0, 1.0, 2.0, &cfg).unwrap().samples.last().unwrap().x.clone()
    };
    let (a, b, c) = (run(0.4), run(0.2), run(0.1));
    let e1 = (&a - &b).norm();
    let e2 = (&b - &c).norm();
    let order = (e1 / e2).log2();
    assert!(order >= 3.5, "observed order {order} ({e1:e}, {e2:e})");
}

#[test]
fn rotation_stabilizes_with_a_loose_floor() {
    let op = make_rotation();
    let cfg = FlowConfig { speed_floor: 1e-3, ..FlowConfig::default() };
    let traj = integrate(&op, &vec_of(&[1.0, 0.0]), 1.0, 50.0, &cfg).unwrap();
    assert_eq!(traj.status, FlowStatus::Stabilized);
    assert!(traj.samples.last().unwrap().speed < 1e-3);
    assert!(traj.samples.last().unwrap().t < 50.0);
}
