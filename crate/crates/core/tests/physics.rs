use biped_core::sim::dynamics::horizontal_momentum;
use biped_core::sim::{
    build_planar_biped, forward_kinematics, step_dynamics, Loads, ModelConfig, RobotState, SUBSTEP_DT,
};
use proptest::prelude::*;

/// Largest change of horizontal momentum over `duration` s with constant joint
/// torques in zero gravity, relative to the initial momentum.
fn momentum_drift(torques: [f64; 6], qdot: [f64; 6], duration: f64, dt: f64) -> f64 {
    let mut model = build_planar_biped(&ModelConfig::default()).unwrap();
    model.gravity = 0.0;
    let mut s = RobotState::nominal(&model, 2.0);
    s.root_vel = [0.3, 0.0, 0.1];
    s.qdot = qdot;
    let p0 = horizontal_momentum(&model, &forward_kinematics(&model, &s));
    let mut loads = Loads {
        joint_torque: torques,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..(duration / dt).round() as usize {
        s = step_dynamics(&model, &s, &mut loads, dt).unwrap();
        let p = horizontal_momentum(&model, &forward_kinematics(&model, &s));
        worst = worst.max((p - p0).abs());
    }
    worst / p0.abs()
}

#[test]
fn free_rotation_keeps_momentum() {
    assert!(momentum_drift([0.0; 6], [0.0; 6], 0.2, SUBSTEP_DT) < 1e-6);
}

// Joint stops and internal torques act inside the robot; what remains is
// discretization error, which shrinks with the substep.
#[test]
fn momentum_drift_converges_with_substep() {
    let t = [20.0, -15.0, 5.0, -10.0, 8.0, 25.0];
    let v = [0.5, -0.3, 0.2, 0.0, 0.4, -0.1];
    let coarse = momentum_drift(t, v, 0.05, SUBSTEP_DT);
    let fine = momentum_drift(t, v, 0.05, SUBSTEP_DT / 4.0);
    assert!(coarse < 1e-2, "{coarse}");
    assert!(fine < 0.3 * coarse, "coarse {coarse}, fine {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn momentum_drift_shrinks_with_substep(
        t in prop::array::uniform6(-10.0..10.0f64),
        v in prop::array::uniform6(-1.0..1.0f64),
    ) {
        let coarse = momentum_drift(t, v, 0.1, SUBSTEP_DT);
        let fine = momentum_drift(t, v, 0.1, SUBSTEP_DT / 4.0);
        prop_assert!(coarse < 1e-2, "relative drift {}", coarse);
        prop_assert!(fine < 0.5 * coarse + 1e-7, "coarse {} fine {}", coarse, fine);
    }
}
