//! Floating-base planar multibody integrator.
//!
//! One substep is drift-kick-drift: half a position step, a velocity kick with
//! loads evaluated at the midpoint, and the second half position step. Loads
//! may report their damping and stiffness so the kick is linearly implicit in
//! them: `(M + h·B + h²/2·K) Δv = h (f - h/2·K v)`.

use nalgebra::{SMatrix, SVector};

use super::kinematics::{forward_kinematics, Kinematics};
use super::model::{RobotModel, NUM_CONTACT_POINTS, NUM_DOF, NUM_JOINTS};
use super::state::RobotState;
use crate::error::{Error, Result};

/// 1 kHz PD/physics substep.
pub const SUBSTEP_DT: f64 = 0.001;

type Mat = SMatrix<f64, NUM_DOF, NUM_DOF>;
type Vec9 = SVector<f64, NUM_DOF>;

/// Force applied at one foot contact point, with its local damping and
/// stiffness (both non-negative, per world axis).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointLoad {
    pub force: [f64; 2],
    pub damping: [f64; 2],
    pub stiffness: [f64; 2],
}

/// Everything acting on the robot besides gravity during one substep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Loads {
    pub joint_torque: [f64; NUM_JOINTS],
    pub joint_damping: [f64; NUM_JOINTS],
    pub joint_stiffness: [f64; NUM_JOINTS],
    pub points: [PointLoad; NUM_CONTACT_POINTS],
}

/// Source of actuator, friction and contact loads, queried once per substep at
/// the midpoint configuration.
pub trait ForceModel {
    fn loads(&mut self, model: &RobotModel, state: &RobotState, kin: &Kinematics) -> Loads;
}

impl ForceModel for Loads {
    fn loads(&mut self, _: &RobotModel, _: &RobotState, _: &Kinematics) -> Loads {
        self.clone()
    }
}

impl<F> ForceModel for F
where
    F: FnMut(&RobotModel, &RobotState, &Kinematics) -> Loads,
{
    fn loads(&mut self, model: &RobotModel, state: &RobotState, kin: &Kinematics) -> Loads {
        self(model, state, kin)
    }
}

/// Joint-space inertia matrix.
pub fn mass_matrix(model: &RobotModel, kin: &Kinematics) -> SMatrix<f64, NUM_DOF, NUM_DOF> {
    let mut m = Mat::zeros();
    for (i, link) in model.links.iter().enumerate() {
        let jac = &kin.coms[i].jac;
        for r in 0..NUM_DOF {
            for c in r..NUM_DOF {
                let v = link.mass * (jac[0][r] * jac[0][c] + jac[1][r] * jac[1][c]);
                m[(r, c)] += v;
            }
        }
        let (coords, n) = model.angle_coordinates(i);
        for &r in &coords[..n] {
            for &c in &coords[..n] {
                if c >= r {
                    m[(r, c)] += link.inertia;
                }
            }
        }
    }
    for r in 0..NUM_DOF {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }
    m
}

/// Horizontal linear momentum of the whole robot.
pub fn horizontal_momentum(model: &RobotModel, kin: &Kinematics) -> f64 {
    model.links.iter().zip(&kin.coms).map(|(l, c)| l.mass * c.vel[0]).sum()
}

fn add_point_terms(jac: &[[f64; NUM_DOF]; 2], load: &PointLoad, f: &mut Vec9, b: &mut Mat, k: &mut Mat) {
    for axis in 0..2 {
        let row = &jac[axis];
        if load.force[axis] != 0.0 {
            for c in 0..NUM_DOF {
                f[c] += row[c] * load.force[axis];
            }
        }
        for (mat, coef) in [(&mut *b, load.damping[axis]), (&mut *k, load.stiffness[axis])] {
            if coef == 0.0 {
                continue;
            }
            for r in 0..NUM_DOF {
                if row[r] == 0.0 {
                    continue;
                }
                for c in 0..NUM_DOF {
                    mat[(r, c)] += coef * row[r] * row[c];
                }
            }
        }
    }
}

/// Advances the robot by one substep of length `dt`.
pub fn step_dynamics(
    model: &RobotModel,
    state: &RobotState,
    forces: &mut impl ForceModel,
    dt: f64,
) -> Result<RobotState> {
    let p0 = state.positions();
    let v0 = state.velocities();
    let mut half = state.clone();
    let mut p_half = p0;
    for i in 0..NUM_DOF {
        p_half[i] += 0.5 * dt * v0[i];
    }
    half.set_positions(&p_half);

    let kin = forward_kinematics(model, &half);
    let loads = forces.loads(model, &half, &kin);

    let mass = mass_matrix(model, &kin);
    let mut f = Vec9::zeros();
    let mut b = Mat::zeros();
    let mut k = Mat::zeros();

    for (i, link) in model.links.iter().enumerate() {
        let com = &kin.coms[i];
        let fx = -link.mass * com.bias[0];
        let fz = -link.mass * (com.bias[1] + model.gravity);
        for c in 0..NUM_DOF {
            f[c] += com.jac[0][c] * fx + com.jac[1][c] * fz;
        }
    }
    for j in 0..NUM_JOINTS {
        f[3 + j] += loads.joint_torque[j];
        b[(3 + j, 3 + j)] += loads.joint_damping[j];
        k[(3 + j, 3 + j)] += loads.joint_stiffness[j];
    }
    for (pk, load) in kin.points.iter().zip(&loads.points) {
        add_point_terms(&pk.jac, load, &mut f, &mut b, &mut k);
    }

    let v = Vec9::from_column_slice(&v0);
    let lhs = mass + b * dt + k * (0.5 * dt * dt);
    let rhs = (f - k * v * (0.5 * dt)) * dt;
    let chol = lhs
        .cholesky()
        .ok_or_else(|| Error::Diverged("singular system matrix".into()))?;
    let mut v1 = v + chol.solve(&rhs);

    // Joint stops: a joint that would leave its range is brought to rest by a
    // constraint impulse solved in the same implicit system, so the stop is an
    // internal force and the floating base keeps its momentum.
    let stopped: Vec<usize> = (0..NUM_JOINTS)
        .filter(|&j| {
            let (lo, hi) = model.joint_limits(j);
            let i = 3 + j;
            let end = p_half[i] + 0.5 * dt * v1[i];
            (end < lo && v1[i] < 0.0) || (end > hi && v1[i] > 0.0)
        })
        .map(|j| 3 + j)
        .collect();
    if !stopped.is_empty() {
        let n = stopped.len();
        let cols: Vec<Vec9> = stopped
            .iter()
            .map(|&i| chol.solve(&Vec9::from_fn(|r, _| if r == i { 1.0 } else { 0.0 })))
            .collect();
        let a = nalgebra::DMatrix::from_fn(n, n, |r, c| cols[c][stopped[r]]);
        let rhs = nalgebra::DVector::from_fn(n, |r, _| -v1[stopped[r]]);
        let lambda = a
            .cholesky()
            .ok_or_else(|| Error::Diverged("singular joint-stop system".into()))?
            .solve(&rhs);
        for (c, col) in cols.iter().enumerate() {
            v1 += col * lambda[c];
        }
    }

    let mut vel = [0.0; NUM_DOF];
    let mut pos = p_half;
    for i in 0..NUM_DOF {
        vel[i] = v1[i];
        pos[i] += 0.5 * dt * vel[i];
    }
    // A half step that started beyond the range is projected back.
    for j in 0..NUM_JOINTS {
        let (lo, hi) = model.joint_limits(j);
        let i = 3 + j;
        if pos[i] < lo {
            pos[i] = lo;
            vel[i] = vel[i].max(0.0);
        } else if pos[i] > hi {
            pos[i] = hi;
            vel[i] = vel[i].min(0.0);
        }
    }

    let mut next = state.clone();
    next.set_positions(&pos);
    next.set_velocities(&vel);
    if !next.is_finite() {
        return Err(Error::Diverged("non-finite state after substep".into()));
    }
    Ok(next)
}
