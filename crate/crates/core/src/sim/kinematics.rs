//! Forward kinematics with point Jacobians and velocity-product accelerations.

use super::model::{RobotModel, NUM_CONTACT_POINTS, NUM_DOF, NUM_JOINTS, NUM_LINKS};
use super::state::RobotState;

/// Position, velocity, Jacobian and `J̇·q̇` of one material point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointKinematics {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub jac: [[f64; NUM_DOF]; 2],
    /// Acceleration of the point when all generalized accelerations are zero.
    pub bias: [f64; 2],
}

impl PointKinematics {
    fn root(state: &RobotState) -> Self {
        let mut jac = [[0.0; NUM_DOF]; 2];
        jac[0][0] = 1.0;
        jac[1][1] = 1.0;
        Self {
            pos: [state.root_pose[0], state.root_pose[1]],
            vel: [state.root_vel[0], state.root_vel[1]],
            jac,
            bias: [0.0; 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kinematics {
    /// Absolute pitch of each link.
    pub link_angle: [f64; NUM_LINKS],
    pub link_rate: [f64; NUM_LINKS],
    /// World position of each link's joint (the hip for the torso).
    pub link_origin: [[f64; 2]; NUM_LINKS],
    pub coms: [PointKinematics; NUM_LINKS],
    /// Heel/toe points, ordered like `RobotModel::contact_points`.
    pub points: [PointKinematics; NUM_CONTACT_POINTS],
}

#[inline]
fn rotate(angle: f64, r: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * r[0] - s * r[1], s * r[0] + c * r[1]]
}

fn offset_point(
    model: &RobotModel,
    origin: &PointKinematics,
    link: usize,
    angle: f64,
    rate: f64,
    offset: [f64; 2],
) -> PointKinematics {
    let w = rotate(angle, offset);
    let perp = [-w[1], w[0]];
    let mut out = *origin;
    out.pos[0] += w[0];
    out.pos[1] += w[1];
    out.vel[0] += rate * perp[0];
    out.vel[1] += rate * perp[1];
    out.bias[0] -= rate * rate * w[0];
    out.bias[1] -= rate * rate * w[1];
    let (coords, n) = model.angle_coordinates(link);
    for &c in &coords[..n] {
        out.jac[0][c] += perp[0];
        out.jac[1][c] += perp[1];
    }
    out
}

/// World poses of all links and kinematics of the foot contact points.
pub fn forward_kinematics(model: &RobotModel, state: &RobotState) -> Kinematics {
    let mut link_angle = [0.0; NUM_LINKS];
    let mut link_rate = [0.0; NUM_LINKS];
    let mut origins = [PointKinematics::root(state); NUM_LINKS];
    let mut coms = [PointKinematics::root(state); NUM_LINKS];

    for (i, link) in model.links.iter().enumerate() {
        match (link.parent, link.joint) {
            (Some(p), Some(j)) => {
                link_angle[i] = link_angle[p] + state.q[j];
                link_rate[i] = link_rate[p] + state.qdot[j];
                origins[i] = offset_point(model, &origins[p], p, link_angle[p], link_rate[p], link.origin);
            }
            _ => {
                link_angle[i] = state.root_pose[2];
                link_rate[i] = state.root_vel[2];
            }
        }
        coms[i] = offset_point(model, &origins[i], i, link_angle[i], link_rate[i], link.com);
    }

    let points = std::array::from_fn(|k| {
        let cp = &model.contact_points[k];
        offset_point(
            model,
            &origins[cp.link],
            cp.link,
            link_angle[cp.link],
            link_rate[cp.link],
            cp.offset,
        )
    });

    Kinematics {
        link_angle,
        link_rate,
        link_origin: std::array::from_fn(|i| origins[i].pos),
        coms,
        points,
    }
}

/// Lowest contact-point height for the given root pose and joint angles.
pub fn lowest_contact_height(model: &RobotModel, root: [f64; 3], q: &[f64; NUM_JOINTS]) -> f64 {
    let state = RobotState {
        root_pose: root,
        root_vel: [0.0; 3],
        q: *q,
        qdot: [0.0; NUM_JOINTS],
        applied_torque: [0.0; NUM_JOINTS],
    };
    forward_kinematics(model, &state)
        .points
        .iter()
        .map(|p| p.pos[1])
        .fold(f64::INFINITY, f64::min)
}
