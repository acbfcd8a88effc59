//! Planar biped description.
//!
//! The robot is a 7-link tree: a torso carrying the floating root (hip point)
//! and two identical legs of thigh, shank and foot. All six actuated joints are
//! pitch joints. Generalized coordinates are ordered
//! `[x, z, pitch, r_hip, r_knee, r_ankle, l_hip, l_knee, l_ankle]`.

use serde::{Deserialize, Serialize};

use super::actuation::{FrictionParams, PdGains};
use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 6;
pub const NUM_LINKS: usize = 7;
pub const NUM_DOF: usize = 3 + NUM_JOINTS;
pub const NUM_CONTACT_POINTS: usize = 4;

pub const TORSO: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Right, Side::Left];

    pub fn index(self) -> usize {
        match self {
            Side::Right => 0,
            Side::Left => 1,
        }
    }

    pub fn thigh(self) -> usize {
        1 + 3 * self.index()
    }

    pub fn shank(self) -> usize {
        2 + 3 * self.index()
    }

    pub fn foot(self) -> usize {
        3 + 3 * self.index()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FootPoint {
    Heel,
    Toe,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub name: &'static str,
    pub mass: f64,
    /// Centre of mass in the link frame (x forward, z up when the link angle is 0).
    pub com: [f64; 2],
    /// Rotational inertia about the centre of mass.
    pub inertia: f64,
    pub parent: Option<usize>,
    /// Joint driving this link, `None` for the torso.
    pub joint: Option<usize>,
    /// Location of this link's joint in the parent frame.
    pub origin: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: &'static str,
    pub child: usize,
    pub lower: f64,
    pub upper: f64,
    pub torque_limit: f64,
    pub gains: PdGains,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactPoint {
    pub side: Side,
    pub kind: FootPoint,
    pub link: usize,
    pub offset: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub contact_points: [ContactPoint; NUM_CONTACT_POINTS],
    /// Half-sitting joint angles.
    pub nominal_posture: [f64; NUM_JOINTS],
    /// Hip height above the soles at the nominal posture.
    pub nominal_root_height: f64,
    pub friction: [FrictionParams; NUM_JOINTS],
    pub gravity: f64,
}

impl RobotModel {
    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn joint_limits(&self, j: usize) -> (f64, f64) {
        (self.joints[j].lower, self.joints[j].upper)
    }

    /// Generalized-coordinate index of each angle that rotates `link`
    /// (the root pitch plus every joint on the path to the torso).
    pub fn angle_coordinates(&self, link: usize) -> ([usize; 4], usize) {
        let mut out = [2usize; 4];
        let mut n = 1;
        let mut cur = link;
        while let Some(j) = self.links[cur].joint {
            out[n] = 3 + j;
            n += 1;
            cur = self.links[cur].parent.expect("jointed link has a parent");
        }
        (out, n)
    }
}

/// Joint settings shared by the left and right leg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub kp: f64,
    pub kd: f64,
    pub lower: f64,
    pub upper: f64,
    pub torque_limit: f64,
    pub nominal: f64,
}

/// Morphology of the planar biped. Link masses are given as fractions that are
/// normalized to `total_mass`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub total_mass: f64,
    pub torso_mass: f64,
    pub thigh_mass: f64,
    pub shank_mass: f64,
    pub foot_mass: f64,
    /// Torso CoM height above the hip.
    pub torso_com_height: f64,
    pub torso_length: f64,
    pub torso_depth: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    /// Sole depth below the ankle axis.
    pub ankle_height: f64,
    /// Heel point behind the ankle axis.
    pub heel_length: f64,
    /// Toe point ahead of the ankle axis.
    pub toe_length: f64,
    pub hip: JointConfig,
    pub knee: JointConfig,
    pub ankle: JointConfig,
    pub joint_damping: f64,
    pub joint_dry_friction: f64,
    pub gravity: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            total_mass: 100.0,
            torso_mass: 0.62,
            thigh_mass: 0.10,
            shank_mass: 0.06,
            foot_mass: 0.03,
            torso_com_height: 0.25,
            torso_length: 0.5,
            torso_depth: 0.3,
            thigh_length: 0.42,
            shank_length: 0.42,
            ankle_height: 0.09,
            heel_length: 0.07,
            toe_length: 0.16,
            hip: JointConfig {
                kp: 200.0,
                kd: 20.0,
                lower: -0.8,
                upper: 1.6,
                torque_limit: 250.0,
                nominal: 0.25,
            },
            knee: JointConfig {
                kp: 150.0,
                kd: 15.0,
                lower: -2.2,
                upper: 0.0,
                torque_limit: 300.0,
                nominal: -0.5,
            },
            ankle: JointConfig {
                kp: 80.0,
                kd: 8.0,
                lower: -0.9,
                upper: 0.9,
                torque_limit: 150.0,
                nominal: 0.25,
            },
            joint_damping: FrictionParams::default().viscous_damping,
            joint_dry_friction: FrictionParams::default().dry_friction,
            gravity: 9.81,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn rod_inertia(mass: f64, length: f64) -> f64 {
    mass * length * length / 12.0
}

/// Builds the 7-link planar biped described by `config`.
pub fn build_planar_biped(config: &ModelConfig) -> Result<RobotModel> {
    let total = positive("total_mass", config.total_mass)?;
    for (name, v) in [
        ("torso_mass", config.torso_mass),
        ("thigh_mass", config.thigh_mass),
        ("shank_mass", config.shank_mass),
        ("foot_mass", config.foot_mass),
        ("torso_length", config.torso_length),
        ("torso_depth", config.torso_depth),
        ("thigh_length", config.thigh_length),
        ("shank_length", config.shank_length),
        ("ankle_height", config.ankle_height),
        ("heel_length", config.heel_length),
        ("toe_length", config.toe_length),
        ("gravity", config.gravity),
    ] {
        positive(name, v)?;
    }
    if !(config.torso_com_height.is_finite()) {
        return Err(Error::Config("torso_com_height must be finite".into()));
    }
    if config.joint_damping < 0.0 || config.joint_dry_friction < 0.0 {
        return Err(Error::Config("joint friction must be non-negative".into()));
    }
    for (name, j) in [("hip", config.hip), ("knee", config.knee), ("ankle", config.ankle)] {
        positive(&format!("{name}.kp"), j.kp)?;
        positive(&format!("{name}.kd"), j.kd)?;
        positive(&format!("{name}.torque_limit"), j.torque_limit)?;
        if !(j.lower < j.upper) {
            return Err(Error::Config(format!("{name} limits must satisfy lower < upper")));
        }
        if j.nominal < j.lower || j.nominal > j.upper {
            return Err(Error::Config(format!("{name} nominal angle outside its limits")));
        }
    }

    let fraction_sum = config.torso_mass + 2.0 * (config.thigh_mass + config.shank_mass + config.foot_mass);
    let scale = total / fraction_sum;
    let torso_mass = config.torso_mass * scale;
    let thigh_mass = config.thigh_mass * scale;
    let shank_mass = config.shank_mass * scale;
    let foot_mass = config.foot_mass * scale;

    let foot_length = config.heel_length + config.toe_length;
    let foot_com = [
        0.5 * (config.toe_length - config.heel_length),
        -0.5 * config.ankle_height,
    ];

    let mut links = vec![Link {
        name: "torso",
        mass: torso_mass,
        com: [0.0, config.torso_com_height],
        inertia: torso_mass * (config.torso_length.powi(2) + config.torso_depth.powi(2)) / 12.0,
        parent: None,
        joint: None,
        origin: [0.0, 0.0],
    }];
    let mut joints = Vec::with_capacity(NUM_JOINTS);
    let names = [
        ("r_thigh", "r_shank", "r_foot", "r_hip", "r_knee", "r_ankle"),
        ("l_thigh", "l_shank", "l_foot", "l_hip", "l_knee", "l_ankle"),
    ];
    for side in Side::BOTH {
        let (thigh, shank, foot, hip_j, knee_j, ankle_j) = names[side.index()];
        let base = links.len();
        let jbase = joints.len();
        links.push(Link {
            name: thigh,
            mass: thigh_mass,
            com: [0.0, -0.5 * config.thigh_length],
            inertia: rod_inertia(thigh_mass, config.thigh_length),
            parent: Some(TORSO),
            joint: Some(jbase),
            origin: [0.0, 0.0],
        });
        links.push(Link {
            name: shank,
            mass: shank_mass,
            com: [0.0, -0.5 * config.shank_length],
            inertia: rod_inertia(shank_mass, config.shank_length),
            parent: Some(base),
            joint: Some(jbase + 1),
            origin: [0.0, -config.thigh_length],
        });
        links.push(Link {
            name: foot,
            mass: foot_mass,
            com: foot_com,
            inertia: foot_mass * (foot_length.powi(2) + config.ankle_height.powi(2)) / 12.0,
            parent: Some(base + 1),
            joint: Some(jbase + 2),
            origin: [0.0, -config.shank_length],
        });
        for (k, (name, jc)) in [(hip_j, config.hip), (knee_j, config.knee), (ankle_j, config.ankle)]
            .into_iter()
            .enumerate()
        {
            joints.push(Joint {
                name,
                child: base + k,
                lower: jc.lower,
                upper: jc.upper,
                torque_limit: jc.torque_limit,
                gains: PdGains { kp: jc.kp, kd: jc.kd },
            });
        }
    }

    let point = |side: Side, kind: FootPoint| ContactPoint {
        side,
        kind,
        link: side.foot(),
        offset: match kind {
            FootPoint::Heel => [-config.heel_length, -config.ankle_height],
            FootPoint::Toe => [config.toe_length, -config.ankle_height],
        },
    };
    let contact_points = [
        point(Side::Right, FootPoint::Heel),
        point(Side::Right, FootPoint::Toe),
        point(Side::Left, FootPoint::Heel),
        point(Side::Left, FootPoint::Toe),
    ];

    let leg = [config.hip.nominal, config.knee.nominal, config.ankle.nominal];
    let nominal_posture = [leg[0], leg[1], leg[2], leg[0], leg[1], leg[2]];
    let friction = [FrictionParams {
        viscous_damping: config.joint_damping,
        dry_friction: config.joint_dry_friction,
    }; NUM_JOINTS];

    let mut model = RobotModel {
        links,
        joints,
        contact_points,
        nominal_posture,
        nominal_root_height: 0.0,
        friction,
        gravity: config.gravity,
    };
    let lowest = super::kinematics::lowest_contact_height(&model, [0.0, 0.0, 0.0], &nominal_posture);
    model.nominal_root_height = positive("nominal_root_height", -lowest)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mass_bookkeeping() {
        let model = build_planar_biped(&ModelConfig::default()).unwrap();
        assert_eq!(model.links.len(), NUM_LINKS);
        assert_eq!(model.joints.len(), NUM_JOINTS);
        assert!((model.total_mass() - 100.0).abs() < 1e-9);
        assert!(model.links.iter().all(|l| l.mass > 0.0 && l.inertia > 0.0));
        assert!(model.nominal_root_height > 0.0);
    }

    #[test]
    fn rejects_zero_thigh() {
        let cfg = ModelConfig {
            thigh_length: 0.0,
            ..Default::default()
        };
        assert!(matches!(build_planar_biped(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_negative_mass_and_bad_limits() {
        let cfg = ModelConfig {
            shank_mass: -1.0,
            ..Default::default()
        };
        assert!(build_planar_biped(&cfg).is_err());
        let mut cfg = ModelConfig::default();
        cfg.knee.lower = 0.5;
        cfg.knee.upper = 0.5;
        assert!(build_planar_biped(&cfg).is_err());
    }

    #[test]
    fn angle_coordinates_follow_chain() {
        let model = build_planar_biped(&ModelConfig::default()).unwrap();
        let (c, n) = model.angle_coordinates(Side::Left.foot());
        assert_eq!(&c[..n], &[2, 8, 7, 6]);
        let (_, n) = model.angle_coordinates(TORSO);
        assert_eq!(n, 1);
    }
}
