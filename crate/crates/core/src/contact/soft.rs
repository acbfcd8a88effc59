//! Penalty contact parameterized by a time constant, in the spirit of a
//! mass-spring-damper contact reference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::actuation::{smooth_sign, smooth_sign_secant};

/// Slip scale of the regularized Coulomb friction, m/s.
pub const CONTACT_SLIP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub time_constant: f64,
    pub damping_ratio: f64,
    pub friction_coeff: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            time_constant: 0.02,
            damping_ratio: 1.0,
            friction_coeff: 1.0,
        }
    }
}

impl ContactParams {
    pub fn stiffness(&self, m_eff: f64) -> f64 {
        m_eff / (self.time_constant * self.time_constant)
    }

    pub fn damping(&self, m_eff: f64) -> f64 {
        2.0 * self.damping_ratio * m_eff / self.time_constant
    }
}

/// Contact force at one point together with its local derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactForce {
    pub normal: f64,
    pub tangential: f64,
    /// `dN/d(penetration)` while the contact pushes.
    pub normal_stiffness: f64,
    /// `-dN/d(normal_vel)` while the contact pushes.
    pub normal_damping: f64,
    /// Secant friction coefficient, `tangential == -tangent_damping * tangent_vel`.
    pub tangent_damping: f64,
}

/// Spring-damper normal force with regularized Coulomb friction.
///
/// `k = m_eff / τ²`, `c = 2ζ m_eff / τ`; the normal force never pulls.
pub fn contact_force(
    params: &ContactParams,
    penetration: f64,
    normal_vel: f64,
    tangent_vel: f64,
    m_eff: f64,
) -> ContactForce {
    debug_assert!(m_eff > 0.0);
    if penetration <= 0.0 {
        return ContactForce::default();
    }
    let k = params.stiffness(m_eff);
    let c = params.damping(m_eff);
    let raw = k * penetration - c * normal_vel;
    if raw <= 0.0 {
        return ContactForce::default();
    }
    let mu = params.friction_coeff;
    ContactForce {
        normal: raw,
        tangential: -mu * raw * smooth_sign(tangent_vel, CONTACT_SLIP),
        normal_stiffness: k,
        normal_damping: c,
        tangent_damping: mu * raw * smooth_sign_secant(tangent_vel, CONTACT_SLIP),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplianceRange {
    pub min: f64,
    pub max: f64,
}

impl Default for ComplianceRange {
    fn default() -> Self {
        Self { min: 0.02, max: 0.4 }
    }
}

/// Draws one foot time constant uniformly from `range`.
pub fn sample_compliance(rng: &mut impl Rng, range: ComplianceRange) -> f64 {
    rng.gen_range(range.min..=range.max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(tc: f64) -> ContactParams {
        ContactParams {
            time_constant: tc,
            ..Default::default()
        }
    }

    #[test]
    fn separated_contact_is_free() {
        let f = contact_force(&params(0.1), -0.01, -1.0, 1.0, 50.0);
        assert_eq!((f.normal, f.tangential), (0.0, 0.0));
    }

    #[test]
    fn spring_oracle() {
        // k = m_eff / τ² = 50 / 0.01
        let f = contact_force(&params(0.1), 0.01, 0.0, 0.0, 50.0);
        assert!((f.normal - 50.0).abs() < 1e-9);
        assert_eq!(f.tangential, 0.0);
    }

    #[test]
    fn stiffness_ratio_between_extremes() {
        let soft = contact_force(&params(0.4), 0.001, 0.0, 0.0, 30.0).normal;
        let stiff = contact_force(&params(0.02), 0.001, 0.0, 0.0, 30.0).normal;
        assert!((stiff / soft - 400.0).abs() < 1e-9);
    }

    #[test]
    fn friction_opposes_sliding_and_saturates() {
        let f = contact_force(&params(0.05), 0.002, 0.0, 2.0, 25.0);
        assert!((f.tangential + f.normal).abs() < 1e-9);
    }

    #[test]
    fn compliance_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_compliance(&mut rng, ComplianceRange::default()))
            .collect();
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(0.0, f64::max);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(min >= 0.02 && max <= 0.4);
        assert!((mean - 0.21).abs() < 0.01, "{mean}");
        let mut again = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(sample_compliance(&mut again, ComplianceRange::default()), xs[0]);
    }

    proptest! {
        #[test]
        fn normal_never_pulls(pen in -0.05..0.05f64, vn in -3.0..3.0f64, vt in -3.0..3.0f64,
                              tc in 0.02..0.4f64, m in 1.0..100.0f64) {
            let f = contact_force(&params(tc), pen, vn, vt, m);
            prop_assert!(f.normal >= 0.0);
            if pen <= 0.0 { prop_assert_eq!(f.normal, 0.0); }
            prop_assert!(f.tangential * vt <= 0.0);
        }
    }
}
