//! In-episode dynamics randomization and the memoryless event clock used by
//! every "every X seconds on average" rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::RobotModel;

/// Per-control-step probability of an event whose mean interval is `interval_s`.
pub fn event_probability(interval_s: f64, control_rate: f64) -> f64 {
    if interval_s <= 0.0 {
        return 0.0;
    }
    (1.0 / (interval_s * control_rate)).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsRanges {
    pub joint_damping: (f64, f64),
    pub joint_dry_friction: (f64, f64),
    pub mass_scale: (f64, f64),
    /// Maximum CoM shift per axis, m.
    pub com_shift: f64,
}

impl Default for DynamicsRanges {
    fn default() -> Self {
        Self {
            joint_damping: (0.2, 5.0),
            joint_dry_friction: (2.0, 8.0),
            mass_scale: (0.95, 1.05),
            com_shift: 0.01,
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Resamples joint friction, link masses and CoMs around the `base` model.
pub fn randomize_dynamics(base: &RobotModel, rng: &mut impl Rng, ranges: &DynamicsRanges) -> RobotModel {
    let mut model = base.clone();
    for f in model.friction.iter_mut() {
        f.viscous_damping = uniform(rng, ranges.joint_damping);
        f.dry_friction = uniform(rng, ranges.joint_dry_friction);
    }
    for (link, default) in model.links.iter_mut().zip(&base.links) {
        let scale = uniform(rng, ranges.mass_scale);
        link.mass = default.mass * scale;
        link.inertia = default.inertia * scale;
        for axis in 0..2 {
            link.com[axis] = default.com[axis] + uniform(rng, (-ranges.com_shift, ranges.com_shift));
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_planar_biped, ModelConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_within_table_ranges() {
        let base = build_planar_biped(&ModelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ranges = DynamicsRanges::default();
        for _ in 0..10_000 {
            let m = randomize_dynamics(&base, &mut rng, &ranges);
            for f in &m.friction {
                assert!((0.2..=5.0).contains(&f.viscous_damping));
                assert!((2.0..=8.0).contains(&f.dry_friction));
            }
            for (l, d) in m.links.iter().zip(&base.links) {
                let s = l.mass / d.mass;
                assert!((0.95 - 1e-12..=1.05 + 1e-12).contains(&s));
                assert!((l.com[0] - d.com[0]).abs() <= 0.01 + 1e-15);
                assert!((l.com[1] - d.com[1]).abs() <= 0.01 + 1e-15);
            }
        }
    }

    #[test]
    fn mean_interval_half_second() {
        let p = event_probability(0.5, 40.0);
        assert_eq!(p, 1.0 / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let steps = 200_000;
        let events = (0..steps).filter(|_| rng.gen_bool(p)).count();
        let interval = steps as f64 / events as f64 / 40.0;
        assert!((interval - 0.5).abs() < 0.02, "{interval}");
    }
}
