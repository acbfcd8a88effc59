//! Cyclic phase variable, its clock signal, and the stance schedule derived from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Largest phase offset a clock-control action may apply per step.
pub const MAX_PHASE_OFFSET: f64 = 5.0;

/// Width of the linear ramps of the stance schedule, as a fraction of the cycle.
pub const STANCE_RAMP: f64 = 0.02;

/// Integer phase counter `phi ∈ [0, period)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaitClock {
    phi: u32,
    period: u32,
}

impl GaitClock {
    pub fn new(period: u32) -> Self {
        assert!(period > 0, "cycle period must be positive");
        Self { phi: 0, period }
    }

    pub fn with_phase(phi: u32, period: u32) -> Self {
        let mut c = Self::new(period);
        c.phi = phi % period;
        c
    }

    pub fn phi(&self) -> u32 {
        self.phi
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    /// Normalized phase `phi / period`.
    pub fn fraction(&self) -> f64 {
        f64::from(self.phi) / f64::from(self.period)
    }

    /// `(sin(2π phi / L), cos(2π phi / L))`.
    pub fn signal(&self) -> (f64, f64) {
        (2.0 * PI * self.fraction()).sin_cos()
    }

    /// Advances one control step. With clock control the step is
    /// `1 + clip(a_dphi, -5, 5)` rounded to whole timesteps. Returns the new
    /// clock and the applied offset.
    pub fn advance(&self, a_dphi: f64, clock_control: bool) -> (Self, i64) {
        let offset = if clock_control && a_dphi.is_finite() {
            a_dphi.clamp(-MAX_PHASE_OFFSET, MAX_PHASE_OFFSET).round() as i64
        } else {
            0
        };
        let period = i64::from(self.period);
        let next = (i64::from(self.phi) + offset + 1).rem_euclid(period);
        (
            Self {
                phi: next as u32,
                period: self.period,
            },
            offset,
        )
    }
}

/// Per-foot load coefficients from the stance schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseCoefficients {
    pub right: f64,
    pub left: f64,
    pub in_double_support: bool,
}

impl PhaseCoefficients {
    pub const BOTH_STANCE: Self = Self {
        right: 1.0,
        left: 1.0,
        in_double_support: true,
    };

    pub fn by_side(&self) -> [f64; 2] {
        [self.right, self.left]
    }
}

// Right foot loaded over [0.9, 0.5), left over [0.4, 1.0): 40 % single support
// each with 10 % double-support windows at [0.4, 0.5) and [0.9, 1.0).
const RIGHT_STANCE: (f64, f64) = (0.9, 0.5);
const LEFT_STANCE: (f64, f64) = (0.4, 1.0);

fn stance_coefficient(x: f64, (start, end): (f64, f64)) -> f64 {
    let u = (x - start).rem_euclid(1.0);
    let len = (end - start).rem_euclid(1.0);
    let depth = if u < len {
        u.min(len - u)
    } else {
        -(u - len).min(1.0 - u)
    };
    (depth / STANCE_RAMP + 0.5).clamp(0.0, 1.0)
}

/// Stance (1) / swing (0) coefficients for both feet at the clock's phase.
pub fn phase_coefficients(clock: &GaitClock) -> PhaseCoefficients {
    let x = clock.fraction();
    let right = stance_coefficient(x, RIGHT_STANCE);
    let left = stance_coefficient(x, LEFT_STANCE);
    PhaseCoefficients {
        right,
        left,
        in_double_support: right >= 0.9 && left >= 0.9,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clock_quarter_points() {
        for (phi, (s, c)) in [(0, (0.0, 1.0)), (20, (1.0, 0.0)), (40, (0.0, -1.0)), (60, (-1.0, 0.0))] {
            let (gs, gc) = GaitClock::with_phase(phi, 80).signal();
            assert!((gs - s).abs() < 1e-9 && (gc - c).abs() < 1e-9, "phi={phi}");
        }
    }

    #[test]
    fn fixed_clock_wraps() {
        let (c, off) = GaitClock::with_phase(79, 80).advance(0.0, false);
        assert_eq!((c.phi(), off), (0, 0));
        // clock-control input ignored when disabled
        let (c, _) = GaitClock::with_phase(10, 80).advance(4.0, false);
        assert_eq!(c.phi(), 11);
    }

    #[test]
    fn offsets_clip() {
        assert_eq!(GaitClock::with_phase(10, 80).advance(10.0, true).0.phi(), 16);
        assert_eq!(GaitClock::with_phase(10, 80).advance(-10.0, true).0.phi(), 6);
        assert_eq!(GaitClock::with_phase(2, 80).advance(-5.0, true).0.phi(), 78);
        assert_eq!(GaitClock::with_phase(10, 80).advance(1.4, true).1, 1);
    }

    #[test]
    fn schedule_values() {
        let at = |f: f64| phase_coefficients(&GaitClock::with_phase((f * 80.0) as u32, 80));
        let mid_right = at(0.2);
        assert_eq!(
            (mid_right.right, mid_right.left, mid_right.in_double_support),
            (1.0, 0.0, false)
        );
        let ds = at(0.45);
        assert_eq!((ds.right, ds.left, ds.in_double_support), (1.0, 1.0, true));
        let mid_left = at(0.7);
        assert_eq!((mid_left.right, mid_left.left), (0.0, 1.0));
        let ds2 = at(0.95);
        assert!(ds2.in_double_support);
        // boundaries sit halfway up their ramps
        assert_eq!(at(0.5).right, 0.5);
        assert_eq!(at(0.4).left, 0.5);
    }

    #[test]
    fn schedule_is_periodic() {
        for phi in 0..80u32 {
            let a = phase_coefficients(&GaitClock::with_phase(phi, 80));
            let b = phase_coefficients(&GaitClock::with_phase(phi + 80, 80));
            assert_eq!(a, b);
        }
    }

    proptest! {
        #[test]
        fn phase_stays_in_range(start in 0u32..80, offsets in proptest::collection::vec(-20.0..20.0f64, 1..200)) {
            let mut c = GaitClock::with_phase(start, 80);
            for a in offsets {
                c = c.advance(a, true).0;
                prop_assert!(c.phi() < 80);
            }
            let (s, co) = c.signal();
            prop_assert!((s * s + co * co - 1.0).abs() < 1e-9);
        }
    }
}
