//! Walking-mode commands and their randomized switching.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::clock::{phase_coefficients, GaitClock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Standing,
    Inplace,
    Forward,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Standing, Mode::Inplace, Mode::Forward];

    /// `[1,0,0]` forward, `[0,1,0]` in place, `[0,0,1]` standing.
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            Mode::Forward => [1.0, 0.0, 0.0],
            Mode::Inplace => [0.0, 1.0, 0.0],
            Mode::Standing => [0.0, 0.0, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Standing => "standing",
            Mode::Inplace => "inplace",
            Mode::Forward => "forward",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "standing" => Ok(Mode::Standing),
            "inplace" => Ok(Mode::Inplace),
            "forward" => Ok(Mode::Forward),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCommand {
    pub mode: Mode,
    /// Forward speed in m/s for `Forward`, 0 otherwise.
    pub reference: f64,
}

impl ModeCommand {
    pub const STANDING: Self = Self {
        mode: Mode::Standing,
        reference: 0.0,
    };

    pub fn forward(speed: f64) -> Self {
        Self {
            mode: Mode::Forward,
            reference: speed,
        }
    }

    pub fn inplace() -> Self {
        Self {
            mode: Mode::Inplace,
            reference: 0.0,
        }
    }

    pub fn new(mode: Mode, reference: f64) -> Self {
        match mode {
            Mode::Forward => Self::forward(reference),
            _ => Self { mode, reference: 0.0 },
        }
    }
}

/// Draws a uniformly random mode with a freshly sampled reference.
pub fn propose_mode(rng: &mut impl Rng, forward_speed: (f64, f64)) -> ModeCommand {
    let mode = Mode::ALL[rng.gen_range(0..Mode::ALL.len())];
    let reference = match mode {
        Mode::Forward => rng.gen_range(forward_speed.0..=forward_speed.1),
        _ => 0.0,
    };
    ModeCommand { mode, reference }
}

/// Whether `current -> next` may happen at this clock phase: transitions into or
/// out of standing need the schedule to be in double support.
pub fn transition_allowed(current: Mode, next: Mode, clock: &GaitClock) -> bool {
    let touches_standing = current != next && (current == Mode::Standing || next == Mode::Standing);
    !touches_standing || phase_coefficients(clock).in_double_support
}

/// Random mode switching with deferral of gated transitions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeSwitcher {
    pending: Option<ModeCommand>,
    proposals: u64,
}

impl ModeSwitcher {
    pub fn pending(&self) -> Option<ModeCommand> {
        self.pending
    }

    pub fn clear(&mut self) {
        self.pending = None;
    }

    /// Number of proposals drawn so far.
    pub fn proposals(&self) -> u64 {
        self.proposals
    }

    /// One control step of switching: with probability `p` a new command is
    /// proposed; a proposal that is not yet allowed stays pending.
    pub fn step(
        &mut self,
        rng: &mut impl Rng,
        clock: &GaitClock,
        current: ModeCommand,
        p: f64,
        forward_speed: (f64, f64),
    ) -> ModeCommand {
        if self.pending.is_none() && rng.gen_bool(p.clamp(0.0, 1.0)) {
            self.pending = Some(propose_mode(rng, forward_speed));
            self.proposals += 1;
        }
        match self.pending {
            Some(next) if transition_allowed(current.mode, next.mode, clock) => {
                self.pending = None;
                next
            }
            _ => current,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_hot_encoding() {
        assert_eq!(Mode::Standing.one_hot(), [0.0, 0.0, 1.0]);
        assert_eq!(Mode::Inplace.one_hot(), [0.0, 1.0, 0.0]);
        assert_eq!(Mode::Forward.one_hot(), [1.0, 0.0, 0.0]);
        for m in Mode::ALL {
            assert_eq!(m.one_hot().iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn standing_exit_deferred_in_single_support() {
        let single = GaitClock::with_phase(16, 80);
        let ds = GaitClock::with_phase(36, 80);
        let mut sw = ModeSwitcher {
            pending: Some(ModeCommand::forward(0.2)),
            proposals: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = sw.step(&mut rng, &single, ModeCommand::STANDING, 0.0, (0.1, 0.4));
        assert_eq!(out, ModeCommand::STANDING);
        assert!(sw.pending().is_some());
        let out = sw.step(&mut rng, &ds, ModeCommand::STANDING, 0.0, (0.1, 0.4));
        assert_eq!(out.mode, Mode::Forward);
        assert!(sw.pending().is_none());
    }

    #[test]
    fn walking_modes_switch_any_time() {
        let single = GaitClock::with_phase(16, 80);
        assert!(transition_allowed(Mode::Inplace, Mode::Forward, &single));
        assert!(!transition_allowed(Mode::Inplace, Mode::Standing, &single));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let c = propose_mode(&mut rng, (0.1, 0.4));
            match c.mode {
                Mode::Forward => assert!((0.1..=0.4).contains(&c.reference)),
                _ => assert_eq!(c.reference, 0.0),
            }
        }
    }

    #[test]
    fn expected_switch_count() {
        // 400 steps at p = 1/200 gives two proposals per episode on average.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let episodes = 2000;
        let mut proposals = 0u64;
        for _ in 0..episodes {
            let mut sw = ModeSwitcher::default();
            let mut clock = GaitClock::new(80);
            let mut cmd = ModeCommand::inplace();
            for _ in 0..400 {
                cmd = sw.step(&mut rng, &clock, cmd, 1.0 / 200.0, (0.1, 0.4));
                clock = clock.advance(0.0, false).0;
            }
            proposals += sw.proposals();
        }
        let mean = proposals as f64 / episodes as f64;
        assert!((mean - 2.0).abs() < 0.15, "{mean}");
    }
}
