//! Gait analyses: foot-force recordings with stance detection and phase traces.

use std::io::Write;

use super::scenario::{run_episode, scenario_env, Scenario};
use super::stats::Summary;
use super::sweep::EvalPolicy;
use crate::env::{CommandSchedule, ComplianceMode, ModeCommand};
use crate::error::{Error, Result};

/// A foot is in stance while its vertical force exceeds this fraction of body weight.
pub const STANCE_THRESHOLD: f64 = 0.05;

/// Longest recording, s.
pub const MAX_TRACE_DURATION: f64 = 60.0;

/// Contiguous runs of `true` that start and end inside the series, in samples.
pub fn complete_runs(flags: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                // a run already active at sample 0 may be truncated
                if s > 0 {
                    runs.push(i - s);
                }
                start = None;
            }
            _ => {}
        }
    }
    runs
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrfRow {
    pub time: f64,
    pub phi: u32,
    /// `[right, left]`, N.
    pub grf: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrfTrace {
    pub rows: Vec<GrfRow>,
    pub body_weight: f64,
    /// Stance durations of both feet, s.
    pub stance: Summary,
    /// Swing durations of both feet, s.
    pub swing: Summary,
    /// Lowest root height seen, m (a fallen robot shows up here).
    pub min_root_height: f64,
}

impl GrfTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "time_s",
            "phi",
            "grf_right_n",
            "grf_left_n",
            "stance_right",
            "stance_left",
        ])?;
        let thr = STANCE_THRESHOLD * self.body_weight;
        for r in &self.rows {
            w.write_record([
                format!("{:.3}", r.time),
                r.phi.to_string(),
                format!("{:.3}", r.grf[0]),
                format!("{:.3}", r.grf[1]),
                u8::from(r.grf[0] > thr).to_string(),
                u8::from(r.grf[1] > thr).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scenario used for gait recordings: one command for the whole run,
/// terrain of peak `height` with randomized compliance, termination off.
pub fn gait_scenario(height: f64, command: ModeCommand, duration: f64, control_rate: f64) -> Scenario {
    Scenario {
        height,
        compliance: ComplianceMode::Randomized,
        commands: CommandSchedule::Fixed {
            standing_time: 0.0,
            command,
        },
        terminate: false,
        steps: (duration * control_rate).round() as u32,
    }
}

/// Records per-step vertical foot forces for `duration` seconds and
/// summarizes stance and swing durations. Falls do not end the recording.
pub fn record_grf(policy: &EvalPolicy, scenario: &Scenario, seed: u64) -> Result<GrfTrace> {
    let rate = policy.config.env.control_rate;
    let duration = f64::from(scenario.steps) / rate;
    if !(duration > 0.0 && duration <= MAX_TRACE_DURATION + 1e-9) {
        return Err(Error::Config(format!(
            "duration must lie in (0, {MAX_TRACE_DURATION}] s"
        )));
    }
    let mut env = scenario_env(&policy.config, scenario, seed)?;
    let weight = env.model().total_mass() * env.model().gravity;
    let mut rows = Vec::new();
    let mut min_root_height = f64::INFINITY;
    run_episode(&policy.policy, &mut env, seed, &mut |info, _| {
        rows.push(GrfRow {
            time: f64::from(info.step + 1) / rate,
            phi: info.phi,
            grf: info.grf,
        });
        min_root_height = min_root_height.min(info.root_pose[1]);
    })?;
    let thr = STANCE_THRESHOLD * weight;
    let mut stance = Vec::new();
    let mut swing = Vec::new();
    for side in 0..2 {
        let flags: Vec<bool> = rows.iter().map(|r| r.grf[side] > thr).collect();
        let inverse: Vec<bool> = flags.iter().map(|f| !f).collect();
        stance.extend(complete_runs(&flags).into_iter().map(|n| n as f64 / rate));
        swing.extend(complete_runs(&inverse).into_iter().map(|n| n as f64 / rate));
    }
    Ok(GrfTrace {
        rows,
        body_weight: weight,
        stance: Summary::of(&stance),
        swing: Summary::of(&swing),
        min_root_height,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRow {
    pub time: f64,
    pub phi: u32,
    pub phase_action: f64,
    pub offset: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrace {
    pub rows: Vec<PhaseRow>,
    /// Durations between successive wraps of the phase, s.
    pub cycles: Summary,
    /// Recorded time divided by the number of wraps, s; infinite without a
    /// wrap. Unlike `cycles` it counts time the phase spends stalled.
    pub overall_cycle: f64,
}

impl PhaseTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "phi", "phase_action", "phase_offset"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:.3}", r.time),
                r.phi.to_string(),
                format!("{:.6}", r.phase_action),
                r.offset.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Times at which the unwrapped phase first reaches each multiple of the
/// period, given per-step increments.
pub fn wrap_times(increments: &[i64], period: i64, dt: f64) -> Vec<f64> {
    let mut unwrapped = 0i64;
    let mut next = period;
    let mut out = Vec::new();
    for (i, d) in increments.iter().enumerate() {
        unwrapped += d;
        while unwrapped >= next {
            out.push((i + 1) as f64 * dt);
            next += period;
        }
    }
    out
}

/// Mean time between phase wraps; empty with fewer than two wraps.
pub fn mean_cycle(wraps: &[f64]) -> Summary {
    let d: Vec<f64> = wraps.windows(2).map(|w| w[1] - w[0]).collect();
    Summary::of(&d)
}

/// Recording time per wrap.
pub fn overall_cycle(wraps: usize, duration: f64) -> f64 {
    if wraps == 0 {
        f64::INFINITY
    } else {
        duration / wraps as f64
    }
}

/// Logs the phase and the phase-offset action of a clock-control policy.
pub fn record_phase_trace(policy: &EvalPolicy, scenario: &Scenario, seed: u64) -> Result<PhaseTrace> {
    if !policy.policy.clock_control || !policy.config.env.clock_control {
        return Err(Error::Contract(format!("{} has no phase action", policy.name)));
    }
    phase_trace_unchecked(policy, scenario, seed)
}

/// Phase trace for any policy (a fixed clock yields constant cycles).
pub fn phase_trace_unchecked(policy: &EvalPolicy, scenario: &Scenario, seed: u64) -> Result<PhaseTrace> {
    let rate = policy.config.env.control_rate;
    let period = i64::from(policy.config.env.cycle_period);
    let mut env = scenario_env(&policy.config, scenario, seed)?;
    let mut rows = Vec::new();
    run_episode(&policy.policy, &mut env, seed, &mut |info, _| {
        rows.push(PhaseRow {
            time: f64::from(info.step + 1) / rate,
            phi: info.phi,
            phase_action: info.phase_action,
            offset: info.phase_offset,
        });
    })?;
    let increments: Vec<i64> = rows.iter().map(|r| 1 + r.offset).collect();
    let wraps = wrap_times(&increments, period, 1.0 / rate);
    let duration = rows.len() as f64 / rate;
    Ok(PhaseTrace {
        rows,
        cycles: mean_cycle(&wraps),
        overall_cycle: overall_cycle(wraps.len(), duration),
    })
}
