//! CSV export of per-step episode traces.

use std::io::Write;

use super::biped_env::StepInfo;
use super::reward::RewardBreakdown;
use crate::error::Result;

pub fn trace_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "step",
        "phi",
        "phase_action",
        "phase_offset",
        "mode",
        "reference",
        "reward",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(RewardBreakdown::NAMES.iter().map(|s| s.to_string()));
    h.extend(
        [
            "grf_right",
            "grf_left",
            "root_x",
            "root_z",
            "root_pitch",
            "root_vx",
            "root_vz",
            "root_pitch_rate",
            "compliance_right",
            "compliance_left",
            "terminated",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn record(info: &StepInfo, reward: f64) -> Vec<String> {
    let mut r = vec![
        info.step.to_string(),
        info.phi.to_string(),
        format!("{:e}", info.phase_action),
        info.phase_offset.to_string(),
        info.command.mode.name().to_string(),
        format!("{:e}", info.command.reference),
        format!("{:e}", reward),
    ];
    r.extend(info.breakdown.terms().iter().map(|t| format!("{t:e}")));
    for v in [
        info.grf[0],
        info.grf[1],
        info.root_pose[0],
        info.root_pose[1],
        info.root_pose[2],
        info.root_vel[0],
        info.root_vel[1],
        info.root_vel[2],
        info.compliance[0],
        info.compliance[1],
    ] {
        r.push(format!("{v:e}"));
    }
    r.push(info.termination.map_or("", |t| t.name()).to_string());
    r
}

/// Writes `(info, reward)` rows with a schema header.
pub fn write_trace<W: Write>(out: W, rows: &[(StepInfo, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header())?;
    for (info, reward) in rows {
        w.write_record(record(info, *reward))?;
    }
    w.flush()?;
    Ok(())
}
