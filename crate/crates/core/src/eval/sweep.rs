//! Episode-length sweeps over obstacle height and the four-way ablation.

use std::io::Write;

use super::scenario::{run_episode, scenario_env, EpisodeRecord, Scenario};
use super::stats::Summary;
use crate::config::Config;
use crate::env::ComplianceMode;
use crate::error::{Error, Result};
use crate::learn::train::env_seed;
use crate::learn::{Checkpoint, Policy};

/// A policy under evaluation together with the configuration it was trained with.
#[derive(Clone, Debug)]
pub struct EvalPolicy {
    pub name: String,
    pub policy: Policy,
    pub config: Config,
}

impl EvalPolicy {
    pub fn from_checkpoint(name: impl Into<String>, ck: &Checkpoint) -> Result<Self> {
        let config = ck.config()?;
        if ck.header.obs_dim != crate::env::OBS_DIM {
            return Err(Error::Config(format!(
                "checkpoint observes {} values, env provides {}",
                ck.header.obs_dim,
                crate::env::OBS_DIM
            )));
        }
        Ok(Self {
            name: name.into(),
            policy: ck.policy(),
            config,
        })
    }

    pub fn load(name: impl Into<String>, path: &std::path::Path) -> Result<Self> {
        Self::from_checkpoint(name, &Checkpoint::load(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub heights: Vec<f64>,
    pub episodes: usize,
    pub compliance_randomized: bool,
    pub seed_base: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            heights: vec![0.04, 0.05, 0.06, 0.07],
            episodes: 100,
            compliance_randomized: true,
            seed_base: 1000,
        }
    }
}

/// Mean episode length of one policy in one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub policy: String,
    pub label: String,
    pub height: f64,
    pub lengths: Summary,
    pub episodes: Vec<EpisodeRecord>,
}

/// Evaluates `policy` for `episodes` seeded episodes of `scenario`. Episode
/// `i` uses the same seed for every policy and scenario.
pub fn evaluate_cell(
    policy: &EvalPolicy,
    scenario: &Scenario,
    label: &str,
    episodes: usize,
    seed_base: u64,
) -> Result<CellResult> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be >= 1".into()));
    }
    let mut records = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let seed = env_seed(seed_base, i as u64);
        let mut env = scenario_env(&policy.config, scenario, seed)?;
        records.push(run_episode(&policy.policy, &mut env, seed, &mut |_, _| {})?);
    }
    records.sort_by_key(|r| r.seed);
    let lengths: Vec<f64> = records.iter().map(|r| r.length).collect();
    Ok(CellResult {
        policy: policy.name.clone(),
        label: label.to_string(),
        height: scenario.height,
        lengths: Summary::of(&lengths),
        episodes: records,
    })
}

/// Height sweep: one cell per (height, policy).
pub fn eval_episode_lengths(policies: &[EvalPolicy], spec: &SweepSpec) -> Result<Vec<CellResult>> {
    if spec.heights.iter().any(|h| !(*h >= 0.0)) {
        return Err(Error::Config("heights must be >= 0".into()));
    }
    let mut out = Vec::new();
    for &h in &spec.heights {
        let scenario = Scenario::sweep(h, spec.compliance_randomized);
        for p in policies {
            out.push(evaluate_cell(
                p,
                &scenario,
                &format!("{h}"),
                spec.episodes,
                spec.seed_base,
            )?);
        }
    }
    Ok(out)
}

pub const ABLATION_VARIANTS: [&str; 4] = ["baseline", "uneven_rigid", "fixed_compliance", "terrain_randomized"];
pub const ABLATION_CONDITIONS: [&str; 4] = [
    "flat_rigid",
    "uneven_2cm_rigid",
    "flat_compliant_0.4",
    "uneven_2cm_randomized",
];

/// Fixed contact time constant of the soft-floor condition, s.
pub const SOFT_FLOOR_TIME_CONSTANT: f64 = 0.4;

pub fn ablation_scenarios() -> [Scenario; 4] {
    [
        Scenario::sweep(0.0, false),
        Scenario::sweep(0.02, false),
        Scenario::sweep(0.0, false).with_compliance(ComplianceMode::Fixed(SOFT_FLOOR_TIME_CONSTANT)),
        Scenario::sweep(0.02, true),
    ]
}

/// `cells[variant][condition]`; `None` where the variant was not supplied.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub cells: Vec<Vec<Option<CellResult>>>,
}

pub fn ablation_suite(variants: &[Option<EvalPolicy>; 4], episodes: usize, seed_base: u64) -> Result<AblationReport> {
    let scenarios = ablation_scenarios();
    let mut cells = Vec::new();
    for v in variants {
        let mut row = Vec::new();
        for (s, label) in scenarios.iter().zip(ABLATION_CONDITIONS) {
            row.push(match v {
                Some(p) => Some(evaluate_cell(p, s, label, episodes, seed_base)?),
                None => None,
            });
        }
        cells.push(row);
    }
    Ok(AblationReport { cells })
}

/// `height,policy,episodes,mean_length_s,std_err_s`
pub fn write_sweep_csv<W: Write>(out: W, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["height_m", "policy", "episodes", "mean_length_s", "std_err_s"])?;
    for c in cells {
        w.write_record([
            format!("{}", c.height),
            c.policy.clone(),
            c.lengths.n.to_string(),
            format!("{:.4}", c.lengths.mean),
            format!("{:.4}", c.lengths.std_err),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `variant,condition,episodes,mean_length_s,std_err_s`; missing variants
/// appear as rows with empty statistics.
pub fn write_ablation_csv<W: Write>(out: W, report: &AblationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "condition", "episodes", "mean_length_s", "std_err_s"])?;
    for (v, row) in ABLATION_VARIANTS.iter().zip(&report.cells) {
        for (c, cell) in ABLATION_CONDITIONS.iter().zip(row) {
            match cell {
                Some(r) => w.write_record([
                    v.to_string(),
                    c.to_string(),
                    r.lengths.n.to_string(),
                    format!("{:.4}", r.lengths.mean),
                    format!("{:.4}", r.lengths.std_err),
                ])?,
                None => w.write_record([
                    v.to_string(),
                    c.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?,
            }
        }
    }
    w.flush()?;
    Ok(())
}
