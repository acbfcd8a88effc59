//! Evaluation protocols: episode-length sweeps, ablations, GRF and phase traces.

pub mod gait;
pub mod scenario;
pub mod stats;
pub mod sweep;

pub use gait::{record_grf, record_phase_trace, GrfTrace, PhaseTrace, STANCE_THRESHOLD};
pub use scenario::{run_episode, scenario_env, EpisodeRecord, Scenario};
pub use stats::Summary;
pub use sweep::{ablation_suite, eval_episode_lengths, AblationReport, CellResult, EvalPolicy, SweepSpec};
