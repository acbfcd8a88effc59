use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biped_core::config::Config;
use biped_core::env::trace::write_trace;
use biped_core::env::{CurriculumPhase, Mode, ModeCommand};
use biped_core::eval::gait::gait_scenario;
use biped_core::eval::sweep::{write_ablation_csv, write_sweep_csv, ABLATION_CONDITIONS, ABLATION_VARIANTS};
use biped_core::eval::{
    ablation_suite, eval_episode_lengths, record_grf, record_phase_trace, run_episode, scenario_env, EvalPolicy,
    Scenario, SweepSpec,
};
use biped_core::learn::train::IterationLog;
use biped_core::learn::{train_phase, ActorCritic, Checkpoint, Policy, RunningNorm};
use biped_core::{Error, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;

#[derive(Parser)]
#[command(name = "biped", about = "Planar biped locomotion: training and evaluation")]
struct Cli {
    /// Run configuration (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Flat-terrain pretraining from scratch.
    Train {
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Randomized-terrain finetuning from a flat-phase checkpoint.
    Finetune {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Mean episode length per obstacle height (Forward 0.3 m/s after 1 s standing).
    EvalSweep {
        /// `name=path` or `path`; repeatable.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.04,0.05,0.06,0.07")]
        heights: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Keep the default rigid contact instead of randomized compliance.
        #[arg(long)]
        rigid: bool,
    },
    /// Four training variants on four terrain conditions; absent variants are reported as gaps.
    Ablation {
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        uneven_rigid: Option<PathBuf>,
        #[arg(long)]
        fixed_compliance: Option<PathBuf>,
        #[arg(long)]
        terrain_randomized: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
    },
    /// Per-step vertical foot forces with stance/swing statistics.
    TraceGrf {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value = "inplace")]
        mode: Mode,
        #[arg(long, default_value_t = 0.3)]
        speed: f64,
        #[arg(long, default_value_t = 0.04)]
        height: f64,
    },
    /// Phase and phase-offset action of a clock-control policy.
    TracePhase {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "forward")]
        mode: Mode,
        #[arg(long, default_value_t = 0.4)]
        speed: f64,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.0)]
        height: f64,
    },
    /// One deterministic evaluation episode dumped as CSV. Without a
    /// checkpoint an untrained policy initialized from --seed is used.
    Rollout {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        height: f64,
        /// Keep the default rigid contact instead of randomized compliance.
        #[arg(long)]
        rigid: bool,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn progress(log: &IterationLog) {
    eprintln!(
        "it {:5} samples {:9} ep_reward {:8.3} ep_len {:6.2}s step_reward {:.3} kl {:.4} std {:.3} {:.2}s",
        log.iteration,
        log.samples,
        log.mean_ep_reward,
        log.mean_ep_len,
        log.mean_step_reward,
        log.update.loss.approx_kl,
        log.log_std.exp(),
        log.seconds
    );
}

fn command(mode: Mode, speed: f64) -> ModeCommand {
    match mode {
        Mode::Forward => ModeCommand::forward(speed),
        Mode::Inplace => ModeCommand::inplace(),
        Mode::Standing => ModeCommand::STANDING,
    }
}

fn create(out: &Path, name: &str) -> Result<File> {
    std::fs::create_dir_all(out)?;
    Ok(File::create(out.join(name))?)
}

fn named_checkpoint(spec: &str) -> Result<EvalPolicy> {
    let (name, path) = match spec.split_once('=') {
        Some((n, p)) => (n.to_string(), PathBuf::from(p)),
        None => {
            let p = PathBuf::from(spec);
            let name = p
                .parent()
                .and_then(|d| d.file_name())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (name, p)
        }
    };
    EvalPolicy::load(name, &path)
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.config)?;
    let out = &cli.out;
    match cli.cmd {
        Cmd::Train { iterations } => {
            let n = iterations.unwrap_or(config.train.flat_iterations);
            let r = train_phase(&config, CurriculumPhase::Flat, n, cli.seed, None, out, &mut progress)?;
            println!("{}", r.checkpoint.display());
        }
        Cmd::Finetune { from, iterations } => {
            let base = Checkpoint::load(&from)?;
            let n = iterations.unwrap_or(config.train.randomized_iterations);
            let r = train_phase(
                &config,
                CurriculumPhase::Randomized,
                n,
                cli.seed,
                Some(&base),
                out,
                &mut progress,
            )?;
            println!("{}", r.checkpoint.display());
        }
        Cmd::EvalSweep {
            checkpoints,
            heights,
            episodes,
            rigid,
        } => {
            let policies = checkpoints
                .iter()
                .map(|c| named_checkpoint(c))
                .collect::<Result<Vec<_>>>()?;
            let spec = SweepSpec {
                heights,
                episodes,
                compliance_randomized: !rigid,
                seed_base: cli.seed,
            };
            let cells = eval_episode_lengths(&policies, &spec)?;
            println!("{:>8} {:>20} {:>10} {:>8}", "height", "policy", "mean_s", "se_s");
            for c in &cells {
                println!(
                    "{:>8.3} {:>20} {:>10.3} {:>8.3}",
                    c.height, c.policy, c.lengths.mean, c.lengths.std_err
                );
            }
            write_sweep_csv(create(out, "sweep.csv")?, &cells)?;
        }
        Cmd::Ablation {
            baseline,
            uneven_rigid,
            fixed_compliance,
            terrain_randomized,
            episodes,
        } => {
            let load = |p: Option<PathBuf>, name: &str| p.map(|p| EvalPolicy::load(name, &p)).transpose();
            let variants = [
                load(baseline, ABLATION_VARIANTS[0])?,
                load(uneven_rigid, ABLATION_VARIANTS[1])?,
                load(fixed_compliance, ABLATION_VARIANTS[2])?,
                load(terrain_randomized, ABLATION_VARIANTS[3])?,
            ];
            let report = ablation_suite(&variants, episodes, cli.seed)?;
            print!("{:>20}", "");
            for c in ABLATION_CONDITIONS {
                print!(" {c:>22}");
            }
            println!();
            for (v, row) in ABLATION_VARIANTS.iter().zip(&report.cells) {
                print!("{v:>20}");
                for cell in row {
                    match cell {
                        Some(r) => print!(" {:>22.3}", r.lengths.mean),
                        None => print!(" {:>22}", "-"),
                    }
                }
                println!();
            }
            write_ablation_csv(create(out, "ablation.csv")?, &report)?;
        }
        Cmd::TraceGrf {
            checkpoint,
            duration,
            mode,
            speed,
            height,
        } => {
            let p = EvalPolicy::load("policy", &checkpoint)?;
            let sc = gait_scenario(height, command(mode, speed), duration, p.config.env.control_rate);
            let t = record_grf(&p, &sc, cli.seed)?;
            t.write_csv(create(out, "grf.csv")?)?;
            println!(
                "stance mean {:.3}s std {:.3}s (n={}); swing mean {:.3}s std {:.3}s (n={}); min root height {:.3} m",
                t.stance.mean, t.stance.std, t.stance.n, t.swing.mean, t.swing.std, t.swing.n, t.min_root_height
            );
        }
        Cmd::TracePhase {
            checkpoint,
            mode,
            speed,
            duration,
            height,
        } => {
            let p = EvalPolicy::load("policy", &checkpoint)?;
            let mut sc = gait_scenario(height, command(mode, speed), duration, p.config.env.control_rate);
            sc.compliance = biped_core::env::ComplianceMode::Rigid;
            let t = record_phase_trace(&p, &sc, cli.seed)?;
            t.write_csv(create(out, "phase.csv")?)?;
            let overall = if t.overall_cycle.is_finite() {
                format!("{:.3}s per wrap", t.overall_cycle)
            } else {
                "no wraps".to_string()
            };
            println!(
                "mean cycle {:.3}s std {:.3}s over {} cycles, overall {overall}",
                t.cycles.mean, t.cycles.std, t.cycles.n
            );
        }
        Cmd::Rollout {
            checkpoint,
            height,
            rigid,
        } => {
            let p = match checkpoint {
                Some(c) => EvalPolicy::load("policy", &c)?,
                None => {
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed);
                    let model = ActorCritic::new(
                        biped_core::env::OBS_DIM,
                        config.env.action_dim(),
                        &config.ppo.hidden,
                        config.ppo.init_log_std,
                        &mut rng,
                    )?;
                    EvalPolicy {
                        name: "untrained".into(),
                        policy: Policy {
                            model,
                            norm: RunningNorm::new(biped_core::env::OBS_DIM),
                            clock_control: config.env.clock_control,
                        },
                        config: config.clone(),
                    }
                }
            };
            let mut env = scenario_env(&p.config, &Scenario::sweep(height, !rigid), cli.seed)?;
            let mut rows = Vec::new();
            let rec = run_episode(&p.policy, &mut env, cli.seed, &mut |i, r| rows.push((i.clone(), r)))?;
            write_trace(create(out, "rollout.csv")?, &rows)?;
            println!(
                "length {:.3}s reward {:.3} termination {}",
                rec.length,
                rec.total_reward,
                rec.termination.map_or("none", |t| t.name())
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Contract(_) | Error::Checkpoint(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
