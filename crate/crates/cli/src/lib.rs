//! Command-line surface for the training pipeline.
//!
//! [`run`] dispatches one subcommand and maps failures onto exit codes:
//! 0 on success, 1 for usage or validation errors, 2 for I/O errors.

pub mod config;
pub mod io;
pub mod pipeline;

use clap::{Parser, Subcommand};
use config::PipelineConfig;
use io::CliError;
use sea_core::env;
use sea_core::gate::{self, GateConfig, PolicyRef, Source, Trajectory};
use sea_core::grounding::{self, GroundingSample};
use sea_core::infer::InferenceConfig;
use sea_core::policy::{self, ParamVector, PolicyConfig, TcsmConfig};
use sea_core::rl;
use sea_core::taskgen::VerifiableTask;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "sea", about = "Desk-scale computer-use agent training")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Synthesize and closed-loop validate a task corpus.
    GenTasks {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Candidate programs synthesized per draft.
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one filtered trajectory per task from K rollouts.
    Rollout {
        #[arg(long)]
        tasks: PathBuf,
        /// Checkpoint to sample from; the ground-truth scripts when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        k_rollouts: usize,
        #[arg(long, default_value_t = 8)]
        max_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Step-wise GRPO from a cold start.
    Train {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cold-start checkpoint; behavior cloning on the trajectories when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write a grounding sample corpus.
    GenGrounding {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        jitters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the grounding head with the IoU reward.
    TrainGrounding {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop-and-rescale merge of the planning and grounding deltas.
    Merge {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        planning: PathBuf,
        #[arg(long)]
        grounding: PathBuf,
        #[arg(long)]
        drop_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best-of-N inference.
    Infer {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 8)]
        max_steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-task success as CSV for one or more N.
    Eval {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 8)]
        max_steps: usize,
    },
    /// Run the whole pipeline: tasks, cold start, GATE, GRPO, grounding,
    /// merge and best-of-N inference.
    Selfplay {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Inspect the simulated desktop.
    Env {
        #[command(subcommand)]
        cmd: EnvCmd,
    },
}

#[derive(Debug, Subcommand)]
enum EnvCmd {
    /// Print a freshly spawned screen as JSON.
    Dump {
        #[arg(long)]
        template: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print only what the agent observes.
        #[arg(long)]
        observation: bool,
    },
}

/// Run with process stdout.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout())
}

/// Run, writing command output to `out`. Diagnostics go to stderr.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_tasks(path: &Path) -> Result<Vec<VerifiableTask>, CliError> {
    io::read_jsonl(path)
}

fn read_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => PipelineConfig::parse(&io::read_text(p)?).map_err(|e| CliError::Parse {
            path: p.to_path_buf(),
            line: 0,
            message: e.to_string(),
        }),
        None => Ok(PipelineConfig::default()),
    }
}

fn learned(path: &Path, temperature: f64, tcsm: TcsmConfig) -> Result<PolicyRef, CliError> {
    let params = io::read_checkpoint(path)?;
    Ok(PolicyRef::learned(params, PolicyConfig { temperature, tcsm }, Source::Evolved))
}

fn check_temperature(t: f64) -> Result<(), CliError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("temperature must be > 0, got {t}")))
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Cmd::GenTasks { count, seed, batch, out: path } => {
            let tasks = pipeline::corpus(count, seed, batch)?;
            io::write_jsonl(&path, &tasks)
        }
        Cmd::Rollout {
            tasks,
            policy,
            k_rollouts,
            max_steps,
            seed,
            temperature,
            out: path,
        } => {
            check_temperature(temperature)?;
            if k_rollouts == 0 || max_steps == 0 {
                return Err(CliError::Validation("--k-rollouts and --max-steps must be >= 1".into()));
            }
            let tasks = read_tasks(&tasks)?;
            let policy = match policy {
                Some(p) => learned(&p, temperature, TcsmConfig::default())?,
                None => PolicyRef::ExecReplay,
            };
            let cfg = GateConfig { k_rollouts, max_steps };
            let trajs: Vec<Trajectory> = tasks.iter().map(|t| gate::extract(t, &policy, &cfg, seed).trajectory).collect();
            io::write_jsonl(&path, &trajs)
        }
        Cmd::Train {
            tasks,
            trajectories,
            config,
            init,
            seed,
            out: path,
            log,
        } => {
            let cfg = read_config(config.as_deref())?;
            let tasks = read_tasks(&tasks)?;
            let trajs: Vec<Trajectory> = io::read_jsonl(&trajectories)?;
            let cold = match init {
                Some(p) => io::read_checkpoint(&p)?,
                None => {
                    let mut examples = Vec::new();
                    for t in &trajs {
                        let task = tasks
                            .iter()
                            .find(|k| k.id == t.task_id)
                            .ok_or_else(|| CliError::Validation(format!("no task `{}`", t.task_id)))?;
                        examples.extend(gate::bc_examples(task, t, &cfg.bc.tcsm));
                    }
                    let zero = ParamVector::zeros(cfg.dim).map_err(CliError::invalid)?;
                    policy::bc_pretrain(&zero, &examples, &cfg.bc).map_err(CliError::invalid)?.0
                }
            };
            let seed = seed.unwrap_or_else(|| config::stage_seed(cfg.seed, "train"));
            let (params, rows) = rl::train(&tasks, &trajs, &cold, &cfg.train, seed).map_err(CliError::invalid)?;
            io::write_checkpoint(&path, &params)?;
            match log {
                Some(l) => io::write_bytes(&l, pipeline::train_log_csv(&rows).as_bytes()),
                None => Ok(()),
            }
        }
        Cmd::GenGrounding {
            count,
            jitters,
            seed,
            out: path,
        } => io::write_jsonl(&path, &grounding::generate_samples(count, jitters, seed)),
        Cmd::TrainGrounding {
            samples,
            init,
            config,
            seed,
            out: path,
        } => {
            let cfg = read_config(config.as_deref())?;
            let samples: Vec<GroundingSample> = io::read_jsonl(&samples)?;
            if let Some(i) = samples.iter().position(|s| s.gt_index().is_none()) {
                return Err(CliError::Validation(format!("sample {} lacks its true box among the candidates", i + 1)));
            }
            let init = io::read_checkpoint(&init)?;
            let gcfg = grounding::GroundingConfig {
                seed: seed.unwrap_or_else(|| config::stage_seed(cfg.seed, "grounding.train")),
                ..cfg.grounding
            };
            io::write_checkpoint(&path, &grounding::train_grounding(&samples, &init, &gcfg))
        }
        Cmd::Merge {
            base,
            planning,
            grounding,
            drop_rate,
            seed,
            out: path,
        } => {
            let base = io::read_checkpoint(&base)?;
            let planning = io::read_checkpoint(&planning)?;
            let grounding = io::read_checkpoint(&grounding)?;
            let merged = pipeline::merge_models(&base, &planning, &grounding, drop_rate, seed)?;
            io::write_checkpoint(&path, &merged)
        }
        Cmd::Infer {
            tasks,
            policy,
            n,
            seed,
            temperature,
            max_steps,
            out: path,
        } => {
            check_temperature(temperature)?;
            let tasks = read_tasks(&tasks)?;
            let cfg = InferenceConfig {
                n,
                temperature,
                seed,
                max_steps,
                ..InferenceConfig::default()
            };
            let policy = learned(&policy, temperature, cfg.tcsm)?;
            let records = pipeline::best_of_n_records(&tasks, &policy, &cfg)?;
            io::write_jsonl(&path, &records)
        }
        Cmd::Eval {
            tasks,
            policy,
            n,
            seed,
            temperature,
            max_steps,
        } => {
            check_temperature(temperature)?;
            let tasks = read_tasks(&tasks)?;
            let policy = learned(&policy, temperature, TcsmConfig::default())?;
            let mut rows = Vec::new();
            for n in n {
                let cfg = InferenceConfig {
                    n,
                    temperature,
                    seed,
                    max_steps,
                    ..InferenceConfig::default()
                };
                let records = pipeline::best_of_n_records(&tasks, &policy, &cfg)?;
                rows.extend(pipeline::eval_rows(&records, n));
            }
            write_out(out, pipeline::eval_csv(&rows).as_bytes())
        }
        Cmd::Selfplay { config, out_dir } => {
            let cfg = read_config(config.as_deref())?;
            let dir = out_dir.unwrap_or_else(|| cfg.out_dir.clone());
            let artifacts = pipeline::selfplay(&cfg)?;
            pipeline::write_artifacts(&dir, &artifacts, cfg.infer.n)?;
            let ok = artifacts.results.iter().filter(|r| r.verified).count();
            write_out(
                out,
                format!("selfplay: {ok}/{} eval tasks solved; artifacts in {}\n", artifacts.results.len(), dir.display())
                    .as_bytes(),
            )
        }
        Cmd::Env {
            cmd: EnvCmd::Dump {
                template,
                seed,
                observation,
            },
        } => {
            let state = env::spawn(&template, seed).map_err(CliError::invalid)?;
            let json = if observation {
                serde_json::to_string_pretty(&state.observe())
            } else {
                serde_json::to_string_pretty(&state)
            }
            .expect("states serialize");
            write_out(out, format!("{json}\n").as_bytes())
        }
    }
}

fn write_out(out: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    out.write_all(bytes).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}
