//! The end-to-end self-play run.
//!
//! Stage seeds come from [`stage_seed`]: `tasks`, `eval`, `gate`, `train`,
//! `grounding`, `grounding.train`, `dare.planning`, `dare.grounding` and
//! `infer`.

use crate::config::{stage_seed, PipelineConfig};
use crate::io::{self, CliError};
use sea_core::gate::{self, PolicyRef, Source, Trajectory};
use sea_core::grounding::{self, GroundingSample};
use sea_core::infer::{self, EvalRow, InferenceConfig};
use sea_core::merge::{self, DareConfig};
use sea_core::policy::{self, BcConfig, ParamVector, PolicyConfig};
use sea_core::rl::{self, TrainLogRow, TRAIN_LOG_HEADER};
use sea_core::taskgen::{generate_corpus, TaskgenConfig, VerifiableTask};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub task_id: String,
    pub verified: bool,
    pub candidate_count: usize,
    pub chosen_index: usize,
    pub flagged: bool,
    pub chosen: Trajectory,
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub tasks: Vec<VerifiableTask>,
    pub eval_tasks: Vec<VerifiableTask>,
    pub trajectories: Vec<Trajectory>,
    pub cold: ParamVector,
    pub planning: ParamVector,
    pub train_log: Vec<TrainLogRow>,
    pub grounding_samples: Vec<GroundingSample>,
    pub grounding: ParamVector,
    pub merged: ParamVector,
    pub results: Vec<ResultRecord>,
}

pub fn corpus(count: usize, seed: u64, batch: usize) -> Result<Vec<VerifiableTask>, CliError> {
    generate_corpus(&TaskgenConfig { count, seed, batch })
        .map(|c| c.tasks)
        .map_err(CliError::invalid)
}

/// Behavior cloning on the ground-truth scripts of `tasks`.
pub fn cold_start(tasks: &[VerifiableTask], dim: usize, bc: &BcConfig) -> Result<ParamVector, CliError> {
    let mut examples = Vec::new();
    for task in tasks {
        let traj = gate::rollout(task, &PolicyRef::ExecReplay, 0, task.exec.steps.len());
        examples.extend(gate::bc_examples(task, &traj, &bc.tcsm));
    }
    let init = ParamVector::zeros(dim).map_err(CliError::invalid)?;
    policy::bc_pretrain(&init, &examples, bc)
        .map(|(p, _)| p)
        .map_err(CliError::invalid)
}

pub fn best_of_n_records(
    tasks: &[VerifiableTask],
    policy: &PolicyRef,
    cfg: &InferenceConfig,
) -> Result<Vec<ResultRecord>, CliError> {
    tasks
        .iter()
        .map(|task| {
            let r = infer::best_of_n(task, policy, cfg).map_err(CliError::invalid)?;
            Ok(ResultRecord {
                task_id: task.id.clone(),
                verified: r.chosen.verified == Some(true),
                candidate_count: r.candidates.len(),
                chosen_index: r.chosen_index,
                flagged: r.flagged,
                chosen: r.chosen,
            })
        })
        .collect()
}

pub fn eval_rows(records: &[ResultRecord], n: usize) -> Vec<EvalRow> {
    records
        .iter()
        .map(|r| EvalRow {
            task_id: r.task_id.clone(),
            n,
            success: r.verified,
            steps: r.chosen.len(),
        })
        .collect()
}

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from("task_id,n,success,steps\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.task_id, r.n, u8::from(r.success), r.steps));
    }
    out
}

pub fn train_log_csv(rows: &[TrainLogRow]) -> String {
    let mut out = format!("{TRAIN_LOG_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

pub fn policy_config(cfg: &PipelineConfig) -> PolicyConfig {
    PolicyConfig {
        temperature: cfg.train.grpo.temperature,
        tcsm: cfg.train.tcsm,
    }
}

pub fn selfplay(cfg: &PipelineConfig) -> Result<Artifacts, CliError> {
    cfg.validate().map_err(CliError::invalid)?;
    let seed = cfg.seed;
    let tasks = corpus(cfg.tasks.count, stage_seed(seed, "tasks"), cfg.tasks.batch)?;
    let eval_tasks = corpus(cfg.eval_count, stage_seed(seed, "eval"), cfg.tasks.batch)?;

    let cold = cold_start(&tasks[..cfg.bc_tasks], cfg.dim, &cfg.bc)?;
    let cold_ref = PolicyRef::learned(cold.clone(), policy_config(cfg), Source::ColdStart);

    let train_tasks = &tasks[..cfg.train_tasks];
    let gate_seed = stage_seed(seed, "gate");
    let trajectories: Vec<Trajectory> = train_tasks
        .iter()
        .map(|t| gate::extract(t, &cold_ref, &cfg.train.gate, gate_seed).trajectory)
        .collect();
    let (planning, train_log) =
        rl::train(train_tasks, &trajectories, &cold, &cfg.train, stage_seed(seed, "train")).map_err(CliError::invalid)?;

    let grounding_samples = grounding::generate_samples(cfg.grounding_samples, cfg.grounding_jitters, stage_seed(seed, "grounding"));
    let gcfg = grounding::GroundingConfig {
        seed: stage_seed(seed, "grounding.train"),
        ..cfg.grounding
    };
    let grounding = grounding::train_grounding(&grounding_samples, &cold, &gcfg);

    let merged = merge_models(&cold, &planning, &grounding, cfg.drop_rate, seed)?;

    let infer_cfg = InferenceConfig {
        seed: stage_seed(seed, "infer"),
        ..cfg.infer
    };
    let merged_ref = PolicyRef::learned(merged.clone(), policy_config(cfg), Source::Evolved);
    let results = best_of_n_records(&eval_tasks, &merged_ref, &infer_cfg)?;

    Ok(Artifacts {
        tasks,
        eval_tasks,
        trajectories,
        cold,
        planning,
        train_log,
        grounding_samples,
        grounding,
        merged,
        results,
    })
}

/// `base + dare(planning - base) + dare(grounding - base)` with per-delta
/// stage seeds.
pub fn merge_models(
    base: &ParamVector,
    planning: &ParamVector,
    grounding: &ParamVector,
    drop_rate: f64,
    seed: u64,
) -> Result<ParamVector, CliError> {
    let tvp = merge::task_vector(planning, base, "planning").map_err(CliError::invalid)?;
    let tvg = merge::task_vector(grounding, base, "grounding").map_err(CliError::invalid)?;
    merge::merge(
        base,
        &[
            (
                tvp,
                DareConfig {
                    drop_rate,
                    seed: stage_seed(seed, "dare.planning"),
                },
            ),
            (
                tvg,
                DareConfig {
                    drop_rate,
                    seed: stage_seed(seed, "dare.grounding"),
                },
            ),
        ],
    )
    .map_err(CliError::invalid)
}

/// File names inside the output directory.
pub const FILES: [&str; 11] = [
    "tasks.jsonl",
    "eval_tasks.jsonl",
    "trajectories.jsonl",
    "cold.ckpt",
    "planning.ckpt",
    "train_log.csv",
    "grounding.jsonl",
    "grounding.ckpt",
    "merged.ckpt",
    "results.jsonl",
    "eval.csv",
];

pub fn write_artifacts(dir: &Path, a: &Artifacts, n: usize) -> Result<(), CliError> {
    io::write_jsonl(&dir.join("tasks.jsonl"), &a.tasks)?;
    io::write_jsonl(&dir.join("eval_tasks.jsonl"), &a.eval_tasks)?;
    io::write_jsonl(&dir.join("trajectories.jsonl"), &a.trajectories)?;
    io::write_checkpoint(&dir.join("cold.ckpt"), &a.cold)?;
    io::write_checkpoint(&dir.join("planning.ckpt"), &a.planning)?;
    io::write_bytes(&dir.join("train_log.csv"), train_log_csv(&a.train_log).as_bytes())?;
    io::write_jsonl(&dir.join("grounding.jsonl"), &a.grounding_samples)?;
    io::write_checkpoint(&dir.join("grounding.ckpt"), &a.grounding)?;
    io::write_checkpoint(&dir.join("merged.ckpt"), &a.merged)?;
    io::write_jsonl(&dir.join("results.jsonl"), &a.results)?;
    io::write_bytes(&dir.join("eval.csv"), eval_csv(&eval_rows(&a.results, n)).as_bytes())
}
