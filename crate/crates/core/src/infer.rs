//! Best-of-N inference with self-selection.

use crate::gate::{self, PolicyRef, Trajectory};
use crate::policy::{self, PolicyConfig, TcsmConfig};
use crate::seed;
use crate::taskgen::VerifiableTask;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Highest mean per-decision log-probability under the policy itself.
    SelfLogprob,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum InferError {
    #[error("n must be at least 1")]
    ZeroCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub n: usize,
    pub temperature: f64,
    pub selection: Selection,
    pub seed: u64,
    pub max_steps: usize,
    pub tcsm: TcsmConfig,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            n: 8,
            temperature: 1.0,
            selection: Selection::SelfLogprob,
            seed: 0,
            max_steps: 8,
            tcsm: TcsmConfig::default(),
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), InferError> {
        if self.n == 0 {
            return Err(InferError::ZeroCandidates);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestOfN {
    pub chosen: Trajectory,
    pub chosen_index: usize,
    /// No candidate had every response parse; the first one was returned.
    pub flagged: bool,
    pub candidates: Vec<Trajectory>,
}

/// Seed of candidate `i` for a task. It does not depend on `n`, so the first
/// candidates of a larger draw coincide with a smaller one.
pub fn candidate_seed(seed: u64, task_id: &str, i: usize) -> u64 {
    seed::derive_indexed(seed, &format!("infer/{task_id}"), i as u64)
}

/// Mean per-decision log-probability recorded during sampling.
pub fn mean_logprob(traj: &Trajectory) -> f64 {
    let lps: Vec<f64> = traj
        .steps
        .iter()
        .flat_map(|s| s.decision_logprobs.unwrap_or([0.0, 0.0]))
        .collect();
    if lps.is_empty() {
        return f64::NEG_INFINITY;
    }
    lps.iter().sum::<f64>() / lps.len() as f64
}

fn all_parse(traj: &Trajectory) -> bool {
    traj.steps.iter().all(|s| policy::parse(&s.raw).is_ok())
}

/// Index of the winner among `candidates` and whether the choice is flagged.
pub fn select(candidates: &[Trajectory], selection: Selection) -> (usize, bool) {
    match selection {
        Selection::SelfLogprob => {
            let best = candidates
                .iter()
                .enumerate()
                .filter(|(_, t)| all_parse(t))
                .max_by(|(_, a), (_, b)| {
                    mean_logprob(a)
                        .total_cmp(&mean_logprob(b))
                        .then(b.len().cmp(&a.len()))
                        .then(b.seed.cmp(&a.seed))
                });
            match best {
                Some((i, _)) => (i, false),
                None => (0, true),
            }
        }
    }
}

pub fn best_of_n(task: &VerifiableTask, policy: &PolicyRef, cfg: &InferenceConfig) -> Result<BestOfN, InferError> {
    cfg.validate()?;
    let policy = match policy {
        PolicyRef::Learned { params, source, .. } => PolicyRef::Learned {
            params: params.clone(),
            cfg: PolicyConfig {
                temperature: cfg.temperature,
                tcsm: cfg.tcsm,
            },
            source: *source,
        },
        PolicyRef::ExecReplay => PolicyRef::ExecReplay,
    };
    let candidates: Vec<Trajectory> = (0..cfg.n)
        .map(|i| {
            let mut t = gate::rollout(task, &policy, candidate_seed(cfg.seed, &task.id, i), cfg.max_steps);
            let _ = gate::verify(task, &mut t);
            t
        })
        .collect();
    let (chosen_index, flagged) = select(&candidates, cfg.selection);
    Ok(BestOfN {
        chosen: candidates[chosen_index].clone(),
        chosen_index,
        flagged,
        candidates,
    })
}

/// Per-task outcome for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub task_id: String,
    pub n: usize,
    pub success: bool,
    pub steps: usize,
}

pub fn evaluate(tasks: &[VerifiableTask], policy: &PolicyRef, cfg: &InferenceConfig) -> Result<Vec<EvalRow>, InferError> {
    tasks
        .iter()
        .map(|task| {
            let r = best_of_n(task, policy, cfg)?;
            Ok(EvalRow {
                task_id: task.id.clone(),
                n: cfg.n,
                success: r.chosen.verified == Some(true),
                steps: r.chosen.len(),
            })
        })
        .collect()
}

pub fn success_rate(rows: &[EvalRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64
}

#[cfg(test)]
mod tests;
