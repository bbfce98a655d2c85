//! Trajectory extraction and assessment.
//!
//! Several rollouts per task are sampled, replay-verified, reduced to the
//! shortest verified one, and then pruned of steps the judge does not accept.

use crate::env::{infer_intent, judge_step, Action, Observation, ScreenState, StateDigest, Thought};
use crate::policy::{self, compress_history, BcExample, CompressedContext, ParamVector, PolicyConfig, TcsmConfig};
use crate::rl::RewardBreakdown;
use crate::seed;
use crate::taskgen::VerifiableTask;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GateError {
    #[error("no trajectories to select from")]
    EmptyInput,
    #[error("trajectory {0} is not verified")]
    Unverified(usize),
    #[error("digest chain broken at step {0}")]
    ChainBroken(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub before_digest: StateDigest,
    pub observation: Observation,
    pub thought: Thought,
    pub action: Action,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_logprobs: Option<[f64; 2]>,
    pub after_digest: StateDigest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_after_digest: Option<StateDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<RewardBreakdown>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ColdStart,
    Evolved,
    ExecReplay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub steps: Vec<Step>,
    pub verified: Option<bool>,
    pub source: Source,
    /// Seed of the rollout stream that produced it.
    pub seed: u64,
    /// Set when step filtering would have broken the trajectory.
    #[serde(default)]
    pub filter_fallback: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.action.clone()).collect()
    }

    /// Each step's `before_digest` equals its predecessor's `after_digest`.
    pub fn chain_ok(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].after_digest == w[1].before_digest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvolutionSchedule {
    pub switch_iteration: u64,
}

/// Who picks the actions during a rollout.
#[derive(Debug, Clone)]
pub enum PolicyRef {
    /// Replays the task's ground-truth script.
    ExecReplay,
    Learned {
        params: Arc<ParamVector>,
        cfg: PolicyConfig,
        source: Source,
    },
}

impl PolicyRef {
    pub fn learned(params: ParamVector, cfg: PolicyConfig, source: Source) -> Self {
        PolicyRef::Learned {
            params: Arc::new(params),
            cfg,
            source,
        }
    }

    pub fn source(&self) -> Source {
        match self {
            PolicyRef::ExecReplay => Source::ExecReplay,
            PolicyRef::Learned { source, .. } => *source,
        }
    }
}

fn record(before: &ScreenState, thought: Thought, action: Action, raw: String, lp: Option<[f64; 2]>) -> (Step, ScreenState) {
    let after = before.apply(&action);
    let step = Step {
        before_digest: before.digest(),
        observation: before.observe(),
        thought,
        action,
        raw,
        decision_logprobs: lp,
        after_digest: after.digest(),
        gt_after_digest: None,
        rewards: None,
    };
    (step, after)
}

/// Run one episode from the task's initial screen.
pub fn rollout(task: &VerifiableTask, policy: &PolicyRef, seed: u64, max_steps: usize) -> Trajectory {
    let mut state = task.initial_state();
    let mut steps = Vec::new();
    let mut history = vec![state.observe()];
    let mut rng = seed::rng(seed);
    for i in 0..max_steps.max(1) {
        let (thought, action, raw, lp) = match policy {
            PolicyRef::ExecReplay => {
                let Some(action) = task.exec.steps.get(i).cloned() else {
                    break;
                };
                let thought = infer_intent(&state, &action);
                let raw = policy::serialize(&thought, &action);
                (thought, action, raw, None)
            }
            PolicyRef::Learned { params, cfg, .. } => {
                let ctx = compress_history(&history, cfg.tcsm.k, cfg.tcsm.c);
                let r = policy::sample_response(params, &ctx, task.instruction(), cfg.temperature, &mut rng);
                (r.thought, r.action, r.raw, Some(r.decision_logprobs))
            }
        };
        let (step, after) = record(&state, thought, action, raw, lp);
        steps.push(step);
        state = after;
        if state.terminal {
            break;
        }
        history.push(state.observe());
    }
    Trajectory {
        task_id: task.id.clone(),
        steps,
        verified: None,
        source: policy.source(),
        seed,
        filter_fallback: false,
    }
}

/// Replay the actions from spawn, checking every digest on the way; the task
/// succeeds iff the final screen is terminal and satisfies the predicate.
pub fn replay_final(task: &VerifiableTask, traj: &Trajectory) -> Result<ScreenState, GateError> {
    let mut state = task.initial_state();
    for (i, step) in traj.steps.iter().enumerate() {
        if step.before_digest != state.digest() {
            return Err(GateError::ChainBroken(i));
        }
        state = state.apply(&step.action);
        if step.after_digest != state.digest() {
            return Err(GateError::ChainBroken(i));
        }
    }
    Ok(state)
}

pub fn verify(task: &VerifiableTask, traj: &mut Trajectory) -> Result<bool, GateError> {
    let last = replay_final(task, traj)?;
    let ok = last.terminal && task.verify.predicate.eval(&last);
    traj.verified = Some(ok);
    Ok(ok)
}

/// Fewest steps, then lowest rollout seed.
pub fn select_minimal(trajs: &[Trajectory]) -> Result<Trajectory, GateError> {
    if let Some(i) = trajs.iter().position(|t| t.verified != Some(true)) {
        return Err(GateError::Unverified(i));
    }
    trajs
        .iter()
        .min_by_key(|t| (t.len(), t.seed))
        .cloned()
        .ok_or(GateError::EmptyInput)
}

/// Drop every step the judge rejects (redundant, erroneous or without
/// effect), re-splice the chain by replay, and keep the result only if each
/// surviving step is judged successful and the whole still verifies.
/// Otherwise the input comes back unchanged with `filter_fallback` set.
pub fn filter_steps(task: &VerifiableTask, traj: &Trajectory) -> Trajectory {
    let Ok(states) = states_along(task, traj) else {
        return fallback(traj);
    };
    let keep: Vec<&Step> = traj
        .steps
        .iter()
        .zip(states.windows(2))
        .filter(|(step, w)| judge_step(&w[0], &w[1], &step.thought, &step.action).success)
        .map(|(step, _)| step)
        .collect();
    if keep.len() == traj.steps.len() {
        // Fixpoint: nothing to remove; only the verdict decides.
        let mut out = traj.clone();
        return match verify(task, &mut out) {
            Ok(true) => out,
            _ => fallback(traj),
        };
    }
    let mut state = task.initial_state();
    let mut steps = Vec::with_capacity(keep.len());
    for old in keep {
        let (step, after) = record(&state, old.thought.clone(), old.action.clone(), old.raw.clone(), old.decision_logprobs);
        if !judge_step(&state, &after, &step.thought, &step.action).success {
            return fallback(traj);
        }
        steps.push(step);
        state = after;
    }
    let mut out = Trajectory {
        steps,
        filter_fallback: false,
        ..traj.clone()
    };
    match verify(task, &mut out) {
        Ok(true) => out,
        _ => fallback(traj),
    }
}

fn fallback(traj: &Trajectory) -> Trajectory {
    Trajectory {
        filter_fallback: true,
        ..traj.clone()
    }
}

/// Screen states `s_0 ..= s_n` along a trajectory.
pub fn states_along(task: &VerifiableTask, traj: &Trajectory) -> Result<Vec<ScreenState>, GateError> {
    let mut state = task.initial_state();
    let mut out = vec![state.clone()];
    for (i, step) in traj.steps.iter().enumerate() {
        if step.before_digest != state.digest() {
            return Err(GateError::ChainBroken(i));
        }
        state = state.apply(&step.action);
        out.push(state.clone());
    }
    Ok(out)
}

pub fn sampler_for_iteration(schedule: &EvolutionSchedule, iteration: u64, cold: &PolicyRef, latest: &PolicyRef) -> PolicyRef {
    if iteration < schedule.switch_iteration {
        cold.clone()
    } else {
        latest.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateConfig {
    pub k_rollouts: usize,
    pub max_steps: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            k_rollouts: 8,
            max_steps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub trajectory: Trajectory,
    pub rollouts: Vec<Trajectory>,
    /// No sampled rollout verified; the ground-truth script stood in.
    pub used_exec_replay: bool,
}

/// Rollout seeds are derived from `(seed, task id, rollout index)`.
pub fn rollout_seed(seed: u64, task_id: &str, index: usize) -> u64 {
    seed::derive_indexed(seed, &format!("rollout/{task_id}"), index as u64)
}

/// Full extraction for one task: sample, verify, select, filter, and stamp
/// each step's ground-truth outcome.
pub fn extract(task: &VerifiableTask, policy: &PolicyRef, cfg: &GateConfig, seed: u64) -> GateOutcome {
    let mut rollouts: Vec<Trajectory> = (0..cfg.k_rollouts.max(1))
        .map(|i| rollout(task, policy, rollout_seed(seed, &task.id, i), cfg.max_steps))
        .collect();
    for t in rollouts.iter_mut() {
        let _ = verify(task, t);
    }
    let verified: Vec<Trajectory> = rollouts.iter().filter(|t| t.verified == Some(true)).cloned().collect();
    let (chosen, used_exec_replay) = match select_minimal(&verified) {
        Ok(t) => (t, false),
        Err(_) => {
            let mut t = rollout(task, &PolicyRef::ExecReplay, seed, task.exec.steps.len());
            let _ = verify(task, &mut t);
            (t, true)
        }
    };
    let mut trajectory = filter_steps(task, &chosen);
    for step in trajectory.steps.iter_mut() {
        step.gt_after_digest = Some(step.after_digest.clone());
    }
    GateOutcome {
        trajectory,
        rollouts,
        used_exec_replay,
    }
}

/// The compressed context each step was decided in.
pub fn step_contexts(traj: &Trajectory, tcsm: &TcsmConfig) -> Vec<CompressedContext> {
    let history: Vec<Observation> = traj.steps.iter().map(|s| s.observation.clone()).collect();
    (1..=history.len())
        .map(|j| compress_history(&history[..j], tcsm.k, tcsm.c))
        .collect()
}

/// Behavior-cloning examples from a trajectory's decisions.
pub fn bc_examples(task: &VerifiableTask, traj: &Trajectory, tcsm: &TcsmConfig) -> Vec<BcExample> {
    step_contexts(traj, tcsm)
        .into_iter()
        .zip(&traj.steps)
        .map(|(context, step)| BcExample {
            context,
            instruction: task.instruction().to_string(),
            thought: step.thought.clone(),
            action: step.action.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests;
