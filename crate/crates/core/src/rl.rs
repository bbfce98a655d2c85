//! Step-wise GRPO.
//!
//! Every training step samples a group of responses on one trajectory step,
//! scores each with the step, consistency and format rewards, normalizes the
//! totals within the group and ascends the clipped surrogate with a KL
//! penalty toward the cold-start reference.

use crate::env::{Action, Observation, ScreenState, StateDigest, Thought};
use crate::gate::{self, EvolutionSchedule, GateConfig, PolicyRef, Source, Step, Trajectory};
use crate::policy::{self, CompressedContext, Decision, DecisionPoint, ParamVector, PolicyConfig, PolicyError, TcsmConfig};
use crate::seed;
use crate::taskgen::VerifiableTask;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RlError {
    #[error("step has no ground-truth outcome")]
    MissingGroundTruth,
    #[error("group of {0} is too small; need at least 2")]
    GroupTooSmall(usize),
    #[error("trajectory for task `{0}` has no matching task")]
    UnknownTask(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Gate(#[from] gate::GateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_step: u8,
    pub r_consistency: u8,
    pub r_format: u8,
    pub total: u8,
}

impl RewardBreakdown {
    pub fn new(r_step: u8, r_consistency: u8, r_format: u8) -> Self {
        let mut b = RewardBreakdown {
            r_step,
            r_consistency,
            r_format,
            total: 0,
        };
        b.total = total_reward(&b);
        b
    }
}

pub fn step_reward(step: &Step) -> Result<u8, RlError> {
    let gt = step.gt_after_digest.as_ref().ok_or(RlError::MissingGroundTruth)?;
    Ok(u8::from(&step.after_digest == gt))
}

/// Verbs agree and, for clicks, the point lies inside the intended widget.
pub fn consistency_reward(thought: &Thought, action: &Action, observation: &Observation) -> u8 {
    if thought.intent_verb != action.verb() {
        return 0;
    }
    let ok = match action {
        Action::Click { x, y } => thought
            .intent_target
            .as_deref()
            .and_then(|id| observation.widget(id))
            .is_some_and(|w| w.rect.contains(*x, *y)),
        _ => true,
    };
    u8::from(ok)
}

pub fn format_reward(raw: &str) -> u8 {
    u8::from(policy::parse(raw).is_ok())
}

pub fn total_reward(b: &RewardBreakdown) -> u8 {
    b.r_step + b.r_consistency + b.r_format
}

/// Score a response emitted in `state` against the ground-truth outcome.
/// The step reward judges the action that `raw` actually encodes; an
/// unparseable response earns nothing beyond what its fields already say.
pub fn score_response(state: &ScreenState, gt: &StateDigest, thought: &Thought, action: &Action, raw: &str) -> RewardBreakdown {
    let after = state.apply(action);
    let obs = state.observe();
    RewardBreakdown::new(
        u8::from(&after.digest() == gt),
        consistency_reward(thought, action, &obs),
        format_reward(raw),
    )
}

/// `(r - mean) / std` with the population standard deviation. Groups whose
/// spread does not exceed `sigma_floor` get all-zero advantages.
pub fn group_advantages(rewards: &[f64], sigma_floor: f64) -> Result<Vec<f64>, RlError> {
    if rewards.len() < 2 {
        return Err(RlError::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma <= sigma_floor || sigma == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / sigma).collect())
}

/// `rho - ln(rho) - 1` with `rho = pi_ref / pi_theta`.
pub fn kl_value(logp_theta: f64, logp_ref: f64) -> f64 {
    let log_rho = logp_ref - logp_theta;
    log_rho.exp() - log_rho - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    pub clip_epsilon: f64,
    pub kl_beta: f64,
    pub group_size: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub sigma_floor: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            clip_epsilon: 0.2,
            kl_beta: 0.04,
            group_size: 8,
            learning_rate: 0.5,
            temperature: 1.0,
            sigma_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("clip_epsilon must lie in (0, 1), got {0}")]
    ClipEpsilon(f64),
    #[error("kl_beta must be >= 0, got {0}")]
    KlBeta(f64),
    #[error("group_size must be >= 2, got {0}")]
    GroupSize(usize),
    #[error("temperature must be > 0, got {0}")]
    Temperature(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("clip_epsilon", self.clip_epsilon),
            ("kl_beta", self.kl_beta),
            ("learning_rate", self.learning_rate),
            ("temperature", self.temperature),
            ("sigma_floor", self.sigma_floor),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::NonFinite(name));
            }
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(ConfigError::ClipEpsilon(self.clip_epsilon));
        }
        if self.kl_beta < 0.0 {
            return Err(ConfigError::KlBeta(self.kl_beta));
        }
        if self.group_size < 2 {
            return Err(ConfigError::GroupSize(self.group_size));
        }
        if self.temperature <= 0.0 {
            return Err(ConfigError::Temperature(self.temperature));
        }
        Ok(())
    }
}

/// G responses drawn from the old policy on one context.
#[derive(Debug, Clone)]
pub struct GroupSample {
    /// The decisions of each response: thought then action for the planner,
    /// a single box choice for grounding.
    pub decisions: Vec<Vec<Decision>>,
    pub old_logprobs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Objective value and its gradient with respect to `params`.
pub fn grpo_objective(
    group: &GroupSample,
    params: &ParamVector,
    reference: &ParamVector,
    cfg: &GrpoConfig,
) -> (f64, Vec<f64>) {
    let g = group.decisions.len().max(1) as f64;
    let eps = cfg.clip_epsilon;
    let mut value = 0.0;
    let mut grad = vec![0.0; params.dim()];
    for ((decisions, old), &adv) in group.decisions.iter().zip(&group.old_logprobs).zip(&group.advantages) {
        let len = decisions.len() as f64;
        let weight = 1.0 / (g * len);
        for (d, &lp_old) in decisions.iter().zip(old) {
            let lp = d.logprob(params, cfg.temperature);
            let ratio = (lp - lp_old).exp();
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
            let surrogate = unclipped.min(clipped);
            let mut coef = if unclipped <= clipped { adv * ratio } else { 0.0 };
            if cfg.kl_beta != 0.0 {
                let lp_ref = d.logprob(reference, cfg.temperature);
                value -= weight * cfg.kl_beta * kl_value(lp, lp_ref);
                coef -= cfg.kl_beta * (1.0 - (lp_ref - lp).exp());
            }
            value += weight * surrogate;
            d.add_grad_logprob(params, cfg.temperature, weight * coef, &mut grad);
        }
    }
    (value, grad)
}

/// Outer-loop settings around [`GrpoConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grpo: GrpoConfig,
    pub iterations: usize,
    /// Trajectory steps sampled per iteration.
    pub batch: usize,
    /// Gradient steps per iteration against the same old policy.
    pub inner_epochs: usize,
    pub tcsm: TcsmConfig,
    pub schedule: EvolutionSchedule,
    /// Regenerate the trajectory corpus every this many iterations; 0 never.
    pub regen_every: usize,
    pub gate: GateConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grpo: GrpoConfig::default(),
            iterations: 200,
            batch: 16,
            inner_epochs: 2,
            tcsm: TcsmConfig::default(),
            schedule: EvolutionSchedule { switch_iteration: 100 },
            regen_every: 50,
            gate: GateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub mean_total_reward: f64,
    pub mean_kl: f64,
    pub success_rate: f64,
}

pub const TRAIN_LOG_HEADER: &str = "iteration,mean_total_reward,mean_kl,success_rate";

impl TrainLogRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6}",
            self.iteration, self.mean_total_reward, self.mean_kl, self.success_rate
        )
    }
}

/// One trainable decision point with its replayed screen.
struct StepSite {
    task: usize,
    state: ScreenState,
    context: CompressedContext,
    gt: StateDigest,
}

fn sites(tasks: &[&VerifiableTask], trajs: &[Trajectory], tcsm: &TcsmConfig) -> Result<Vec<StepSite>, RlError> {
    let index: HashMap<&str, usize> = tasks.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
    let mut out = Vec::new();
    for traj in trajs {
        let ti = *index
            .get(traj.task_id.as_str())
            .ok_or_else(|| RlError::UnknownTask(traj.task_id.clone()))?;
        let states = gate::states_along(tasks[ti], traj)?;
        for ((step, ctx), state) in traj.steps.iter().zip(gate::step_contexts(traj, tcsm)).zip(states) {
            let gt = step.gt_after_digest.clone().ok_or(RlError::MissingGroundTruth)?;
            out.push(StepSite {
                task: ti,
                state,
                context: ctx,
                gt,
            });
        }
    }
    Ok(out)
}

/// Sample and score one group on a site.
fn sample_group(
    site: &StepSite,
    instruction: &str,
    old: &ParamVector,
    cfg: &GrpoConfig,
    rng: &mut seed::Rng,
) -> Result<(GroupSample, Vec<RewardBreakdown>), RlError> {
    let dp = DecisionPoint::new(old.layout(), &site.context, instruction).ok_or(PolicyError::CandidateMismatch)?;
    let mut decisions = Vec::with_capacity(cfg.group_size);
    let mut old_logprobs = Vec::with_capacity(cfg.group_size);
    let mut rewards = Vec::with_capacity(cfg.group_size);
    for _ in 0..cfg.group_size {
        let r = dp.sample(old, cfg.temperature, rng);
        rewards.push(score_response(&site.state, &site.gt, &r.thought, &r.action, &r.raw));
        decisions.push(dp.decisions(&r.thought, &r.action)?.to_vec());
        old_logprobs.push(r.decision_logprobs.to_vec());
    }
    let totals: Vec<f64> = rewards.iter().map(|b| f64::from(b.total)).collect();
    let advantages = group_advantages(&totals, cfg.sigma_floor)?;
    let group = GroupSample {
        decisions,
        old_logprobs,
        rewards: totals,
        advantages,
    };
    Ok((group, rewards))
}

/// GRPO from the cold start. `trajectories` must carry ground-truth digests.
///
/// The reference policy stays at `cold`; the old policy is refreshed at the
/// start of every iteration. When regeneration is on, the trajectory corpus
/// is re-extracted with the scheduled sampler.
pub fn train(
    tasks: &[VerifiableTask],
    trajectories: &[Trajectory],
    cold: &ParamVector,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ParamVector, Vec<TrainLogRow>), RlError> {
    let task_refs: Vec<&VerifiableTask> = tasks.iter().collect();
    let mut trajs = trajectories.to_vec();
    let mut all_sites = sites(&task_refs, &trajs, &cfg.tcsm)?;
    let mut theta = cold.clone();
    let mut log = Vec::with_capacity(cfg.iterations);
    let policy_cfg = PolicyConfig {
        temperature: cfg.grpo.temperature,
        tcsm: cfg.tcsm,
    };
    let cold_ref = PolicyRef::learned(cold.clone(), policy_cfg, Source::ColdStart);
    for it in 0..cfg.iterations {
        if cfg.regen_every > 0 && it > 0 && it % cfg.regen_every == 0 {
            let latest = PolicyRef::learned(theta.clone(), policy_cfg, Source::Evolved);
            let sampler = gate::sampler_for_iteration(&cfg.schedule, it as u64, &cold_ref, &latest);
            let regen_seed = seed::derive_indexed(seed, "regen", it as u64);
            trajs = trajs
                .iter()
                .map(|t| {
                    let task = task_refs
                        .iter()
                        .find(|k| k.id == t.task_id)
                        .expect("sites() checked every task id");
                    gate::extract(task, &sampler, &cfg.gate, regen_seed).trajectory
                })
                .collect();
            all_sites = sites(&task_refs, &trajs, &cfg.tcsm)?;
        }
        let mut rng = seed::rng(seed::derive_indexed(seed, "grpo", it as u64));
        let old = theta.clone();
        let mut groups = Vec::with_capacity(cfg.batch);
        let (mut reward_sum, mut kl_sum, mut hits, mut n_samples, mut n_dec) = (0.0, 0.0, 0usize, 0usize, 0usize);
        if !all_sites.is_empty() {
            for _ in 0..cfg.batch {
                let site = &all_sites[rng.gen_range(0..all_sites.len())];
                let (group, breakdowns) = sample_group(site, tasks[site.task].instruction(), &old, &cfg.grpo, &mut rng)?;
                for (b, (pair, lps)) in breakdowns.iter().zip(group.decisions.iter().zip(&group.old_logprobs)) {
                    reward_sum += f64::from(b.total);
                    hits += usize::from(b.r_step == 1);
                    n_samples += 1;
                    for (d, &lp) in pair.iter().zip(lps) {
                        kl_sum += kl_value(lp, d.logprob(cold, cfg.grpo.temperature));
                        n_dec += 1;
                    }
                }
                groups.push(group);
            }
        }
        for _ in 0..cfg.inner_epochs {
            let mut total = vec![0.0; theta.dim()];
            for group in &groups {
                let (_, grad) = grpo_objective(group, &theta, cold, &cfg.grpo);
                for (t, g) in total.iter_mut().zip(grad) {
                    *t += g;
                }
            }
            let scale = cfg.grpo.learning_rate / groups.len().max(1) as f64;
            if scale != 0.0 {
                for (v, g) in theta.values.iter_mut().zip(&total) {
                    *v += scale * g;
                }
            }
        }
        log.push(TrainLogRow {
            iteration: it,
            mean_total_reward: reward_sum / n_samples.max(1) as f64,
            mean_kl: kl_sum / n_dec.max(1) as f64,
            success_rate: hits as f64 / n_samples.max(1) as f64,
        });
    }
    Ok((theta, log))
}
