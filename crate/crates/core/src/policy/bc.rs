//! Behavior-cloning cold start.

use super::tcsm::CompressedContext;
use super::{Decision, DecisionPoint, ParamVector, PolicyError, TcsmConfig};
use crate::env::{Action, Thought};

/// One ground-truth decision point.
#[derive(Debug, Clone)]
pub struct BcExample {
    pub context: CompressedContext,
    pub instruction: String,
    pub thought: Thought,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcConfig {
    pub epochs: usize,
    pub lr: f64,
    pub temperature: f64,
    pub tcsm: TcsmConfig,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            epochs: 30,
            lr: 0.5,
            temperature: 1.0,
            tcsm: TcsmConfig::default(),
        }
    }
}

fn mean_nll(params: &ParamVector, examples: &[Vec<Decision>], temperature: f64) -> f64 {
    let total: f64 = examples
        .iter()
        .flat_map(|ds| ds.iter().map(|d| d.logprob(params, temperature)))
        .sum();
    -total / examples.len().max(1) as f64
}

/// Full-batch gradient ascent on the mean log-likelihood of the chosen
/// options. Coordinates with `mask[i] == false` are never updated.
///
/// Returns the parameters and the loss (mean negative log-likelihood per
/// example) before every epoch, followed by the final loss.
pub fn fit_decisions(
    init: &ParamVector,
    examples: &[Vec<Decision>],
    epochs: usize,
    lr: f64,
    temperature: f64,
    mask: Option<&[bool]>,
) -> (ParamVector, Vec<f64>) {
    let mut params = init.clone();
    let mut losses = Vec::with_capacity(epochs + 1);
    if epochs == 0 || examples.is_empty() {
        return (params, losses);
    }
    let scale = 1.0 / examples.len() as f64;
    for _ in 0..epochs {
        losses.push(mean_nll(&params, examples, temperature));
        let mut grad = vec![0.0; params.dim()];
        for ds in examples {
            for d in ds {
                d.add_grad_logprob(&params, temperature, scale, &mut grad);
            }
        }
        for (i, (v, g)) in params.values.iter_mut().zip(&grad).enumerate() {
            if mask.is_none_or(|m| m[i]) {
                *v += lr * g;
            }
        }
    }
    losses.push(mean_nll(&params, examples, temperature));
    (params, losses)
}

/// Fit the thought and action heads to ground-truth decisions.
pub fn bc_pretrain(
    init: &ParamVector,
    examples: &[BcExample],
    cfg: &BcConfig,
) -> Result<(ParamVector, Vec<f64>), PolicyError> {
    let mut decisions = Vec::with_capacity(examples.len());
    for ex in examples {
        let dp = DecisionPoint::new(init.layout(), &ex.context, &ex.instruction).ok_or(PolicyError::CandidateMismatch)?;
        decisions.push(dp.decisions(&ex.thought, &ex.action)?.to_vec());
    }
    Ok(fit_decisions(init, &decisions, cfg.epochs, cfg.lr, cfg.temperature, None))
}
