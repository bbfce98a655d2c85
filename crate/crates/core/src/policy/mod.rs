//! The trainable agent.
//!
//! A response is two factored softmax decisions: first a thought over the
//! distinct intents available on screen, then an action over every available
//! action, scored with the sampled thought in view. Both softmaxes are linear
//! in the parameters.

mod bc;
pub mod features;
mod format;
mod params;
mod tcsm;

pub use bc::{bc_pretrain, fit_decisions, BcConfig, BcExample};
pub use format::{parse, serialize, ParseError};
pub use params::{
    Layout, ParamError, ParamVector, Segment, SegmentKind, ACTION_WIDTH, DEFAULT_DIM, GROUNDING_WIDTH, MAGIC,
    SHARED_WIDTH, THOUGHT_WIDTH,
};
pub use tcsm::{compress_history, CompressedContext, CompressedRecord, TcsmConfig, PAD_ID};

use crate::env::{Action, Key, Thought, Verb, WidgetKind};
use crate::seed;
use features::{Features, Scene};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, thiserror::Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("response is not among the enumerated candidates")]
    CandidateMismatch,
}

/// One softmax decision: a feature vector per option and the option taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub features: Vec<Features>,
    pub chosen: usize,
}

/// Numerically stable log-softmax of `scores / temperature`.
pub fn log_softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = scores.iter().map(|s| s / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scaled.iter().map(|s| s - lse).collect()
}

impl Decision {
    pub fn scores(&self, params: &ParamVector) -> Vec<f64> {
        self.features.iter().map(|f| params.dot(f)).collect()
    }

    pub fn log_probs(&self, params: &ParamVector, temperature: f64) -> Vec<f64> {
        log_softmax(&self.scores(params), temperature)
    }

    pub fn logprob(&self, params: &ParamVector, temperature: f64) -> f64 {
        self.log_probs(params, temperature)[self.chosen]
    }

    /// `grad += scale * d logprob / d params`.
    pub fn add_grad_logprob(&self, params: &ParamVector, temperature: f64, scale: f64, grad: &mut [f64]) {
        if scale == 0.0 {
            return;
        }
        let lp = self.log_probs(params, temperature);
        for &(i, v) in &self.features[self.chosen] {
            grad[i] += scale * v / temperature;
        }
        for (f, l) in self.features.iter().zip(&lp) {
            let p = l.exp();
            for &(i, v) in f {
                grad[i] -= scale * p * v / temperature;
            }
        }
    }
}

/// Inverse-CDF draw from log-probabilities.
pub fn sample_index(log_probs: &[f64], rng: &mut seed::Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, l) in log_probs.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// The finite decision space on one screen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub pairs: Vec<(Thought, Action)>,
    pub thoughts: Vec<Thought>,
    pub actions: Vec<Action>,
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

/// Click per visible interactive widget, type per quoted string and visible
/// text field, the three keys, and done. A terminal screen offers only done.
pub fn candidates(ctx: &CompressedContext, instruction: &str) -> CandidateSet {
    let mut pairs = Vec::new();
    let current = ctx.current();
    if let Some(obs) = current.filter(|o| !o.terminal) {
        for w in obs.widgets.iter().filter(|w| w.kind.is_interactive()) {
            pairs.push((Thought::new(Verb::Click, Some(&w.id)), Action::click_at(&w.rect)));
        }
        let quoted = features::Cues::parse(instruction).quoted;
        for text in &quoted {
            for w in obs.widgets.iter().filter(|w| w.kind == WidgetKind::TextField) {
                pairs.push((Thought::new(Verb::Type, Some(&w.id)), Action::Type { text: text.clone() }));
            }
        }
        for key in Key::ALL {
            pairs.push((Thought::new(Verb::Key, None), Action::Key { key }));
        }
    }
    pairs.push((Thought::new(Verb::Done, None), Action::Done));

    let mut thoughts = Vec::new();
    let mut actions = Vec::new();
    for (t, a) in &pairs {
        push_unique(&mut thoughts, t.clone());
        push_unique(&mut actions, a.clone());
    }
    CandidateSet { pairs, thoughts, actions }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub temperature: f64,
    pub tcsm: TcsmConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            temperature: 1.0,
            tcsm: TcsmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub thought: Thought,
    pub action: Action,
    pub raw: String,
    /// Log-probabilities of the thought decision and the action decision.
    pub decision_logprobs: [f64; 2],
}

/// Scoring view of one decision point.
pub struct DecisionPoint<'a> {
    scene: Scene<'a>,
    pub set: CandidateSet,
    layout: Layout,
}

impl<'a> DecisionPoint<'a> {
    pub fn new(layout: &Layout, ctx: &'a CompressedContext, instruction: &str) -> Option<DecisionPoint<'a>> {
        let current = ctx.current()?;
        Some(DecisionPoint {
            scene: Scene::new(ctx, current, instruction),
            set: candidates(ctx, instruction),
            layout: layout.clone(),
        })
    }

    pub fn scene(&self) -> &Scene<'a> {
        &self.scene
    }

    pub fn thought_decision(&self, chosen: usize) -> Decision {
        Decision {
            features: self
                .set
                .thoughts
                .iter()
                .map(|t| features::thought_features(&self.layout, &self.scene, t))
                .collect(),
            chosen,
        }
    }

    pub fn action_decision(&self, thought: &Thought, chosen: usize) -> Decision {
        Decision {
            features: self
                .set
                .actions
                .iter()
                .map(|a| features::action_features(&self.layout, &self.scene, thought, a))
                .collect(),
            chosen,
        }
    }

    /// Joint score of a (thought, action) candidate.
    pub fn score(&self, params: &ParamVector, thought: &Thought, action: &Action) -> f64 {
        params.dot(&features::thought_features(&self.layout, &self.scene, thought))
            + params.dot(&features::action_features(&self.layout, &self.scene, thought, action))
    }

    pub fn sample(&self, params: &ParamVector, temperature: f64, rng: &mut seed::Rng) -> Response {
        let mut td = self.thought_decision(0);
        let tlp = td.log_probs(params, temperature);
        td.chosen = sample_index(&tlp, rng);
        let thought = self.set.thoughts[td.chosen].clone();
        let mut ad = self.action_decision(&thought, 0);
        let alp = ad.log_probs(params, temperature);
        ad.chosen = sample_index(&alp, rng);
        let action = self.set.actions[ad.chosen].clone();
        Response {
            raw: serialize(&thought, &action),
            decision_logprobs: [tlp[td.chosen], alp[ad.chosen]],
            thought,
            action,
        }
    }

    pub fn decisions(&self, thought: &Thought, action: &Action) -> Result<[Decision; 2], PolicyError> {
        let ti = self
            .set
            .thoughts
            .iter()
            .position(|t| t == thought)
            .ok_or(PolicyError::CandidateMismatch)?;
        let ai = self
            .set
            .actions
            .iter()
            .position(|a| a == action)
            .ok_or(PolicyError::CandidateMismatch)?;
        Ok([self.thought_decision(ti), self.action_decision(thought, ai)])
    }
}

/// Joint score of one candidate.
pub fn score(params: &ParamVector, ctx: &CompressedContext, instruction: &str, candidate: &(Thought, Action)) -> f64 {
    DecisionPoint::new(params.layout(), ctx, instruction)
        .map(|dp| dp.score(params, &candidate.0, &candidate.1))
        .unwrap_or(0.0)
}

/// Sample a response. A context without a current frame can only finish.
pub fn sample_response(
    params: &ParamVector,
    ctx: &CompressedContext,
    instruction: &str,
    temperature: f64,
    rng: &mut seed::Rng,
) -> Response {
    match DecisionPoint::new(params.layout(), ctx, instruction) {
        Some(dp) => dp.sample(params, temperature, rng),
        None => {
            let thought = Thought::new(Verb::Done, None);
            Response {
                raw: serialize(&thought, &Action::Done),
                thought,
                action: Action::Done,
                decision_logprobs: [0.0, 0.0],
            }
        }
    }
}

/// Per-decision log-probabilities of a response under `params`.
pub fn response_logprob(
    params: &ParamVector,
    ctx: &CompressedContext,
    instruction: &str,
    thought: &Thought,
    action: &Action,
    temperature: f64,
) -> Result<[f64; 2], PolicyError> {
    let dp = DecisionPoint::new(params.layout(), ctx, instruction).ok_or(PolicyError::CandidateMismatch)?;
    let [t, a] = dp.decisions(thought, action)?;
    Ok([t.logprob(params, temperature), a.logprob(params, temperature)])
}

#[cfg(test)]
mod tests;
