//! Instruction-to-box grounding.
//!
//! Grounding is a softmax over candidate boxes: the true widget rectangle,
//! jittered copies of it and the other widgets' rectangles. The group reward
//! is the thresholded IoU against the true box.

use crate::env::{self, Action, Observation, Rect, WidgetKind, CANVAS_H, CANVAS_W};
use crate::policy::features::{self, Scene};
use crate::policy::{compress_history, fit_decisions, Decision, ParamVector, SegmentKind};
use crate::rl::{self, GroupSample};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub type GroundingBox = Rect;

pub const IOU_THRESHOLD: f64 = 0.7;
pub const IOU_EPSILON: f64 = 1e-6;

/// Intersection over union; two empty boxes score 0.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// `min(1, v / (1[v <= threshold] + eps))` for an IoU value `v`.
pub fn reward_from_iou(v: f64, threshold: f64, eps: f64) -> f64 {
    let indicator = if v <= threshold { 1.0 } else { 0.0 };
    (v * (1.0 / (indicator + eps))).min(1.0)
}

pub fn grounding_reward(bp: &Rect, bgt: &Rect, threshold: f64, eps: f64) -> f64 {
    reward_from_iou(iou(bp, bgt), threshold, eps)
}

fn clip_to_canvas(r: Rect) -> Rect {
    let w = r.w.clamp(1, CANVAS_W);
    let h = r.h.clamp(1, CANVAS_H);
    Rect::new(r.x.clamp(0, CANVAS_W - w), r.y.clamp(0, CANVAS_H - h), w, h)
}

/// `gt` followed by `count` perturbed copies. The first copy is shifted
/// horizontally by half the width; later ones get random shifts and scales.
pub fn jittered_candidates(gt: &Rect, rng: &mut seed::Rng, count: usize) -> Vec<Rect> {
    let mut out = vec![*gt];
    if count == 0 {
        return out;
    }
    let half = gt.w / 2;
    let right = Rect::new(gt.x + half, gt.y, gt.w, gt.h);
    let shifted = if right.inside_canvas() {
        right
    } else {
        Rect::new(gt.x - half, gt.y, gt.w, gt.h)
    };
    out.push(clip_to_canvas(shifted));
    while out.len() < count + 1 {
        let dx = rng.gen_range(-gt.w..=gt.w) / 2;
        let dy = rng.gen_range(-gt.h..=gt.h) / 2;
        let sw = rng.gen_range(0.6..1.5);
        let sh = rng.gen_range(0.6..1.5);
        let w = ((gt.w as f64) * sw).round() as i32;
        let h = ((gt.h as f64) * sh).round() as i32;
        out.push(clip_to_canvas(Rect::new(gt.x + dx, gt.y + dy, w, h)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingSample {
    pub instruction: String,
    pub observation: Observation,
    pub gt_box: Rect,
    pub candidate_boxes: Vec<Rect>,
}

impl GroundingSample {
    pub fn gt_index(&self) -> Option<usize> {
        self.candidate_boxes.iter().position(|b| *b == self.gt_box)
    }
}

/// Grounding corpus drawn from the desktop templates. Some screens get a
/// menu opened first so menu items are represented.
pub fn generate_samples(count: usize, jitters: usize, seed: u64) -> Vec<GroundingSample> {
    (0..count)
        .map(|i| {
            let mut rng = seed::rng(seed::derive_indexed(seed, "grounding", i as u64));
            let template = *env::TEMPLATE_IDS.choose(&mut rng).expect("non-empty");
            let mut state = env::spawn(template, rng.gen_range(0..crate::taskgen::SEED_SPACE)).expect("registered");
            let menus: Vec<Rect> = state
                .widgets
                .iter()
                .filter(|w| w.kind == WidgetKind::Menu)
                .map(|w| w.rect)
                .collect();
            if !menus.is_empty() && rng.gen_bool(0.4) {
                let r = menus.choose(&mut rng).expect("non-empty");
                state = state.apply(&Action::click_at(r));
            }
            let obs = state.observe();
            let targets: Vec<_> = obs.widgets.iter().filter(|w| w.kind.is_interactive()).collect();
            let target = *targets.choose(&mut rng).expect("every template has interactive widgets");
            let instruction = format!("Click the {} {}", target.label, features::kind_noun(target.kind));
            let mut unique = Vec::new();
            for b in jittered_candidates(&target.rect, &mut rng, jitters)
                .into_iter()
                .chain(obs.widgets.iter().map(|w| w.rect))
            {
                if !unique.contains(&b) {
                    unique.push(b);
                }
            }
            unique.shuffle(&mut rng);
            GroundingSample {
                instruction,
                gt_box: target.rect,
                candidate_boxes: unique,
                observation: obs,
            }
        })
        .collect()
}

/// The box-choice decision of a sample, with `chosen` set to `chosen`.
pub fn decision(params: &ParamVector, sample: &GroundingSample, chosen: usize) -> Decision {
    let ctx = compress_history(std::slice::from_ref(&sample.observation), 1, 0);
    let current = ctx.current().expect("one frame");
    let scene = Scene::new(&ctx, current, &sample.instruction);
    Decision {
        features: sample
            .candidate_boxes
            .iter()
            .map(|b| features::grounding_features(params.layout(), &scene, b))
            .collect(),
        chosen,
    }
}

/// Index of the highest-scoring candidate; the first wins ties.
pub fn predict(params: &ParamVector, sample: &GroundingSample) -> usize {
    let scores = decision(params, sample, 0).scores(params);
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose argmax candidate is the true box.
pub fn accuracy(params: &ParamVector, samples: &[GroundingSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| s.candidate_boxes[predict(params, s)] == s.gt_box)
        .count();
    hits as f64 / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundingConfig {
    pub sft_epochs: usize,
    pub iterations: usize,
    pub batch: usize,
    pub grpo: rl::GrpoConfig,
    pub iou_threshold: f64,
    pub iou_epsilon: f64,
    pub seed: u64,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig {
            sft_epochs: 20,
            iterations: 60,
            batch: 16,
            grpo: rl::GrpoConfig::default(),
            iou_threshold: IOU_THRESHOLD,
            iou_epsilon: IOU_EPSILON,
            seed: 0,
        }
    }
}

/// Coordinates that belong to the grounding or shared segments.
pub fn grounding_mask(params: &ParamVector) -> Vec<bool> {
    let mut mask = vec![false; params.dim()];
    for kind in [SegmentKind::GroundingHead, SegmentKind::SharedFeatures] {
        for i in params.layout().segment(kind).range() {
            mask[i] = true;
        }
    }
    mask
}

/// Supervised warm start on the true box, then GRPO with the IoU reward.
/// Both phases use the GRPO learning rate. Only the grounding and shared
/// segments move.
pub fn train_grounding(samples: &[GroundingSample], init: &ParamVector, cfg: &GroundingConfig) -> ParamVector {
    let mask = grounding_mask(init);
    let labelled: Vec<Vec<Decision>> = samples
        .iter()
        .filter_map(|s| s.gt_index().map(|i| vec![decision(init, s, i)]))
        .collect();
    let lr = cfg.grpo.learning_rate;
    let (warm, _) = fit_decisions(init, &labelled, cfg.sft_epochs, lr, cfg.grpo.temperature, Some(&mask));
    if samples.is_empty() || cfg.grpo.learning_rate == 0.0 {
        return warm;
    }
    let reference = warm.clone();
    let mut theta = warm;
    for it in 0..cfg.iterations {
        let mut rng = seed::rng(seed::derive_indexed(cfg.seed, "grounding-grpo", it as u64));
        let old = theta.clone();
        let mut total = vec![0.0; theta.dim()];
        let mut groups = 0usize;
        for _ in 0..cfg.batch {
            let sample = &samples[rng.gen_range(0..samples.len())];
            let base = decision(&old, sample, 0);
            let lps = base.log_probs(&old, cfg.grpo.temperature);
            let mut decisions = Vec::with_capacity(cfg.grpo.group_size);
            let mut old_logprobs = Vec::with_capacity(cfg.grpo.group_size);
            let mut rewards = Vec::with_capacity(cfg.grpo.group_size);
            for _ in 0..cfg.grpo.group_size {
                let c = crate::policy::sample_index(&lps, &mut rng);
                rewards.push(grounding_reward(
                    &sample.candidate_boxes[c],
                    &sample.gt_box,
                    cfg.iou_threshold,
                    cfg.iou_epsilon,
                ));
                old_logprobs.push(vec![lps[c]]);
                decisions.push(vec![Decision {
                    chosen: c,
                    ..base.clone()
                }]);
            }
            let Ok(advantages) = rl::group_advantages(&rewards, cfg.grpo.sigma_floor) else {
                continue;
            };
            let group = GroupSample {
                decisions,
                old_logprobs,
                rewards,
                advantages,
            };
            let (_, grad) = rl::grpo_objective(&group, &theta, &reference, &cfg.grpo);
            for (t, g) in total.iter_mut().zip(grad) {
                *t += g;
            }
            groups += 1;
        }
        let scale = cfg.grpo.learning_rate / groups.max(1) as f64;
        for (i, v) in theta.values.iter_mut().enumerate() {
            if mask[i] {
                *v += scale * total[i];
            }
        }
    }
    theta
}
