//! `sea.cfg`: plain `key = value` lines, `#` comments.
//!
//! Bare keys are the GRPO hyper-parameters; everything else is dotted by
//! stage. Unknown and repeated keys are errors.

use sea_core::gate::{EvolutionSchedule, GateConfig};
use sea_core::grounding::GroundingConfig;
use sea_core::infer::InferenceConfig;
use sea_core::policy::{BcConfig, TcsmConfig, DEFAULT_DIM};
use sea_core::rl::{GrpoConfig, TrainConfig};
use sea_core::seed;
use sea_core::taskgen::TaskgenConfig;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// Every stage's settings for one end-to-end run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dim: usize,
    pub tasks: TaskgenConfig,
    pub eval_count: usize,
    pub bc_tasks: usize,
    pub bc: BcConfig,
    pub train_tasks: usize,
    pub train: TrainConfig,
    pub grounding_samples: usize,
    pub grounding_jitters: usize,
    pub grounding: GroundingConfig,
    pub drop_rate: f64,
    pub infer: InferenceConfig,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let tcsm = TcsmConfig::default();
        PipelineConfig {
            seed: 0,
            dim: DEFAULT_DIM,
            tasks: TaskgenConfig::default(),
            eval_count: 40,
            bc_tasks: 20,
            bc: BcConfig {
                epochs: 10,
                lr: 0.5,
                temperature: 1.0,
                tcsm,
            },
            train_tasks: 100,
            train: TrainConfig {
                grpo: GrpoConfig::default(),
                iterations: 200,
                batch: 16,
                inner_epochs: 2,
                tcsm,
                schedule: EvolutionSchedule { switch_iteration: 100 },
                regen_every: 50,
                gate: GateConfig::default(),
            },
            grounding_samples: 200,
            grounding_jitters: 4,
            grounding: GroundingConfig::default(),
            drop_rate: 0.02,
            infer: InferenceConfig::default(),
            out_dir: PathBuf::from("selfplay_out"),
        }
    }
}

/// Stream seeds derived from the top-level seed: `derive(seed, stage)`.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    seed::derive(seed, stage)
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

/// Split a config text into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if !seen.insert(k.to_string()) {
            return Err(ConfigError::Duplicate {
                line,
                key: k.to_string(),
            });
        }
        out.push((line, k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        let mut c = PipelineConfig::default();
        for (line, key, value) in parse_pairs(text)? {
            c.set(line, &key, &value)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), ConfigError> {
        macro_rules! p {
            () => {
                parse_value(line, key, v)?
            };
        }
        let g = &mut self.train.grpo;
        match key {
            "clip_epsilon" => g.clip_epsilon = p!(),
            "kl_beta" => g.kl_beta = p!(),
            "group_size" => g.group_size = p!(),
            "learning_rate" => g.learning_rate = p!(),
            "temperature" => g.temperature = p!(),
            "sigma_floor" => g.sigma_floor = p!(),
            "seed" => self.seed = p!(),
            "dim" => self.dim = p!(),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "schedule.switch_iteration" => self.train.schedule.switch_iteration = p!(),
            "tasks.count" => self.tasks.count = p!(),
            "tasks.batch" => self.tasks.batch = p!(),
            "eval.count" => self.eval_count = p!(),
            "bc.tasks" => self.bc_tasks = p!(),
            "bc.epochs" => self.bc.epochs = p!(),
            "bc.lr" => self.bc.lr = p!(),
            "gate.k_rollouts" => self.train.gate.k_rollouts = p!(),
            "gate.max_steps" => self.train.gate.max_steps = p!(),
            "train.tasks" => self.train_tasks = p!(),
            "train.iterations" => self.train.iterations = p!(),
            "train.batch" => self.train.batch = p!(),
            "train.inner_epochs" => self.train.inner_epochs = p!(),
            "train.regen_every" => self.train.regen_every = p!(),
            "tcsm.k" => self.set_tcsm(Some(p!()), None),
            "tcsm.c" => self.set_tcsm(None, Some(p!())),
            "grounding.samples" => self.grounding_samples = p!(),
            "grounding.jitters" => self.grounding_jitters = p!(),
            "grounding.sft_epochs" => self.grounding.sft_epochs = p!(),
            "grounding.iterations" => self.grounding.iterations = p!(),
            "grounding.batch" => self.grounding.batch = p!(),
            "grounding.learning_rate" => self.grounding.grpo.learning_rate = p!(),
            "grounding.iou_threshold" => self.grounding.iou_threshold = p!(),
            "grounding.iou_epsilon" => self.grounding.iou_epsilon = p!(),
            "dare.drop_rate" => self.drop_rate = p!(),
            "infer.n" => self.infer.n = p!(),
            "infer.temperature" => self.infer.temperature = p!(),
            "infer.max_steps" => self.infer.max_steps = p!(),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    fn set_tcsm(&mut self, k: Option<usize>, c: Option<usize>) {
        for t in [&mut self.bc.tcsm, &mut self.train.tcsm, &mut self.infer.tcsm] {
            if let Some(k) = k {
                t.k = k;
            }
            if let Some(c) = c {
                t.c = c;
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.train.grpo.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.tasks.batch < 2 {
            return bad(format!("tasks.batch must be >= 2, got {}", self.tasks.batch));
        }
        if self.train.tcsm.k == 0 {
            return bad("tcsm.k must be >= 1".into());
        }
        if self.infer.n == 0 {
            return bad("infer.n must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad(format!("dare.drop_rate must lie in [0, 1), got {}", self.drop_rate));
        }
        if self.train.gate.k_rollouts == 0 || self.train.gate.max_steps == 0 || self.infer.max_steps == 0 {
            return bad("gate.k_rollouts, gate.max_steps and infer.max_steps must be >= 1".into());
        }
        if !(self.infer.temperature > 0.0) || !(self.bc.lr.is_finite()) {
            return bad("infer.temperature must be > 0 and bc.lr finite".into());
        }
        if self.grounding.iou_epsilon <= 0.0 {
            return bad("grounding.iou_epsilon must be > 0".into());
        }
        if self.bc_tasks > self.tasks.count || self.train_tasks > self.tasks.count {
            return bad("bc.tasks and train.tasks cannot exceed tasks.count".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_through_empty_text() {
        assert_eq!(PipelineConfig::parse("").unwrap(), PipelineConfig::default());
        let d = PipelineConfig::default();
        assert_eq!(d.train.grpo.clip_epsilon, 0.2);
        assert_eq!(d.train.grpo.kl_beta, 0.04);
        assert_eq!(d.train.grpo.group_size, 8);
        assert_eq!(d.infer.n, 8);
        assert_eq!(d.train.gate.k_rollouts, 8);
        assert_eq!(d.tasks.count, 400);
        assert_eq!((d.train.tcsm.k, d.train.tcsm.c), (2, 16));
    }

    #[test]
    fn keys_and_comments() {
        let c = PipelineConfig::parse(
            "# run\nclip_epsilon = 0.1\n kl_beta=0\nschedule.switch_iteration = 7 # inline\ntcsm.k = 3\n\ninfer.n = 4\n",
        )
        .unwrap();
        assert_eq!(c.train.grpo.clip_epsilon, 0.1);
        assert_eq!(c.train.grpo.kl_beta, 0.0);
        assert_eq!(c.train.schedule.switch_iteration, 7);
        assert_eq!(c.infer.tcsm.k, 3);
        assert_eq!(c.bc.tcsm.k, 3);
        assert_eq!(c.infer.n, 4);
    }

    #[test]
    fn errors() {
        assert_eq!(PipelineConfig::parse("novalue").unwrap_err(), ConfigError::Syntax { line: 1 });
        assert_eq!(PipelineConfig::parse("x =").unwrap_err(), ConfigError::Syntax { line: 1 });
        assert!(matches!(
            PipelineConfig::parse("\nfoo = 1").unwrap_err(),
            ConfigError::UnknownKey { line: 2, .. }
        ));
        assert!(matches!(
            PipelineConfig::parse("seed = 1\nseed = 2").unwrap_err(),
            ConfigError::Duplicate { line: 2, .. }
        ));
        assert!(matches!(
            PipelineConfig::parse("group_size = many").unwrap_err(),
            ConfigError::BadValue { .. }
        ));
        assert!(matches!(
            PipelineConfig::parse("clip_epsilon = 1.5").unwrap_err(),
            ConfigError::Invalid(_)
        ));
        assert!(matches!(PipelineConfig::parse("infer.n = 0").unwrap_err(), ConfigError::Invalid(_)));
        assert!(matches!(
            PipelineConfig::parse("dare.drop_rate = 1").unwrap_err(),
            ConfigError::Invalid(_)
        ));
    }

    #[test]
    fn stage_seeds_are_distinct() {
        let stages = ["tasks", "eval", "gate", "train", "grounding", "dare.planning", "dare.grounding", "infer"];
        let seeds: BTreeSet<u64> = stages.iter().map(|s| stage_seed(0, s)).collect();
        assert_eq!(seeds.len(), stages.len());
    }
}
