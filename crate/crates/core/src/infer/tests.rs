use super::*;
use crate::env::{Action, StateDigest, Thought, Verb};
use crate::gate::{Source, Step};
use crate::policy::{Layout, ParamVector};
use crate::taskgen::{generate_corpus, TaskgenConfig};
use rand::Rng;

fn tasks() -> Vec<VerifiableTask> {
    generate_corpus(&TaskgenConfig {
        count: 8,
        seed: 2,
        batch: 4,
    })
    .unwrap()
    .tasks
}

fn random_policy(seed: u64) -> PolicyRef {
    let mut rng = seed::rng(seed);
    let values = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    PolicyRef::learned(
        ParamVector::from_values(Layout::for_dim(64).unwrap(), values).unwrap(),
        PolicyConfig::default(),
        Source::Evolved,
    )
}

fn fake(lps: &[[f64; 2]], raw: &str, seed: u64) -> Trajectory {
    let d = StateDigest("0".into());
    let steps = lps
        .iter()
        .map(|lp| Step {
            before_digest: d.clone(),
            observation: crate::env::Observation {
                widgets: vec![],
                focus: None,
                terminal: false,
            },
            thought: Thought::new(Verb::Done, None),
            action: Action::Done,
            raw: raw.to_string(),
            decision_logprobs: Some(*lp),
            after_digest: d.clone(),
            gt_after_digest: None,
            rewards: None,
        })
        .collect();
    Trajectory {
        task_id: "t".into(),
        steps,
        verified: None,
        source: Source::Evolved,
        seed,
        filter_fallback: false,
    }
}

const OK: &str = "THOUGHT done\nACTION done()";

#[test]
fn zero_n_is_rejected() {
    let t = &tasks()[0];
    let cfg = InferenceConfig {
        n: 0,
        ..InferenceConfig::default()
    };
    assert_eq!(best_of_n(t, &PolicyRef::ExecReplay, &cfg).unwrap_err(), InferError::ZeroCandidates);
}

#[test]
fn selection_rule() {
    let a = fake(&[[-1.0, -1.0]], OK, 5);
    let b = fake(&[[-0.5, -0.5], [-0.5, -0.5]], OK, 6);
    assert_eq!(select(&[a.clone(), b.clone()], Selection::SelfLogprob), (1, false));
    // Equal means: fewer steps, then the lower seed.
    let c = fake(&[[-0.5, -0.5]], OK, 9);
    assert_eq!(select(&[b.clone(), c.clone()], Selection::SelfLogprob), (1, false));
    let d = fake(&[[-0.5, -0.5]], OK, 3);
    assert_eq!(select(&[c.clone(), d], Selection::SelfLogprob), (1, false));
    // Candidates that do not parse never win.
    let junk = fake(&[[0.0, 0.0]], "nonsense", 1);
    assert_eq!(select(&[junk.clone(), a], Selection::SelfLogprob), (1, false));
    assert_eq!(select(&[junk.clone(), junk], Selection::SelfLogprob), (0, true));
}

#[test]
fn mean_logprob_examples() {
    assert_eq!(mean_logprob(&fake(&[[-1.0, -3.0]], OK, 0)), -2.0);
    assert_eq!(mean_logprob(&fake(&[], OK, 0)), f64::NEG_INFINITY);
}

#[test]
fn larger_draws_extend_smaller_ones() {
    let p = random_policy(3);
    for t in &tasks() {
        let one = best_of_n(t, &p, &InferenceConfig { n: 1, ..InferenceConfig::default() }).unwrap();
        let eight = best_of_n(t, &p, &InferenceConfig::default()).unwrap();
        assert_eq!(eight.candidates.len(), 8);
        assert_eq!(one.candidates[..], eight.candidates[..1]);
        assert_eq!(one.chosen_index, 0);
        assert!(mean_logprob(&eight.chosen) >= mean_logprob(&one.chosen));
    }
}

#[test]
fn exec_replay_always_succeeds() {
    let ts = tasks();
    let rows = evaluate(&ts, &PolicyRef::ExecReplay, &InferenceConfig { n: 2, ..InferenceConfig::default() }).unwrap();
    assert_eq!(rows.len(), ts.len());
    assert_eq!(success_rate(&rows), 1.0);
    assert!(rows.iter().all(|r| r.n == 2));
    assert_eq!(success_rate(&[]), 0.0);
}

#[test]
fn inference_is_deterministic() {
    let p = random_policy(1);
    let ts = tasks();
    let cfg = InferenceConfig {
        seed: 77,
        ..InferenceConfig::default()
    };
    assert_eq!(evaluate(&ts, &p, &cfg).unwrap(), evaluate(&ts, &p, &cfg).unwrap());
    let r = best_of_n(&ts[0], &p, &cfg).unwrap();
    assert!(r.candidates.iter().all(|c| c.verified.is_some()));
    assert_eq!(r.chosen, r.candidates[r.chosen_index]);
}

#[test]
fn config_temperature_applies() {
    let p = random_policy(2);
    let t = &tasks()[1];
    let cold = InferenceConfig {
        temperature: 1e-6,
        ..InferenceConfig::default()
    };
    let r = best_of_n(t, &p, &cold).unwrap();
    // Near-greedy sampling makes all candidates coincide.
    for c in &r.candidates[1..] {
        assert_eq!(c.actions(), r.candidates[0].actions());
    }
}
