use super::*;
use crate::env::{Verb, CANVAS_H, CANVAS_W, STATUS_ID};
use crate::policy::Layout;
use crate::taskgen::{generate_corpus, TaskFamily, TaskgenConfig};
use proptest::prelude::*;
use rand::Rng;
use std::sync::OnceLock;

fn corpus() -> &'static [VerifiableTask] {
    static CORPUS: OnceLock<Vec<VerifiableTask>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        generate_corpus(&TaskgenConfig {
            count: 40,
            seed: 0,
            batch: 4,
        })
        .unwrap()
        .tasks
    })
}

fn task_of(family: TaskFamily) -> &'static VerifiableTask {
    corpus().iter().find(|t| t.draft.family == family).unwrap()
}

/// A trajectory from explicit (thought, action) pairs; `None` thoughts are
/// inferred from the screen.
fn scripted(task: &VerifiableTask, script: &[(Option<Thought>, Action)], seed: u64) -> Trajectory {
    let mut state = task.initial_state();
    let mut steps = Vec::new();
    for (thought, action) in script {
        let thought = thought.clone().unwrap_or_else(|| infer_intent(&state, action));
        let raw = policy::serialize(&thought, action);
        let (step, after) = record(&state, thought, action.clone(), raw, None);
        steps.push(step);
        state = after;
    }
    Trajectory {
        task_id: task.id.clone(),
        steps,
        verified: None,
        source: Source::Evolved,
        seed,
        filter_fallback: false,
    }
}

fn gt_script(task: &VerifiableTask) -> Vec<(Option<Thought>, Action)> {
    task.exec.steps.iter().map(|a| (None, a.clone())).collect()
}

/// A click that lands on no widget of the initial screen.
fn blank_click(task: &VerifiableTask) -> Action {
    let s = task.initial_state();
    for y in (4..CANVAS_H).step_by(8) {
        for x in (4..CANVAS_W).step_by(8) {
            if s.hit(x, y).is_none() {
                return Action::Click { x, y };
            }
        }
    }
    panic!("no empty canvas point");
}

fn with_blank_clicks(task: &VerifiableTask, n: usize, seed: u64) -> Trajectory {
    let mut script: Vec<_> = (0..n).map(|_| (None, blank_click(task))).collect();
    script.extend(gt_script(task));
    let mut t = scripted(task, &script, seed);
    assert!(verify(task, &mut t).unwrap());
    t
}

fn random_policy(seed: u64) -> PolicyRef {
    let mut rng = seed::rng(seed);
    let layout = Layout::for_dim(64).unwrap();
    let values = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    PolicyRef::learned(
        ParamVector::from_values(layout, values).unwrap(),
        PolicyConfig::default(),
        Source::ColdStart,
    )
}

#[test]
fn exec_replay_reproduces_the_script() {
    for task in corpus() {
        let mut t = rollout(task, &PolicyRef::ExecReplay, 0, 16);
        assert_eq!(t.actions(), task.exec.steps);
        assert_eq!(t.source, Source::ExecReplay);
        assert!(t.chain_ok());
        assert!(verify(task, &mut t).unwrap());
        assert_eq!(t.verified, Some(true));
    }
}

#[test]
fn truncated_rollout_fails() {
    let task = task_of(TaskFamily::Toggle);
    assert!(task.exec.steps.len() >= 2);
    let mut t = rollout(task, &PolicyRef::ExecReplay, 0, 1);
    assert_eq!(t.len(), 1);
    assert!(!verify(task, &mut t).unwrap());
}

#[test]
fn seeded_rollouts_repeat() {
    let task = task_of(TaskFamily::MenuSelect);
    let p = random_policy(4);
    assert_eq!(rollout(task, &p, 17, 8), rollout(task, &p, 17, 8));
}

#[test]
fn done_only_is_not_success() {
    for task in corpus() {
        let mut t = scripted(task, &[(None, Action::Done)], 0);
        assert!(!verify(task, &mut t).unwrap(), "{}", task.id);
    }
}

#[test]
fn extra_noop_then_script_verifies() {
    with_blank_clicks(task_of(TaskFamily::FillField), 1, 0);
}

#[test]
fn tampered_digest_breaks_the_chain() {
    let task = task_of(TaskFamily::Toggle);
    let mut t = rollout(task, &PolicyRef::ExecReplay, 0, 8);
    t.steps[1].before_digest = StateDigest("0000000000000000".into());
    assert!(!t.chain_ok());
    assert_eq!(verify(task, &mut t), Err(GateError::ChainBroken(1)));
}

#[test]
fn select_minimal_examples() {
    let task = task_of(TaskFamily::Toggle);
    let ts: Vec<Trajectory> = [2usize, 0, 1]
        .iter()
        .enumerate()
        .map(|(i, &n)| with_blank_clicks(task, n, i as u64))
        .collect();
    assert_eq!(ts.iter().map(Trajectory::len).collect::<Vec<_>>(), [4, 2, 3]);
    assert_eq!(select_minimal(&ts).unwrap().len(), 2);

    let tie = [with_blank_clicks(task, 1, 9), with_blank_clicks(task, 1, 2)];
    assert_eq!(select_minimal(&tie).unwrap().seed, 2);

    assert_eq!(select_minimal(&[]), Err(GateError::EmptyInput));
    let mut bad = ts.clone();
    bad[1].verified = Some(false);
    assert_eq!(select_minimal(&bad), Err(GateError::Unverified(1)));
}

#[test]
fn filter_removes_planted_noop() {
    let task = task_of(TaskFamily::FillField);
    let t = with_blank_clicks(task, 1, 0);
    let f = filter_steps(task, &t);
    assert!(!f.filter_fallback);
    assert_eq!(f.actions(), task.exec.steps);
    assert_eq!(f.verified, Some(true));
    assert!(f.chain_ok());
    let mut again = f.clone();
    assert!(verify(task, &mut again).unwrap());
}

#[test]
fn minimal_trajectory_is_a_fixpoint() {
    let task = task_of(TaskFamily::Compound);
    let t = with_blank_clicks(task, 0, 0);
    let f = filter_steps(task, &t);
    assert_eq!(f, t);
}

#[test]
fn load_bearing_step_triggers_fallback() {
    // The focus click declares the wrong target, so the judge rejects it, yet
    // typing needs the focus it sets.
    let task = task_of(TaskFamily::FillField);
    let mut script = gt_script(task);
    script[0].0 = Some(Thought::new(Verb::Click, Some(STATUS_ID)));
    let mut t = scripted(task, &script, 0);
    assert!(verify(task, &mut t).unwrap());
    let states = states_along(task, &t).unwrap();
    assert!(!judge_step(&states[0], &states[1], &t.steps[0].thought, &t.steps[0].action).success);
    let f = filter_steps(task, &t);
    assert!(f.filter_fallback);
    assert_eq!(f.steps, t.steps);
}

#[test]
fn schedule_boundaries() {
    let cold = PolicyRef::ExecReplay;
    let latest = random_policy(0);
    let s100 = EvolutionSchedule { switch_iteration: 100 };
    assert_eq!(sampler_for_iteration(&s100, 0, &cold, &latest).source(), Source::ExecReplay);
    assert_eq!(sampler_for_iteration(&s100, 99, &cold, &latest).source(), Source::ExecReplay);
    assert_eq!(sampler_for_iteration(&s100, 100, &cold, &latest).source(), Source::ColdStart);
    let s0 = EvolutionSchedule { switch_iteration: 0 };
    for it in [0, 1, 1000] {
        assert_eq!(sampler_for_iteration(&s0, it, &cold, &latest).source(), Source::ColdStart);
    }
}

#[test]
fn extract_falls_back_to_the_script() {
    let task = task_of(TaskFamily::FillField);
    let cfg = GateConfig {
        k_rollouts: 2,
        max_steps: 1,
    };
    let out = extract(task, &random_policy(1), &cfg, 0);
    assert!(out.used_exec_replay);
    assert_eq!(out.trajectory.source, Source::ExecReplay);
    assert_eq!(out.trajectory.verified, Some(true));
    assert!(out
        .trajectory
        .steps
        .iter()
        .all(|s| s.gt_after_digest.as_ref() == Some(&s.after_digest)));
}

#[test]
fn extract_is_minimal_among_verified_rollouts() {
    let cfg = GateConfig {
        k_rollouts: 8,
        max_steps: 8,
    };
    let mut sampled = 0;
    for (i, task) in corpus().iter().enumerate() {
        let out = extract(task, &random_policy(i as u64), &cfg, 3);
        let mut t = out.trajectory.clone();
        assert!(verify(task, &mut t).unwrap());
        assert!(t.chain_ok());
        for r in out.rollouts.iter().filter(|r| r.verified == Some(true)) {
            assert!(out.trajectory.len() <= r.len());
        }
        sampled += usize::from(!out.used_exec_replay);
    }
    assert!(sampled > 0, "no sampled rollout verified on any task");
}

#[test]
fn bc_examples_follow_the_steps() {
    let task = task_of(TaskFamily::Compound);
    let t = rollout(task, &PolicyRef::ExecReplay, 0, 8);
    let ex = bc_examples(task, &t, &TcsmConfig::default());
    assert_eq!(ex.len(), t.len());
    for (e, s) in ex.iter().zip(&t.steps) {
        assert_eq!(e.context.current(), Some(&s.observation));
        assert_eq!(e.action, s.action);
    }
}

#[test]
fn trajectories_round_trip_through_json() {
    let task = task_of(TaskFamily::MenuSelect);
    let t = extract(task, &random_policy(2), &GateConfig::default(), 0).trajectory;
    let text = serde_json::to_string(&t).unwrap();
    assert_eq!(serde_json::from_str::<Trajectory>(&text).unwrap(), t);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filter_is_idempotent(ti in 0usize..40, pseed in any::<u64>(), rseed in any::<u64>()) {
        let task = &corpus()[ti];
        let t = rollout(task, &random_policy(pseed), rseed, 8);
        let once = filter_steps(task, &t);
        prop_assert_eq!(filter_steps(task, &once), once.clone());
        prop_assert!(once.chain_ok());
    }

    #[test]
    fn filter_keeps_verified_scripts_verified(ti in 0usize..40, noops in 0usize..3) {
        let task = &corpus()[ti];
        let t = with_blank_clicks(task, noops, 0);
        let f = filter_steps(task, &t);
        prop_assert!(!f.filter_fallback);
        prop_assert_eq!(f.actions(), task.exec.steps.clone());
    }
}
