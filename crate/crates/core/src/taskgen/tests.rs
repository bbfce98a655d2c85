use super::*;
use proptest::prelude::*;

fn toggle_draft(seed: u64, target: &str, desired: bool, wording: &str) -> TaskDraft {
    let mut params = BTreeMap::new();
    params.insert("template".into(), "settings".into());
    params.insert("seed".into(), seed.to_string());
    params.insert(
        "goal.0".into(),
        Goal::Toggle {
            target: target.into(),
            desired,
        }
        .encode(),
    );
    TaskDraft {
        family: TaskFamily::Toggle,
        instruction: wording.into(),
        guideline: vec!["Click it".into(), "Finish the task".into()],
        params,
    }
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[test]
fn toggle_seed_seven_grammar_fixture() {
    let mut rng = seed::rng(7);
    let d = draft_task(TaskFamily::Toggle, &mut rng);
    assert_eq!(d.instruction, GOLDEN_TOGGLE_7);
    assert_eq!(d.params.get("goal.0").map(String::as_str), Some(GOLDEN_TOGGLE_7_GOAL));
}

// Captured once from the grammar.
const GOLDEN_TOGGLE_7: &str = "Turn off the Airplane Mode switch in Settings";
const GOLDEN_TOGGLE_7_GOAL: &str = "toggle:airplane:off";

#[test]
fn drafts_are_deterministic_and_mention_their_targets() {
    for family in TaskFamily::ALL {
        for s in 0..40 {
            let a = draft_task(family, &mut seed::rng(s));
            let b = draft_task(family, &mut seed::rng(s));
            assert_eq!(a, b);
            let state = spawn(a.template_id().unwrap(), a.seed().unwrap()).unwrap();
            let instr = tokens(&a.instruction);
            for g in a.goals().unwrap() {
                let label = &state.widget(g.target()).unwrap().label;
                for t in tokens(label) {
                    assert!(instr.contains(&t), "`{}` does not mention `{label}`", a.instruction);
                }
            }
            if family == TaskFamily::Compound {
                assert!(a.guideline.len() >= 2);
                assert_eq!(a.goals().unwrap().len(), 2);
            }
        }
    }
}

#[test]
fn toggle_canonical_pair_is_click_then_done() {
    let d = toggle_draft(3, "wifi", true, "Turn on the Wi-Fi switch in Settings");
    let (exec, verify) = canonical_programs(&d).unwrap();
    let state = spawn("settings", 3).unwrap();
    assert_eq!(exec.steps, vec![Action::click_at(&state.widget("wifi").unwrap().rect), Action::Done]);
    assert_eq!(verify.predicate, Predicate::equals("wifi", Attr::Checked, AttrValue::Bool(true)));
}

#[test]
fn batch_cardinality_and_canonical_presence() {
    let d = draft_task(TaskFamily::MenuSelect, &mut seed::rng(11));
    let batch = synthesize_programs(&d, &mut seed::rng(1), 4).unwrap();
    assert_eq!(batch.len(), 4);
    assert_eq!(batch.iter().filter(|c| c.mutation.is_none()).count(), 1);
    assert_eq!(synthesize_programs(&d, &mut seed::rng(1), 7).unwrap().len(), 7);
    assert_eq!(
        synthesize_programs(&d, &mut seed::rng(1), 1).unwrap_err(),
        TaskgenError::BatchTooSmall(1)
    );
}

#[test]
fn every_mutation_is_rejected_at_its_stage() {
    for family in TaskFamily::ALL {
        for s in 0..30 {
            let d = draft_task(family, &mut seed::rng(100 + s));
            let state = spawn(d.template_id().unwrap(), d.seed().unwrap()).unwrap();
            let goals = d.goals().unwrap();
            let canonical = canonical_programs(&d).unwrap();
            assert!(closed_loop_validate(&canonical.0, &canonical.1, &d).is_ok());
            for m in Mutation::ALL {
                let c = mutate(&state, &goals, &canonical, m).unwrap();
                let expected = match m {
                    Mutation::MissingDone => Rejection::ExecFailed,
                    Mutation::NegatedPredicate => Rejection::VacuousPredicate,
                    Mutation::MissingStep | Mutation::WrongTarget => Rejection::VerifyFalse,
                };
                assert_eq!(
                    closed_loop_validate(&c.exec, &c.verify, &d).unwrap_err(),
                    expected,
                    "{m:?} on `{}`",
                    d.instruction
                );
            }
        }
    }
}

#[test]
fn validation_examples() {
    let d = toggle_draft(3, "wifi", true, "Turn on Wi-Fi");
    let state = spawn("settings", 3).unwrap();
    let initially_on = state.widget("wifi").unwrap().checked;
    let d = toggle_draft(3, "wifi", !initially_on, &d.instruction);
    let (exec, verify) = canonical_programs(&d).unwrap();
    let task = closed_loop_validate(&exec, &verify, &d).unwrap();
    assert_eq!(task.template_id, "settings");
    assert_eq!(task.id, "toggle-settings-s3-wifi");

    let vacuous = VerifyProgram {
        predicate: Predicate::equals("wifi", Attr::Checked, AttrValue::Bool(initially_on)),
    };
    assert_eq!(closed_loop_validate(&exec, &vacuous, &d).unwrap_err(), Rejection::VacuousPredicate);

    let no_click = ExecProgram { steps: vec![Action::Done] };
    assert_eq!(closed_loop_validate(&no_click, &verify, &d).unwrap_err(), Rejection::VerifyFalse);

    let empty = ExecProgram { steps: vec![] };
    assert_eq!(closed_loop_validate(&empty, &verify, &d).unwrap_err(), Rejection::ExecFailed);
}

#[test]
fn dedup_ignores_wording() {
    let a = toggle_draft(1, "wifi", true, "Turn on the Wi-Fi switch in Settings");
    let b = toggle_draft(1, "wifi", true, "Enable Wi-Fi in Settings");
    let c = toggle_draft(1, "bluetooth", true, "Enable Bluetooth in Settings");
    assert_eq!(dedup(vec![a.clone(), b, c.clone()]), vec![a, c]);
    assert!(dedup(vec![]).is_empty());
}

#[test]
fn corpus_closed_loop_and_fault_rejection() {
    let corpus = generate_corpus(&TaskgenConfig {
        count: 60,
        seed: 9,
        batch: 4,
    })
    .unwrap();
    assert_eq!(corpus.tasks.len(), 60);
    assert_eq!(corpus.stats.mutated, corpus.stats.mutated_rejected);
    assert_eq!(corpus.stats.canonical_rejected, 0);
    let mut ids = HashSet::new();
    for t in &corpus.tasks {
        assert!(ids.insert(t.id.clone()));
        let init = t.initial_state();
        assert!(!t.verify.predicate.eval(&init));
        let end = t.exec.steps.iter().fold(init, |s, a| s.apply(a));
        assert!(t.verify.predicate.eval(&end));
    }
}

#[test]
fn task_record_round_trips_through_json() {
    let corpus = generate_corpus(&TaskgenConfig {
        count: 8,
        seed: 2,
        batch: 4,
    })
    .unwrap();
    for t in corpus.tasks {
        let line = serde_json::to_string(&t).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in ["id", "family", "template_id", "seed", "instruction", "guideline", "exec", "verify"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(serde_json::from_str::<VerifiableTask>(&line).unwrap(), t);
    }
    let bad = r#"{"id":"x","family":"toggle","template_id":"nope","seed":0,"instruction":"","guideline":[],"exec":[],"verify":{"op":"and","args":[]}}"#;
    assert!(serde_json::from_str::<VerifiableTask>(bad).is_err());
}

proptest! {
    #[test]
    fn dedup_is_idempotent(picks in proptest::collection::vec((0u64..4, 0usize..3), 0..20)) {
        let targets = ["wifi", "bluetooth", "location"];
        let drafts: Vec<TaskDraft> = picks
            .iter()
            .map(|&(s, t)| toggle_draft(s, targets[t], true, &format!("wording {s}{t}")))
            .collect();
        let once = dedup(drafts);
        prop_assert_eq!(dedup(once.clone()), once);
    }
}
