use super::*;
use crate::env::{spawn, ScreenState, WidgetKind};
use crate::gate;
use crate::taskgen::{generate_corpus, TaskgenConfig};
use proptest::prelude::*;
use rand::Rng;

fn single(state: &ScreenState) -> CompressedContext {
    compress_history(&[state.observe()], 2, 16)
}

fn ramp(dim: usize, step: f64, offset: f64) -> ParamVector {
    let layout = Layout::for_dim(dim).unwrap();
    let values = (0..dim).map(|i| i as f64 * step + offset).collect();
    ParamVector::from_values(layout, values).unwrap()
}

fn random_params(dim: usize, seed: u64) -> ParamVector {
    let mut rng = seed::rng(seed);
    let layout = Layout::for_dim(dim).unwrap();
    let values = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    ParamVector::from_values(layout, values).unwrap()
}

const WIFI: &str = "Turn off the Wi-Fi switch in Settings";

#[test]
fn enumeration_rule() {
    let state = spawn("settings", 0).unwrap();
    let mut obs = state.observe();
    let keep = ["apply", "reset", "wifi"];
    obs.widgets.retain(|w| keep.contains(&w.id.as_str()));
    assert_eq!(obs.widgets.iter().filter(|w| w.kind == WidgetKind::Button).count(), 2);
    let ctx = compress_history(&[obs.clone()], 2, 16);
    let set = candidates(&ctx, "Press Apply");
    assert!(set.pairs.len() >= 4);
    let clicks = set.actions.iter().filter(|a| matches!(a, Action::Click { .. })).count();
    assert_eq!(clicks, 3);
    assert_eq!(set.pairs.len(), 3 + Key::ALL.len() + 1);

    obs.terminal = true;
    let ctx = compress_history(&[obs], 2, 16);
    let set = candidates(&ctx, "Press Apply");
    assert_eq!(set.pairs, vec![(Thought::new(Verb::Done, None), Action::Done)]);
}

#[test]
fn quoted_text_yields_type_candidate() {
    let state = spawn("editor", 0).unwrap();
    let fields = state
        .observe()
        .widgets
        .iter()
        .filter(|w| w.kind == WidgetKind::TextField)
        .count();
    assert!(fields >= 1);
    let set = candidates(&single(&state), "Type \"hello\" into the Title field");
    let hello = Action::Type { text: "hello".into() };
    assert_eq!(set.pairs.iter().filter(|(_, a)| *a == hello).count(), fields);
    assert!(set.actions.contains(&hello));
}

#[test]
fn linearity_of_scores() {
    let state = spawn("settings", 0).unwrap();
    let ctx = single(&state);
    let set = candidates(&ctx, WIFI);
    let zero = ParamVector::zeros(64).unwrap();
    let p = random_params(64, 3);
    let p2 = p.scaled(2.0);
    for c in &set.pairs {
        assert_eq!(score(&zero, &ctx, WIFI, c), 0.0);
        let (a, b) = (score(&p, &ctx, WIFI, c), score(&p2, &ctx, WIFI, c));
        assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

// Captured once from the feature map and frozen.
const GOLDEN_WIFI_SCORE: f64 = -1.76;

#[test]
fn frozen_score_golden() {
    let state = spawn("settings", 0).unwrap();
    let ctx = single(&state);
    let params = ramp(64, 0.01, -0.3);
    let rect = state.widget("wifi").unwrap().rect;
    let cand = (Thought::new(Verb::Click, Some("wifi")), Action::click_at(&rect));
    let s = score(&params, &ctx, WIFI, &cand);
    assert!((s - GOLDEN_WIFI_SCORE).abs() <= 1e-12, "{s:.17}");
}

#[test]
fn uniform_params_give_minus_ln_m() {
    let state = spawn("file_manager", 2).unwrap();
    let ctx = single(&state);
    let zero = ParamVector::zeros(64).unwrap();
    let dp = DecisionPoint::new(zero.layout(), &ctx, "Open the Documents folder").unwrap();
    for (t, a) in &dp.set.pairs {
        let [lt, la] = response_logprob(&zero, &ctx, "Open the Documents folder", t, a, 1.0).unwrap();
        assert!((lt + (dp.set.thoughts.len() as f64).ln()).abs() <= 1e-12);
        assert!((la + (dp.set.actions.len() as f64).ln()).abs() <= 1e-12);
    }
}

#[test]
fn one_candidate_has_logprob_zero() {
    let mut state = spawn("settings", 0).unwrap();
    state.terminal = true;
    let ctx = single(&state);
    let p = random_params(64, 1);
    let r = sample_response(&p, &ctx, WIFI, 1.0, &mut seed::rng(0));
    assert_eq!(r.action, Action::Done);
    assert_eq!(r.decision_logprobs, [0.0, 0.0]);
}

#[test]
fn near_zero_temperature_is_argmax() {
    let state = spawn("settings", 4).unwrap();
    let ctx = single(&state);
    let p = random_params(64, 11);
    let dp = DecisionPoint::new(p.layout(), &ctx, WIFI).unwrap();
    let max = |s: &[f64]| s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ts = dp.thought_decision(0).scores(&p);
    for s in 0..20 {
        let r = dp.sample(&p, 1e-6, &mut seed::rng(s));
        let ti = dp.set.thoughts.iter().position(|t| *t == r.thought).unwrap();
        assert_eq!(ts[ti], max(&ts));
        let ad = dp.action_decision(&r.thought, 0).scores(&p);
        let ai = dp.set.actions.iter().position(|a| *a == r.action).unwrap();
        assert_eq!(ad[ai], max(&ad));
    }
}

#[test]
fn sampling_is_reproducible_and_raw_parses() {
    let state = spawn("editor", 5).unwrap();
    let ctx = single(&state);
    let p = random_params(64, 8);
    let a = sample_response(&p, &ctx, "Open the File menu", 1.0, &mut seed::rng(42));
    let b = sample_response(&p, &ctx, "Open the File menu", 1.0, &mut seed::rng(42));
    assert_eq!(a, b);
    assert_eq!(parse(&a.raw).unwrap(), (a.thought, a.action));
}

#[test]
fn logprobs_are_smooth_in_params() {
    let state = spawn("settings", 0).unwrap();
    let ctx = single(&state);
    let p = random_params(64, 5);
    let dp = DecisionPoint::new(p.layout(), &ctx, WIFI).unwrap();
    let [d, _] = dp.decisions(&dp.set.pairs[1].0, &dp.set.pairs[1].1).unwrap();
    let mut grad = vec![0.0; 64];
    d.add_grad_logprob(&p, 1.0, 1.0, &mut grad);
    let h = 1e-5;
    for i in 0..64 {
        let mut up = p.clone();
        up.values[i] += h;
        let mut dn = p.clone();
        dn.values[i] -= h;
        let fd = (d.logprob(&up, 1.0) - d.logprob(&dn, 1.0)) / (2.0 * h);
        assert!((fd - grad[i]).abs() <= 1e-6, "coordinate {i}: {fd} vs {}", grad[i]);
    }
}

fn fixture_examples() -> Vec<BcExample> {
    let corpus = generate_corpus(&TaskgenConfig {
        count: 5,
        seed: 0,
        batch: 4,
    })
    .unwrap();
    let tcsm = TcsmConfig::default();
    corpus
        .tasks
        .iter()
        .flat_map(|t| {
            let traj = gate::rollout(t, &gate::PolicyRef::ExecReplay, 0, t.exec.steps.len());
            gate::bc_examples(t, &traj, &tcsm)
        })
        .collect()
}

#[test]
fn bc_zero_epochs_is_identity() {
    let init = random_params(64, 2);
    let cfg = BcConfig {
        epochs: 0,
        ..BcConfig::default()
    };
    let (p, losses) = bc_pretrain(&init, &fixture_examples(), &cfg).unwrap();
    assert_eq!(p, init);
    assert!(losses.is_empty());
}

#[test]
fn bc_fits_five_task_fixture() {
    let examples = fixture_examples();
    let init = ParamVector::zeros(64).unwrap();
    let cfg = BcConfig {
        epochs: 200,
        ..BcConfig::default()
    };
    let (p, losses) = bc_pretrain(&init, &examples, &cfg).unwrap();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "loss rose: {} -> {}", w[0], w[1]);
    }
    assert!(losses.last().unwrap() < &losses[0]);
    for ex in &examples {
        let dp = DecisionPoint::new(p.layout(), &ex.context, &ex.instruction).unwrap();
        let [t, a] = dp.decisions(&ex.thought, &ex.action).unwrap();
        for d in [t, a] {
            let s = d.scores(&p);
            let best = (0..s.len()).max_by(|&x, &y| s[x].total_cmp(&s[y])).unwrap();
            assert_eq!(best, d.chosen, "{}", ex.instruction);
        }
    }
}

fn arb_screen() -> impl Strategy<Value = (&'static str, u64)> {
    (prop::sample::select(crate::env::TEMPLATE_IDS.to_vec()), 0u64..64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_normalizes((tpl, s) in arb_screen(), pseed in any::<u64>(), temp in 0.05f64..5.0) {
        let state = spawn(tpl, s).unwrap();
        let ctx = single(&state);
        let p = random_params(64, pseed);
        let dp = DecisionPoint::new(p.layout(), &ctx, "Click the Apply button").unwrap();
        let td = dp.thought_decision(0);
        let total: f64 = td.log_probs(&p, temp).iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        for t in &dp.set.thoughts {
            let total: f64 = dp.action_decision(t, 0).log_probs(&p, temp).iter().map(|l| l.exp()).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn scaling_keeps_argmax(scores in prop::collection::vec(-50.0f64..50.0, 1..20), c in 0.01f64..100.0) {
        let argmax = |s: &[f64]| (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b]).then(b.cmp(&a))).unwrap();
        let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
        prop_assert_eq!(argmax(&scores), argmax(&scaled));
        prop_assert_eq!(argmax(&log_softmax(&scores, 1.0)), argmax(&scores));
    }

    #[test]
    fn sampled_logprob_matches_recorded((tpl, s) in arb_screen(), pseed in any::<u64>(), rseed in any::<u64>()) {
        let state = spawn(tpl, s).unwrap();
        let ctx = single(&state);
        let p = random_params(64, pseed);
        let instr = "Type \"notes\" into the Title field";
        let r = sample_response(&p, &ctx, instr, 1.0, &mut seed::rng(rseed));
        let lp = response_logprob(&p, &ctx, instr, &r.thought, &r.action, 1.0).unwrap();
        prop_assert!((lp[0] - r.decision_logprobs[0]).abs() <= 1e-12);
        prop_assert!((lp[1] - r.decision_logprobs[1]).abs() <= 1e-12);
    }

    #[test]
    fn every_candidate_round_trips((tpl, s) in arb_screen()) {
        let state = spawn(tpl, s).unwrap();
        let set = candidates(&single(&state), "Type \"a b\" and press Enter");
        for (t, a) in &set.pairs {
            prop_assert_eq!(parse(&serialize(t, a)).unwrap(), (t.clone(), a.clone()));
        }
    }
}
