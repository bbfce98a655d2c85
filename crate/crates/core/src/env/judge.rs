//! Step-success judge.
//!
//! Looks at the screen before and after a step together with the declared
//! intent and decides whether the action executed successfully. The judge
//! compares state deltas; `step_count` never takes part.

use super::{Action, Key, ScreenState, Thought, Verb, WidgetKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    EffectMatches,
    NoEffect,
    WrongEffect,
    Redundant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub success: bool,
    pub reason: VerdictReason,
}

impl StepVerdict {
    fn of(reason: VerdictReason) -> Self {
        StepVerdict {
            success: reason == VerdictReason::EffectMatches,
            reason,
        }
    }
}

/// Judge one step. `after` must be `before.apply(action)`.
///
/// An empty delta is redundant. A terminal `before` absorbs every action and
/// is reported as no effect. Otherwise the step succeeds iff the observed
/// delta is the one the declared intent produces.
pub fn judge_step(before: &ScreenState, after: &ScreenState, thought: &Thought, _action: &Action) -> StepVerdict {
    if before.terminal {
        return StepVerdict::of(VerdictReason::NoEffect);
    }
    if before.same_content(after) {
        return StepVerdict::of(VerdictReason::Redundant);
    }
    let matches = match thought.intent_verb {
        Verb::Click => thought
            .intent_target
            .as_deref()
            .and_then(|t| before.widget(t))
            .filter(|w| w.visible)
            .is_some_and(|w| before.apply(&Action::click_at(&w.rect)).same_content(after)),
        Verb::Type => typed_into(before, after, thought.intent_target.as_deref()),
        Verb::Key => Key::ALL
            .into_iter()
            .any(|key| before.apply(&Action::Key { key }).same_content(after)),
        Verb::Scroll => false,
        Verb::Done => before.apply(&Action::Done).same_content(after),
    };
    StepVerdict::of(if matches {
        VerdictReason::EffectMatches
    } else {
        VerdictReason::WrongEffect
    })
}

/// The delta is exactly one appended suffix on the focused text field.
fn typed_into(before: &ScreenState, after: &ScreenState, target: Option<&str>) -> bool {
    let Some(focus) = before.focus.as_deref() else {
        return false;
    };
    if target.is_some_and(|t| t != focus) || after.focus != before.focus || after.terminal != before.terminal {
        return false;
    }
    if before.widgets.len() != after.widgets.len() {
        return false;
    }
    let mut changed = 0;
    for (b, a) in before.widgets.iter().zip(&after.widgets) {
        if b == a {
            continue;
        }
        changed += 1;
        let only_value = b.id == focus
            && b.kind == WidgetKind::TextField
            && a.value.len() > b.value.len()
            && a.value.starts_with(&b.value)
            && same_except_value(b, a);
        if !only_value {
            return false;
        }
    }
    changed == 1
}

fn same_except_value(a: &super::Widget, b: &super::Widget) -> bool {
    a.id == b.id
        && a.kind == b.kind
        && a.rect == b.rect
        && a.label == b.label
        && a.checked == b.checked
        && a.open == b.open
        && a.visible == b.visible
        && a.parent == b.parent
}

/// Reconstruct the intent behind a scripted action on a given screen. Used to
/// annotate replayed ground-truth programs with thoughts.
pub fn infer_intent(state: &ScreenState, action: &Action) -> Thought {
    match action {
        Action::Click { x, y } => Thought {
            intent_verb: Verb::Click,
            intent_target: state.hit(*x, *y).map(|w| w.id.clone()),
        },
        Action::Type { .. } => Thought {
            intent_verb: Verb::Type,
            intent_target: state.focus.clone(),
        },
        other => Thought {
            intent_verb: other.verb(),
            intent_target: None,
        },
    }
}
