//! Fixed, hand-specified feature map.
//!
//! Every feature is a deterministic function of the instruction, the
//! compressed history and the candidate. Scores are plain dot products with
//! the parameter segments, so gradients are exact and cheap.

use super::params::{Layout, SegmentKind};
use super::tcsm::CompressedContext;
use crate::env::{Action, Key, Observation, Rect, Thought, Verb, WidgetKind, WidgetRecord, CANVAS_H, CANVAS_W};
use std::collections::HashSet;

/// Sparse feature vector of absolute parameter indices.
pub type Features = Vec<(usize, f64)>;

pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
struct Clause {
    tokens: Vec<String>,
    quoted: Vec<String>,
}

/// What the instruction says, pre-digested.
#[derive(Debug, Clone)]
pub struct Cues {
    tokens: HashSet<String>,
    pub quoted: Vec<String>,
    clauses: Vec<Clause>,
}

const ON_WORDS: [&str; 3] = ["on", "enable", "check"];
const OFF_WORDS: [&str; 3] = ["off", "disable", "uncheck"];

impl Cues {
    pub fn parse(instruction: &str) -> Cues {
        // Quoted spans are lifted out before tokenizing so their words never
        // count as label mentions.
        let mut quoted = Vec::new();
        let mut plain = String::with_capacity(instruction.len());
        let parts: Vec<&str> = instruction.split('"').collect();
        for (i, part) in parts.iter().enumerate() {
            if i % 2 == 1 && i + 1 < parts.len() {
                plain.push_str(&format!(" \u{1}{} ", quoted.len()));
                quoted.push(part.to_string());
            } else {
                plain.push_str(part);
            }
        }
        let clauses = plain
            .replace(", then ", " and ")
            .split(" and ")
            .map(|c| {
                let mut q = Vec::new();
                let mut toks = Vec::new();
                for word in c.split_whitespace() {
                    if let Some(idx) = word.strip_prefix('\u{1}').and_then(|n| n.parse::<usize>().ok()) {
                        q.push(quoted[idx].clone());
                    } else {
                        toks.extend(tokenize(word));
                    }
                }
                Clause { tokens: toks, quoted: q }
            })
            .collect::<Vec<_>>();
        let tokens = clauses.iter().flat_map(|c| c.tokens.iter().cloned()).collect();
        Cues { tokens, quoted, clauses }
    }

    /// Fraction of the label's tokens the instruction mentions.
    pub fn relevance(&self, label: &str) -> f64 {
        let toks = tokenize(label);
        if toks.is_empty() {
            return 0.0;
        }
        toks.iter().filter(|t| self.tokens.contains(*t)).count() as f64 / toks.len() as f64
    }

    fn clause_for(&self, label: &str) -> Option<&Clause> {
        let toks = tokenize(label);
        if toks.is_empty() {
            return None;
        }
        self.clauses
            .iter()
            .find(|c| toks.iter().all(|t| c.tokens.contains(t)))
    }

    /// Desired checkbox state, when a clause names the label with on/off wording.
    pub fn desired_checked(&self, label: &str) -> Option<bool> {
        let c = self.clause_for(label)?;
        if c.tokens.iter().any(|t| ON_WORDS.contains(&t.as_str())) {
            Some(true)
        } else if c.tokens.iter().any(|t| OFF_WORDS.contains(&t.as_str())) {
            Some(false)
        } else {
            None
        }
    }

    /// Quoted text the instruction associates with a field label.
    pub fn text_for(&self, label: &str) -> Option<&str> {
        self.clause_for(label)?.quoted.first().map(String::as_str)
    }

    fn mentions_all(&self, text: &str) -> bool {
        let toks = tokenize(text);
        !toks.is_empty() && toks.iter().all(|t| self.tokens.contains(t))
    }
}

/// Per-widget facts about the current frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct WidgetFacts {
    pub relevance: f64,
    pub unmet: bool,
    pub changed: bool,
    pub focused: bool,
    pub newly_visible: bool,
}

/// Everything the scorer needs about one decision point.
#[derive(Debug, Clone)]
pub struct Scene<'a> {
    pub current: &'a Observation,
    pub cues: Cues,
    facts: Vec<WidgetFacts>,
    pub ready: bool,
    pub any_open: bool,
    pub frames: usize,
}

impl<'a> Scene<'a> {
    pub fn new(ctx: &'a CompressedContext, current: &'a Observation, instruction: &str) -> Scene<'a> {
        let cues = Cues::parse(instruction);
        let previous = ctx.previous();
        let status_value = current
            .widget(crate::env::STATUS_ID)
            .map(|w| w.value.as_str())
            .unwrap_or("");
        let facts: Vec<WidgetFacts> = current
            .widgets
            .iter()
            .map(|w| {
                let relevance = cues.relevance(&w.label);
                let unmet = match w.kind {
                    WidgetKind::Checkbox => cues.desired_checked(&w.label).is_some_and(|d| d != w.checked),
                    WidgetKind::TextField => cues.text_for(&w.label).is_some_and(|t| !w.value.contains(t)),
                    WidgetKind::Menu => relevance >= 1.0 && !w.open && !cues.mentions_all(status_value),
                    WidgetKind::MenuItem | WidgetKind::Button => relevance >= 1.0 && status_value != w.label,
                    WidgetKind::Label => false,
                };
                let before = previous.and_then(|p| p.widget(&w.id));
                WidgetFacts {
                    relevance,
                    unmet,
                    changed: previous.is_some() && before != Some(w),
                    focused: current.focus.as_deref() == Some(w.id.as_str()),
                    newly_visible: previous.is_some() && before.is_none(),
                }
            })
            .collect();
        let ready = !facts.iter().any(|f| f.unmet);
        Scene {
            current,
            cues,
            ready,
            any_open: current.widgets.iter().any(|w| w.open),
            frames: ctx.frames(),
            facts,
        }
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.current.widgets.iter().position(|w| w.id == id)
    }

    pub fn widget(&self, id: &str) -> Option<(&WidgetRecord, WidgetFacts)> {
        self.index_of(id).map(|i| (&self.current.widgets[i], self.facts[i]))
    }

    fn hit(&self, x: i32, y: i32) -> Option<(&WidgetRecord, WidgetFacts)> {
        self.current.hit(x, y).and_then(|w| self.widget(&w.id))
    }

    pub fn focused(&self) -> Option<(&WidgetRecord, WidgetFacts)> {
        self.current.focus.as_deref().and_then(|f| self.widget(f))
    }
}

fn quadrant(rect: &Rect) -> usize {
    let (cx, cy) = rect.center();
    usize::from(cx >= CANVAS_W / 2) + 2 * usize::from(cy >= CANVAS_H / 2)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

struct Builder<'l> {
    layout: &'l Layout,
    out: Features,
}

impl<'l> Builder<'l> {
    fn new(layout: &'l Layout) -> Self {
        Builder { layout, out: Vec::new() }
    }

    fn put(&mut self, seg: SegmentKind, raw: usize, v: f64) {
        if v != 0.0 {
            self.out.push((self.layout.slot(seg, raw), v));
        }
    }

    fn shared(&mut self, widget: &WidgetRecord, f: WidgetFacts, scale: f64) {
        self.shared_facts(widget, f, scale);
        self.put(SegmentKind::SharedFeatures, 7, scale);
    }

    fn shared_facts(&mut self, widget: &WidgetRecord, f: WidgetFacts, scale: f64) {
        let s = SegmentKind::SharedFeatures;
        self.put(s, 0, scale * f.relevance);
        self.put(s, 1, scale * flag(f.unmet));
        self.put(s, 2, scale * flag(f.changed));
        self.put(s, 3, scale * flag(f.focused));
        self.put(s, 4, scale * flag(f.newly_visible));
        self.put(s, 5, scale * flag(widget.kind == WidgetKind::Label));
        self.put(s, 6, scale * f.relevance * flag(!f.unmet));
    }
}

pub fn thought_features(layout: &Layout, scene: &Scene<'_>, thought: &Thought) -> Features {
    let mut b = Builder::new(layout);
    let t = SegmentKind::ThoughtHead;
    b.put(t, thought.intent_verb as usize, 1.0);
    let target = thought.intent_target.as_deref().and_then(|id| scene.widget(id));
    if let Some((w, f)) = target {
        b.shared(w, f, 1.0);
        b.put(t, 5 + w.kind.index(), 1.0);
        b.put(t, 16 + quadrant(&w.rect), 1.0);
        if thought.intent_verb == Verb::Type {
            b.put(t, 14, flag(f.focused));
            b.put(t, 15, flag(f.unmet));
        }
    }
    match thought.intent_verb {
        Verb::Done => {
            b.put(t, 11, flag(scene.ready));
            b.put(t, 12, flag(scene.frames <= 1));
        }
        Verb::Key => b.put(t, 13, flag(scene.any_open)),
        _ => {}
    }
    b.out
}

pub fn consistent(scene: &Scene<'_>, thought: &Thought, action: &Action) -> bool {
    if thought.intent_verb != action.verb() {
        return false;
    }
    match action {
        Action::Click { x, y } => thought
            .intent_target
            .as_deref()
            .and_then(|id| scene.current.widget(id))
            .is_some_and(|w| w.rect.contains(*x, *y)),
        _ => true,
    }
}

pub fn action_features(layout: &Layout, scene: &Scene<'_>, thought: &Thought, action: &Action) -> Features {
    let mut b = Builder::new(layout);
    let a = SegmentKind::ActionHead;
    b.put(a, action.verb() as usize, 1.0);
    b.put(a, 5, flag(consistent(scene, thought, action)));
    b.put(a, 19, flag(thought.intent_verb == action.verb()));
    match action {
        Action::Click { x, y } => match scene.hit(*x, *y) {
            Some((w, f)) => {
                b.shared(w, f, 1.0);
                b.put(a, 13 + w.kind.index(), 1.0);
            }
            None => b.put(a, 6, 1.0),
        },
        Action::Type { text } => match scene.focused() {
            Some((w, f)) => {
                b.shared(w, f, 1.0);
                b.put(a, 10, flag(!w.value.contains(text.as_str())));
                b.put(a, 11, flag(scene.cues.text_for(&w.label) == Some(text.as_str())));
            }
            None => b.put(a, 12, 1.0),
        },
        Action::Key { key } => {
            let idx = Key::ALL.iter().position(|k| k == key).unwrap_or(0);
            b.put(a, 7 + idx, 1.0);
        }
        Action::Scroll { .. } | Action::Done => {}
    }
    b.out
}

fn kind_word(kind: WidgetKind) -> &'static str {
    match kind {
        WidgetKind::Button => "button",
        WidgetKind::TextField => "field",
        WidgetKind::Checkbox => "checkbox",
        WidgetKind::Menu => "menu",
        WidgetKind::MenuItem => "item",
        WidgetKind::Label => "label",
    }
}

/// Noun used when an instruction refers to a widget of this kind.
pub fn kind_noun(kind: WidgetKind) -> &'static str {
    match kind {
        WidgetKind::MenuItem => "menu item",
        k => kind_word(k),
    }
}

/// Features of one candidate box: it is described through the widget it
/// overlaps most, weighted by that overlap.
pub fn grounding_features(layout: &Layout, scene: &Scene<'_>, bbox: &Rect) -> Features {
    let mut b = Builder::new(layout);
    let g = SegmentKind::GroundingHead;
    let best = scene
        .current
        .widgets
        .iter()
        .enumerate()
        .map(|(i, w)| (i, crate::grounding::iou(bbox, &w.rect)))
        .fold(None::<(usize, f64)>, |acc, (i, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        });
    if let Some((i, iou)) = best.filter(|(_, v)| *v > 0.0) {
        let w = &scene.current.widgets[i];
        let f = scene.facts[i];
        // The constant shared slot is left out: it would bias every
        // planning decision that touches a widget.
        b.shared_facts(w, f, iou);
        b.put(g, 0, iou);
        b.put(g, 1, iou * iou);
        b.put(g, 2, f.relevance * iou);
        b.put(g, 3, f.relevance * flag(iou > 0.9));
        b.put(g, 4 + w.kind.index(), iou);
        b.put(g, 10, iou * flag(scene.cues.tokens.contains(kind_word(w.kind))));
        let (a, c) = (bbox.area() as f64, w.rect.area() as f64);
        if a > 0.0 && c > 0.0 {
            b.put(g, 11, a.min(c) / a.max(c));
        }
    }
    b.put(g, 12 + quadrant(bbox), 1.0);
    b.out
}
