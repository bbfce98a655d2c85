//! Deterministic simulated desktop.
//!
//! A screen is a flat list of widgets on a 640x480 logical canvas. All
//! transitions are pure: [`ScreenState::apply`] returns a new state and never
//! mutates its receiver. Actions that hit nothing or make no sense in the
//! current state are silent no-ops so an exploring policy can take them and
//! simply observe that nothing happened.

mod judge;
mod templates;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

pub use judge::{infer_intent, judge_step, StepVerdict, VerdictReason};
pub use templates::{app_name, spawn, TEMPLATE_IDS};

pub const CANVAS_W: i32 = 640;
pub const CANVAS_H: i32 = 480;

/// Identifier of the status label every template carries.
pub const STATUS_ID: &str = "status";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
}

/// Integer box in logical pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn contains(&self, px: i32, py: i32) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    pub fn center(&self) -> (i32, i32) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }

    pub fn area(&self) -> i64 {
        i64::from(self.w.max(0)) * i64::from(self.h.max(0))
    }

    pub fn intersection_area(&self, other: &Rect) -> i64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0 || iy <= 0 {
            0
        } else {
            i64::from(ix) * i64::from(iy)
        }
    }

    pub fn inside_canvas(&self) -> bool {
        self.w >= 0
            && self.h >= 0
            && self.x >= 0
            && self.y >= 0
            && self.x + self.w <= CANVAS_W
            && self.y + self.h <= CANVAS_H
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    Button,
    TextField,
    Checkbox,
    Menu,
    MenuItem,
    Label,
}

impl WidgetKind {
    pub const ALL: [WidgetKind; 6] = [
        WidgetKind::Button,
        WidgetKind::TextField,
        WidgetKind::Checkbox,
        WidgetKind::Menu,
        WidgetKind::MenuItem,
        WidgetKind::Label,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_interactive(self) -> bool {
        !matches!(self, WidgetKind::Label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Widget {
    pub id: String,
    pub kind: WidgetKind,
    pub rect: Rect,
    pub label: String,
    #[serde(default)]
    pub value: String,
    #[serde(default)]
    pub checked: bool,
    #[serde(default)]
    pub open: bool,
    pub visible: bool,
    /// Owning menu for menu items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl Widget {
    fn new(id: &str, kind: WidgetKind, rect: Rect, label: &str) -> Self {
        Widget {
            id: id.to_string(),
            kind,
            rect,
            label: label.to_string(),
            value: String::new(),
            checked: false,
            open: false,
            visible: true,
            parent: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Key {
    Enter,
    Tab,
    Esc,
}

impl Key {
    pub const ALL: [Key; 3] = [Key::Enter, Key::Tab, Key::Esc];

    pub fn as_str(self) -> &'static str {
        match self {
            Key::Enter => "enter",
            Key::Tab => "tab",
            Key::Esc => "esc",
        }
    }

    pub fn from_name(s: &str) -> Option<Key> {
        Key::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Click,
    Type,
    Key,
    Scroll,
    Done,
}

impl Verb {
    pub const ALL: [Verb; 5] = [Verb::Click, Verb::Type, Verb::Key, Verb::Scroll, Verb::Done];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Click => "click",
            Verb::Type => "type",
            Verb::Key => "key",
            Verb::Scroll => "scroll",
            Verb::Done => "done",
        }
    }

    pub fn from_name(s: &str) -> Option<Verb> {
        Verb::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One keyboard or mouse action. Each verb carries exactly its own fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum Action {
    Click { x: i32, y: i32 },
    Type { text: String },
    Key { key: Key },
    Scroll { dy: i32 },
    Done,
}

impl Action {
    pub fn verb(&self) -> Verb {
        match self {
            Action::Click { .. } => Verb::Click,
            Action::Type { .. } => Verb::Type,
            Action::Key { .. } => Verb::Key,
            Action::Scroll { .. } => Verb::Scroll,
            Action::Done => Verb::Done,
        }
    }

    pub fn click_at(rect: &Rect) -> Action {
        let (x, y) = rect.center();
        Action::Click { x, y }
    }
}

/// Declared intent accompanying an action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Thought {
    pub intent_verb: Verb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent_target: Option<String>,
}

impl Thought {
    pub fn new(verb: Verb, target: Option<&str>) -> Self {
        Thought {
            intent_verb: verb,
            intent_target: target.map(str::to_string),
        }
    }
}

/// Structured stand-in for a screenshot: the visible widgets in draw order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub widgets: Vec<WidgetRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<String>,
    #[serde(default)]
    pub terminal: bool,
}

impl Observation {
    pub fn widget(&self, id: &str) -> Option<&WidgetRecord> {
        self.widgets.iter().find(|w| w.id == id)
    }

    /// Topmost visible widget under the point. Open dropdown items sit above
    /// everything else; otherwise later widgets draw over earlier ones.
    pub fn hit(&self, x: i32, y: i32) -> Option<&WidgetRecord> {
        hit_index(self.widgets.iter().map(|w| (w.kind, &w.rect)), x, y).map(|i| &self.widgets[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WidgetRecord {
    pub id: String,
    pub kind: WidgetKind,
    pub rect: Rect,
    pub label: String,
    pub value: String,
    pub checked: bool,
    pub open: bool,
}

fn hit_index<'a>(
    widgets: impl Iterator<Item = (WidgetKind, &'a Rect)>,
    x: i32,
    y: i32,
) -> Option<usize> {
    let mut best: Option<(usize, bool)> = None;
    for (i, (kind, rect)) in widgets.enumerate() {
        if !rect.contains(x, y) {
            continue;
        }
        let item = kind == WidgetKind::MenuItem;
        match best {
            Some((_, true)) if !item => {}
            _ => best = Some((i, item)),
        }
    }
    best.map(|(i, _)| i)
}

/// Short content hash of a state, excluding `step_count`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateDigest(pub String);

impl fmt::Display for StateDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScreenState {
    pub template_id: String,
    pub seed: u64,
    pub widgets: Vec<Widget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<String>,
    pub terminal: bool,
    pub step_count: u32,
}

#[derive(Serialize)]
struct DigestView<'a> {
    template_id: &'a str,
    seed: u64,
    widgets: &'a [Widget],
    focus: &'a Option<String>,
    terminal: bool,
}

impl ScreenState {
    pub fn widget(&self, id: &str) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.id == id)
    }

    fn widget_index(&self, id: &str) -> Option<usize> {
        self.widgets.iter().position(|w| w.id == id)
    }

    /// Equality of everything the judge and the digest look at.
    pub fn same_content(&self, other: &ScreenState) -> bool {
        self.template_id == other.template_id
            && self.seed == other.seed
            && self.widgets == other.widgets
            && self.focus == other.focus
            && self.terminal == other.terminal
    }

    pub fn digest(&self) -> StateDigest {
        let view = DigestView {
            template_id: &self.template_id,
            seed: self.seed,
            widgets: &self.widgets,
            focus: &self.focus,
            terminal: self.terminal,
        };
        let bytes = serde_json::to_vec(&view).expect("state serializes");
        let hash = Sha256::digest(&bytes);
        let mut out = String::with_capacity(16);
        for b in &hash[..8] {
            out.push_str(&format!("{b:02x}"));
        }
        StateDigest(out)
    }

    pub fn observe(&self) -> Observation {
        Observation {
            widgets: self
                .widgets
                .iter()
                .filter(|w| w.visible)
                .map(|w| WidgetRecord {
                    id: w.id.clone(),
                    kind: w.kind,
                    rect: w.rect,
                    label: w.label.clone(),
                    value: w.value.clone(),
                    checked: w.checked,
                    open: w.open,
                })
                .collect(),
            focus: self.focus.clone(),
            terminal: self.terminal,
        }
    }

    /// Topmost visible widget under the point.
    pub fn hit(&self, x: i32, y: i32) -> Option<&Widget> {
        let visible: Vec<&Widget> = self.widgets.iter().filter(|w| w.visible).collect();
        hit_index(visible.iter().map(|w| (w.kind, &w.rect)), x, y).map(|i| visible[i])
    }

    pub fn apply(&self, action: &Action) -> ScreenState {
        let mut next = self.clone();
        next.step_count = self.step_count.saturating_add(1);
        if self.terminal {
            return next;
        }
        match action {
            Action::Click { x, y } => {
                if let Some(id) = self.hit(*x, *y).map(|w| w.id.clone()) {
                    next.activate(&id);
                }
            }
            Action::Type { text } => {
                if let Some(idx) = self.focus.as_deref().and_then(|f| self.widget_index(f)) {
                    let w = &mut next.widgets[idx];
                    if w.visible && w.kind == WidgetKind::TextField {
                        w.value.push_str(text);
                    }
                }
            }
            Action::Key { key: Key::Tab } => next.cycle_focus(),
            Action::Key { key: Key::Esc } => {
                if next.widgets.iter().any(|w| w.open) {
                    next.close_menus();
                } else {
                    next.focus = None;
                }
            }
            Action::Key { key: Key::Enter } | Action::Scroll { .. } => {}
            Action::Done => next.terminal = true,
        }
        next
    }

    fn activate(&mut self, id: &str) {
        let Some(idx) = self.widget_index(id) else {
            return;
        };
        match self.widgets[idx].kind {
            WidgetKind::Checkbox => self.widgets[idx].checked = !self.widgets[idx].checked,
            WidgetKind::TextField => self.focus = Some(id.to_string()),
            WidgetKind::Button => {
                let label = self.widgets[idx].label.clone();
                self.set_status(label);
            }
            WidgetKind::Menu => {
                let opening = !self.widgets[idx].open;
                self.close_menus();
                if opening {
                    self.widgets[idx].open = true;
                    for w in &mut self.widgets {
                        if w.parent.as_deref() == Some(id) {
                            w.visible = true;
                        }
                    }
                }
            }
            WidgetKind::MenuItem => {
                let label = self.widgets[idx].label.clone();
                self.close_menus();
                self.set_status(label);
            }
            WidgetKind::Label => {}
        }
    }

    fn set_status(&mut self, text: String) {
        if let Some(idx) = self.widget_index(STATUS_ID) {
            self.widgets[idx].value = text;
        }
    }

    fn close_menus(&mut self) {
        for w in &mut self.widgets {
            if w.kind == WidgetKind::Menu {
                w.open = false;
            }
            if w.kind == WidgetKind::MenuItem {
                w.visible = false;
            }
        }
    }

    fn cycle_focus(&mut self) {
        let fields: Vec<&str> = self
            .widgets
            .iter()
            .filter(|w| w.visible && w.kind == WidgetKind::TextField)
            .map(|w| w.id.as_str())
            .collect();
        if fields.is_empty() {
            return;
        }
        let next = match self.focus.as_deref().and_then(|f| fields.iter().position(|&x| x == f)) {
            Some(i) => fields[(i + 1) % fields.len()],
            None => fields[0],
        };
        self.focus = Some(next.to_string());
    }
}
