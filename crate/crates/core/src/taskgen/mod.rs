//! Closed-loop verifiable task generation.
//!
//! A procedural grammar drafts instructions; for each draft a small batch of
//! (execution, verification) program pairs is synthesized, one canonical and
//! the rest deliberately mutated. Every pair is replayed in a freshly spawned
//! environment and only pairs whose predicate is false initially and true
//! after the script runs survive.

mod predicate;

pub use predicate::{Attr, AttrValue, Predicate};

use crate::env::{self, spawn, Action, ScreenState, WidgetKind, STATUS_ID};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;

/// Seeds drawn per template; small enough that duplicate drafts do occur.
pub const SEED_SPACE: u64 = 64;

pub const FILL_TEXTS: [&str; 8] = [
    "hello",
    "quarterly report",
    "meeting notes",
    "draft two",
    "budget",
    "release plan",
    "photos",
    "invoice",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    Toggle,
    FillField,
    MenuSelect,
    Compound,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 4] = [
        TaskFamily::Toggle,
        TaskFamily::FillField,
        TaskFamily::MenuSelect,
        TaskFamily::Compound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskFamily::Toggle => "toggle",
            TaskFamily::FillField => "fill_field",
            TaskFamily::MenuSelect => "menu_select",
            TaskFamily::Compound => "compound",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TaskgenError {
    #[error("draft is malformed: {0}")]
    BadDraft(String),
    #[error("synthesis batch must hold at least 2 candidates, got {0}")]
    BatchTooSmall(usize),
    #[error("gave up after {attempts} drafts with only {kept} unique tasks")]
    Exhausted { attempts: usize, kept: usize },
}

/// Why a candidate pair failed closed-loop validation.
#[derive(Debug, Clone, Copy, thiserror::Error, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    #[error("execution program failed to run to completion")]
    ExecFailed,
    #[error("verification predicate false after execution")]
    VerifyFalse,
    #[error("verification predicate already true on the initial screen")]
    VacuousPredicate,
}

/// One sub-goal bound by a draft.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Goal {
    Toggle { target: String, desired: bool },
    Fill { field: String, text: String },
    Menu { menu: String, item: String },
}

impl Goal {
    fn encode(&self) -> String {
        match self {
            Goal::Toggle { target, desired } => format!("toggle:{target}:{}", if *desired { "on" } else { "off" }),
            Goal::Fill { field, text } => format!("fill:{field}:{text}"),
            Goal::Menu { menu, item } => format!("menu:{menu}:{item}"),
        }
    }

    fn decode(s: &str) -> Option<Goal> {
        let mut parts = s.splitn(3, ':');
        let kind = parts.next()?;
        let a = parts.next()?.to_string();
        let b = parts.next()?.to_string();
        match kind {
            "toggle" => Some(Goal::Toggle {
                target: a,
                desired: match b.as_str() {
                    "on" => true,
                    "off" => false,
                    _ => return None,
                },
            }),
            "fill" => Some(Goal::Fill { field: a, text: b }),
            "menu" => Some(Goal::Menu { menu: a, item: b }),
            _ => None,
        }
    }

    /// Widget whose final state the goal constrains.
    pub fn target(&self) -> &str {
        match self {
            Goal::Toggle { target, .. } => target,
            Goal::Fill { field, .. } => field,
            Goal::Menu { item, .. } => item,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDraft {
    pub family: TaskFamily,
    pub instruction: String,
    pub guideline: Vec<String>,
    pub params: BTreeMap<String, String>,
}

impl TaskDraft {
    pub fn template_id(&self) -> Result<&str, TaskgenError> {
        self.params
            .get("template")
            .map(String::as_str)
            .ok_or_else(|| TaskgenError::BadDraft("missing template".into()))
    }

    pub fn seed(&self) -> Result<u64, TaskgenError> {
        self.params
            .get("seed")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| TaskgenError::BadDraft("missing or bad seed".into()))
    }

    pub fn goals(&self) -> Result<Vec<Goal>, TaskgenError> {
        let mut goals = Vec::new();
        for i in 0.. {
            match self.params.get(&format!("goal.{i}")) {
                Some(encoded) => goals.push(
                    Goal::decode(encoded).ok_or_else(|| TaskgenError::BadDraft(format!("bad goal `{encoded}`")))?,
                ),
                None => break,
            }
        }
        if goals.is_empty() {
            return Err(TaskgenError::BadDraft("no goals".into()));
        }
        Ok(goals)
    }

    /// Identity used by [`dedup`]: wording plays no part.
    pub fn identity_key(&self) -> String {
        let mut targets: Vec<String> = self
            .goals()
            .map(|g| g.iter().map(|g| g.target().to_string()).collect())
            .unwrap_or_default();
        targets.sort();
        format!(
            "{}-{}-s{}-{}",
            self.family.as_str(),
            self.params.get("template").map(String::as_str).unwrap_or("?"),
            self.params.get("seed").map(String::as_str).unwrap_or("?"),
            targets.join("+")
        )
    }
}

/// Ground-truth script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExecProgram {
    pub steps: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VerifyProgram {
    pub predicate: Predicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    MissingDone,
    MissingStep,
    WrongTarget,
    NegatedPredicate,
}

impl Mutation {
    pub const ALL: [Mutation; 4] = [
        Mutation::MissingDone,
        Mutation::MissingStep,
        Mutation::WrongTarget,
        Mutation::NegatedPredicate,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub exec: ExecProgram,
    pub verify: VerifyProgram,
    /// `None` for the grammar's canonical pair.
    pub mutation: Option<Mutation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "TaskRecord", try_from = "TaskRecord")]
pub struct VerifiableTask {
    pub id: String,
    pub draft: TaskDraft,
    pub exec: ExecProgram,
    pub verify: VerifyProgram,
    pub template_id: String,
    pub seed: u64,
}

impl VerifiableTask {
    pub fn instruction(&self) -> &str {
        &self.draft.instruction
    }

    pub fn initial_state(&self) -> ScreenState {
        spawn(&self.template_id, self.seed).expect("validated tasks name registered templates")
    }
}

/// Flat line format of `tasks.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaskRecord {
    id: String,
    family: TaskFamily,
    template_id: String,
    seed: u64,
    instruction: String,
    guideline: Vec<String>,
    #[serde(default)]
    params: BTreeMap<String, String>,
    exec: Vec<Action>,
    verify: Predicate,
}

impl From<VerifiableTask> for TaskRecord {
    fn from(t: VerifiableTask) -> Self {
        TaskRecord {
            id: t.id,
            family: t.draft.family,
            template_id: t.template_id,
            seed: t.seed,
            instruction: t.draft.instruction,
            guideline: t.draft.guideline,
            params: t.draft.params,
            exec: t.exec.steps,
            verify: t.verify.predicate,
        }
    }
}

#[derive(Debug)]
pub struct RecordError(String);

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<TaskRecord> for VerifiableTask {
    type Error = RecordError;

    fn try_from(r: TaskRecord) -> Result<Self, Self::Error> {
        if !env::TEMPLATE_IDS.contains(&r.template_id.as_str()) {
            return Err(RecordError(format!("unknown template `{}`", r.template_id)));
        }
        Ok(VerifiableTask {
            id: r.id,
            draft: TaskDraft {
                family: r.family,
                instruction: r.instruction,
                guideline: r.guideline,
                params: r.params,
            },
            exec: ExecProgram { steps: r.exec },
            verify: VerifyProgram { predicate: r.verify },
            template_id: r.template_id,
            seed: r.seed,
        })
    }
}

fn checkbox_ids(state: &ScreenState) -> Vec<&str> {
    ids_of(state, WidgetKind::Checkbox)
}

fn ids_of(state: &ScreenState, kind: WidgetKind) -> Vec<&str> {
    state.widgets.iter().filter(|w| w.kind == kind).map(|w| w.id.as_str()).collect()
}

fn label_of<'a>(state: &'a ScreenState, id: &'a str) -> &'a str {
    state.widget(id).map(|w| w.label.as_str()).unwrap_or(id)
}

fn children<'a>(state: &'a ScreenState, menu: &str) -> Vec<&'a str> {
    state
        .widgets
        .iter()
        .filter(|w| w.parent.as_deref() == Some(menu))
        .map(|w| w.id.as_str())
        .collect()
}

fn pick<'a, T: ?Sized>(rng: &mut seed::Rng, xs: &[&'a T]) -> &'a T {
    xs[rng.gen_range(0..xs.len())]
}

fn toggle_goal(state: &ScreenState, rng: &mut seed::Rng, exclude: &[&str]) -> Goal {
    let ids: Vec<&str> = checkbox_ids(state).into_iter().filter(|id| !exclude.contains(id)).collect();
    let target = pick(rng, &ids);
    Goal::Toggle {
        target: target.to_string(),
        desired: !state.widget(target).map(|w| w.checked).unwrap_or(false),
    }
}

fn fill_goal(state: &ScreenState, rng: &mut seed::Rng) -> Goal {
    let ids = ids_of(state, WidgetKind::TextField);
    let field = pick(rng, &ids);
    let current = state.widget(field).map(|w| w.value.as_str()).unwrap_or("");
    let texts: Vec<&str> = FILL_TEXTS.iter().copied().filter(|t| !current.contains(t)).collect();
    Goal::Fill {
        field: field.to_string(),
        text: pick(rng, &texts).to_string(),
    }
}

fn menu_goal(state: &ScreenState, rng: &mut seed::Rng) -> Goal {
    let menus = ids_of(state, WidgetKind::Menu);
    let menu = pick(rng, &menus);
    let items = children(state, menu);
    Goal::Menu {
        menu: menu.to_string(),
        item: pick(rng, &items).to_string(),
    }
}

fn toggle_clause(state: &ScreenState, goal: &Goal, rng: &mut seed::Rng, standalone: bool, app: &str) -> String {
    let Goal::Toggle { target, desired } = goal else {
        unreachable!()
    };
    let l = label_of(state, target);
    let (turn, able) = if *desired { ("on", "Enable") } else { ("off", "Disable") };
    if standalone {
        match rng.gen_range(0..3) {
            0 => format!("Turn {turn} the {l} switch in {app}"),
            1 => format!("{able} {l} in {app}"),
            _ => format!("Switch {l} {turn} in {app}"),
        }
    } else {
        match rng.gen_range(0..2) {
            0 => format!("turn {turn} {l}"),
            _ => format!("{} {l}", able.to_lowercase()),
        }
    }
}

fn fill_clause(state: &ScreenState, goal: &Goal, rng: &mut seed::Rng) -> String {
    let Goal::Fill { field, text } = goal else {
        unreachable!()
    };
    let l = label_of(state, field);
    match rng.gen_range(0..3) {
        0 => format!("Type \"{text}\" into the {l} field"),
        1 => format!("Enter \"{text}\" in the {l} field"),
        _ => format!("Write \"{text}\" in {l}"),
    }
}

fn menu_clause(state: &ScreenState, goal: &Goal, rng: &mut seed::Rng) -> String {
    let Goal::Menu { menu, item } = goal else {
        unreachable!()
    };
    let (m, i) = (label_of(state, menu), label_of(state, item));
    match rng.gen_range(0..3) {
        0 => format!("choose {i} from the {m} menu"),
        1 => format!("open the {m} menu and select {i}"),
        _ => format!("select {i} in the {m} menu"),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn guideline_for(state: &ScreenState, goal: &Goal) -> Vec<String> {
    match goal {
        Goal::Toggle { target, .. } => vec![format!("Click the {} checkbox", label_of(state, target))],
        Goal::Fill { field, text } => vec![
            format!("Click the {} field", label_of(state, field)),
            format!("Type \"{text}\""),
        ],
        Goal::Menu { menu, item } => vec![
            format!("Open the {} menu", label_of(state, menu)),
            format!("Select {}", label_of(state, item)),
        ],
    }
}

/// Draft one task of the given family. Deterministic in the rng state.
pub fn draft_task(family: TaskFamily, rng: &mut seed::Rng) -> TaskDraft {
    let template = match family {
        TaskFamily::Toggle => ["settings", "settings", "settings", "settings", "file_manager", "editor"][rng.gen_range(0..6)],
        TaskFamily::FillField | TaskFamily::MenuSelect => ["editor", "file_manager"][rng.gen_range(0..2)],
        TaskFamily::Compound => ["settings", "editor", "file_manager"][rng.gen_range(0..3)],
    };
    let seed = rng.gen_range(0..SEED_SPACE);
    let state = spawn(template, seed).expect("registered template");
    let app = env::app_name(template);

    let (goals, instruction) = match family {
        TaskFamily::Toggle => {
            let g = toggle_goal(&state, rng, &[]);
            let text = toggle_clause(&state, &g, rng, true, app);
            (vec![g], text)
        }
        TaskFamily::FillField => {
            let g = fill_goal(&state, rng);
            let text = fill_clause(&state, &g, rng);
            (vec![g], text)
        }
        TaskFamily::MenuSelect => {
            let g = menu_goal(&state, rng);
            let text = capitalize(&menu_clause(&state, &g, rng));
            (vec![g], text)
        }
        TaskFamily::Compound if template == "settings" => {
            let a = toggle_goal(&state, rng, &[]);
            let b = toggle_goal(&state, rng, &[a.target()]);
            let first = capitalize(&toggle_clause(&state, &a, rng, false, app));
            let second = toggle_clause(&state, &b, rng, false, app);
            let text = format!("{first} and {second} in {app}");
            (vec![a, b], text)
        }
        TaskFamily::Compound => {
            let a = fill_goal(&state, rng);
            let b = menu_goal(&state, rng);
            let first = fill_clause(&state, &a, rng);
            let second = menu_clause(&state, &b, rng);
            let joiner = if rng.gen_bool(0.5) { ", then" } else { " and" };
            (vec![a, b], format!("{first}{joiner} {second}"))
        }
    };

    let mut guideline: Vec<String> = goals.iter().flat_map(|g| guideline_for(&state, g)).collect();
    guideline.push("Finish the task".to_string());

    let mut params = BTreeMap::new();
    params.insert("template".to_string(), template.to_string());
    params.insert("seed".to_string(), seed.to_string());
    for (i, g) in goals.iter().enumerate() {
        params.insert(format!("goal.{i}"), g.encode());
    }
    TaskDraft {
        family,
        instruction,
        guideline,
        params,
    }
}

fn rect_click(state: &ScreenState, id: &str) -> Result<Action, TaskgenError> {
    state
        .widget(id)
        .map(|w| Action::click_at(&w.rect))
        .ok_or_else(|| TaskgenError::BadDraft(format!("unknown widget `{id}`")))
}

/// Steps realizing one goal; the last entry is the goal's decisive click
/// (or the type for fills).
fn goal_steps(state: &ScreenState, goal: &Goal) -> Result<Vec<Action>, TaskgenError> {
    Ok(match goal {
        Goal::Toggle { target, .. } => vec![rect_click(state, target)?],
        Goal::Fill { field, text } => vec![rect_click(state, field)?, Action::Type { text: text.clone() }],
        Goal::Menu { menu, item } => vec![rect_click(state, menu)?, rect_click(state, item)?],
    })
}

fn goal_predicate(state: &ScreenState, goal: &Goal) -> Predicate {
    match goal {
        Goal::Toggle { target, desired } => Predicate::equals(target, Attr::Checked, AttrValue::Bool(*desired)),
        Goal::Fill { field, text } => Predicate::contains(field, Attr::Value, text),
        Goal::Menu { item, .. } => Predicate::equals(
            STATUS_ID,
            Attr::Value,
            AttrValue::Text(label_of(state, item).to_string()),
        ),
    }
}

/// Canonical pair the grammar associates with a draft.
pub fn canonical_programs(draft: &TaskDraft) -> Result<(ExecProgram, VerifyProgram), TaskgenError> {
    let state = spawn(draft.template_id()?, draft.seed()?).map_err(|e| TaskgenError::BadDraft(e.to_string()))?;
    let goals = draft.goals()?;
    let mut steps = Vec::new();
    for g in &goals {
        steps.extend(goal_steps(&state, g)?);
    }
    steps.push(Action::Done);
    let mut preds: Vec<Predicate> = goals.iter().map(|g| goal_predicate(&state, g)).collect();
    let predicate = if preds.len() == 1 {
        preds.remove(0)
    } else {
        Predicate::And { args: preds }
    };
    Ok((ExecProgram { steps }, VerifyProgram { predicate }))
}

/// A widget to click instead of the first goal's decisive target.
fn distractor<'a>(state: &'a ScreenState, goals: &[Goal]) -> &'a str {
    let first = goals[0].target();
    let kind = state.widget(first).map(|w| w.kind);
    let parent = state.widget(first).and_then(|w| w.parent.clone());
    let taken: Vec<&str> = goals.iter().map(Goal::target).collect();
    state
        .widgets
        .iter()
        .find(|w| Some(w.kind) == kind && w.parent == parent && !taken.contains(&w.id.as_str()))
        .map(|w| w.id.as_str())
        .unwrap_or(STATUS_ID)
}

fn mutate(
    state: &ScreenState,
    goals: &[Goal],
    canonical: &(ExecProgram, VerifyProgram),
    mutation: Mutation,
) -> Result<Candidate, TaskgenError> {
    let (exec, verify) = canonical.clone();
    let mut steps = exec.steps;
    let mut predicate = verify.predicate;
    match mutation {
        Mutation::MissingDone => {
            steps.pop();
        }
        Mutation::MissingStep => {
            steps.remove(0);
        }
        Mutation::WrongTarget => {
            let first_len = goal_steps(state, &goals[0])?.len();
            let decisive = match goals[0] {
                Goal::Fill { .. } => 0,
                _ => first_len - 1,
            };
            steps[decisive] = rect_click(state, distractor(state, goals))?;
        }
        Mutation::NegatedPredicate => {
            predicate = Predicate::Not {
                arg: Box::new(predicate),
            };
        }
    }
    Ok(Candidate {
        exec: ExecProgram { steps },
        verify: VerifyProgram { predicate },
        mutation: Some(mutation),
    })
}

/// Synthesize `batch` candidate pairs: the canonical pair at a random slot,
/// the rest mutations cycling through [`Mutation::ALL`] from a random offset.
pub fn synthesize_programs(draft: &TaskDraft, rng: &mut seed::Rng, batch: usize) -> Result<Vec<Candidate>, TaskgenError> {
    if batch < 2 {
        return Err(TaskgenError::BatchTooSmall(batch));
    }
    let state = spawn(draft.template_id()?, draft.seed()?).map_err(|e| TaskgenError::BadDraft(e.to_string()))?;
    let goals = draft.goals()?;
    let canonical = canonical_programs(draft)?;
    let offset = rng.gen_range(0..Mutation::ALL.len());
    let mut out = Vec::with_capacity(batch);
    for i in 0..batch - 1 {
        let m = Mutation::ALL[(offset + i) % Mutation::ALL.len()];
        out.push(mutate(&state, &goals, &canonical, m)?);
    }
    let slot = rng.gen_range(0..batch);
    out.insert(
        slot,
        Candidate {
            exec: canonical.0,
            verify: canonical.1,
            mutation: None,
        },
    );
    Ok(out)
}

/// Replay the execution program from a fresh spawn and check the predicate:
/// false before, true after.
pub fn closed_loop_validate(
    exec: &ExecProgram,
    verify: &VerifyProgram,
    draft: &TaskDraft,
) -> Result<VerifiableTask, Rejection> {
    let template_id = draft.template_id().map_err(|_| Rejection::ExecFailed)?;
    let seed = draft.seed().map_err(|_| Rejection::ExecFailed)?;
    let initial = spawn(template_id, seed).map_err(|_| Rejection::ExecFailed)?;

    let Some((last, body)) = exec.steps.split_last() else {
        return Err(Rejection::ExecFailed);
    };
    if *last != Action::Done || body.iter().any(|a| *a == Action::Done) {
        return Err(Rejection::ExecFailed);
    }
    if verify.predicate.widget_refs().iter().any(|id| initial.widget(id).is_none()) {
        return Err(Rejection::VerifyFalse);
    }
    if verify.predicate.eval(&initial) {
        return Err(Rejection::VacuousPredicate);
    }
    let final_state = exec.steps.iter().fold(initial, |s, a| s.apply(a));
    if !final_state.terminal || !verify.predicate.eval(&final_state) {
        return Err(Rejection::VerifyFalse);
    }
    Ok(VerifiableTask {
        id: draft.identity_key(),
        draft: draft.clone(),
        exec: exec.clone(),
        verify: verify.clone(),
        template_id: template_id.to_string(),
        seed,
    })
}

/// Order-preserving removal of drafts whose identity matches an earlier one.
pub fn dedup(drafts: Vec<TaskDraft>) -> Vec<TaskDraft> {
    let mut seen = HashSet::new();
    drafts.into_iter().filter(|d| seen.insert(d.identity_key())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskgenConfig {
    pub count: usize,
    pub seed: u64,
    pub batch: usize,
}

impl Default for TaskgenConfig {
    fn default() -> Self {
        TaskgenConfig { count: 400, seed: 0, batch: 4 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaskgenStats {
    pub drafts: usize,
    pub duplicates: usize,
    pub candidates: usize,
    pub mutated: usize,
    pub mutated_rejected: usize,
    pub canonical_rejected: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub tasks: Vec<VerifiableTask>,
    pub stats: TaskgenStats,
}

/// Draft, deduplicate, synthesize and validate until `count` tasks exist.
/// Draft `i` uses its own seeded stream, so the corpus is a pure function of
/// the config.
pub fn generate_corpus(cfg: &TaskgenConfig) -> Result<Corpus, TaskgenError> {
    if cfg.batch < 2 {
        return Err(TaskgenError::BatchTooSmall(cfg.batch));
    }
    let mut stats = TaskgenStats::default();
    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(cfg.count);
    let max_attempts = cfg.count.saturating_mul(50).max(100);
    let mut i = 0u64;
    while tasks.len() < cfg.count {
        if stats.drafts >= max_attempts {
            return Err(TaskgenError::Exhausted {
                attempts: stats.drafts,
                kept: tasks.len(),
            });
        }
        let mut draft_rng = seed::rng(seed::derive_indexed(cfg.seed, "draft", i));
        let mut synth_rng = seed::rng(seed::derive_indexed(cfg.seed, "synth", i));
        i += 1;
        let family = *TaskFamily::ALL.choose(&mut draft_rng).expect("non-empty");
        let draft = draft_task(family, &mut draft_rng);
        stats.drafts += 1;
        if !seen.insert(draft.identity_key()) {
            stats.duplicates += 1;
            continue;
        }
        let mut accepted = None;
        for cand in synthesize_programs(&draft, &mut synth_rng, cfg.batch)? {
            stats.candidates += 1;
            let verdict = closed_loop_validate(&cand.exec, &cand.verify, &draft);
            match (cand.mutation, verdict) {
                (Some(_), result) => {
                    stats.mutated += 1;
                    if result.is_err() {
                        stats.mutated_rejected += 1;
                    }
                }
                (None, Ok(task)) => accepted = accepted.or(Some(task)),
                (None, Err(_)) => stats.canonical_rejected += 1,
            }
        }
        if let Some(task) = accepted {
            tasks.push(task);
        }
    }
    Ok(Corpus { tasks, stats })
}

#[cfg(test)]
mod tests;
