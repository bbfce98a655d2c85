use crate::env::ScreenState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attr {
    Checked,
    Value,
    Open,
    Visible,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Text(String),
}

/// Verification predicate over widget attributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    AttrEquals { widget: String, attr: Attr, value: AttrValue },
    AttrContains { widget: String, attr: Attr, value: String },
    And { args: Vec<Predicate> },
    Or { args: Vec<Predicate> },
    Not { arg: Box<Predicate> },
}

impl Predicate {
    pub fn equals(widget: &str, attr: Attr, value: AttrValue) -> Self {
        Predicate::AttrEquals {
            widget: widget.to_string(),
            attr,
            value,
        }
    }

    pub fn contains(widget: &str, attr: Attr, value: &str) -> Self {
        Predicate::AttrContains {
            widget: widget.to_string(),
            attr,
            value: value.to_string(),
        }
    }

    /// References to widgets that do not exist evaluate to false.
    pub fn eval(&self, state: &ScreenState) -> bool {
        match self {
            Predicate::AttrEquals { widget, attr, value } => {
                state.widget(widget).is_some_and(|w| match (attr, value) {
                    (Attr::Checked, AttrValue::Bool(b)) => w.checked == *b,
                    (Attr::Open, AttrValue::Bool(b)) => w.open == *b,
                    (Attr::Visible, AttrValue::Bool(b)) => w.visible == *b,
                    (Attr::Value, AttrValue::Text(t)) => w.value == *t,
                    (Attr::Label, AttrValue::Text(t)) => w.label == *t,
                    _ => false,
                })
            }
            Predicate::AttrContains { widget, attr, value } => {
                state.widget(widget).is_some_and(|w| match attr {
                    Attr::Value => w.value.contains(value.as_str()),
                    Attr::Label => w.label.contains(value.as_str()),
                    _ => false,
                })
            }
            Predicate::And { args } => args.iter().all(|p| p.eval(state)),
            Predicate::Or { args } => args.iter().any(|p| p.eval(state)),
            Predicate::Not { arg } => !arg.eval(state),
        }
    }

    pub fn widget_refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::AttrEquals { widget, .. } | Predicate::AttrContains { widget, .. } => out.push(widget),
            Predicate::And { args } | Predicate::Or { args } => args.iter().for_each(|p| p.collect_refs(out)),
            Predicate::Not { arg } => arg.collect_refs(out),
        }
    }
}
