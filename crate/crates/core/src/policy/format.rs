//! Two-line response grammar.
//!
//! ```text
//! THOUGHT <verb> [<target_id>]
//! ACTION <verb>(<key>=<value>,...)
//! ```
//!
//! Lines are separated by a single `\n` with nothing after the second line.
//! Target ids are `[A-Za-z0-9_]+`; a click thought must name one. Text
//! values are double-quoted with `\"`, `\\` and `\n` escapes.

use crate::env::{Action, Key, Thought, Verb};

#[derive(Debug, Clone, Copy, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing THOUGHT or ACTION line")]
    MissingLine,
    #[error("unknown verb")]
    BadVerb,
    #[error("malformed arguments")]
    BadArgs,
}

pub fn serialize(thought: &Thought, action: &Action) -> String {
    let mut out = format!("THOUGHT {}", thought.intent_verb);
    if let Some(t) = &thought.intent_target {
        out.push(' ');
        out.push_str(t);
    }
    out.push_str("\nACTION ");
    out.push_str(action.verb().as_str());
    out.push('(');
    match action {
        Action::Click { x, y } => out.push_str(&format!("x={x},y={y}")),
        Action::Type { text } => {
            out.push_str("text=\"");
            for c in text.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        Action::Key { key } => out.push_str(&format!("key={}", key.as_str())),
        Action::Scroll { dy } => out.push_str(&format!("dy={dy}")),
        Action::Done => {}
    }
    out.push(')');
    out
}

pub fn parse(raw: &str) -> Result<(Thought, Action), ParseError> {
    let mut lines = raw.split('\n');
    let first = lines.next().unwrap_or("");
    let thought_line = first.strip_prefix("THOUGHT ").ok_or(ParseError::MissingLine)?;
    let action_line = lines
        .next()
        .and_then(|l| l.strip_prefix("ACTION "))
        .ok_or(ParseError::MissingLine)?;
    if lines.next().is_some() {
        return Err(ParseError::BadArgs);
    }
    Ok((parse_thought(thought_line)?, parse_action(action_line)?))
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn parse_thought(line: &str) -> Result<Thought, ParseError> {
    let mut parts = line.split(' ');
    let verb = Verb::from_name(parts.next().unwrap_or("")).ok_or(ParseError::BadVerb)?;
    let target = parts.next();
    if parts.next().is_some() {
        return Err(ParseError::BadArgs);
    }
    if let Some(t) = target {
        if !is_ident(t) {
            return Err(ParseError::BadArgs);
        }
    }
    if verb == Verb::Click && target.is_none() {
        return Err(ParseError::BadArgs);
    }
    Ok(Thought::new(verb, target))
}

fn parse_int(s: &str) -> Result<i32, ParseError> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseError::BadArgs);
    }
    s.parse().map_err(|_| ParseError::BadArgs)
}

fn parse_action(line: &str) -> Result<Action, ParseError> {
    let open = line.find('(').ok_or(ParseError::BadArgs)?;
    let verb = Verb::from_name(&line[..open]).ok_or(ParseError::BadVerb)?;
    let args = line[open + 1..].strip_suffix(')').ok_or(ParseError::BadArgs)?;
    match verb {
        Verb::Click => {
            let (x, y) = args.split_once(',').ok_or(ParseError::BadArgs)?;
            let x = parse_int(x.strip_prefix("x=").ok_or(ParseError::BadArgs)?)?;
            let y = parse_int(y.strip_prefix("y=").ok_or(ParseError::BadArgs)?)?;
            Ok(Action::Click { x, y })
        }
        Verb::Type => {
            let body = args
                .strip_prefix("text=\"")
                .and_then(|s| s.strip_suffix('"'))
                .ok_or(ParseError::BadArgs)?;
            let mut text = String::with_capacity(body.len());
            let mut chars = body.chars();
            while let Some(c) = chars.next() {
                match c {
                    '\\' => match chars.next() {
                        Some('"') => text.push('"'),
                        Some('\\') => text.push('\\'),
                        Some('n') => text.push('\n'),
                        _ => return Err(ParseError::BadArgs),
                    },
                    '"' => return Err(ParseError::BadArgs),
                    c => text.push(c),
                }
            }
            Ok(Action::Type { text })
        }
        Verb::Key => {
            let name = args.strip_prefix("key=").ok_or(ParseError::BadArgs)?;
            Ok(Action::Key {
                key: Key::from_name(name).ok_or(ParseError::BadArgs)?,
            })
        }
        Verb::Scroll => Ok(Action::Scroll {
            dy: parse_int(args.strip_prefix("dy=").ok_or(ParseError::BadArgs)?)?,
        }),
        Verb::Done if args.is_empty() => Ok(Action::Done),
        Verb::Done => Err(ParseError::BadArgs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_grammar_fixture() {
        let (t, a) = parse("THOUGHT click wifi\nACTION click(x=120,y=88)").unwrap();
        assert_eq!(t, Thought::new(Verb::Click, Some("wifi")));
        assert_eq!(a, Action::Click { x: 120, y: 88 });
    }

    #[test]
    fn error_kinds() {
        assert_eq!(parse("ACTION click(x=1,y=2)").unwrap_err(), ParseError::MissingLine);
        assert_eq!(parse("").unwrap_err(), ParseError::MissingLine);
        assert_eq!(parse("THOUGHT done").unwrap_err(), ParseError::MissingLine);
        assert_eq!(parse("THOUGHT fly\nACTION done()").unwrap_err(), ParseError::BadVerb);
        assert_eq!(parse("THOUGHT done\nACTION jump()").unwrap_err(), ParseError::BadVerb);
        assert_eq!(parse("THOUGHT click\nACTION done()").unwrap_err(), ParseError::BadArgs);
        assert_eq!(parse("THOUGHT click wifi\nACTION click(x=1)").unwrap_err(), ParseError::BadArgs);
        assert_eq!(parse("THOUGHT click wifi\nACTION click(x=+1,y=2)").unwrap_err(), ParseError::BadArgs);
        assert_eq!(parse("THOUGHT type\nACTION type(text=\"a\"b\")").unwrap_err(), ParseError::BadArgs);
        assert_eq!(parse("THOUGHT key\nACTION key(key=space)").unwrap_err(), ParseError::BadArgs);
        assert_eq!(parse("THOUGHT done\nACTION done()\n").unwrap_err(), ParseError::BadArgs);
        assert_eq!(parse("THOUGHT done\nACTION done(x=1)").unwrap_err(), ParseError::BadArgs);
    }

    #[test]
    fn escapes_round_trip() {
        let t = Thought::new(Verb::Type, Some("title"));
        let a = Action::Type {
            text: "say \"hi\", \\ ok)\nnext".into(),
        };
        let raw = serialize(&t, &a);
        assert_eq!(parse(&raw).unwrap(), (t, a));
    }

    fn arb_action() -> impl Strategy<Value = Action> {
        prop_oneof![
            (any::<i32>(), any::<i32>()).prop_map(|(x, y)| Action::Click { x, y }),
            any::<String>().prop_map(|text| Action::Type { text }),
            prop_oneof![Just(Key::Enter), Just(Key::Tab), Just(Key::Esc)].prop_map(|key| Action::Key { key }),
            any::<i32>().prop_map(|dy| Action::Scroll { dy }),
            Just(Action::Done),
        ]
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(action in arb_action(), target in "[a-z_]{1,12}", verb in 0usize..5) {
            let verb = Verb::ALL[verb];
            let thought = Thought::new(verb, Some(&target));
            prop_assert_eq!(parse(&serialize(&thought, &action)).unwrap(), (thought, action.clone()));
            if verb != Verb::Click {
                let bare = Thought::new(verb, None);
                prop_assert_eq!(parse(&serialize(&bare, &action)).unwrap(), (bare, action));
            }
        }

        #[test]
        fn parse_never_panics(s in ".*") {
            let _ = parse(&s);
        }
    }
}
