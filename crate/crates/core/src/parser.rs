//! Command grammar: `name(arg1, arg2)` call syntax over the twenty action
//! forms, plus a handful of bare zero-argument spellings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionForm {
    Look,
    Goal,
    Inventory,
    Go,
    Examine,
    Eat,
    Open,
    Close,
    Drop,
    Take,
    Put,
    TakeFrom,
    Insert,
    Lock,
    Unlock,
    Cook,
    Slice,
    Chop,
    Dice,
    PrepareMeal,
}

impl ActionForm {
    pub const ALL: [ActionForm; 20] = [
        ActionForm::Look,
        ActionForm::Goal,
        ActionForm::Inventory,
        ActionForm::Go,
        ActionForm::Examine,
        ActionForm::Eat,
        ActionForm::Open,
        ActionForm::Close,
        ActionForm::Drop,
        ActionForm::Take,
        ActionForm::Put,
        ActionForm::TakeFrom,
        ActionForm::Insert,
        ActionForm::Lock,
        ActionForm::Unlock,
        ActionForm::Cook,
        ActionForm::Slice,
        ActionForm::Chop,
        ActionForm::Dice,
        ActionForm::PrepareMeal,
    ];

    pub fn name(self) -> &'static str {
        self.signature().0
    }

    pub fn arity(self) -> usize {
        self.signature().1.len()
    }

    /// Name, parameter names and help text, as listed to the agent.
    pub fn signature(self) -> (&'static str, &'static [&'static str], &'static str) {
        match self {
            ActionForm::Look => ("look", &[], "describe the current room"),
            ActionForm::Goal => ("goal", &[], "print the goal of this game"),
            ActionForm::Inventory => ("inventory", &[], "print player's inventory"),
            ActionForm::Go => (
                "go",
                &["direction"],
                "move the player north, east, south, or west",
            ),
            ActionForm::Examine => ("examine", &["item"], "examine something more closely"),
            ActionForm::Eat => ("eat", &["food"], "eat edible food"),
            ActionForm::Open => ("open", &["item"], "open a door or a container"),
            ActionForm::Close => ("close", &["item"], "close a door or a container"),
            ActionForm::Drop => ("drop", &["item"], "drop an item on the floor"),
            ActionForm::Take => ("take", &["item"], "take an item that is on the floor"),
            ActionForm::Put => ("put", &["item", "supporter"], "place an item on a supporter"),
            ActionForm::TakeFrom => (
                "take_from",
                &["item", "container"],
                "take an item from a container or a supporter",
            ),
            ActionForm::Insert => (
                "insert",
                &["item", "container"],
                "place an item into a container",
            ),
            ActionForm::Lock => (
                "lock",
                &["item", "key"],
                "lock a door or a container with a key",
            ),
            ActionForm::Unlock => (
                "unlock",
                &["item", "key"],
                "unlock a door or a container with a key",
            ),
            ActionForm::Cook => (
                "cook",
                &["food", "heat_source"],
                "cook cookable food with something providing heat",
            ),
            ActionForm::Slice => (
                "slice",
                &["food", "sharp_object"],
                "slice cuttable food with something sharp",
            ),
            ActionForm::Chop => (
                "chop",
                &["food", "sharp_object"],
                "chop cuttable food with something sharp",
            ),
            ActionForm::Dice => (
                "dice",
                &["food", "sharp_object"],
                "dice cuttable food with something sharp",
            ),
            ActionForm::PrepareMeal => (
                "prepare_meal",
                &[],
                "combine ingredients from inventory into a meal",
            ),
        }
    }

    pub fn from_name(name: &str) -> Option<ActionForm> {
        ActionForm::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name))
    }
}

/// One line per form, `name(params) -- help`.
pub fn action_list() -> String {
    ActionForm::ALL
        .iter()
        .map(|f| {
            let (name, params, help) = f.signature();
            format!("{name}({}) -- {help}", params.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A parsed command. Arity always matches the form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    form: ActionForm,
    args: Vec<String>,
}

impl Action {
    pub fn new(form: ActionForm, args: Vec<String>) -> Result<Action, ParseError> {
        if args.len() != form.arity() {
            return Err(ParseError::Arity {
                form: form.name(),
                expected: form.arity(),
                got: args.len(),
            });
        }
        for arg in &args {
            check_arg(arg)?;
        }
        Ok(Action { form, args })
    }

    /// Convenience constructor for known-good arguments.
    pub fn of(form: ActionForm, args: &[&str]) -> Action {
        Action::new(form, args.iter().map(|a| a.to_string()).collect())
            .expect("valid action arguments")
    }

    pub fn form(&self) -> ActionForm {
        self.form
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    pub fn arg(&self, i: usize) -> &str {
        &self.args[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty command")]
    Empty,
    #[error("unknown action {0:?}")]
    UnknownForm(String),
    #[error("{form} takes {expected} argument(s), got {got}")]
    Arity {
        form: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("malformed command: {0}")]
    Malformed(&'static str),
}

fn check_arg(arg: &str) -> Result<(), ParseError> {
    if arg.is_empty() || arg.trim() != arg {
        return Err(ParseError::Malformed("empty or padded argument"));
    }
    if arg.contains(['(', ')', ',', '\n', '\r']) {
        return Err(ParseError::Malformed("argument contains a delimiter"));
    }
    Ok(())
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses one command line.
pub fn parse(text: &str) -> Result<Action, ParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseError::Empty);
    }

    let Some(open) = text.find('(') else {
        // Loose zero-argument spellings.
        let words: Vec<&str> = text.split_whitespace().collect();
        let loose = match words.as_slice() {
            [w] => ActionForm::from_name(w).filter(|f| f.arity() == 0),
            [a, b] if a.eq_ignore_ascii_case("prepare") && b.eq_ignore_ascii_case("meal") => {
                Some(ActionForm::PrepareMeal)
            }
            _ => None,
        };
        return match loose {
            Some(form) => Ok(Action { form, args: Vec::new() }),
            None if words.len() == 1 && is_ident(words[0]) => match ActionForm::from_name(words[0]) {
                Some(form) => Err(ParseError::Arity {
                    form: form.name(),
                    expected: form.arity(),
                    got: 0,
                }),
                None => Err(ParseError::UnknownForm(words[0].to_string())),
            },
            None => Err(ParseError::UnknownForm(text.to_string())),
        };
    };

    let name = text[..open].trim_end();
    if !is_ident(name) {
        return Err(ParseError::UnknownForm(name.to_string()));
    }
    let form = ActionForm::from_name(name).ok_or_else(|| ParseError::UnknownForm(name.to_string()))?;
    let Some(inner) = text[open + 1..].strip_suffix(')') else {
        return Err(ParseError::Malformed("missing closing parenthesis"));
    };
    if inner.contains(['(', ')']) {
        return Err(ParseError::Malformed("nested parentheses"));
    }
    let args: Vec<String> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|a| a.trim().to_string()).collect()
    };
    if args.iter().any(|a| a.is_empty()) {
        return Err(ParseError::Malformed("empty argument"));
    }
    Action::new(form, args)
}

/// A policy reply reduced to the line that gets parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplyLine<'a> {
    pub command: &'a str,
    /// Everything after the command line, if non-blank.
    pub discarded: Option<&'a str>,
}

/// Picks the first non-empty line of a (possibly multi-line) reply.
pub fn first_command_line(reply: &str) -> ReplyLine<'_> {
    let mut rest = reply;
    while !rest.is_empty() {
        let (line, tail) = match rest.find('\n') {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, ""),
        };
        if !line.trim().is_empty() {
            let tail = tail.trim();
            return ReplyLine {
                command: line.trim(),
                discarded: (!tail.is_empty()).then_some(tail),
            };
        }
        rest = tail;
    }
    ReplyLine { command: "", discarded: None }
}

/// Canonical lower-case call syntax.
pub fn render(action: &Action) -> String {
    format!("{}({})", action.form.name(), action.args.join(", "))
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

impl FromStr for Action {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render(self))
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}
