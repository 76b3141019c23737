//! Chat parser: a small template grammar that turns utterances into SAL
//! call trees (questions) or robot commands, plus the clarification
//! dialogue for ambiguous references.
//!
//! Parsing is pure given the lexicon, the utterance and the dialogue state.
//! It never fails; unmatched input yields [`ParseResult::Unparseable`] with
//! the closest template as a hint.

mod normalize;
mod reference;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use normalize::{normalize, pluralize, singularize, Utterance};
pub use reference::{render_clarification, resolve_reference, Candidate, FeatureKind, Resolution};

use crate::graph::Graph;
use crate::ids::InstanceId;
use crate::sal::{ArgExpr, CallTree, SalFunction};
use crate::sim::Verb;

/// Every supported template, in the order they are tried.
pub const TEMPLATES: [&str; 16] = [
    "where is X",
    "where is something to V",
    "how many X are on/in Y",
    "how many X are there",
    "what is on/in Y",
    "what can you do with X",
    "go to X",
    "bring X to Y",
    "grab X",
    "pick up X",
    "put X on/in Y",
    "open X",
    "close X",
    "switch on X",
    "switch off X",
    "look at X",
];

/// Token range `[start, end)` in the normalized utterance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// A noun phrase: head lemma plus optional descriptors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRef {
    pub lemma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Box<ObjectRef>>,
    pub span: Span,
    /// Set once a clarification has picked an instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<InstanceId>,
}

impl ObjectRef {
    pub fn new(lemma: impl Into<String>) -> Self {
        Self { lemma: lemma.into(), state: None, action: None, location: None, span: Span::default(), resolved: None }
    }

    pub fn with_state(mut self, state: impl Into<String>) -> Self {
        self.state = Some(state.into());
        self
    }

    pub fn with_action(mut self, action: impl Into<String>) -> Self {
        self.action = Some(action.into());
        self
    }

    pub fn with_location(mut self, location: ObjectRef) -> Self {
        self.location = Some(Box::new(location));
        self
    }

    /// `function` applied to this phrase's arguments. A location with
    /// descriptors of its own becomes a nested `get_stm_objects` call.
    pub fn tree(&self, function: SalFunction) -> CallTree {
        let mut t = CallTree::new(function).object(self.lemma.as_str());
        if let Some(a) = &self.action {
            t = t.action(a.as_str());
        }
        if let Some(s) = &self.state {
            t = t.state(s.as_str());
        }
        if let Some(l) = &self.location {
            t.location = Some(l.location_expr());
        }
        t
    }

    fn location_expr(&self) -> ArgExpr {
        if self.state.is_none() && self.action.is_none() && self.location.is_none() {
            ArgExpr::from(self.lemma.as_str())
        } else {
            ArgExpr::from(self.tree(SalFunction::GetStmObjects))
        }
    }

    /// Surface form without articles, e.g. `yellow banana in kitchen`.
    pub fn text(&self) -> String {
        let mut s = String::new();
        if let Some(st) = &self.state {
            s.push_str(st);
            s.push(' ');
        }
        s.push_str(&self.lemma);
        if let Some(a) = &self.action {
            s.push_str(" to ");
            s.push_str(a);
        }
        if let Some(l) = &self.location {
            s.push_str(" in ");
            s.push_str(&l.text());
        }
        s
    }

    /// Equality ignoring spans and resolutions.
    pub fn same_phrase(&self, other: &ObjectRef) -> bool {
        self.lemma == other.lemma
            && self.state == other.state
            && self.action == other.action
            && match (&self.location, &other.location) {
                (Some(a), Some(b)) => a.same_phrase(b),
                (None, None) => true,
                _ => false,
            }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Locate,
    Count,
    Enumerate,
    Actions,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub verb: Verb,
    pub object: ObjectRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<ObjectRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "selection", rename_all = "snake_case")]
pub enum Selection {
    Chosen { id: InstanceId },
    /// The reply names several candidates.
    Ambiguous { ids: Vec<InstanceId> },
    NoMatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParseResult {
    Question { kind: QuestionKind, tree: CallTree },
    Command(Command),
    ClarificationReply(Selection),
    Unparseable { reason: String, hint: String, templates: Vec<String> },
}

/// Which reference of a command a clarification is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefSlot {
    Object,
    Destination,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingClarification {
    pub command: Command,
    pub slot: RefSlot,
    pub candidates: Vec<Candidate>,
    pub question: String,
}

/// Per-session dialogue state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub pending: Option<PendingClarification>,
}

impl DialogueState {
    /// Records a clarification and returns the question to ask.
    pub fn ask(&mut self, command: Command, slot: RefSlot, candidates: Vec<Candidate>) -> String {
        let lemma = match slot {
            RefSlot::Object => &command.object,
            RefSlot::Destination => command.destination.as_ref().expect("destination slot"),
        }
        .lemma
        .clone();
        let question = render_clarification(&lemma, &candidates);
        self.pending = Some(PendingClarification { command, slot, candidates, question: question.clone() });
        question
    }

    /// Takes the pending command with the chosen instance filled in.
    pub fn resolve(&mut self, chosen: &InstanceId) -> Option<Command> {
        let p = self.pending.take()?;
        let mut command = p.command;
        let target = match p.slot {
            RefSlot::Object => &mut command.object,
            RefSlot::Destination => command.destination.as_mut().expect("destination slot"),
        };
        target.resolved = Some(chosen.clone());
        Some(command)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Parser {
    lexicon: BTreeSet<String>,
}

type Matched = Result<ParseResult, String>;

impl Parser {
    pub fn new<S: AsRef<str>>(lexicon: impl IntoIterator<Item = S>) -> Self {
        Self { lexicon: lexicon.into_iter().map(|s| crate::ids::normalize_lemma(s.as_ref())).collect() }
    }

    pub fn from_graph(graph: &Graph) -> Self {
        Self::new(graph.vocabulary())
    }

    pub fn lexicon(&self) -> &BTreeSet<String> {
        &self.lexicon
    }

    pub fn parse(&self, raw: &str, dialogue: &DialogueState) -> ParseResult {
        self.parse_utterance(&Utterance::new(raw), dialogue)
    }

    pub fn parse_utterance(&self, u: &Utterance, dialogue: &DialogueState) -> ParseResult {
        let tokens: Vec<&str> = u.tokens.iter().map(String::as_str).collect();
        if tokens.is_empty() {
            return unparseable("the message is empty", &tokens);
        }
        match self.match_templates(&tokens) {
            Some(Ok(result)) => result,
            Some(Err(reason)) => unparseable(&reason, &tokens),
            None => match &dialogue.pending {
                Some(p) => ParseResult::ClarificationReply(select(&tokens, &p.candidates)),
                None => unparseable("no template matches", &tokens),
            },
        }
    }

    fn match_templates(&self, t: &[&str]) -> Option<Matched> {
        let question = |kind, r: Result<ObjectRef, String>, f: fn(ObjectRef) -> CallTree| {
            r.map(|o| ParseResult::Question { kind, tree: f(o) })
        };
        let command = |verb, object: Result<ObjectRef, String>| {
            object.map(|object| ParseResult::Command(Command { verb, object, destination: None }))
        };
        Some(match t {
            ["where", "is" | "are", rest @ ..] => question(QuestionKind::Locate, self.np(rest, 2), |o| {
                CallTree::new(SalFunction::GetStmLocations).object(o.tree(SalFunction::GetStmObjects))
            }),
            ["how", "many", rest @ ..] => self.count(rest, 2),
            ["what", "is" | "are", "on" | "in", rest @ ..] => {
                question(QuestionKind::Enumerate, self.np(rest, 3), |o| {
                    ObjectRef::new("something").with_location(o).tree(SalFunction::GetStmObjects)
                })
            }
            ["what", "can", "you" | "i" | "we", "do", "with", rest @ ..] => {
                question(QuestionKind::Actions, self.np(rest, 5), |o| o.tree(SalFunction::GetStmActions))
            }
            ["go" | "walk" | "move", "to", rest @ ..] => command(Verb::Go, self.np(rest, 2)),
            ["bring" | "carry", rest @ ..] => self.with_destination(Verb::Bring, rest, 1, &["to"], true),
            ["put" | "place", rest @ ..] => self.with_destination(Verb::Put, rest, 1, &["on", "in"], false),
            ["grab" | "take", rest @ ..] => command(Verb::Grab, self.np(rest, 1)),
            ["pick", "up", rest @ ..] => command(Verb::Grab, self.np(rest, 2)),
            ["open", rest @ ..] => command(Verb::Open, self.np(rest, 1)),
            ["close", rest @ ..] => command(Verb::Close, self.np(rest, 1)),
            ["switch" | "turn", "on", rest @ ..] => command(Verb::SwitchOn, self.np(rest, 2)),
            ["switch" | "turn", "off", rest @ ..] => command(Verb::SwitchOff, self.np(rest, 2)),
            ["look", "at", rest @ ..] => command(Verb::LookAt, self.np(rest, 2)),
            _ => return None,
        })
    }

    fn count(&self, rest: &[&str], offset: usize) -> Matched {
        let (np, tail) = match rest.iter().position(|w| matches!(*w, "are" | "is")) {
            Some(k) => (&rest[..k], &rest[k + 1..]),
            None => (rest, &[][..]),
        };
        let mut object = self.np(np, offset)?;
        match tail {
            [] | ["there"] => {}
            ["on" | "in", loc @ ..] => {
                let at = offset + np.len() + 2;
                object.location = Some(Box::new(self.np(loc, at)?));
            }
            _ => return Err(format!("expected \"on\", \"in\" or \"there\" after \"{}\"", np.join(" "))),
        }
        Ok(ParseResult::Question { kind: QuestionKind::Count, tree: object.tree(SalFunction::GetCount) })
    }

    fn with_destination(&self, verb: Verb, rest: &[&str], offset: usize, seps: &[&str], last: bool) -> Matched {
        let found = if last {
            rest.iter().rposition(|w| seps.contains(w))
        } else {
            rest.iter().position(|w| seps.contains(w))
        };
        let Some(k) = found else {
            return Err(format!("{} needs a destination (\"{} X {} Y\")", verb.name(), verb.name(), seps.join("/")));
        };
        let object = self.np(&rest[..k], offset)?;
        let destination = self.np(&rest[k + 1..], offset + k + 1)?;
        Ok(ParseResult::Command(Command { verb, object, destination: Some(destination) }))
    }

    /// `[descriptor] head [to V] [in|on LOCATION]`
    fn np(&self, tokens: &[&str], offset: usize) -> Result<ObjectRef, String> {
        if tokens.is_empty() {
            return Err("expected an object after the verb".into());
        }
        let span = Span { start: offset, end: offset + tokens.len() };
        let mut words = tokens;
        let mut location = None;
        if let Some(i) = words.iter().skip(1).position(|w| matches!(*w, "in" | "on")).map(|i| i + 1) {
            location = Some(Box::new(self.np(&words[i + 1..], offset + i + 1)?));
            words = &words[..i];
        }
        let mut action = None;
        if let Some(i) = words.iter().skip(1).position(|w| *w == "to").map(|i| i + 1) {
            match &words[i + 1..] {
                [verb] => action = Some((*verb).to_owned()),
                [] => return Err("expected a verb after \"to\"".into()),
                more => return Err(format!("expected a single verb after \"to\", got \"{}\"", more.join(" "))),
            }
            words = &words[..i];
        }
        let (k, lemma) = self.head(words);
        let state = match &words[..k] {
            [] => None,
            [adj] => Some((*adj).to_owned()),
            more => return Err(format!("only one descriptor is supported, got \"{}\"", more.join(" "))),
        };
        Ok(ObjectRef { lemma, state, action, location, span, resolved: None })
    }

    /// Start index and lemma of the head: the longest known suffix, also
    /// trying its singular; otherwise the singular of the last word.
    fn head(&self, words: &[&str]) -> (usize, String) {
        for k in 0..words.len() {
            let phrase = words[k..].join(" ");
            if self.lexicon.contains(&phrase) {
                return (k, phrase);
            }
            let singular = singularize(&phrase);
            if self.lexicon.contains(&singular) {
                return (k, singular);
            }
        }
        let last = words.len() - 1;
        (last, singularize(words[last]))
    }
}

fn select(tokens: &[&str], candidates: &[Candidate]) -> Selection {
    let named: Vec<InstanceId> = candidates
        .iter()
        .filter(|c| {
            let feature: Vec<&str> = c.feature.split_whitespace().collect();
            contains_run(tokens, &feature) || tokens.contains(&c.id.as_str())
        })
        .map(|c| c.id.clone())
        .collect();
    match named.len() {
        0 => Selection::NoMatch,
        1 => Selection::Chosen { id: named.into_iter().next().expect("one") },
        _ => Selection::Ambiguous { ids: named },
    }
}

fn contains_run(tokens: &[&str], run: &[&str]) -> bool {
    !run.is_empty() && tokens.windows(run.len()).any(|w| w == run)
}

fn unparseable(reason: &str, tokens: &[&str]) -> ParseResult {
    ParseResult::Unparseable {
        reason: reason.to_owned(),
        hint: closest_template(tokens).to_owned(),
        templates: TEMPLATES.iter().map(|t| t.to_string()).collect(),
    }
}

/// The template whose leading keywords are most similar to the start of
/// the utterance.
pub fn closest_template(tokens: &[&str]) -> &'static str {
    let mut best = (f64::MIN, TEMPLATES[0]);
    for template in TEMPLATES {
        let keywords: Vec<&str> =
            template.split_whitespace().take_while(|w| !matches!(*w, "X" | "Y" | "V" | "on/in")).collect();
        let prefix = tokens[..keywords.len().min(tokens.len())].join(" ");
        let score = strsim::normalized_levenshtein(&prefix, &keywords.join(" "));
        if score > best.0 {
            best = (score, template);
        }
    }
    best.1
}
