//! Agent actions and command planning.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::InstanceId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentAction {
    WalkTo { target: InstanceId },
    Grab { object: InstanceId },
    Put { object: InstanceId, target: InstanceId },
    Open { target: InstanceId },
    Close { target: InstanceId },
    SwitchOn { target: InstanceId },
    SwitchOff { target: InstanceId },
    LookAt { target: InstanceId },
    Touch { target: InstanceId },
    WalkForward { distance: f64 },
    /// Positive is a left turn.
    Turn { degrees: f64 },
}

impl AgentAction {
    pub fn name(&self) -> &'static str {
        match self {
            AgentAction::WalkTo { .. } => "walk_to",
            AgentAction::Grab { .. } => "grab",
            AgentAction::Put { .. } => "put",
            AgentAction::Open { .. } => "open",
            AgentAction::Close { .. } => "close",
            AgentAction::SwitchOn { .. } => "switch_on",
            AgentAction::SwitchOff { .. } => "switch_off",
            AgentAction::LookAt { .. } => "look_at",
            AgentAction::Touch { .. } => "touch",
            AgentAction::WalkForward { .. } => "walk_forward",
            AgentAction::Turn { .. } => "turn",
        }
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentAction::WalkTo { target }
            | AgentAction::Open { target }
            | AgentAction::Close { target }
            | AgentAction::SwitchOn { target }
            | AgentAction::SwitchOff { target }
            | AgentAction::LookAt { target }
            | AgentAction::Touch { target } => write!(f, "{}({target})", self.name()),
            AgentAction::Grab { object } => write!(f, "grab({object})"),
            AgentAction::Put { object, target } => write!(f, "put({object}, {target})"),
            AgentAction::WalkForward { distance } => write!(f, "walk_forward({distance})"),
            AgentAction::Turn { degrees } => write!(f, "turn({degrees})"),
        }
    }
}

/// Command verbs reachable from chat.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Go,
    Bring,
    Grab,
    Put,
    Open,
    Close,
    SwitchOn,
    SwitchOff,
    LookAt,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Go => "go",
            Verb::Bring => "bring",
            Verb::Grab => "grab",
            Verb::Put => "put",
            Verb::Open => "open",
            Verb::Close => "close",
            Verb::SwitchOn => "switch_on",
            Verb::SwitchOff => "switch_off",
            Verb::LookAt => "look_at",
        }
    }

    /// Whether the verb takes a destination besides its object.
    pub fn takes_destination(&self) -> bool {
        matches!(self, Verb::Bring | Verb::Put)
    }
}

/// A command whose references have been resolved to instances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCommand {
    pub verb: Verb,
    pub object: InstanceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<InstanceId>,
}

/// Expands a command into primitive actions. Composite verbs are `go`
/// (walk) and `bring` (walk, grab, walk, put); the rest map one to one.
/// Preconditions are checked when the actions run, not here.
pub fn plan(cmd: &ResolvedCommand) -> Vec<AgentAction> {
    let o = cmd.object.clone();
    let dest = || cmd.destination.clone().expect("verb with a destination");
    match cmd.verb {
        Verb::Go => vec![AgentAction::WalkTo { target: o }],
        Verb::Bring => {
            let l = dest();
            vec![
                AgentAction::WalkTo { target: o.clone() },
                AgentAction::Grab { object: o.clone() },
                AgentAction::WalkTo { target: l.clone() },
                AgentAction::Put { object: o, target: l },
            ]
        }
        Verb::Grab => vec![AgentAction::Grab { object: o }],
        Verb::Put => vec![AgentAction::Put { object: o, target: dest() }],
        Verb::Open => vec![AgentAction::Open { target: o }],
        Verb::Close => vec![AgentAction::Close { target: o }],
        Verb::SwitchOn => vec![AgentAction::SwitchOn { target: o }],
        Verb::SwitchOff => vec![AgentAction::SwitchOff { target: o }],
        Verb::LookAt => vec![AgentAction::LookAt { target: o }],
    }
}
