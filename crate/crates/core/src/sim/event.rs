//! Simulator events.

use serde::{Deserialize, Serialize};

use super::action::AgentAction;
use crate::geometry::Position;
use crate::graph::Relation;
use crate::ids::InstanceId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    /// Strictly increasing per simulator.
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub kind: SimEventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SimEventKind {
    ActionStarted {
        plan: u64,
        index: usize,
        action: AgentAction,
    },
    ActionCompleted {
        plan: u64,
        index: usize,
        action: AgentAction,
    },
    ActionFailed {
        plan: u64,
        index: usize,
        action: AgentAction,
        code: FailureCode,
        reason: String,
    },
    PositionUpdate {
        instance: InstanceId,
        position: Position,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heading: Option<f64>,
    },
    StateChanged {
        instance: InstanceId,
        change: StateChange,
    },
    Highlight {
        instances: Vec<InstanceId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        turn: Option<u64>,
    },
    Alarm {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instance: Option<InstanceId>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum StateChange {
    Container { from: InstanceId, to: InstanceId, relation: Relation },
    StateAdded { tag: String },
    StateRemoved { tag: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureCode {
    UnknownTarget,
    Unreachable,
    OutOfReach,
    NotGraspable,
    HandsFull,
    NotHeld,
    InvalidTarget,
    NotOpenable,
    NotSwitchable,
}
