//! The engine's event stream: every simulator event, chat turn, trace and
//! knowledge mutation gets one global sequence number.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ChatTurn, EdgeDescription};
use crate::ids::EdgeId;
use crate::sim::{SceneSnapshot, SimEvent};

/// Events retained for resuming subscribers.
pub const LOG_CAPACITY: usize = 50_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    /// Global sequence number. Snapshots and heartbeats carry the number of
    /// the last event they cover and are never stored in the log.
    pub seq: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    Snapshot { scene: SceneSnapshot },
    Sim { event: SimEvent },
    ChatTurn { turn: Box<ChatTurn> },
    TraceReady { turn_id: u64, session_id: String },
    KnowledgeMutation { mutation: Mutation },
    Heartbeat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    Deleted {
        edge: EdgeDescription,
        undo_token: String,
    },
    Restored {
        edge: EdgeDescription,
    },
}

impl Mutation {
    pub fn edge_id(&self) -> &EdgeId {
        match self {
            Mutation::Deleted { edge, .. } | Mutation::Restored { edge } => &edge.id,
        }
    }
}

/// What a new subscriber receives before live events: either a snapshot
/// (fresh join, or a resume point that fell out of the log) or the logged
/// events after its resume point.
#[derive(Clone, Debug, PartialEq)]
pub struct Subscription {
    pub snapshot: Option<EventEnvelope>,
    pub backlog: Vec<EventEnvelope>,
    /// Live events with a sequence number at or below this are covered.
    pub covered_seq: u64,
}

pub(super) type Listener = Box<dyn Fn(&EventEnvelope) + Send + Sync>;

#[derive(Default)]
pub(super) struct EventLog {
    seq: u64,
    log: VecDeque<EventEnvelope>,
    listeners: Vec<Listener>,
}

impl EventLog {
    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    pub fn publish(&mut self, payload: EventPayload) -> u64 {
        self.seq += 1;
        let env = EventEnvelope { seq: self.seq, payload };
        for l in &self.listeners {
            l(&env);
        }
        if self.log.len() == LOG_CAPACITY {
            self.log.pop_front();
        }
        self.log.push_back(env);
        self.seq
    }

    pub fn add_listener(&mut self, l: Listener) {
        self.listeners.push(l);
    }

    /// Logged events after `from_seq`, or `None` when some of them were
    /// already evicted.
    pub fn since(&self, from_seq: u64) -> Option<Vec<EventEnvelope>> {
        if from_seq > self.seq {
            return None;
        }
        let oldest = self.log.front().map_or(self.seq + 1, |e| e.seq);
        if from_seq + 1 < oldest {
            return None;
        }
        Some(self.log.iter().filter(|e| e.seq > from_seq).cloned().collect())
    }
}
