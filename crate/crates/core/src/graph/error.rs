use thiserror::Error;

use super::EdgeKind;
use crate::ids::{ConceptId, EdgeId, InstanceId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(ConceptId),
    #[error("unknown instance `{0}`")]
    UnknownInstance(InstanceId),
    #[error("unknown edge `{0}`")]
    UnknownEdge(EdgeId),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("invalid id `{0}`")]
    InvalidId(String),
    #[error("concept `{0}` has no lemmas")]
    EmptyLemmas(ConceptId),
    #[error("is-a cycle: {}", format_cycle(.0))]
    Cycle(Vec<ConceptId>),
    #[error("edge `{0}` is already deleted")]
    AlreadyDeleted(EdgeId),
    #[error("edge `{0}` is not deleted")]
    NotDeleted(EdgeId),
    #[error("edge `{0}` ({1}) mirrors the scene and cannot be edited")]
    Protected(EdgeId, EdgeKind),
    #[error("cannot move `{instance}`: {reason}")]
    InvalidMove { instance: InstanceId, reason: String },
}

impl GraphError {
    /// Machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::UnknownConcept(_)
            | GraphError::UnknownInstance(_)
            | GraphError::UnknownNode(_) => "UNKNOWN_ID",
            GraphError::UnknownEdge(_) => "UNKNOWN_EDGE",
            GraphError::DuplicateId(_) | GraphError::InvalidId(_) => "INVALID_ID",
            GraphError::EmptyLemmas(_) => "EMPTY_LEMMAS",
            GraphError::Cycle(_) => "ISA_CYCLE",
            GraphError::AlreadyDeleted(_) => "ALREADY_DELETED",
            GraphError::NotDeleted(_) => "NOT_DELETED",
            GraphError::Protected(..) => "PROTECTED_EDGE",
            GraphError::InvalidMove { .. } => "INVALID_MOVE",
        }
    }
}

fn format_cycle(cycle: &[ConceptId]) -> String {
    cycle.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
}
