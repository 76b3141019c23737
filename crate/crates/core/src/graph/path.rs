use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EdgeKind, Graph};
use crate::ids::{EdgeId, NodeRef};

/// One traversed edge. `from`/`to` give the traversal direction, which may
/// run against the stored edge direction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathStep {
    pub edge: EdgeId,
    pub kind: EdgeKind,
    pub from: NodeRef,
    pub to: NodeRef,
}

/// Justification of one output by one argument: an edge walk from the
/// argument's anchor node to the output node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HighlightPath {
    /// Argument slot the path justifies (`object`, `action`, ...).
    pub slot: String,
    pub anchor: NodeRef,
    pub output: NodeRef,
    pub steps: Vec<PathStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {index}: edge `{edge}` does not exist")]
    MissingEdge { index: usize, edge: EdgeId },
    #[error("step {index}: edge `{edge}` is deleted")]
    DeletedEdge { index: usize, edge: EdgeId },
    #[error("step {index}: edge `{edge}` has kind {actual}, trace says {recorded}")]
    KindMismatch { index: usize, edge: EdgeId, recorded: EdgeKind, actual: EdgeKind },
    #[error("step {index}: edge `{edge}` does not connect {from} to {to}")]
    Disconnected { index: usize, edge: EdgeId, from: NodeRef, to: NodeRef },
    #[error("path ends at {reached}, expected {expected}")]
    WrongEnd { reached: NodeRef, expected: NodeRef },
}

/// Walks `path` against the live graph, starting at its anchor, and checks
/// that it arrives at its output.
pub fn replay_path(graph: &Graph, path: &HighlightPath) -> Result<(), ReplayError> {
    let mut at = path.anchor.clone();
    for (index, step) in path.steps.iter().enumerate() {
        let edge = graph
            .edge(&step.edge)
            .ok_or_else(|| ReplayError::MissingEdge { index, edge: step.edge.clone() })?;
        if edge.deleted {
            return Err(ReplayError::DeletedEdge { index, edge: step.edge.clone() });
        }
        if edge.kind != step.kind {
            return Err(ReplayError::KindMismatch {
                index,
                edge: step.edge.clone(),
                recorded: step.kind,
                actual: edge.kind,
            });
        }
        if step.from != at || edge.other_end(&at) != Some(&step.to) {
            return Err(ReplayError::Disconnected {
                index,
                edge: step.edge.clone(),
                from: at,
                to: step.to.clone(),
            });
        }
        at = step.to.clone();
    }
    if at != path.output {
        return Err(ReplayError::WrongEnd { reached: at, expected: path.output.clone() });
    }
    Ok(())
}
