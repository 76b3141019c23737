//! Mirrors scene changes into the graph's STM instances.
//!
//! Instances are never created or removed here. A move rewrites the
//! containment edge of the same instance, so a relocated object can never
//! appear at two places at once.

use serde::Serialize;
use thiserror::Error;

use super::event::{SimEvent, SimEventKind, StateChange};
use crate::graph::{Graph, GraphError, MoveOutcome};
use crate::ids::{EdgeId, InstanceId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "receipt", rename_all = "snake_case")]
pub enum SyncReceipt {
    /// Nothing to change: non-mutating event or a move to the same place.
    NoOp,
    Moved { instance: InstanceId, removed_edge: EdgeId, added_edge: EdgeId },
    StateAdded { instance: InstanceId, edge: EdgeId },
    StateRemoved { instance: InstanceId, tag: String },
    Positioned { instance: InstanceId },
}

#[derive(Debug, Error, PartialEq)]
pub enum SyncError {
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn sync_stm(event: &SimEvent, graph: &mut Graph) -> Result<SyncReceipt, SyncError> {
    let known = |graph: &Graph, id: &InstanceId| {
        if graph.instance(id).is_some() {
            Ok(())
        } else {
            Err(SyncError::UnknownInstance(id.clone()))
        }
    };
    match &event.kind {
        SimEventKind::PositionUpdate { instance, position, .. } => {
            known(graph, instance)?;
            graph.set_position(instance, *position)?;
            Ok(SyncReceipt::Positioned { instance: instance.clone() })
        }
        SimEventKind::StateChanged { instance, change } => {
            known(graph, instance)?;
            match change {
                StateChange::Container { to, relation, .. } => {
                    known(graph, to)?;
                    match graph.move_instance(instance, to, *relation)? {
                        MoveOutcome::NoOp => Ok(SyncReceipt::NoOp),
                        MoveOutcome::Moved { removed_edge, added_edge, .. } => Ok(SyncReceipt::Moved {
                            instance: instance.clone(),
                            removed_edge: removed_edge.expect("moved instances had a container"),
                            added_edge,
                        }),
                    }
                }
                StateChange::StateAdded { tag } => {
                    let edge = graph.add_state(instance, tag)?;
                    Ok(SyncReceipt::StateAdded { instance: instance.clone(), edge })
                }
                StateChange::StateRemoved { tag } => {
                    if graph.remove_state(instance, tag)? {
                        Ok(SyncReceipt::StateRemoved { instance: instance.clone(), tag: tag.clone() })
                    } else {
                        Ok(SyncReceipt::NoOp)
                    }
                }
            }
        }
        _ => Ok(SyncReceipt::NoOp),
    }
}
