//! Serializable scene views and delta replay.

use serde::{Deserialize, Serialize};

use super::event::{SimEvent, SimEventKind, StateChange};
use super::scene::SceneState;

/// What the scene and map views render: the full scene at one point of the
/// event sequence. Applying every later event with [`SceneSnapshot::apply`]
/// yields the snapshot taken after those events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub tick: u64,
    /// Sequence number of the last event folded in; 0 before any event.
    pub last_seq: u64,
    #[serde(flatten)]
    pub scene: SceneState,
}

impl SceneSnapshot {
    /// Folds one event in. Events at or below `last_seq` are ignored, so a
    /// replay may safely overlap the snapshot.
    pub fn apply(&mut self, event: &SimEvent) {
        if event.seq <= self.last_seq {
            return;
        }
        self.last_seq = event.seq;
        self.tick = self.tick.max(event.tick);
        let scene = &mut self.scene;
        match &event.kind {
            SimEventKind::PositionUpdate { instance, position, heading } => {
                if instance == &scene.agent.id {
                    scene.agent.position = *position;
                    if let Some(h) = heading {
                        scene.agent.heading = *h;
                    }
                } else if let Some(o) = scene.objects.get_mut(instance) {
                    o.position = *position;
                }
            }
            SimEventKind::StateChanged { instance, change } => match change {
                StateChange::Container { from, to, relation } => {
                    if instance == &scene.agent.id {
                        scene.agent.room = to.clone();
                    } else if let Some(o) = scene.objects.get_mut(instance) {
                        o.container = to.clone();
                        o.relation = *relation;
                        if to == &scene.agent.id {
                            scene.agent.held = Some(instance.clone());
                        } else if from == &scene.agent.id && scene.agent.held.as_ref() == Some(instance) {
                            scene.agent.held = None;
                        }
                    }
                }
                StateChange::StateAdded { tag } => {
                    if let Some(o) = scene.objects.get_mut(instance) {
                        o.states.insert(tag.clone());
                    }
                }
                StateChange::StateRemoved { tag } => {
                    if let Some(o) = scene.objects.get_mut(instance) {
                        o.states.remove(tag);
                    }
                }
            },
            SimEventKind::Highlight { instances, .. } => {
                scene.highlights = instances.iter().cloned().collect();
            }
            SimEventKind::ActionStarted { .. }
            | SimEventKind::ActionCompleted { .. }
            | SimEventKind::ActionFailed { .. }
            | SimEventKind::Alarm { .. } => {}
        }
    }
}
