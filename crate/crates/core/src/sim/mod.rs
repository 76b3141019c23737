//! A 2D household simulator: rectangular rooms, furniture and objects, and
//! one agent that walks, grabs, puts, opens and switches things.
//!
//! The simulator owns the scene's ground truth. Every state change it emits
//! is mirrored into the graph's STM instances at once (see [`sync_stm`]).

mod action;
mod event;
mod scene;
mod simulator;
mod snapshot;
mod sync;

pub use action::{plan, AgentAction, ResolvedCommand, Verb};
pub use event::{FailureCode, SimEvent, SimEventKind, StateChange};
pub use scene::{
    build_scene, load_scene, load_scene_str, parse_scene, room_id_for, AgentEntry, AgentState, ObjectEntry,
    ObjectState, Room, RoomEntry, SceneError, SceneFile, SceneState,
};
pub use simulator::{Simulator, REACH_RADIUS, STEP_LENGTH};
pub use snapshot::SceneSnapshot;
pub use sync::{sync_stm, SyncError, SyncReceipt};
