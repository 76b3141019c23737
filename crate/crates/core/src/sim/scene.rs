//! Scene files and the live scene state.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Position, Rect};
use crate::graph::{Graph, Relation};
use crate::ids::{normalize_lemma, ConceptId, InstanceId};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{field}` (line {line}, column {column}): {message}")]
    Parse { field: String, line: usize, column: usize, message: String },
    #[error("invalid scene:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub rooms: Vec<RoomEntry>,
    #[serde(default)]
    pub objects: Vec<ObjectEntry>,
    pub agent: AgentEntry,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RoomEntry {
    pub name: String,
    pub rect: Rect,
    /// Instance ID; defaults to the name with spaces replaced by `_`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Lemma or concept ID; defaults to the name, then to "room".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub id: String,
    /// A lemma or a concept ID.
    pub concept: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
    /// Room name, for objects placed directly in a room.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<Relation>,
    pub pos: Position,
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default)]
    pub graspable: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub room: String,
    pub pos: Position,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: InstanceId,
    pub name: String,
    pub concept: ConceptId,
    pub rect: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub concept: ConceptId,
    pub lemma: String,
    pub position: Position,
    pub container: InstanceId,
    pub relation: Relation,
    pub states: BTreeSet<String>,
    pub graspable: bool,
}

impl ObjectState {
    pub fn openable(&self) -> bool {
        self.states.contains("open") || self.states.contains("closed")
    }

    pub fn switchable(&self) -> bool {
        self.states.contains("on") || self.states.contains("off")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: InstanceId,
    pub concept: ConceptId,
    pub position: Position,
    /// Radians, counter-clockwise from +x.
    pub heading: f64,
    pub room: InstanceId,
    pub held: Option<InstanceId>,
}

/// Ground truth of the simulated household.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub rooms: Vec<Room>,
    pub objects: BTreeMap<InstanceId, ObjectState>,
    pub agent: AgentState,
    pub highlights: BTreeSet<InstanceId>,
}

impl SceneState {
    pub fn room(&self, id: &InstanceId) -> Option<&Room> {
        self.rooms.iter().find(|r| &r.id == id)
    }

    pub fn is_room(&self, id: &InstanceId) -> bool {
        self.room(id).is_some()
    }

    pub fn contains(&self, id: &InstanceId) -> bool {
        self.is_room(id) || self.objects.contains_key(id) || &self.agent.id == id
    }

    /// Rooms whose region contains `p`, in file order.
    pub fn rooms_at(&self, p: &Position) -> impl Iterator<Item = &Room> + '_ {
        let p = *p;
        self.rooms.iter().filter(move |r| r.rect.contains(&p))
    }

    /// Where an instance is: object or agent position, or a room's center.
    pub fn position_of(&self, id: &InstanceId) -> Option<Position> {
        if let Some(o) = self.objects.get(id) {
            return Some(o.position);
        }
        if &self.agent.id == id {
            return Some(self.agent.position);
        }
        self.room(id).map(|r| r.rect.center())
    }

    pub fn container_of(&self, id: &InstanceId) -> Option<&InstanceId> {
        if let Some(o) = self.objects.get(id) {
            return Some(&o.container);
        }
        (&self.agent.id == id).then_some(&self.agent.room)
    }

    /// Room an instance is ultimately in.
    pub fn room_of(&self, id: &InstanceId) -> Option<InstanceId> {
        let mut current = id.clone();
        for _ in 0..=self.objects.len() + 1 {
            if self.is_room(&current) {
                return Some(current);
            }
            current = self.container_of(&current)?.clone();
        }
        None
    }

    /// Scene invariants plus agreement with the graph's STM part. Returns
    /// one message per violation.
    pub fn check_against(&self, graph: &Graph) -> Vec<String> {
        let mut issues = Vec::new();
        for (id, o) in &self.objects {
            match self.room_of(id) {
                Some(room) => {
                    let rect = self.room(&room).expect("room exists").rect;
                    if !rect.contains(&o.position) {
                        issues.push(format!("object {id} lies outside its room {room}"));
                    }
                }
                None => issues.push(format!("object {id} is not inside any room")),
            }
            if o.container == self.agent.id && self.agent.held.as_ref() != Some(id) {
                issues.push(format!("object {id} is held but the agent does not hold it"));
            }
        }
        if let Some(held) = &self.agent.held {
            if self.objects.get(held).map(|o| &o.container) != Some(&self.agent.id) {
                issues.push(format!("agent holds {held} but its container is not the agent"));
            }
        }
        match self.room(&self.agent.room) {
            Some(r) if r.rect.contains(&self.agent.position) => {}
            _ => issues.push(format!("agent is not inside its room {}", self.agent.room)),
        }

        let expected = self.rooms.len() + self.objects.len() + 1;
        let actual = graph.instances().count();
        if actual != expected {
            issues.push(format!("graph has {actual} instances, scene has {expected}"));
        }
        let check_container = |issues: &mut Vec<String>, id: &InstanceId, want: Option<&InstanceId>| {
            let got = graph.container_of(id).map(|(c, _, _)| c);
            if got.as_ref() != want {
                issues.push(format!(
                    "container of {id} disagrees: scene {}, graph {}",
                    want.map_or("none".to_owned(), ToString::to_string),
                    got.map_or("none".to_owned(), |c| c.to_string())
                ));
            }
        };
        for room in &self.rooms {
            check_container(&mut issues, &room.id, None);
        }
        for (id, o) in &self.objects {
            check_container(&mut issues, id, Some(&o.container));
            let tags: BTreeSet<String> = graph.states_of(id).into_keys().collect();
            if tags != o.states {
                issues.push(format!("states of {id} disagree: scene {:?}, graph {:?}", o.states, tags));
            }
        }
        check_container(&mut issues, &self.agent.id, Some(&self.agent.room));
        issues
    }
}

pub fn room_id_for(name: &str) -> String {
    normalize_lemma(name).replace(' ', "_")
}

pub fn parse_scene(text: &str) -> Result<SceneFile, SceneError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        SceneError::Parse { field, line: inner.line(), column: inner.column(), message: inner.to_string() }
    })
}

pub fn load_scene(path: impl AsRef<Path>, graph: &mut Graph) -> Result<SceneState, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_owned(), source })?;
    load_scene_str(&text, graph)
}

pub fn load_scene_str(text: &str, graph: &mut Graph) -> Result<SceneState, SceneError> {
    if text.trim().is_empty() {
        return Err(SceneError::Invalid(vec!["scene file is empty; at least one room is required".into()]));
    }
    build_scene(&parse_scene(text)?, graph)
}

fn resolve_concept(graph: &Graph, name: &str) -> Result<ConceptId, String> {
    let as_id = ConceptId::new(name);
    if graph.concept(&as_id).is_some() {
        return Ok(as_id);
    }
    let found = graph.resolve_lemma(name);
    match found.len() {
        0 => Err(format!("concept \"{name}\" matches no lemma or concept ID")),
        1 => Ok(found.into_iter().next().expect("one element")),
        _ => {
            let ids: Vec<String> = found.iter().map(ToString::to_string).collect();
            Err(format!("concept \"{name}\" is ambiguous ({}); use a concept ID", ids.join(", ")))
        }
    }
}

/// Validates `file` and, when it is sound, adds its rooms, objects and agent
/// to `graph` as STM instances. Nothing is added on failure.
pub fn build_scene(file: &SceneFile, graph: &mut Graph) -> Result<SceneState, SceneError> {
    let mut issues = Vec::new();
    if file.rooms.is_empty() {
        issues.push("scene has no rooms; at least one room is required".to_owned());
    }

    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut claim = |issues: &mut Vec<String>, id: &str, what: &str| {
        if !seen.insert(id.to_owned()) {
            issues.push(format!("duplicate id {id} ({what})"));
        } else if graph.lookup_node(id).is_some() {
            issues.push(format!("{what} id {id} clashes with an existing graph node"));
        }
    };

    let mut rooms = Vec::new();
    let mut room_by_name: BTreeMap<String, InstanceId> = BTreeMap::new();
    for r in &file.rooms {
        let id = r.id.clone().unwrap_or_else(|| room_id_for(&r.name));
        claim(&mut issues, &id, "room");
        if !(r.rect.w > 0.0 && r.rect.h > 0.0) {
            issues.push(format!("room {id} has an empty region"));
        }
        let concept = match &r.concept {
            Some(c) => resolve_concept(graph, c),
            None => resolve_concept(graph, &r.name).or_else(|_| resolve_concept(graph, "room")),
        };
        let concept = match concept {
            Ok(c) => c,
            Err(e) => {
                issues.push(format!("room {id}: {e}"));
                continue;
            }
        };
        room_by_name.insert(normalize_lemma(&r.name), InstanceId::new(&id));
        rooms.push(Room { id: InstanceId::new(id), name: r.name.clone(), concept, rect: r.rect });
    }
    for (i, a) in rooms.iter().enumerate() {
        for b in &rooms[i + 1..] {
            if a.rect.overlaps(&b.rect) {
                issues.push(format!("rooms {} and {} overlap", a.id, b.id));
            }
        }
    }
    let room_ref = |name: &str| -> Option<InstanceId> {
        room_by_name
            .get(&normalize_lemma(name))
            .cloned()
            .or_else(|| rooms.iter().find(|r| r.id.as_str() == name).map(|r| r.id.clone()))
    };

    let agent_id = InstanceId::new(file.agent.id.clone().unwrap_or_else(|| "robot".into()));
    let object_ids: BTreeSet<&str> = file.objects.iter().map(|o| o.id.as_str()).collect();

    let mut objects: BTreeMap<InstanceId, ObjectState> = BTreeMap::new();
    for o in &file.objects {
        claim(&mut issues, &o.id, "object");
        let concept = match resolve_concept(graph, &o.concept) {
            Ok(c) => c,
            Err(e) => {
                issues.push(format!("object {}: {e}", o.id));
                continue;
            }
        };
        let container = match (&o.container, &o.room) {
            (Some(c), None) => {
                if object_ids.contains(c.as_str()) {
                    InstanceId::new(c)
                } else if let Some(r) = room_ref(c) {
                    r
                } else {
                    issues.push(format!("object {}: unknown container {c}", o.id));
                    continue;
                }
            }
            (None, Some(r)) => match room_ref(r) {
                Some(r) => r,
                None => {
                    issues.push(format!("object {}: unknown room {r}", o.id));
                    continue;
                }
            },
            _ => {
                issues.push(format!("object {}: give exactly one of container or room", o.id));
                continue;
            }
        };
        let states: BTreeSet<String> = o.states.iter().map(|s| normalize_lemma(s)).collect();
        if states.iter().any(String::is_empty) {
            issues.push(format!("object {}: empty state tag", o.id));
        }
        objects.insert(
            InstanceId::new(&o.id),
            ObjectState {
                lemma: graph.display_lemma(&concept.clone().into()),
                concept,
                position: o.pos,
                container,
                relation: o.relation.unwrap_or(Relation::On),
                states,
                graspable: o.graspable,
            },
        );
    }
    // Default relations: `in` for rooms and openable containers, else `on`.
    let defaults: Vec<(InstanceId, Relation)> = file
        .objects
        .iter()
        .filter(|o| o.relation.is_none())
        .filter_map(|o| {
            let id = InstanceId::new(&o.id);
            let c = &objects.get(&id)?.container;
            let inside = rooms.iter().any(|r| &r.id == c) || objects.get(c).is_some_and(ObjectState::openable);
            Some((id, if inside { Relation::In } else { Relation::On }))
        })
        .collect();
    for (id, rel) in defaults {
        objects.get_mut(&id).expect("present").relation = rel;
    }

    claim(&mut issues, agent_id.as_str(), "agent");
    let agent_concept = match resolve_concept(graph, file.agent.concept.as_deref().unwrap_or("robot")) {
        Ok(c) => Some(c),
        Err(e) => {
            issues.push(format!("agent: {e}"));
            None
        }
    };
    let agent_room = room_ref(&file.agent.room);
    if agent_room.is_none() {
        issues.push(format!("agent: unknown room {}", file.agent.room));
    }

    let order = match placement_order(&objects, &rooms) {
        Ok(order) => order,
        Err(cycle) => {
            issues.push(format!("containment cycle through {}", cycle.join(", ")));
            Vec::new()
        }
    };

    if !issues.is_empty() {
        return Err(SceneError::Invalid(issues));
    }
    let (Some(agent_concept), Some(agent_room)) = (agent_concept, agent_room) else {
        unreachable!("checked above");
    };

    let scene = SceneState {
        rooms,
        objects,
        agent: AgentState {
            id: agent_id,
            concept: agent_concept,
            position: file.agent.pos,
            heading: 0.0,
            room: agent_room,
            held: None,
        },
        highlights: BTreeSet::new(),
    };
    let mut geometry = Vec::new();
    for id in &order {
        let o = &scene.objects[id];
        match scene.room_of(id).and_then(|r| scene.room(&r)) {
            Some(room) if room.rect.contains(&o.position) => {}
            Some(room) => geometry.push(format!(
                "object {id} at [{}, {}] lies outside its room {}",
                o.position.x, o.position.y, room.id
            )),
            None => geometry.push(format!("object {id} is not inside any room")),
        }
    }
    if !scene.room(&scene.agent.room).is_some_and(|r| r.rect.contains(&scene.agent.position)) {
        geometry.push(format!("agent {} lies outside its room {}", scene.agent.id, scene.agent.room));
    }
    if !geometry.is_empty() {
        return Err(SceneError::Invalid(geometry));
    }

    // Build on a copy so that a graph error leaves the caller's graph intact.
    let mut staged = graph.clone();
    let invalid = |e: crate::graph::GraphError| SceneError::Invalid(vec![e.to_string()]);
    for r in &scene.rooms {
        staged.add_instance(r.id.clone(), &r.concept, None, r.rect.center()).map_err(invalid)?;
    }
    for id in &order {
        let o = &scene.objects[id];
        staged.add_instance(id.clone(), &o.concept, Some((&o.container, o.relation)), o.position).map_err(invalid)?;
        for tag in &o.states {
            staged.add_state(id, tag).map_err(invalid)?;
        }
    }
    let a = &scene.agent;
    staged.add_instance(a.id.clone(), &a.concept, Some((&a.room, Relation::In)), a.position).map_err(invalid)?;
    *graph = staged;
    Ok(scene)
}

/// Objects ordered so that every container precedes its contents.
fn placement_order(objects: &BTreeMap<InstanceId, ObjectState>, rooms: &[Room]) -> Result<Vec<InstanceId>, Vec<String>> {
    let mut order = Vec::new();
    let mut placed: BTreeSet<&InstanceId> = rooms.iter().map(|r| &r.id).collect();
    let mut pending: Vec<&InstanceId> = objects.keys().collect();
    while !pending.is_empty() {
        let (ready, rest): (Vec<_>, Vec<_>) = pending.into_iter().partition(|id| placed.contains(&objects[*id].container));
        if ready.is_empty() {
            return Err(rest.iter().map(ToString::to_string).collect());
        }
        for id in ready {
            placed.insert(id);
            order.push(id.clone());
        }
        pending = rest;
    }
    Ok(order)
}
