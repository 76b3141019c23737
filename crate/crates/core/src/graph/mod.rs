//! The knowledge graph: concepts with lemmas, an is-a hierarchy, action
//! patterns, and grounded short-term-memory instances.
//!
//! Knowledge edges (is-a and action patterns) are soft-deleted: a deleted
//! edge stays in the store as a tombstone, is invisible to every query and
//! can be restored. Instance edges (instance-of, containment, state) mirror
//! the simulator and are rewritten in place when the scene changes.

mod error;
mod fragment;
mod path;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use error::GraphError;
pub use fragment::{FragmentEdge, FragmentNode, GraphFragment, NodeClass};
pub use path::{replay_path, HighlightPath, PathStep, ReplayError};

use crate::geometry::Position;
use crate::ids::{normalize_lemma, ConceptId, EdgeId, InstanceId, NodeRef, STATE_PREFIX};

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Role a concept plays in an action pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternRole {
    Object,
    Location,
    Tool,
}

impl PatternRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternRole::Object => "object",
            PatternRole::Location => "location",
            PatternRole::Tool => "tool",
        }
    }
}

/// Spatial relation of a containment edge. Both are treated as containment
/// by every query; the distinction is kept for display.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    In,
    On,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    /// child concept -> parent concept
    IsA,
    /// concept -> action concept
    ActionPattern(PatternRole),
    /// instance -> concept
    InstanceOf,
    /// instance -> container instance
    Containment(Relation),
    /// instance -> state tag
    HasState,
}

impl EdgeKind {
    /// Knowledge edges can be deleted and restored by users; the rest are
    /// owned by scene synchronization.
    pub fn is_knowledge(&self) -> bool {
        matches!(self, EdgeKind::IsA | EdgeKind::ActionPattern(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            EdgeKind::IsA => "is_a",
            EdgeKind::ActionPattern(PatternRole::Object) => "action_pattern:object",
            EdgeKind::ActionPattern(PatternRole::Location) => "action_pattern:location",
            EdgeKind::ActionPattern(PatternRole::Tool) => "action_pattern:tool",
            EdgeKind::InstanceOf => "instance_of",
            EdgeKind::Containment(Relation::In) => "in",
            EdgeKind::Containment(Relation::On) => "on",
            EdgeKind::HasState => "has_state",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EdgeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "is_a" => EdgeKind::IsA,
            "action_pattern:object" => EdgeKind::ActionPattern(PatternRole::Object),
            "action_pattern:location" => EdgeKind::ActionPattern(PatternRole::Location),
            "action_pattern:tool" => EdgeKind::ActionPattern(PatternRole::Tool),
            "instance_of" => EdgeKind::InstanceOf,
            "in" => EdgeKind::Containment(Relation::In),
            "on" => EdgeKind::Containment(Relation::On),
            "has_state" => EdgeKind::HasState,
            other => return Err(format!("unknown edge kind `{other}`")),
        })
    }
}

impl Serialize for EdgeKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for EdgeKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConceptNode {
    pub id: ConceptId,
    /// Normalized lemmas; the first one is the display form.
    pub lemmas: Vec<String>,
}

impl ConceptNode {
    pub fn primary_lemma(&self) -> &str {
        &self.lemmas[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceNode {
    pub id: InstanceId,
    pub position: Position,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub id: EdgeId,
    pub kind: EdgeKind,
    pub source: NodeRef,
    pub target: NodeRef,
    pub deleted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Edge {
    pub fn is_live(&self) -> bool {
        !self.deleted
    }

    /// The endpoint opposite to `node`, if `node` is an endpoint at all.
    pub fn other_end(&self, node: &NodeRef) -> Option<&NodeRef> {
        if &self.source == node {
            Some(&self.target)
        } else if &self.target == node {
            Some(&self.source)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionReceipt {
    pub edge: EdgeId,
    /// Wall-clock time of the deletion, milliseconds since the Unix epoch.
    pub deleted_at_ms: u64,
    /// Value of the graph's mutation counter after the deletion.
    pub mutation: u64,
}

/// Result of moving an instance to a new container.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum MoveOutcome {
    NoOp,
    Moved {
        from: Option<InstanceId>,
        to: InstanceId,
        removed_edge: Option<EdgeId>,
        added_edge: EdgeId,
    },
}

/// Counts reported after loading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphCounts {
    pub concepts: usize,
    pub instances: usize,
    pub edges: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    concepts: BTreeMap<ConceptId, ConceptNode>,
    instances: BTreeMap<InstanceId, InstanceNode>,
    edges: BTreeMap<EdgeId, Edge>,
    lemma_index: BTreeMap<String, BTreeSet<ConceptId>>,
    outgoing: BTreeMap<NodeRef, BTreeSet<EdgeId>>,
    incoming: BTreeMap<NodeRef, BTreeSet<EdgeId>>,
    // Physically removed edge IDs. Kept so that IDs are never handed out twice.
    retired: BTreeSet<EdgeId>,
    mutations: u64,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    // ---------------------------------------------------------------- builders

    pub fn add_concept(&mut self, id: ConceptId, lemmas: &[impl AsRef<str>]) -> Result<()> {
        self.ensure_fresh_node_id(id.as_str())?;
        let mut normalized: Vec<String> = Vec::new();
        for lemma in lemmas {
            let l = normalize_lemma(lemma.as_ref());
            if !l.is_empty() && !normalized.contains(&l) {
                normalized.push(l);
            }
        }
        if normalized.is_empty() {
            return Err(GraphError::EmptyLemmas(id));
        }
        for l in &normalized {
            self.lemma_index.entry(l.clone()).or_default().insert(id.clone());
        }
        self.concepts.insert(id.clone(), ConceptNode { id, lemmas: normalized });
        Ok(())
    }

    /// Adds `child IsA parent`. Rejects edges that would close a cycle,
    /// counting tombstoned is-a edges so that a later restore stays acyclic.
    pub fn add_is_a(&mut self, id: EdgeId, child: &ConceptId, parent: &ConceptId) -> Result<EdgeId> {
        self.require_concept(child)?;
        self.require_concept(parent)?;
        if let Some(mut cycle) = self.upward_path(parent, child) {
            // cycle runs parent .. child; close it through the new edge
            cycle.insert(0, child.clone());
            return Err(GraphError::Cycle(cycle));
        }
        self.insert_edge(Edge {
            id,
            kind: EdgeKind::IsA,
            source: child.clone().into(),
            target: parent.clone().into(),
            deleted: false,
            note: None,
        })
    }

    pub fn add_action_pattern(
        &mut self,
        id: EdgeId,
        concept: &ConceptId,
        action: &ConceptId,
        role: PatternRole,
        note: Option<String>,
    ) -> Result<EdgeId> {
        self.require_concept(concept)?;
        self.require_concept(action)?;
        self.insert_edge(Edge {
            id,
            kind: EdgeKind::ActionPattern(role),
            source: concept.clone().into(),
            target: action.clone().into(),
            deleted: false,
            note,
        })
    }

    /// Adds an instance together with its instance-of edge and, when given,
    /// its containment edge. Instances without a container are rooms.
    pub fn add_instance(
        &mut self,
        id: InstanceId,
        concept: &ConceptId,
        container: Option<(&InstanceId, Relation)>,
        position: Position,
    ) -> Result<()> {
        self.ensure_fresh_node_id(id.as_str())?;
        self.require_concept(concept)?;
        if let Some((c, _)) = container {
            self.require_instance(c)?;
        }
        self.instances.insert(id.clone(), InstanceNode { id: id.clone(), position });
        let io = self.fresh_edge_id(&format!("e_io_{id}"));
        self.insert_edge(Edge {
            id: io,
            kind: EdgeKind::InstanceOf,
            source: id.clone().into(),
            target: concept.clone().into(),
            deleted: false,
            note: None,
        })?;
        if let Some((c, relation)) = container {
            let loc = self.fresh_edge_id(&format!("e_loc_{id}"));
            self.insert_edge(Edge {
                id: loc,
                kind: EdgeKind::Containment(relation),
                source: id.clone().into(),
                target: c.clone().into(),
                deleted: false,
                note: None,
            })?;
        }
        Ok(())
    }

    /// Attaches a state tag. Returns the existing edge if already present.
    pub fn add_state(&mut self, instance: &InstanceId, tag: &str) -> Result<EdgeId> {
        self.require_instance(instance)?;
        let tag = normalize_lemma(tag);
        if let Some(existing) = self.states_of(instance).get(&tag) {
            return Ok(existing.clone());
        }
        let id = self.fresh_edge_id(&format!("e_st_{instance}_{}", tag.replace(' ', "_")));
        self.insert_edge(Edge {
            id,
            kind: EdgeKind::HasState,
            source: instance.clone().into(),
            target: NodeRef::State(tag),
            deleted: false,
            note: None,
        })
    }

    /// Removes a state tag; returns whether it was present.
    pub fn remove_state(&mut self, instance: &InstanceId, tag: &str) -> Result<bool> {
        self.require_instance(instance)?;
        let tag = normalize_lemma(tag);
        match self.states_of(instance).remove(&tag) {
            Some(edge) => {
                self.remove_edge_physically(&edge);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Rewrites the containment edge of `instance` in place. The instance
    /// keeps its ID; the old edge is removed and its ID retired.
    pub fn move_instance(
        &mut self,
        instance: &InstanceId,
        container: &InstanceId,
        relation: Relation,
    ) -> Result<MoveOutcome> {
        self.require_instance(instance)?;
        self.require_instance(container)?;
        let current = self.container_of(instance);
        let Some((old_container, old_edge, old_relation)) = current else {
            return Err(GraphError::InvalidMove {
                instance: instance.clone(),
                reason: "rooms cannot be moved".into(),
            });
        };
        if &old_container == container && old_relation == relation {
            return Ok(MoveOutcome::NoOp);
        }
        if container == instance
            || self.containment_chain(container).iter().any(|(c, _)| c == instance)
        {
            return Err(GraphError::InvalidMove {
                instance: instance.clone(),
                reason: format!("moving into {container} would create a containment cycle"),
            });
        }
        self.remove_edge_physically(&old_edge);
        let added = self.fresh_edge_id(&format!("e_loc_{instance}"));
        self.insert_edge(Edge {
            id: added.clone(),
            kind: EdgeKind::Containment(relation),
            source: instance.clone().into(),
            target: container.clone().into(),
            deleted: false,
            note: None,
        })?;
        Ok(MoveOutcome::Moved {
            from: Some(old_container),
            to: container.clone(),
            removed_edge: Some(old_edge),
            added_edge: added,
        })
    }

    pub fn set_position(&mut self, instance: &InstanceId, position: Position) -> Result<()> {
        let node = self
            .instances
            .get_mut(instance)
            .ok_or_else(|| GraphError::UnknownInstance(instance.clone()))?;
        node.position = position;
        Ok(())
    }

    // ---------------------------------------------------------------- lookups

    pub fn concept(&self, id: &ConceptId) -> Option<&ConceptNode> {
        self.concepts.get(id)
    }

    pub fn instance(&self, id: &InstanceId) -> Option<&InstanceNode> {
        self.instances.get(id)
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptNode> {
        self.concepts.values()
    }

    pub fn instances(&self) -> impl Iterator<Item = &InstanceNode> {
        self.instances.values()
    }

    /// All edges, tombstones included.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn live_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values().filter(|e| e.is_live())
    }

    pub fn counts(&self) -> GraphCounts {
        GraphCounts {
            concepts: self.concepts.len(),
            instances: self.instances.len(),
            edges: self.live_edges().count(),
        }
    }

    pub fn mutation_count(&self) -> u64 {
        self.mutations
    }

    pub fn contains_node(&self, node: &NodeRef) -> bool {
        match node {
            NodeRef::Concept(c) => self.concepts.contains_key(c),
            NodeRef::Instance(i) => self.instances.contains_key(i),
            NodeRef::State(tag) => self.incoming.contains_key(&NodeRef::State(tag.clone())),
        }
    }

    /// Looks a node up by its string form (`state:<tag>` for state nodes).
    pub fn lookup_node(&self, id: &str) -> Option<NodeRef> {
        if let Some(tag) = id.strip_prefix(STATE_PREFIX) {
            let node = NodeRef::state(tag);
            return self.contains_node(&node).then_some(node);
        }
        let c = ConceptId::new(id);
        if self.concepts.contains_key(&c) {
            return Some(NodeRef::Concept(c));
        }
        let i = InstanceId::new(id);
        self.instances.contains_key(&i).then_some(NodeRef::Instance(i))
    }

    /// All normalized lemmas known to the graph.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.lemma_index.keys().map(String::as_str)
    }

    pub fn display_lemma(&self, node: &NodeRef) -> String {
        match node {
            NodeRef::Concept(c) => self
                .concepts
                .get(c)
                .map(|n| n.primary_lemma().to_owned())
                .unwrap_or_else(|| c.to_string()),
            NodeRef::Instance(i) => match self.concept_of(i) {
                Some((c, _)) => self.display_lemma(&NodeRef::Concept(c)),
                None => i.to_string(),
            },
            NodeRef::State(tag) => tag.clone(),
        }
    }

    /// Live edges leaving `node`.
    pub fn out_edges<'a>(&'a self, node: &NodeRef) -> impl Iterator<Item = &'a Edge> + 'a {
        Self::live_in(&self.edges, self.outgoing.get(node))
    }

    /// Live edges entering `node`.
    pub fn in_edges<'a>(&'a self, node: &NodeRef) -> impl Iterator<Item = &'a Edge> + 'a {
        Self::live_in(&self.edges, self.incoming.get(node))
    }

    fn live_in<'a>(
        edges: &'a BTreeMap<EdgeId, Edge>,
        ids: Option<&'a BTreeSet<EdgeId>>,
    ) -> impl Iterator<Item = &'a Edge> + 'a {
        ids.into_iter()
            .flatten()
            .filter_map(move |id| edges.get(id))
            .filter(|e| e.is_live())
    }

    // ---------------------------------------------------------------- queries

    /// Concepts carrying the normalized lemma. Homonyms yield several IDs.
    pub fn resolve_lemma(&self, lemma: &str) -> BTreeSet<ConceptId> {
        self.lemma_index.get(&normalize_lemma(lemma)).cloned().unwrap_or_default()
    }

    /// Reflexive-transitive closure over live is-a edges, child direction.
    pub fn descendants_of(&self, concept: &ConceptId) -> Result<BTreeSet<ConceptId>> {
        self.require_concept(concept)?;
        Ok(self.closure(concept, |g, node| {
            g.in_edges(node)
                .filter(|e| e.kind == EdgeKind::IsA)
                .map(|e| e.source.clone())
                .collect()
        }))
    }

    /// Reflexive-transitive closure over live is-a edges, parent direction.
    pub fn ancestors_of(&self, concept: &ConceptId) -> Result<BTreeSet<ConceptId>> {
        self.require_concept(concept)?;
        Ok(self.closure(concept, |g, node| {
            g.out_edges(node)
                .filter(|e| e.kind == EdgeKind::IsA)
                .map(|e| e.target.clone())
                .collect()
        }))
    }

    fn closure(
        &self,
        start: &ConceptId,
        next: impl Fn(&Self, &NodeRef) -> Vec<NodeRef>,
    ) -> BTreeSet<ConceptId> {
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([NodeRef::Concept(start.clone())]);
        while let Some(node) = queue.pop_front() {
            for n in next(self, &node) {
                if let NodeRef::Concept(c) = &n {
                    if seen.insert(c.clone()) {
                        queue.push_back(n);
                    }
                }
            }
        }
        seen
    }

    /// Concepts directly linked to `action` by a live pattern of `role`.
    pub fn patterns_for_action(
        &self,
        action: &ConceptId,
        role: PatternRole,
    ) -> Result<BTreeSet<(ConceptId, EdgeId)>> {
        self.require_concept(action)?;
        Ok(self
            .in_edges(&NodeRef::Concept(action.clone()))
            .filter(|e| e.kind == EdgeKind::ActionPattern(role))
            .filter_map(|e| e.source.as_concept().map(|c| (c.clone(), e.id.clone())))
            .collect())
    }

    /// Actions directly reachable from `concept` by a live pattern of `role`.
    pub fn actions_of_concept(
        &self,
        concept: &ConceptId,
        role: PatternRole,
    ) -> Result<BTreeSet<(ConceptId, EdgeId)>> {
        self.require_concept(concept)?;
        Ok(self
            .out_edges(&NodeRef::Concept(concept.clone()))
            .filter(|e| e.kind == EdgeKind::ActionPattern(role))
            .filter_map(|e| e.target.as_concept().map(|c| (c.clone(), e.id.clone())))
            .collect())
    }

    pub fn concept_of(&self, instance: &InstanceId) -> Option<(ConceptId, EdgeId)> {
        self.out_edges(&NodeRef::Instance(instance.clone()))
            .find(|e| e.kind == EdgeKind::InstanceOf)
            .and_then(|e| e.target.as_concept().map(|c| (c.clone(), e.id.clone())))
    }

    pub fn container_of(&self, instance: &InstanceId) -> Option<(InstanceId, EdgeId, Relation)> {
        self.out_edges(&NodeRef::Instance(instance.clone())).find_map(|e| match e.kind {
            EdgeKind::Containment(r) => e.target.as_instance().map(|c| (c.clone(), e.id.clone(), r)),
            _ => None,
        })
    }

    /// Strict containers of `instance`, innermost first, ending at its room.
    pub fn containment_chain(&self, instance: &InstanceId) -> Vec<(InstanceId, EdgeId)> {
        let mut chain = Vec::new();
        let mut current = instance.clone();
        while let Some((c, e, _)) = self.container_of(&current) {
            if &c == instance || chain.iter().any(|(seen, _): &(InstanceId, EdgeId)| seen == &c) {
                break;
            }
            chain.push((c.clone(), e));
            current = c;
        }
        chain
    }

    /// The room an instance is in; rooms are their own room.
    pub fn room_of(&self, instance: &InstanceId) -> InstanceId {
        self.containment_chain(instance)
            .last()
            .map(|(room, _)| room.clone())
            .unwrap_or_else(|| instance.clone())
    }

    /// Direct contents of `instance`.
    pub fn contents_of(&self, instance: &InstanceId) -> BTreeSet<InstanceId> {
        self.in_edges(&NodeRef::Instance(instance.clone()))
            .filter(|e| matches!(e.kind, EdgeKind::Containment(_)))
            .filter_map(|e| e.source.as_instance().cloned())
            .collect()
    }

    pub fn states_of(&self, instance: &InstanceId) -> BTreeMap<String, EdgeId> {
        self.out_edges(&NodeRef::Instance(instance.clone()))
            .filter(|e| e.kind == EdgeKind::HasState)
            .filter_map(|e| match &e.target {
                NodeRef::State(tag) => Some((tag.clone(), e.id.clone())),
                _ => None,
            })
            .collect()
    }

    // ---------------------------------------------------------------- deletion

    pub fn delete_edge(&mut self, id: &EdgeId) -> Result<DeletionReceipt> {
        let edge = self.edges.get_mut(id).ok_or_else(|| GraphError::UnknownEdge(id.clone()))?;
        if !edge.kind.is_knowledge() {
            return Err(GraphError::Protected(id.clone(), edge.kind));
        }
        if edge.deleted {
            return Err(GraphError::AlreadyDeleted(id.clone()));
        }
        edge.deleted = true;
        self.mutations += 1;
        let deleted_at_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or_default();
        Ok(DeletionReceipt { edge: id.clone(), deleted_at_ms, mutation: self.mutations })
    }

    pub fn restore_edge(&mut self, id: &EdgeId) -> Result<()> {
        let edge = self.edges.get_mut(id).ok_or_else(|| GraphError::UnknownEdge(id.clone()))?;
        if !edge.deleted {
            return Err(GraphError::NotDeleted(id.clone()));
        }
        edge.deleted = false;
        self.mutations += 1;
        Ok(())
    }

    /// Drops all tombstones. Used before a canonical save.
    pub fn compact(&mut self) {
        let dead: Vec<EdgeId> =
            self.edges.values().filter(|e| e.deleted).map(|e| e.id.clone()).collect();
        for id in dead {
            self.remove_edge_physically(&id);
        }
    }

    // ---------------------------------------------------------------- fragments

    /// The given nodes plus every live edge and neighbor within `depth` hops,
    /// ignoring edge direction.
    pub fn subgraph(&self, nodes: &[NodeRef], depth: usize) -> Result<GraphFragment> {
        let mut dist: BTreeMap<NodeRef, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for n in nodes {
            if !self.contains_node(n) {
                return Err(GraphError::UnknownNode(n.to_string()));
            }
            if dist.insert(n.clone(), 0).is_none() {
                queue.push_back(n.clone());
            }
        }
        let mut edges = BTreeSet::new();
        while let Some(node) = queue.pop_front() {
            let d = dist[&node];
            if d >= depth {
                continue;
            }
            for e in self.out_edges(&node).chain(self.in_edges(&node)) {
                edges.insert(e.id.clone());
                let other = e.other_end(&node).expect("adjacent edge").clone();
                if !dist.contains_key(&other) {
                    dist.insert(other.clone(), d + 1);
                    queue.push_back(other);
                }
            }
        }
        let mut fragment = GraphFragment::default();
        for node in dist.keys() {
            fragment.nodes.push(self.fragment_node(node, None));
        }
        for id in &edges {
            fragment.edges.push(FragmentEdge::from_edge(&self.edges[id]));
        }
        Ok(fragment)
    }

    /// Describes a graph node for a fragment, with its default class.
    pub fn fragment_node(&self, node: &NodeRef, class: Option<NodeClass>) -> FragmentNode {
        let class = class.unwrap_or(match node {
            NodeRef::Concept(_) | NodeRef::State(_) => NodeClass::Concept,
            NodeRef::Instance(_) => NodeClass::InstanceResult,
        });
        let lemmas = match node {
            NodeRef::Concept(c) => self.concepts.get(c).map(|n| n.lemmas.clone()).unwrap_or_default(),
            _ => Vec::new(),
        };
        let concept = match node {
            NodeRef::Instance(i) => self.concept_of(i).map(|(c, _)| c),
            _ => None,
        };
        FragmentNode {
            id: node.to_string(),
            kind: node.kind().to_owned(),
            node_class: class,
            label: self.display_lemma(node),
            lemmas,
            concept,
        }
    }

    // ---------------------------------------------------------------- invariants

    /// Checks every structural invariant and lists the violations found.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in self.concepts.values() {
            if c.lemmas.is_empty() {
                out.push(format!("concept {} has no lemmas", c.id));
            }
        }
        for e in self.edges.values() {
            for end in [&e.source, &e.target] {
                let exists = match end {
                    NodeRef::State(_) => true,
                    other => self.contains_node(other),
                };
                if !exists {
                    out.push(format!("edge {} has dangling endpoint {end}", e.id));
                }
            }
        }
        for c in self.concepts.keys() {
            if let Some(path) = self.upward_path_live(c) {
                let names: Vec<String> = path.iter().map(ToString::to_string).collect();
                out.push(format!("is-a cycle: {}", names.join(" -> ")));
                break;
            }
        }
        for i in self.instances.keys() {
            let node = NodeRef::Instance(i.clone());
            let of = self.out_edges(&node).filter(|e| e.kind == EdgeKind::InstanceOf).count();
            if of != 1 {
                out.push(format!("instance {i} has {of} live instance-of edges"));
            }
            let cont = self
                .out_edges(&node)
                .filter(|e| matches!(e.kind, EdgeKind::Containment(_)))
                .count();
            if cont > 1 {
                out.push(format!("instance {i} has {cont} containment edges"));
            }
            let chain = self.containment_chain(i);
            if let Some((last, _)) = chain.last() {
                if self.container_of(last).is_some() {
                    out.push(format!("containment chain of {i} is cyclic"));
                }
            }
        }
        out
    }

    // ---------------------------------------------------------------- internals

    fn require_concept(&self, id: &ConceptId) -> Result<()> {
        if self.concepts.contains_key(id) {
            Ok(())
        } else {
            Err(GraphError::UnknownConcept(id.clone()))
        }
    }

    fn require_instance(&self, id: &InstanceId) -> Result<()> {
        if self.instances.contains_key(id) {
            Ok(())
        } else {
            Err(GraphError::UnknownInstance(id.clone()))
        }
    }

    fn ensure_fresh_node_id(&self, id: &str) -> Result<()> {
        if id.is_empty() || id.starts_with(STATE_PREFIX) {
            return Err(GraphError::InvalidId(id.to_owned()));
        }
        if self.concepts.contains_key(&ConceptId::new(id))
            || self.instances.contains_key(&InstanceId::new(id))
        {
            return Err(GraphError::DuplicateId(id.to_owned()));
        }
        Ok(())
    }

    /// `base` if unused, otherwise `base_<n>` for the smallest free `n`.
    pub fn fresh_edge_id(&self, base: &str) -> EdgeId {
        let taken = |id: &EdgeId| self.edges.contains_key(id) || self.retired.contains(id);
        let candidate = EdgeId::new(base);
        if !taken(&candidate) {
            return candidate;
        }
        (1u64..)
            .map(|n| EdgeId::new(format!("{base}_{n}")))
            .find(|id| !taken(id))
            .expect("unbounded search")
    }

    fn insert_edge(&mut self, edge: Edge) -> Result<EdgeId> {
        if self.edges.contains_key(&edge.id) || self.retired.contains(&edge.id) {
            return Err(GraphError::DuplicateId(edge.id.to_string()));
        }
        let id = edge.id.clone();
        self.outgoing.entry(edge.source.clone()).or_default().insert(id.clone());
        self.incoming.entry(edge.target.clone()).or_default().insert(id.clone());
        self.edges.insert(id.clone(), edge);
        self.mutations += 1;
        Ok(id)
    }

    fn remove_edge_physically(&mut self, id: &EdgeId) {
        if let Some(edge) = self.edges.remove(id) {
            for (index, node) in [(&mut self.outgoing, &edge.source), (&mut self.incoming, &edge.target)] {
                if let Some(set) = index.get_mut(node) {
                    set.remove(id);
                    if set.is_empty() {
                        index.remove(node);
                    }
                }
            }
            self.retired.insert(id.clone());
            self.mutations += 1;
        }
    }

    /// Upward is-a path from `from` to `to` over all is-a edges, tombstones
    /// included. Returns the concepts visited, both ends inclusive.
    fn upward_path(&self, from: &ConceptId, to: &ConceptId) -> Option<Vec<ConceptId>> {
        let mut parent_of: BTreeMap<ConceptId, ConceptId> = BTreeMap::new();
        let mut seen = BTreeSet::from([from.clone()]);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(c) = queue.pop_front() {
            if &c == to {
                let mut path = vec![c.clone()];
                let mut cur = c;
                while let Some(p) = parent_of.get(&cur) {
                    path.push(p.clone());
                    cur = p.clone();
                }
                path.reverse();
                return Some(path);
            }
            let node = NodeRef::Concept(c.clone());
            for id in self.outgoing.get(&node).into_iter().flatten() {
                let e = &self.edges[id];
                if e.kind != EdgeKind::IsA {
                    continue;
                }
                if let NodeRef::Concept(p) = &e.target {
                    if seen.insert(p.clone()) {
                        parent_of.insert(p.clone(), c.clone());
                        queue.push_back(p.clone());
                    }
                }
            }
        }
        None
    }

    /// A live is-a cycle through `start`, if one exists.
    fn upward_path_live(&self, start: &ConceptId) -> Option<Vec<ConceptId>> {
        let parents: Vec<ConceptId> = self
            .out_edges(&NodeRef::Concept(start.clone()))
            .filter(|e| e.kind == EdgeKind::IsA)
            .filter_map(|e| e.target.as_concept().cloned())
            .collect();
        for p in parents {
            let ancestors = self.ancestors_of(&p).ok()?;
            if ancestors.contains(start) {
                return Some(vec![start.clone(), p]);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests;
