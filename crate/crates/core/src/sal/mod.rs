//! The semantic abstraction layer: `get_stm_objects`, `get_stm_locations`,
//! `get_stm_actions` and `get_count` over a graph snapshot, plus evaluation
//! of nested call trees.
//!
//! Every argument is a lemma or a set of node IDs. Lemmas are resolved to
//! concepts (all homonyms), and a concept matches every instance of itself
//! or of any descendant. Filters combine conjunctively. Each call returns a
//! [`CallRecord`] whose fragment holds, for every output, the shortest
//! justification path per constraining argument.

mod error;
mod search;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use error::{SalError, SalErrorCode};
pub use trace::{CallRecord, OutputNode, ResolvedArg, SoundnessIssue, Trace, TRACE_VERSION};

use crate::graph::{EdgeKind, Graph, HighlightPath, NodeClass, PatternRole, PathStep};
use crate::ids::{ConceptId, InstanceId, NodeRef};
use search::{shortest_labels, Label, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SalFunction {
    GetStmObjects,
    GetStmLocations,
    GetStmActions,
    GetCount,
}

impl SalFunction {
    pub fn name(&self) -> &'static str {
        match self {
            SalFunction::GetStmObjects => "get_stm_objects",
            SalFunction::GetStmLocations => "get_stm_locations",
            SalFunction::GetStmActions => "get_stm_actions",
            SalFunction::GetCount => "get_count",
        }
    }
}

impl fmt::Display for SalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Object,
    Action,
    Location,
    State,
}

impl Slot {
    pub fn name(&self) -> &'static str {
        match self {
            Slot::Object => "object",
            Slot::Action => "action",
            Slot::Location => "location",
            Slot::State => "state",
        }
    }
}

/// An argument value: a lemma to resolve, or explicit node IDs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arg {
    Lemma(String),
    Ids(Vec<NodeRef>),
}

impl From<&str> for Arg {
    fn from(lemma: &str) -> Self {
        Arg::Lemma(lemma.to_owned())
    }
}

impl From<String> for Arg {
    fn from(lemma: String) -> Self {
        Arg::Lemma(lemma)
    }
}

impl From<ConceptId> for Arg {
    fn from(id: ConceptId) -> Self {
        Arg::Ids(vec![NodeRef::Concept(id)])
    }
}

impl From<InstanceId> for Arg {
    fn from(id: InstanceId) -> Self {
        Arg::Ids(vec![NodeRef::Instance(id)])
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Lemma(l) => write!(f, "\"{l}\""),
            Arg::Ids(ids) => {
                let ids: Vec<String> = ids.iter().map(ToString::to_string).collect();
                write!(f, "[{}]", ids.join(", "))
            }
        }
    }
}

/// Arguments of one call.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalArgs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<Arg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Arg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Arg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
}

impl SalArgs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object(mut self, arg: impl Into<Arg>) -> Self {
        self.object = Some(arg.into());
        self
    }

    pub fn action(mut self, arg: impl Into<Arg>) -> Self {
        self.action = Some(arg.into());
        self
    }

    pub fn location(mut self, arg: impl Into<Arg>) -> Self {
        self.location = Some(arg.into());
        self
    }

    pub fn state(mut self, tag: impl Into<String>) -> Self {
        self.state = Some(tag.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.object.is_none() && self.action.is_none() && self.location.is_none() && self.state.is_none()
    }
}

/// A call-tree argument: a literal, or a nested call whose outputs are
/// substituted as IDs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgExpr {
    Value(Arg),
    Call(Box<CallTree>),
}

impl<T: Into<Arg>> From<T> for ArgExpr {
    fn from(v: T) -> Self {
        ArgExpr::Value(v.into())
    }
}

impl From<CallTree> for ArgExpr {
    fn from(tree: CallTree) -> Self {
        ArgExpr::Call(Box::new(tree))
    }
}

impl fmt::Display for ArgExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgExpr::Value(v) => v.fmt(f),
            ArgExpr::Call(c) => c.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallTree {
    pub function: SalFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ArgExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ArgExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<ArgExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
}

impl CallTree {
    pub fn new(function: SalFunction) -> Self {
        Self { function, object: None, action: None, location: None, state: None }
    }

    pub fn object(mut self, arg: impl Into<ArgExpr>) -> Self {
        self.object = Some(arg.into());
        self
    }

    pub fn action(mut self, arg: impl Into<ArgExpr>) -> Self {
        self.action = Some(arg.into());
        self
    }

    pub fn location(mut self, arg: impl Into<ArgExpr>) -> Self {
        self.location = Some(arg.into());
        self
    }

    pub fn state(mut self, tag: impl Into<String>) -> Self {
        self.state = Some(tag.into());
        self
    }

    /// Number of calls in the tree.
    pub fn size(&self) -> usize {
        1 + [&self.object, &self.action, &self.location]
            .into_iter()
            .flatten()
            .map(|a| match a {
                ArgExpr::Call(c) => c.size(),
                ArgExpr::Value(_) => 0,
            })
            .sum::<usize>()
    }
}

impl fmt::Display for CallTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.function)?;
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !std::mem::take(&mut first) {
                f.write_str(", ")?;
            }
            Ok(())
        };
        for (slot, arg) in [("object", &self.object), ("action", &self.action), ("location", &self.location)] {
            if let Some(a) = arg {
                sep(f)?;
                write!(f, "{slot}={a}")?;
            }
        }
        if let Some(s) = &self.state {
            sep(f)?;
            write!(f, "state=\"{s}\"")?;
        }
        f.write_str(")")
    }
}

/// Result of a call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SalOutput {
    Instances(BTreeSet<InstanceId>),
    Concepts(BTreeSet<ConceptId>),
    Count(usize),
}

impl SalOutput {
    pub fn nodes(&self) -> Vec<NodeRef> {
        match self {
            SalOutput::Instances(s) => s.iter().cloned().map(NodeRef::Instance).collect(),
            SalOutput::Concepts(s) => s.iter().cloned().map(NodeRef::Concept).collect(),
            SalOutput::Count(_) => Vec::new(),
        }
    }
}

/// Resolved form of one argument slot.
#[derive(Debug, Default, Clone)]
struct Resolved {
    concepts: BTreeSet<ConceptId>,
    instances: BTreeSet<InstanceId>,
}

#[derive(Debug, Default)]
struct ResolvedArgs {
    object: Option<Resolved>,
    action: Option<Resolved>,
    location: Option<Resolved>,
    state: Option<String>,
    records: Vec<ResolvedArg>,
}

/// Query evaluator over one graph snapshot.
#[derive(Clone, Copy)]
pub struct Reasoner<'g> {
    graph: &'g Graph,
}

impl<'g> Reasoner<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Self { graph }
    }

    pub fn get_stm_objects(&self, args: &SalArgs) -> Result<(BTreeSet<InstanceId>, CallRecord), SalError> {
        let (out, rec) = self.call(SalFunction::GetStmObjects, args)?;
        match out {
            SalOutput::Instances(s) => Ok((s, rec)),
            _ => unreachable!("get_stm_objects yields instances"),
        }
    }

    pub fn get_stm_locations(&self, args: &SalArgs) -> Result<(BTreeSet<InstanceId>, CallRecord), SalError> {
        let (out, rec) = self.call(SalFunction::GetStmLocations, args)?;
        match out {
            SalOutput::Instances(s) => Ok((s, rec)),
            _ => unreachable!("get_stm_locations yields instances"),
        }
    }

    pub fn get_stm_actions(&self, args: &SalArgs) -> Result<(BTreeSet<ConceptId>, CallRecord), SalError> {
        let (out, rec) = self.call(SalFunction::GetStmActions, args)?;
        match out {
            SalOutput::Concepts(s) => Ok((s, rec)),
            _ => unreachable!("get_stm_actions yields concepts"),
        }
    }

    pub fn get_count(&self, args: &SalArgs) -> Result<(usize, CallRecord), SalError> {
        let (out, rec) = self.call(SalFunction::GetCount, args)?;
        match out {
            SalOutput::Count(n) => Ok((n, rec)),
            _ => unreachable!("get_count yields a count"),
        }
    }

    /// Runs one function on already-evaluated arguments.
    pub fn call(&self, function: SalFunction, args: &SalArgs) -> Result<(SalOutput, CallRecord), SalError> {
        self.call_at(function, args, 0, "root", &BTreeMap::new())
    }

    /// Evaluates a call tree bottom-up. Records are listed innermost first.
    pub fn eval(&self, tree: &CallTree) -> Result<(SalOutput, Trace), SalError> {
        let mut calls = Vec::new();
        let result = self.eval_node(tree, "root", &mut calls)?;
        Ok((result.clone(), Trace { trace_version: TRACE_VERSION, utterance: None, calls, result }))
    }

    fn eval_node(&self, tree: &CallTree, position: &str, records: &mut Vec<CallRecord>) -> Result<SalOutput, SalError> {
        let mut args = SalArgs { state: tree.state.clone(), ..SalArgs::default() };
        let mut sources: BTreeMap<Slot, usize> = BTreeMap::new();
        for (slot, expr) in [(Slot::Object, &tree.object), (Slot::Action, &tree.action), (Slot::Location, &tree.location)] {
            let Some(expr) = expr else { continue };
            let value = match expr {
                ArgExpr::Value(v) => v.clone(),
                ArgExpr::Call(child) => {
                    let child_pos = format!("{position}.{}", slot.name());
                    let out = self.eval_node(child, &child_pos, records)?;
                    if let SalOutput::Count(_) = out {
                        return Err(SalError::bad_tree("a count cannot be used as an argument").at(&child_pos));
                    }
                    sources.insert(slot, records.len() - 1);
                    Arg::Ids(out.nodes())
                }
            };
            match slot {
                Slot::Object => args.object = Some(value),
                Slot::Action => args.action = Some(value),
                Slot::Location => args.location = Some(value),
                Slot::State => unreachable!(),
            }
        }
        let (out, record) = self
            .call_at(tree.function, &args, records.len(), position, &sources)
            .map_err(|e| e.at(position))?;
        records.push(record);
        Ok(out)
    }

    fn call_at(
        &self,
        function: SalFunction,
        args: &SalArgs,
        index: usize,
        position: &str,
        sources: &BTreeMap<Slot, usize>,
    ) -> Result<(SalOutput, CallRecord), SalError> {
        if args.is_empty() {
            return Err(SalError::bad_tree(format!("{function} needs at least one argument")));
        }
        if function == SalFunction::GetStmActions && args.object.is_none() {
            return Err(SalError::bad_tree("get_stm_actions needs an object argument"));
        }
        let resolved = self.resolve_args(args, sources)?;
        let matches = self.matching_instances(&resolved);

        let (output, outputs, paths) = match function {
            SalFunction::GetStmObjects | SalFunction::GetCount => {
                let paths = self.object_paths(&resolved, &matches);
                let outputs = self.instance_outputs(&matches);
                let output = if function == SalFunction::GetCount {
                    SalOutput::Count(matches.len())
                } else {
                    SalOutput::Instances(matches.clone())
                };
                (output, outputs, paths)
            }
            SalFunction::GetStmLocations => {
                let (locations, paths) = self.location_outputs(&resolved, &matches);
                let outputs = self.instance_outputs(&locations);
                (SalOutput::Instances(locations), outputs, paths)
            }
            SalFunction::GetStmActions => {
                let (actions, paths) = self.action_outputs(&resolved, &matches);
                let outputs = actions
                    .iter()
                    .map(|a| {
                        let id = NodeRef::Concept(a.clone());
                        OutputNode { lemma: self.graph.display_lemma(&id), id, node_class: NodeClass::Concept }
                    })
                    .collect();
                (SalOutput::Concepts(actions), outputs, paths)
            }
        };

        let fragment = trace::build_fragment(self.graph, index, function, &resolved.records, &outputs, paths);
        let record = CallRecord {
            index,
            function,
            position: position.to_owned(),
            args: resolved.records,
            count: match output {
                SalOutput::Count(n) => Some(n),
                _ => None,
            },
            outputs,
            fragment,
        };
        Ok((output, record))
    }

    fn instance_outputs(&self, set: &BTreeSet<InstanceId>) -> Vec<OutputNode> {
        set.iter()
            .map(|i| {
                let id = NodeRef::Instance(i.clone());
                OutputNode { lemma: self.graph.display_lemma(&id), id, node_class: NodeClass::InstanceResult }
            })
            .collect()
    }

    // ------------------------------------------------------------ resolution

    fn resolve_args(&self, args: &SalArgs, sources: &BTreeMap<Slot, usize>) -> Result<ResolvedArgs, SalError> {
        let mut out = ResolvedArgs::default();
        for (slot, arg) in [(Slot::Object, &args.object), (Slot::Action, &args.action), (Slot::Location, &args.location)] {
            let Some(arg) = arg else { continue };
            let (resolved, record) = self.resolve_slot(slot, arg, sources.get(&slot).copied())?;
            out.records.push(record);
            match slot {
                Slot::Object => out.object = Some(resolved),
                Slot::Action => out.action = Some(resolved),
                Slot::Location => out.location = Some(resolved),
                Slot::State => unreachable!(),
            }
        }
        if let Some(tag) = &args.state {
            let tag = crate::ids::normalize_lemma(tag);
            let node = NodeRef::State(tag.clone());
            let (ids, id_lemmas) = if self.graph.contains_node(&node) {
                (vec![node], vec![tag.clone()])
            } else {
                (Vec::new(), Vec::new())
            };
            out.records.push(ResolvedArg { slot: Slot::State, lemma: Some(tag.clone()), ids, id_lemmas, from_call: None });
            out.state = Some(tag);
        }
        Ok(out)
    }

    fn resolve_slot(&self, slot: Slot, arg: &Arg, from_call: Option<usize>) -> Result<(Resolved, ResolvedArg), SalError> {
        let mut resolved = Resolved::default();
        let lemma = match arg {
            Arg::Lemma(lemma) => {
                let concepts = self.graph.resolve_lemma(lemma);
                if concepts.is_empty() {
                    return Err(SalError::unresolved(lemma));
                }
                resolved.concepts = concepts;
                Some(crate::ids::normalize_lemma(lemma))
            }
            Arg::Ids(ids) => {
                for id in ids {
                    if !self.graph.contains_node(id) {
                        return Err(SalError::unknown_id(&id.to_string()));
                    }
                    match id {
                        NodeRef::Concept(c) => {
                            resolved.concepts.insert(c.clone());
                        }
                        NodeRef::Instance(i) if slot != Slot::Action => {
                            resolved.instances.insert(i.clone());
                        }
                        other => {
                            return Err(SalError::bad_tree(format!(
                                "{} cannot take the {} `{other}`",
                                slot.name(),
                                other.kind()
                            )))
                        }
                    }
                }
                None
            }
        };
        let ids: Vec<NodeRef> = resolved
            .concepts
            .iter()
            .cloned()
            .map(NodeRef::Concept)
            .chain(resolved.instances.iter().cloned().map(NodeRef::Instance))
            .collect();
        let id_lemmas = ids.iter().map(|n| self.graph.display_lemma(n)).collect();
        Ok((resolved, ResolvedArg { slot, lemma, ids, id_lemmas, from_call }))
    }

    // ------------------------------------------------------------ matching

    /// Instances satisfying every given filter.
    fn matching_instances(&self, args: &ResolvedArgs) -> BTreeSet<InstanceId> {
        let g = self.graph;
        let closure = |roots: &BTreeSet<ConceptId>| -> BTreeSet<ConceptId> {
            roots.iter().flat_map(|c| g.descendants_of(c).unwrap_or_default()).collect()
        };
        let object = args.object.as_ref().map(|r| (closure(&r.concepts), &r.instances));
        let action_carriers = args.action.as_ref().map(|r| {
            let sources: BTreeSet<ConceptId> = r
                .concepts
                .iter()
                .flat_map(|a| g.patterns_for_action(a, PatternRole::Object).unwrap_or_default())
                .map(|(c, _)| c)
                .collect();
            closure(&sources)
        });
        let containers: Option<BTreeSet<InstanceId>> = args.location.as_ref().map(|r| {
            let concepts = closure(&r.concepts);
            g.instances()
                .filter(|i| g.concept_of(&i.id).is_some_and(|(c, _)| concepts.contains(&c)))
                .map(|i| i.id.clone())
                .chain(r.instances.iter().cloned())
                .collect()
        });

        g.instances()
            .map(|i| &i.id)
            .filter(|id| {
                let concept = g.concept_of(id).map(|(c, _)| c);
                if let Some((concepts, instances)) = &object {
                    let by_concept = concept.as_ref().is_some_and(|c| concepts.contains(c));
                    if !by_concept && !instances.contains(*id) {
                        return false;
                    }
                }
                if let Some(carriers) = &action_carriers {
                    if !concept.as_ref().is_some_and(|c| carriers.contains(c)) {
                        return false;
                    }
                }
                if let Some(tag) = &args.state {
                    if !g.states_of(id).contains_key(tag) {
                        return false;
                    }
                }
                if let Some(containers) = &containers {
                    if !g.containment_chain(id).iter().any(|(c, _)| containers.contains(c)) {
                        return false;
                    }
                }
                true
            })
            .cloned()
            .collect()
    }

    // ------------------------------------------------------------ paths

    /// From concept anchors down the hierarchy to instances (phase 1).
    fn hierarchy_down(&self, state: &State) -> Vec<(&'g crate::graph::Edge, State)> {
        let (node, phase) = state;
        match (node, phase) {
            (NodeRef::Concept(_), 0) => self
                .graph
                .in_edges(node)
                .filter_map(|e| match e.kind {
                    EdgeKind::IsA => Some((e, (e.source.clone(), 0))),
                    EdgeKind::InstanceOf => Some((e, (e.source.clone(), 1))),
                    _ => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    fn paths_for_slot(&self, slot: Slot, args: &ResolvedArgs, targets: &BTreeSet<InstanceId>) -> BTreeMap<InstanceId, Label> {
        let g = self.graph;
        let mut found = BTreeMap::new();
        match slot {
            Slot::Object => {
                let Some(r) = &args.object else { return found };
                let sources = r
                    .concepts
                    .iter()
                    .map(|c| ((NodeRef::Concept(c.clone()), 0u8), Label::empty(NodeRef::Concept(c.clone()))))
                    .collect();
                let labels = shortest_labels(sources, |s| self.hierarchy_down(s));
                for t in targets {
                    let direct = r.instances.contains(t).then(|| Label::empty(NodeRef::Instance(t.clone())));
                    let via = labels.get(&(NodeRef::Instance(t.clone()), 1)).cloned();
                    if let Some(best) = [direct, via].into_iter().flatten().min_by(label_order) {
                        found.insert(t.clone(), best);
                    }
                }
            }
            Slot::Action => {
                let Some(r) = &args.action else { return found };
                let mut sources = Vec::new();
                for a in &r.concepts {
                    let anchor = NodeRef::Concept(a.clone());
                    for e in g.in_edges(&anchor).filter(|e| e.kind == EdgeKind::ActionPattern(PatternRole::Object)) {
                        let label = Label::empty(anchor.clone()).extend(e, &anchor, &e.source);
                        sources.push(((e.source.clone(), 0u8), label));
                    }
                }
                let labels = shortest_labels(sources, |s| self.hierarchy_down(s));
                for t in targets {
                    if let Some(l) = labels.get(&(NodeRef::Instance(t.clone()), 1)) {
                        found.insert(t.clone(), l.clone());
                    }
                }
            }
            Slot::State => {
                let Some(tag) = &args.state else { return found };
                let anchor = NodeRef::State(tag.clone());
                for t in targets {
                    if let Some(edge_id) = g.states_of(t).get(tag) {
                        let edge = g.edge(edge_id).expect("live state edge");
                        found.insert(t.clone(), Label::empty(anchor.clone()).extend(edge, &anchor, &NodeRef::Instance(t.clone())));
                    }
                }
            }
            Slot::Location => {
                let Some(r) = &args.location else { return found };
                let mut sources: Vec<(State, Label)> = r
                    .concepts
                    .iter()
                    .map(|c| ((NodeRef::Concept(c.clone()), 0u8), Label::empty(NodeRef::Concept(c.clone()))))
                    .collect();
                for i in &r.instances {
                    sources.push(((NodeRef::Instance(i.clone()), 1), Label::empty(NodeRef::Instance(i.clone()))));
                }
                // phases: 0 concept, 1 container instance, 2 inside a container
                let labels = shortest_labels(sources, |state| {
                    let (node, phase) = state;
                    match (node, phase) {
                        (NodeRef::Concept(_), 0) => self.hierarchy_down(state),
                        (NodeRef::Instance(_), 1 | 2) => g
                            .in_edges(node)
                            .filter(|e| matches!(e.kind, EdgeKind::Containment(_)))
                            .map(|e| (e, (e.source.clone(), 2)))
                            .collect(),
                        _ => Vec::new(),
                    }
                });
                for t in targets {
                    if let Some(l) = labels.get(&(NodeRef::Instance(t.clone()), 2)) {
                        found.insert(t.clone(), l.clone());
                    }
                }
            }
        }
        found
    }

    fn object_paths(&self, args: &ResolvedArgs, matches: &BTreeSet<InstanceId>) -> Vec<HighlightPath> {
        let mut paths = Vec::new();
        for slot in [Slot::Object, Slot::Action, Slot::State, Slot::Location] {
            for (target, label) in self.paths_for_slot(slot, args, matches) {
                paths.push(to_path(slot, label, NodeRef::Instance(target)));
            }
        }
        paths.sort();
        paths
    }

    /// Best base path per matching instance: from the first present slot in
    /// the order object, action, state, location.
    fn base_labels(&self, args: &ResolvedArgs, matches: &BTreeSet<InstanceId>) -> (Slot, BTreeMap<InstanceId, Label>) {
        let slot = if args.object.is_some() {
            Slot::Object
        } else if args.action.is_some() {
            Slot::Action
        } else if args.state.is_some() {
            Slot::State
        } else {
            Slot::Location
        };
        (slot, self.paths_for_slot(slot, args, matches))
    }

    fn location_outputs(&self, args: &ResolvedArgs, matches: &BTreeSet<InstanceId>) -> (BTreeSet<InstanceId>, Vec<HighlightPath>) {
        let g = self.graph;
        let locations: BTreeSet<InstanceId> =
            matches.iter().flat_map(|i| g.containment_chain(i)).map(|(c, _)| c).collect();
        let (slot, base) = self.base_labels(args, matches);
        let sources = base.into_iter().map(|(i, l)| ((NodeRef::Instance(i), 0u8), l)).collect();
        let labels = shortest_labels(sources, |(node, _)| match node {
            NodeRef::Instance(_) => g
                .out_edges(node)
                .filter(|e| matches!(e.kind, EdgeKind::Containment(_)))
                .map(|e| (e, (e.target.clone(), 1)))
                .collect(),
            _ => Vec::new(),
        });
        let mut paths: Vec<HighlightPath> = locations
            .iter()
            .filter_map(|l| {
                let node = NodeRef::Instance(l.clone());
                labels.get(&(node.clone(), 1)).map(|label| to_path(slot, label.clone(), node))
            })
            .collect();
        paths.sort();
        (locations, paths)
    }

    fn action_outputs(&self, args: &ResolvedArgs, matches: &BTreeSet<InstanceId>) -> (BTreeSet<ConceptId>, Vec<HighlightPath>) {
        let g = self.graph;
        let mut actions = BTreeSet::new();
        for i in matches {
            if let Some((c, _)) = g.concept_of(i) {
                for anc in g.ancestors_of(&c).unwrap_or_default() {
                    for (a, _) in g.actions_of_concept(&anc, PatternRole::Object).unwrap_or_default() {
                        actions.insert(a);
                    }
                }
            }
        }
        let (slot, base) = self.base_labels(args, matches);
        let sources = base.into_iter().map(|(i, l)| ((NodeRef::Instance(i), 0u8), l)).collect();
        // phases: 0 instance, 1 its concept or an ancestor, 2 an action
        let labels = shortest_labels(sources, |(node, phase)| match (node, phase) {
            (NodeRef::Instance(_), 0) => g
                .out_edges(node)
                .filter(|e| e.kind == EdgeKind::InstanceOf)
                .map(|e| (e, (e.target.clone(), 1)))
                .collect(),
            (NodeRef::Concept(_), 1) => g
                .out_edges(node)
                .filter_map(|e| match e.kind {
                    EdgeKind::IsA => Some((e, (e.target.clone(), 1))),
                    EdgeKind::ActionPattern(PatternRole::Object) => Some((e, (e.target.clone(), 2))),
                    _ => None,
                })
                .collect(),
            _ => Vec::new(),
        });
        let mut paths: Vec<HighlightPath> = actions
            .iter()
            .filter_map(|a| {
                let node = NodeRef::Concept(a.clone());
                labels.get(&(node.clone(), 2)).map(|label| to_path(slot, label.clone(), node))
            })
            .collect();
        paths.sort();
        (actions, paths)
    }
}

fn label_order(a: &Label, b: &Label) -> std::cmp::Ordering {
    (a.steps.len(), &a.steps, &a.anchor).cmp(&(b.steps.len(), &b.steps, &b.anchor))
}

fn to_path(slot: Slot, label: Label, output: NodeRef) -> HighlightPath {
    debug_assert_eq!(label.end(), &output);
    let steps: Vec<PathStep> = label.steps;
    HighlightPath { slot: slot.name().to_owned(), anchor: label.anchor, output, steps }
}
