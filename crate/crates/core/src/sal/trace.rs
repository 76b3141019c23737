//! Reasoning traces: one record per executed call, each carrying the graph
//! excerpt and the highlighted justification path of every output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SalFunction, SalOutput, Slot};
use crate::graph::{replay_path, FragmentEdge, FragmentNode, Graph, GraphFragment, HighlightPath, NodeClass, ReplayError};
use crate::ids::NodeRef;

pub const TRACE_VERSION: u32 = 1;

/// An argument after resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedArg {
    pub slot: Slot,
    /// The lemma or state tag as given, when the argument was textual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    /// Concept, instance or state nodes the argument stands for.
    pub ids: Vec<NodeRef>,
    /// Display lemmas of `ids`, same order.
    pub id_lemmas: Vec<String>,
    /// Index of the call whose outputs were substituted here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_call: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputNode {
    pub id: NodeRef,
    pub lemma: String,
    pub node_class: NodeClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    /// Execution order, innermost call first.
    pub index: usize,
    pub function: SalFunction,
    /// Position in the call tree: `root`, `root.object`, ...
    pub position: String,
    pub args: Vec<ResolvedArg>,
    pub outputs: Vec<OutputNode>,
    /// Present for `get_count`; `outputs` then lists the counted instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub fragment: GraphFragment,
}

impl CallRecord {
    pub fn output_ids(&self) -> impl Iterator<Item = &NodeRef> {
        self.outputs.iter().map(|o| &o.id)
    }

    pub fn paths_to<'a>(&'a self, output: &'a NodeRef) -> impl Iterator<Item = &'a HighlightPath> + 'a {
        self.fragment.paths.iter().filter(move |p| &p.output == output)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub trace_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
    pub calls: Vec<CallRecord>,
    pub result: SalOutput,
}

/// A failure found while replaying a trace against a graph.
#[derive(Clone, Debug, PartialEq)]
pub enum SoundnessIssue {
    Replay { call: usize, path: usize, error: ReplayError },
    Unjustified { call: usize, output: NodeRef },
}

impl std::fmt::Display for SoundnessIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SoundnessIssue::Replay { call, path, error } => write!(f, "call {call} path {path}: {error}"),
            SoundnessIssue::Unjustified { call, output } => write!(f, "call {call}: output {output} has no path"),
        }
    }
}

impl Trace {
    pub fn final_outputs(&self) -> &[OutputNode] {
        self.calls.last().map(|c| c.outputs.as_slice()).unwrap_or(&[])
    }

    /// Replays every highlighted path against `graph` and checks that each
    /// output is the end of at least one path.
    pub fn check_soundness(&self, graph: &Graph) -> Vec<SoundnessIssue> {
        let mut issues = Vec::new();
        for call in &self.calls {
            for (i, path) in call.fragment.paths.iter().enumerate() {
                if let Err(error) = replay_path(graph, path) {
                    issues.push(SoundnessIssue::Replay { call: call.index, path: i, error });
                }
            }
            for output in call.output_ids() {
                if call.paths_to(output).next().is_none() {
                    issues.push(SoundnessIssue::Unjustified { call: call.index, output: output.clone() });
                }
            }
        }
        issues
    }
}

/// Assembles the fragment of one call from its arguments, outputs and paths.
pub(crate) fn build_fragment(
    graph: &Graph,
    index: usize,
    function: SalFunction,
    args: &[ResolvedArg],
    outputs: &[OutputNode],
    paths: Vec<HighlightPath>,
) -> GraphFragment {
    let mut nodes: BTreeMap<String, FragmentNode> = BTreeMap::new();
    let mut edges: BTreeMap<String, FragmentEdge> = BTreeMap::new();
    let mut synthetic = 0usize;
    let mut link = |edges: &mut BTreeMap<String, FragmentEdge>, kind: &str, source: String, target: String| {
        let id = format!("syn:{index}:{synthetic:03}");
        synthetic += 1;
        edges.insert(id.clone(), FragmentEdge { id, kind: kind.to_owned(), source, target, synthetic: true });
    };

    let fn_id = format!("fn:{index}");
    nodes.insert(
        fn_id.clone(),
        FragmentNode {
            id: fn_id.clone(),
            kind: "function".into(),
            node_class: NodeClass::Function,
            label: function.name().into(),
            lemmas: Vec::new(),
            concept: None,
        },
    );

    for arg in args {
        let param_id = format!("param:{index}:{}", arg.slot.name());
        nodes.insert(
            param_id.clone(),
            FragmentNode {
                id: param_id.clone(),
                kind: "parameter".into(),
                node_class: NodeClass::Parameter,
                label: arg.slot.name().into(),
                lemmas: Vec::new(),
                concept: None,
            },
        );
        link(&mut edges, "argument", param_id.clone(), fn_id.clone());
        if let Some(lemma) = &arg.lemma {
            let utt_id = format!("utt:{index}:{}", arg.slot.name());
            nodes.insert(
                utt_id.clone(),
                FragmentNode {
                    id: utt_id.clone(),
                    kind: "utterance".into(),
                    node_class: NodeClass::Utterance,
                    label: lemma.clone(),
                    lemmas: Vec::new(),
                    concept: None,
                },
            );
            link(&mut edges, "utterance", utt_id, param_id.clone());
        }
        for id in &arg.ids {
            let node = graph.fragment_node(id, None);
            link(&mut edges, "resolves_to", param_id.clone(), node.id.clone());
            nodes.entry(node.id.clone()).or_insert(node);
        }
    }

    for path in &paths {
        for node in std::iter::once(&path.anchor).chain(path.steps.iter().map(|s| &s.to)) {
            let n = graph.fragment_node(node, None);
            nodes.entry(n.id.clone()).or_insert(n);
        }
        for step in &path.steps {
            if let Some(edge) = graph.edge(&step.edge) {
                let fe = FragmentEdge::from_edge(edge);
                edges.entry(fe.id.clone()).or_insert(fe);
            }
        }
    }

    for out in outputs {
        let node = graph.fragment_node(&out.id, Some(out.node_class));
        let id = node.id.clone();
        nodes.insert(id.clone(), node);
        link(&mut edges, "output", fn_id.clone(), id);
    }

    GraphFragment { nodes: nodes.into_values().collect(), edges: edges.into_values().collect(), paths }
}
