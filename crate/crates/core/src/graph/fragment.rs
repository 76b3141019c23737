use serde::{Deserialize, Serialize};

use super::path::HighlightPath;
use super::Edge;
use crate::ids::ConceptId;

/// Display class of a node; the UI maps each class to one color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    /// The text the user typed (white).
    Utterance,
    /// A named argument slot of a function (green).
    Parameter,
    /// Abstract knowledge (yellow).
    Concept,
    /// A grounded instance (red).
    InstanceResult,
    /// An executed function (bar).
    Function,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragmentNode {
    pub id: String,
    /// `concept`, `instance`, `state`, or one of the trace-only kinds
    /// `utterance`, `parameter`, `function`.
    pub kind: String,
    pub node_class: NodeClass,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lemmas: Vec<String>,
    /// Concept of an instance node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<ConceptId>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FragmentEdge {
    pub id: String,
    pub kind: String,
    pub source: String,
    pub target: String,
    /// Trace-only links (utterance to parameter, parameter to concept) that
    /// are not stored in the graph.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

impl FragmentEdge {
    pub fn from_edge(edge: &Edge) -> Self {
        Self {
            id: edge.id.to_string(),
            kind: edge.kind.label().to_owned(),
            source: edge.source.to_string(),
            target: edge.target.to_string(),
            synthetic: false,
        }
    }
}

/// A self-contained excerpt of the graph, optionally with highlighted paths.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphFragment {
    pub nodes: Vec<FragmentNode>,
    pub edges: Vec<FragmentEdge>,
    #[serde(default)]
    pub paths: Vec<HighlightPath>,
}

impl GraphFragment {
    pub fn node(&self, id: &str) -> Option<&FragmentNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Every edge endpoint is a node of the fragment.
    pub fn is_self_contained(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.node(&e.source).is_some() && self.node(&e.target).is_some())
    }
}
