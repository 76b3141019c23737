//! Identifier newtypes shared by every layer of the engine.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Identifier of an abstract concept node.
    ConceptId
);
string_id!(
    /// Identifier of a grounded short-term-memory instance.
    InstanceId
);
string_id!(
    /// Identifier of an edge. Never reused within a graph.
    EdgeId
);

/// Prefix used when a state tag appears as a graph node.
pub const STATE_PREFIX: &str = "state:";

/// Any node of the knowledge graph.
///
/// Concepts and instances share one ID namespace (the loaders reject
/// collisions), state tags are addressed as `state:<tag>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Concept(ConceptId),
    Instance(InstanceId),
    State(String),
}

impl NodeRef {
    pub fn state(tag: impl Into<String>) -> Self {
        NodeRef::State(tag.into())
    }

    pub fn as_concept(&self) -> Option<&ConceptId> {
        match self {
            NodeRef::Concept(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_instance(&self) -> Option<&InstanceId> {
        match self {
            NodeRef::Instance(i) => Some(i),
            _ => None,
        }
    }

    /// Short kind label used in serialized fragments.
    pub fn kind(&self) -> &'static str {
        match self {
            NodeRef::Concept(_) => "concept",
            NodeRef::Instance(_) => "instance",
            NodeRef::State(_) => "state",
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Concept(c) => f.write_str(c.as_str()),
            NodeRef::Instance(i) => f.write_str(i.as_str()),
            NodeRef::State(tag) => write!(f, "{STATE_PREFIX}{tag}"),
        }
    }
}

impl From<ConceptId> for NodeRef {
    fn from(c: ConceptId) -> Self {
        NodeRef::Concept(c)
    }
}

impl From<InstanceId> for NodeRef {
    fn from(i: InstanceId) -> Self {
        NodeRef::Instance(i)
    }
}

// Serialized as `{"kind": "...", "id": "..."}` so that a reader does not need
// the graph to tell concepts and instances apart.
#[derive(Serialize, Deserialize)]
struct NodeRefRepr {
    kind: String,
    id: String,
}

impl Serialize for NodeRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let id = match self {
            NodeRef::Concept(c) => c.to_string(),
            NodeRef::Instance(i) => i.to_string(),
            NodeRef::State(tag) => tag.clone(),
        };
        NodeRefRepr {
            kind: self.kind().to_owned(),
            id,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NodeRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = NodeRefRepr::deserialize(deserializer)?;
        match repr.kind.as_str() {
            "concept" => Ok(NodeRef::Concept(ConceptId(repr.id))),
            "instance" => Ok(NodeRef::Instance(InstanceId(repr.id))),
            "state" => Ok(NodeRef::State(repr.id)),
            other => Err(serde::de::Error::custom(format!("unknown node kind `{other}`"))),
        }
    }
}

/// Lowercases and trims a lemma, collapsing inner whitespace runs.
pub fn normalize_lemma(lemma: &str) -> String {
    lemma
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
