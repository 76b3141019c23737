//! Knowledge engine for explainable robot reasoning.
//!
//! The crate holds the concept graph with grounded instances ([`graph`]),
//! the query layer that records a justification trace for every answer
//! ([`sal`]), the chat parser ([`parser`]), the household simulator
//! ([`sim`]) and the session engine tying them together ([`engine`]).

pub mod engine;
pub mod geometry;
pub mod graph;
pub mod ids;
pub mod knowledge_file;
pub mod parser;
pub mod sal;
pub mod sim;

pub use engine::{ChatTurn, Engine, EngineError, EventEnvelope, EventPayload, TurnKind};
pub use geometry::{Position, Rect};
pub use graph::{
    DeletionReceipt, Edge, EdgeKind, Graph, GraphCounts, GraphError, GraphFragment, NodeClass,
    PatternRole, Relation,
};
pub use ids::{ConceptId, EdgeId, InstanceId, NodeRef};
pub use sal::{Arg, ArgExpr, CallTree, Reasoner, SalArgs, SalError, SalFunction, SalOutput, Slot, Trace};
