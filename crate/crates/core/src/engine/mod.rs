//! Sessions, chat turns, knowledge edits and the event stream over one
//! shared graph and scene.
//!
//! The engine is single-threaded; callers that share it serialize access
//! (the server wraps it in a lock), which makes the order in which methods
//! run the global mutation order.

mod events;
mod trace_text;

#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use events::{EventEnvelope, EventPayload, Mutation, Subscription, LOG_CAPACITY};
pub use trace_text::{render_path, render_trace};

use events::EventLog;

use crate::graph::{DeletionReceipt, Graph, GraphCounts, GraphError, GraphFragment};
use crate::ids::{EdgeId, InstanceId, NodeRef};
use crate::knowledge_file::{self, KnowledgeFileError};
use crate::parser::{
    resolve_reference, Candidate, Command, DialogueState, ObjectRef, ParseResult, Parser, QuestionKind, RefSlot,
    Resolution, Selection, Utterance,
};
use crate::sal::{Reasoner, SalOutput, Trace};
use crate::sim::{self, AgentAction, ResolvedCommand, SceneError, SceneSnapshot, SceneState, Simulator, Verb};

/// Largest neighborhood depth served.
pub const MAX_DEPTH: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct EngineError {
    pub code: String,
    pub message: String,
}

impl EngineError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_owned(), message: message.into() }
    }
}

impl From<GraphError> for EngineError {
    fn from(e: GraphError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Knowledge(#[from] KnowledgeFileError),
    #[error("{path}: {source}")]
    Scene { path: String, source: SceneError },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Question,
    Command,
    /// The engine asked which of several instances was meant.
    Clarification,
    Unparseable,
    /// The turn failed with a structured error.
    #[default]
    Error,
}

/// The motion queued for a command turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRef {
    pub plan_id: u64,
    pub command: ResolvedCommand,
    pub actions: Vec<AgentAction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    /// Global across sessions, so also increasing within each session.
    pub turn_id: u64,
    pub session_id: String,
    pub text: String,
    pub kind: TurnKind,
    /// One-line rendering of what was understood.
    pub parse: String,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EngineError>,
    /// `GET /api/trace/{turn_id}` serves the trace when set.
    pub has_trace: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SalOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Candidate>>,
    pub highlights: Vec<InstanceId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDescription {
    pub id: EdgeId,
    pub kind: String,
    pub source: NodeRef,
    pub source_lemma: String,
    pub target: NodeRef,
    pub target_lemma: String,
    pub deleted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DeleteOutcome {
    /// Nothing changed; repeat with confirmation to delete.
    Challenge { edge: EdgeDescription, prompt: String },
    Deleted { edge: EdgeDescription, receipt: DeletionReceipt, undo_token: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub counts: GraphCounts,
    pub tick: u64,
    pub last_seq: u64,
    pub sessions: usize,
    pub turns: usize,
}

#[derive(Clone, Debug, Default)]
struct Session {
    dialogue: DialogueState,
    turns: Vec<u64>,
}

struct StoredTurn {
    turn: ChatTurn,
    trace: Option<Trace>,
}

pub struct Engine {
    graph: Graph,
    sim: Simulator,
    parser: Parser,
    sessions: BTreeMap<String, Session>,
    turns: BTreeMap<u64, StoredTurn>,
    undo: BTreeMap<String, EdgeId>,
    next_session: u64,
    next_turn: u64,
    next_undo: u64,
    events: EventLog,
}

impl Engine {
    /// `graph` must already contain the scene's instances.
    pub fn new(graph: Graph, scene: SceneState) -> Self {
        let parser = Parser::from_graph(&graph);
        Self {
            graph,
            sim: Simulator::new(scene),
            parser,
            sessions: BTreeMap::new(),
            turns: BTreeMap::new(),
            undo: BTreeMap::new(),
            next_session: 1,
            next_turn: 1,
            next_undo: 1,
            events: EventLog::default(),
        }
    }

    pub fn load(knowledge: impl AsRef<Path>, scene: impl AsRef<Path>) -> Result<Self, LoadError> {
        let (mut graph, _) = knowledge_file::load_knowledge(knowledge)?;
        let scene_path = scene.as_ref();
        let scene = sim::load_scene(scene_path, &mut graph)
            .map_err(|source| LoadError::Scene { path: scene_path.display().to_string(), source })?;
        Ok(Self::new(graph, scene))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn scene(&self) -> SceneSnapshot {
        self.sim.snapshot()
    }

    pub fn is_idle(&self) -> bool {
        self.sim.is_idle()
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last_seq()
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            counts: self.graph.counts(),
            tick: self.sim.current_tick(),
            last_seq: self.events.last_seq(),
            sessions: self.sessions.len(),
            turns: self.turns.len(),
        }
    }

    /// Knowledge part of the graph in the canonical file format, deletions
    /// applied.
    pub fn knowledge_text(&self) -> String {
        knowledge_file::to_canonical_string(&self.graph)
    }

    pub fn save_knowledge(&self, path: impl AsRef<Path>) -> Result<(), KnowledgeFileError> {
        knowledge_file::save_knowledge(&self.graph, path)
    }

    // ------------------------------------------------------------ sessions

    pub fn create_session(&mut self) -> String {
        let id = format!("s{}", self.next_session);
        self.next_session += 1;
        self.sessions.insert(id.clone(), Session::default());
        id
    }

    pub fn has_session(&self, id: &str) -> bool {
        self.sessions.contains_key(id)
    }

    /// Turn IDs of a session, oldest first.
    pub fn history(&self, session: &str) -> Result<Vec<u64>, EngineError> {
        Ok(self.session(session)?.turns.clone())
    }

    pub fn dialogue(&self, session: &str) -> Result<&DialogueState, EngineError> {
        Ok(&self.session(session)?.dialogue)
    }

    fn session(&self, id: &str) -> Result<&Session, EngineError> {
        self.sessions.get(id).ok_or_else(|| EngineError::new("UNKNOWN_SESSION", format!("no session `{id}`")))
    }

    // ------------------------------------------------------------ chat

    /// Runs one chat turn. Only an unknown session is an `Err`; every other
    /// failure is recorded as a turn carrying an error.
    pub fn post_chat(&mut self, session: &str, text: &str) -> Result<ChatTurn, EngineError> {
        let mut dialogue = self.session(session)?.dialogue.clone();
        let turn_id = self.next_turn;
        self.next_turn += 1;
        let u = Utterance::new(text);
        let mut out = Outcome::default();
        if u.is_empty() {
            out.fail(TurnKind::Error, "empty message", EngineError::new("EMPTY_UTTERANCE", "the message is empty"));
        } else {
            let parsed = self.parser.parse_utterance(&u, &dialogue);
            match parsed {
                ParseResult::Question { kind, tree } => {
                    dialogue.pending = None;
                    out.parse = tree.to_string();
                    self.answer(kind, &tree, text, &mut out);
                }
                ParseResult::Command(cmd) => {
                    dialogue.pending = None;
                    out.parse = describe_command(&cmd);
                    self.command(cmd, &mut dialogue, &mut out);
                }
                ParseResult::ClarificationReply(selection) => self.clarified(selection, &mut dialogue, &mut out),
                ParseResult::Unparseable { reason, hint, .. } => {
                    out.kind = TurnKind::Unparseable;
                    out.parse = format!("unparseable: {reason}");
                    out.reply = format!("Sorry, I did not understand that ({reason}). Try: \"{hint}\".");
                }
            }
        }

        let turn = ChatTurn {
            turn_id,
            session_id: session.to_owned(),
            text: text.to_owned(),
            kind: out.kind,
            parse: out.parse,
            reply: out.reply,
            error: out.error,
            has_trace: out.trace.is_some(),
            result: out.result,
            plan: out.plan,
            candidates: out.candidates,
            highlights: out.highlights.into_iter().collect(),
        };
        let s = self.sessions.get_mut(session).expect("checked above");
        s.dialogue = dialogue;
        s.turns.push(turn_id);
        self.turns.insert(turn_id, StoredTurn { turn: turn.clone(), trace: out.trace });

        let highlight = self.sim.highlight(turn.highlights.clone(), Some(turn_id));
        self.events.publish(EventPayload::Sim { event: highlight });
        if turn.has_trace {
            self.events.publish(EventPayload::TraceReady { turn_id, session_id: session.to_owned() });
        }
        self.events.publish(EventPayload::ChatTurn { turn: Box::new(turn.clone()) });
        Ok(turn)
    }

    fn answer(&self, kind: QuestionKind, tree: &crate::sal::CallTree, text: &str, out: &mut Outcome) {
        match Reasoner::new(&self.graph).eval(tree) {
            Ok((result, mut trace)) => {
                trace.utterance = Some(text.to_owned());
                out.kind = TurnKind::Question;
                out.reply = match (&result, kind) {
                    (SalOutput::Count(n), _) => n.to_string(),
                    _ => reply_lemmas(&trace),
                };
                for call in &trace.calls {
                    out.highlights.extend(call.output_ids().filter_map(|n| n.as_instance().cloned()));
                }
                out.result = Some(result);
                out.trace = Some(trace);
            }
            Err(e) => {
                let reply = e.message.clone();
                out.fail(TurnKind::Error, &reply, EngineError::new(e.code.as_str(), e.message));
            }
        }
    }

    /// Resolves both references; asks when one is ambiguous, queues the
    /// plan when both are unique.
    fn command(&mut self, mut cmd: Command, dialogue: &mut DialogueState, out: &mut Outcome) {
        let mut ids = Vec::new();
        let slots: &[RefSlot] = if cmd.destination.is_some() { &[RefSlot::Object, RefSlot::Destination] } else { &[RefSlot::Object] };
        for &slot in slots {
            let r = slot_ref(&mut cmd, slot);
            match resolve_reference(r, &self.graph) {
                Resolution::Unique { id } => {
                    r.resolved = Some(id.clone());
                    ids.push(id);
                }
                Resolution::Ambiguous { candidates } => {
                    out.kind = TurnKind::Clarification;
                    out.highlights.extend(candidates.iter().map(|c| c.id.clone()));
                    out.candidates = Some(candidates.clone());
                    out.reply = dialogue.ask(cmd, slot, candidates);
                    return;
                }
                Resolution::None { reason } => {
                    out.fail(TurnKind::Error, &reason, EngineError::new("UNRESOLVED_REFERENCE", reason.clone()));
                    return;
                }
            }
        }
        let resolved = ResolvedCommand { verb: cmd.verb, object: ids[0].clone(), destination: ids.get(1).cloned() };
        let actions = sim::plan(&resolved);
        let plan_id = self.sim.enqueue(actions.clone());
        out.kind = TurnKind::Command;
        out.reply = self.acknowledge(&resolved);
        out.highlights.extend(ids);
        out.plan = Some(PlanRef { plan_id, command: resolved, actions });
    }

    fn clarified(&mut self, selection: Selection, dialogue: &mut DialogueState, out: &mut Outcome) {
        let question = dialogue.pending.as_ref().map(|p| p.question.clone()).unwrap_or_default();
        match selection {
            Selection::Chosen { id } => {
                let cmd = dialogue.resolve(&id).expect("a reply implies a pending clarification");
                out.parse = format!("{} (chose {id})", describe_command(&cmd));
                self.command(cmd, dialogue, out);
            }
            Selection::Ambiguous { ids } => {
                out.kind = TurnKind::Clarification;
                out.parse = "clarification reply matching several candidates".into();
                out.highlights.extend(ids);
                out.candidates = dialogue.pending.as_ref().map(|p| p.candidates.clone());
                out.reply = format!("That fits more than one. {question}");
            }
            Selection::NoMatch => {
                out.kind = TurnKind::Clarification;
                out.parse = "clarification reply matching no candidate".into();
                out.candidates = dialogue.pending.as_ref().map(|p| p.candidates.clone());
                out.reply = format!("Sorry, which one? {question}");
            }
        }
    }

    fn acknowledge(&self, c: &ResolvedCommand) -> String {
        let name = |id: &InstanceId| format!("the {} ({id})", self.graph.display_lemma(&NodeRef::Instance(id.clone())));
        let phrase = match c.verb {
            Verb::Go => "go to",
            Verb::Bring => "bring",
            Verb::Grab => "grab",
            Verb::Put => "put",
            Verb::Open => "open",
            Verb::Close => "close",
            Verb::SwitchOn => "switch on",
            Verb::SwitchOff => "switch off",
            Verb::LookAt => "look at",
        };
        match &c.destination {
            Some(d) => format!("OK, I will {phrase} {} to {}.", name(&c.object), name(d)),
            None => format!("OK, I will {phrase} {}.", name(&c.object)),
        }
    }

    pub fn turn(&self, turn_id: u64) -> Result<&ChatTurn, EngineError> {
        self.turns
            .get(&turn_id)
            .map(|t| &t.turn)
            .ok_or_else(|| EngineError::new("UNKNOWN_TURN", format!("no turn {turn_id}")))
    }

    pub fn trace(&self, turn_id: u64) -> Result<&Trace, EngineError> {
        let t = self.turns.get(&turn_id).ok_or_else(|| EngineError::new("UNKNOWN_TURN", format!("no turn {turn_id}")))?;
        t.trace.as_ref().ok_or_else(|| EngineError::new("NO_TRACE", format!("turn {turn_id} was not a question")))
    }

    // ------------------------------------------------------------ knowledge

    pub fn describe_edge(&self, id: &EdgeId) -> Result<EdgeDescription, EngineError> {
        let e = self.graph.edge(id).ok_or_else(|| GraphError::UnknownEdge(id.clone()))?;
        Ok(EdgeDescription {
            id: e.id.clone(),
            kind: e.kind.label().to_owned(),
            source_lemma: self.graph.display_lemma(&e.source),
            source: e.source.clone(),
            target_lemma: self.graph.display_lemma(&e.target),
            target: e.target.clone(),
            deleted: e.deleted,
        })
    }

    /// Without confirmation only describes the edge; with it, tombstones
    /// the edge and returns an undo token.
    pub fn delete_edge(&mut self, id: &EdgeId, confirm: bool) -> Result<DeleteOutcome, EngineError> {
        let edge = self.describe_edge(id)?;
        let e = self.graph.edge(id).expect("described above");
        if !e.kind.is_knowledge() {
            return Err(GraphError::Protected(id.clone(), e.kind).into());
        }
        if e.deleted {
            return Err(GraphError::AlreadyDeleted(id.clone()).into());
        }
        if !confirm {
            let prompt = format!(
                "Delete {} edge {} from {} ({}) to {} ({})?",
                edge.kind, edge.id, edge.source_lemma, edge.source, edge.target_lemma, edge.target
            );
            return Ok(DeleteOutcome::Challenge { edge, prompt });
        }
        let receipt = self.graph.delete_edge(id)?;
        let undo_token = format!("undo-{}", self.next_undo);
        self.next_undo += 1;
        self.undo.insert(undo_token.clone(), id.clone());
        let edge = self.describe_edge(id)?;
        self.events.publish(EventPayload::KnowledgeMutation {
            mutation: Mutation::Deleted { edge: edge.clone(), undo_token: undo_token.clone() },
        });
        Ok(DeleteOutcome::Deleted { edge, receipt, undo_token })
    }

    pub fn restore_edge(&mut self, id: &EdgeId) -> Result<EdgeDescription, EngineError> {
        self.graph.restore_edge(id)?;
        self.undo.retain(|_, e| e != id);
        let edge = self.describe_edge(id)?;
        self.events.publish(EventPayload::KnowledgeMutation { mutation: Mutation::Restored { edge: edge.clone() } });
        Ok(edge)
    }

    pub fn undo(&mut self, token: &str) -> Result<EdgeDescription, EngineError> {
        let id = self
            .undo
            .get(token)
            .cloned()
            .ok_or_else(|| EngineError::new("UNKNOWN_UNDO_TOKEN", format!("no pending deletion for `{token}`")))?;
        self.restore_edge(&id)
    }

    pub fn neighborhood(&self, node: &str, depth: usize) -> Result<GraphFragment, EngineError> {
        let n = self.graph.lookup_node(node).ok_or_else(|| GraphError::UnknownNode(node.to_owned()))?;
        Ok(self.graph.subgraph(&[n], depth.min(MAX_DEPTH))?)
    }

    // ------------------------------------------------------------ simulation

    /// Advances the simulator one tick and publishes its events.
    pub fn tick(&mut self) -> usize {
        let events = self.sim.tick(&mut self.graph);
        let n = events.len();
        for event in events {
            self.events.publish(EventPayload::Sim { event });
        }
        n
    }

    /// Ticks until no plan is left or `max_ticks` ticks ran; returns the
    /// number of ticks.
    pub fn run_until_idle(&mut self, max_ticks: u64) -> u64 {
        let mut n = 0;
        while !self.sim.is_idle() && n < max_ticks {
            self.tick();
            n += 1;
        }
        n
    }

    // ------------------------------------------------------------ events

    /// Registers a callback run on every published event, in order, while
    /// the caller holds the engine.
    pub fn add_listener(&mut self, f: impl Fn(&EventEnvelope) + Send + Sync + 'static) {
        self.events.add_listener(Box::new(f));
    }

    /// Starting point for a subscriber. With `from_seq` inside the retained
    /// log the missed events are replayed; otherwise a snapshot is sent.
    pub fn subscribe(&self, from_seq: Option<u64>) -> Subscription {
        let covered_seq = self.events.last_seq();
        if let Some(backlog) = from_seq.and_then(|s| self.events.since(s)) {
            return Subscription { snapshot: None, backlog, covered_seq };
        }
        let snapshot = EventEnvelope { seq: covered_seq, payload: EventPayload::Snapshot { scene: self.sim.snapshot() } };
        Subscription { snapshot: Some(snapshot), backlog: Vec::new(), covered_seq }
    }

    pub fn heartbeat(&self) -> EventEnvelope {
        EventEnvelope { seq: self.events.last_seq(), payload: EventPayload::Heartbeat }
    }
}

#[derive(Default)]
struct Outcome {
    kind: TurnKind,
    parse: String,
    reply: String,
    error: Option<EngineError>,
    result: Option<SalOutput>,
    trace: Option<Trace>,
    plan: Option<PlanRef>,
    candidates: Option<Vec<Candidate>>,
    highlights: BTreeSet<InstanceId>,
}

impl Outcome {
    fn fail(&mut self, kind: TurnKind, reply: &str, error: EngineError) {
        self.kind = kind;
        self.reply = reply.to_owned();
        self.error = Some(error);
    }
}

fn slot_ref(cmd: &mut Command, slot: RefSlot) -> &mut ObjectRef {
    match slot {
        RefSlot::Object => &mut cmd.object,
        RefSlot::Destination => cmd.destination.as_mut().expect("destination slot"),
    }
}

fn describe_command(c: &Command) -> String {
    match &c.destination {
        Some(d) => format!("{}({}, {})", c.verb.name(), c.object.text(), d.text()),
        None => format!("{}({})", c.verb.name(), c.object.text()),
    }
}

/// Display lemmas of the final outputs, in trace order.
pub fn reply_lemmas(trace: &Trace) -> String {
    let lemmas: Vec<&str> = trace.final_outputs().iter().map(|o| o.lemma.as_str()).collect();
    if lemmas.is_empty() {
        "nothing".to_owned()
    } else {
        lemmas.join(", ")
    }
}
