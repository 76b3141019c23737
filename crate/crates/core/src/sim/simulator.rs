//! Discrete-time execution of agent actions.

use std::collections::{BTreeSet, VecDeque};

use super::action::AgentAction;
use super::event::{FailureCode, SimEvent, SimEventKind, StateChange};
use super::scene::SceneState;
use super::snapshot::SceneSnapshot;
use super::sync::sync_stm;
use crate::geometry::Position;
use crate::graph::{Graph, Relation};
use crate::ids::InstanceId;

/// Distance within which the agent can interact with an instance.
pub const REACH_RADIUS: f64 = 0.5;
/// Distance the agent covers per tick.
pub const STEP_LENGTH: f64 = 0.25;

#[derive(Clone, Debug)]
struct Queued {
    plan: u64,
    index: usize,
    action: AgentAction,
}

enum Progress {
    Running,
    Done,
    Failed(FailureCode, String),
}

/// Owns the scene and a FIFO of queued plans. Each tick advances the
/// current action by at most one step; state changes are mirrored into the
/// graph as they are emitted.
#[derive(Clone, Debug)]
pub struct Simulator {
    scene: SceneState,
    tick: u64,
    seq: u64,
    next_plan: u64,
    queue: VecDeque<Queued>,
    current: Option<Queued>,
}

impl Simulator {
    pub fn new(scene: SceneState) -> Self {
        Self { scene, tick: 0, seq: 0, next_plan: 1, queue: VecDeque::new(), current: None }
    }

    pub fn scene(&self) -> &SceneState {
        &self.scene
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    pub fn is_idle(&self) -> bool {
        self.current.is_none() && self.queue.is_empty()
    }

    pub fn snapshot(&self) -> SceneSnapshot {
        SceneSnapshot { tick: self.tick, last_seq: self.seq, scene: self.scene.clone() }
    }

    /// Queues a plan behind any running ones and returns its ID.
    pub fn enqueue(&mut self, actions: Vec<AgentAction>) -> u64 {
        let plan = self.next_plan;
        self.next_plan += 1;
        self.queue.extend(actions.into_iter().enumerate().map(|(index, action)| Queued { plan, index, action }));
        plan
    }

    /// Replaces the highlight set.
    pub fn highlight(&mut self, instances: Vec<InstanceId>, turn: Option<u64>) -> SimEvent {
        let instances: Vec<InstanceId> =
            instances.into_iter().filter(|i| self.scene.contains(i)).collect::<BTreeSet<_>>().into_iter().collect();
        self.scene.highlights = instances.iter().cloned().collect();
        self.next_event(SimEventKind::Highlight { instances, turn })
    }

    /// Runs one action to completion on an otherwise idle simulator.
    pub fn step(&mut self, action: AgentAction, graph: &mut Graph) -> Vec<SimEvent> {
        self.enqueue(vec![action]);
        self.run_until_idle(graph, u64::MAX)
    }

    pub fn run_until_idle(&mut self, graph: &mut Graph, max_ticks: u64) -> Vec<SimEvent> {
        let mut events = Vec::new();
        let mut ticks = 0;
        while !self.is_idle() && ticks < max_ticks {
            events.extend(self.tick(graph));
            ticks += 1;
        }
        events
    }

    pub fn tick(&mut self, graph: &mut Graph) -> Vec<SimEvent> {
        self.tick += 1;
        let mut out = Vec::new();
        if self.current.is_none() {
            let Some(next) = self.queue.pop_front() else { return out };
            self.emit(
                graph,
                &mut out,
                SimEventKind::ActionStarted { plan: next.plan, index: next.index, action: next.action.clone() },
            );
            self.current = Some(next);
        }
        let cur = self.current.clone().expect("an action is running");
        match self.advance(&cur.action, graph, &mut out) {
            Progress::Running => {}
            Progress::Done => {
                self.current = None;
                self.emit(
                    graph,
                    &mut out,
                    SimEventKind::ActionCompleted { plan: cur.plan, index: cur.index, action: cur.action },
                );
            }
            Progress::Failed(code, reason) => {
                self.current = None;
                self.queue.retain(|q| q.plan != cur.plan);
                self.emit(
                    graph,
                    &mut out,
                    SimEventKind::ActionFailed { plan: cur.plan, index: cur.index, action: cur.action, code, reason },
                );
            }
        }
        out
    }

    fn next_event(&mut self, kind: SimEventKind) -> SimEvent {
        self.seq += 1;
        SimEvent { seq: self.seq, tick: self.tick, kind }
    }

    /// Emits an event and mirrors it into the graph; a rejected mirror
    /// raises an alarm.
    fn emit(&mut self, graph: &mut Graph, out: &mut Vec<SimEvent>, kind: SimEventKind) {
        let event = self.next_event(kind);
        let result = sync_stm(&event, graph);
        out.push(event);
        if let Err(err) = result {
            let instance = match &out.last().expect("just pushed").kind {
                SimEventKind::PositionUpdate { instance, .. } | SimEventKind::StateChanged { instance, .. } => {
                    Some(instance.clone())
                }
                _ => None,
            };
            let alarm = self.next_event(SimEventKind::Alarm { message: format!("graph sync rejected: {err}"), instance });
            out.push(alarm);
        }
    }

    fn advance(&mut self, action: &AgentAction, graph: &mut Graph, out: &mut Vec<SimEvent>) -> Progress {
        match action {
            AgentAction::WalkTo { target } => self.walk_to(target, graph, out),
            AgentAction::Grab { object } => self.grab(object, graph, out),
            AgentAction::Put { object, target } => self.put(object, target, graph, out),
            AgentAction::Open { target } => self.toggle(target, "open", "closed", graph, out),
            AgentAction::Close { target } => self.toggle(target, "closed", "open", graph, out),
            AgentAction::SwitchOn { target } => self.toggle(target, "on", "off", graph, out),
            AgentAction::SwitchOff { target } => self.toggle(target, "off", "on", graph, out),
            AgentAction::LookAt { target } => {
                let Some(goal) = self.scene.position_of(target) else {
                    return unknown(target);
                };
                let heading = self.scene.agent.position.heading_to(&goal);
                self.turn_to(heading, graph, out);
                Progress::Done
            }
            AgentAction::Touch { target } => match self.require_reach(target) {
                Some(failure) => failure,
                None => Progress::Done,
            },
            AgentAction::WalkForward { distance } => {
                let a = &self.scene.agent;
                let to = Position::new(a.position.x + distance * a.heading.cos(), a.position.y + distance * a.heading.sin());
                if self.scene.rooms_at(&to).next().is_none() {
                    return Progress::Failed(FailureCode::Unreachable, "that would leave the floor plan".into());
                }
                self.move_agent(to, a.heading, graph, out);
                Progress::Done
            }
            AgentAction::Turn { degrees } => {
                let heading = self.scene.agent.heading + degrees.to_radians();
                self.turn_to(heading, graph, out);
                Progress::Done
            }
        }
    }

    fn walk_to(&mut self, target: &InstanceId, graph: &mut Graph, out: &mut Vec<SimEvent>) -> Progress {
        if target == &self.scene.agent.id {
            return Progress::Failed(FailureCode::InvalidTarget, "the agent cannot walk to itself".into());
        }
        let Some(goal) = self.scene.position_of(target) else {
            return unknown(target);
        };
        if self.scene.rooms_at(&goal).next().is_none() {
            return Progress::Failed(FailureCode::Unreachable, format!("{target} is outside every room"));
        }
        let here = self.scene.agent.position;
        if here.distance(&goal) <= REACH_RADIUS {
            return Progress::Done;
        }
        let next = here.step_toward(&goal, STEP_LENGTH);
        self.move_agent(next, here.heading_to(&goal), graph, out);
        if next.distance(&goal) <= REACH_RADIUS {
            Progress::Done
        } else {
            Progress::Running
        }
    }

    fn turn_to(&mut self, heading: f64, graph: &mut Graph, out: &mut Vec<SimEvent>) {
        self.scene.agent.heading = heading;
        let kind = SimEventKind::PositionUpdate {
            instance: self.scene.agent.id.clone(),
            position: self.scene.agent.position,
            heading: Some(heading),
        };
        self.emit(graph, out, kind);
    }

    /// Moves the agent with whatever it carries and tracks room changes.
    fn move_agent(&mut self, to: Position, heading: f64, graph: &mut Graph, out: &mut Vec<SimEvent>) {
        let agent_id = self.scene.agent.id.clone();
        self.scene.agent.position = to;
        self.scene.agent.heading = heading;
        self.emit(graph, out, SimEventKind::PositionUpdate { instance: agent_id.clone(), position: to, heading: Some(heading) });
        for carried in self.carried() {
            self.place(&carried, to, graph, out);
        }
        let current = self.scene.agent.room.clone();
        let still_inside = self.scene.room(&current).is_some_and(|r| r.rect.contains(&to));
        if !still_inside {
            let entered = self.scene.rooms_at(&to).next().map(|r| r.id.clone());
            if let Some(room) = entered {
                self.scene.agent.room = room.clone();
                let change = StateChange::Container { from: current, to: room, relation: Relation::In };
                self.emit(graph, out, SimEventKind::StateChanged { instance: agent_id, change });
            }
        }
    }

    /// The held object and everything inside it.
    fn carried(&self) -> Vec<InstanceId> {
        let mut result = Vec::new();
        let mut frontier: Vec<InstanceId> = self.scene.agent.held.iter().cloned().collect();
        while let Some(id) = frontier.pop() {
            frontier.extend(self.scene.objects.iter().filter(|(_, o)| o.container == id).map(|(k, _)| k.clone()));
            result.push(id);
        }
        result
    }

    fn place(&mut self, id: &InstanceId, position: Position, graph: &mut Graph, out: &mut Vec<SimEvent>) {
        if let Some(o) = self.scene.objects.get_mut(id) {
            if o.position != position {
                o.position = position;
                self.emit(graph, out, SimEventKind::PositionUpdate { instance: id.clone(), position, heading: None });
            }
        }
    }

    fn require_reach(&self, target: &InstanceId) -> Option<Progress> {
        let Some(p) = self.scene.position_of(target) else {
            return Some(unknown(target));
        };
        let d = self.scene.agent.position.distance(&p);
        (d > REACH_RADIUS).then(|| {
            Progress::Failed(FailureCode::OutOfReach, format!("{target} is out of reach ({d:.2} > {REACH_RADIUS})"))
        })
    }

    fn grab(&mut self, object: &InstanceId, graph: &mut Graph, out: &mut Vec<SimEvent>) -> Progress {
        let Some(o) = self.scene.objects.get(object) else {
            if self.scene.contains(object) {
                return Progress::Failed(FailureCode::NotGraspable, format!("{object} is not graspable"));
            }
            return unknown(object);
        };
        if let Some(held) = &self.scene.agent.held {
            return Progress::Failed(FailureCode::HandsFull, format!("already holding {held}"));
        }
        if !o.graspable {
            return Progress::Failed(FailureCode::NotGraspable, format!("{object} is not graspable"));
        }
        if let Some(failure) = self.require_reach(object) {
            return failure;
        }
        let agent = self.scene.agent.id.clone();
        let o = self.scene.objects.get_mut(object).expect("checked");
        let from = std::mem::replace(&mut o.container, agent.clone());
        o.relation = Relation::In;
        self.scene.agent.held = Some(object.clone());
        let change = StateChange::Container { from, to: agent, relation: Relation::In };
        self.emit(graph, out, SimEventKind::StateChanged { instance: object.clone(), change });
        let here = self.scene.agent.position;
        for carried in self.carried() {
            self.place(&carried, here, graph, out);
        }
        Progress::Done
    }

    fn put(&mut self, object: &InstanceId, target: &InstanceId, graph: &mut Graph, out: &mut Vec<SimEvent>) -> Progress {
        if self.scene.agent.held.as_ref() != Some(object) {
            return Progress::Failed(FailureCode::NotHeld, format!("not holding {object}"));
        }
        if !self.scene.contains(target) {
            return unknown(target);
        }
        if target == object || target == &self.scene.agent.id {
            return Progress::Failed(FailureCode::InvalidTarget, format!("cannot put {object} on {target}"));
        }
        let (position, relation) = if self.scene.is_room(target) {
            if &self.scene.agent.room != target {
                return Progress::Failed(FailureCode::OutOfReach, format!("the agent is not in {target}"));
            }
            (self.scene.agent.position, Relation::In)
        } else {
            let t = &self.scene.objects[target];
            if t.graspable || self.scene.room_of(target).is_none() {
                return Progress::Failed(FailureCode::InvalidTarget, format!("cannot put things on {target}"));
            }
            let relation = if t.openable() { Relation::In } else { Relation::On };
            let position = t.position;
            if let Some(failure) = self.require_reach(target) {
                return failure;
            }
            (position, relation)
        };
        let o = self.scene.objects.get_mut(object).expect("held objects exist");
        let from = std::mem::replace(&mut o.container, target.clone());
        o.relation = relation;
        self.scene.agent.held = None;
        let change = StateChange::Container { from, to: target.clone(), relation };
        self.emit(graph, out, SimEventKind::StateChanged { instance: object.clone(), change });
        let mut moved = vec![object.clone()];
        let mut i = 0;
        while i < moved.len() {
            let id = moved[i].clone();
            moved.extend(self.scene.objects.iter().filter(|(_, o)| o.container == id).map(|(k, _)| k.clone()));
            i += 1;
        }
        for id in moved {
            self.place(&id, position, graph, out);
        }
        Progress::Done
    }

    /// Sets `on_tag` and clears `off_tag`; used for open/close and
    /// switch on/off.
    fn toggle(&mut self, target: &InstanceId, on_tag: &str, off_tag: &str, graph: &mut Graph, out: &mut Vec<SimEvent>) -> Progress {
        let Some(o) = self.scene.objects.get(target) else {
            if self.scene.contains(target) {
                return Progress::Failed(FailureCode::InvalidTarget, format!("{target} cannot be changed that way"));
            }
            return unknown(target);
        };
        let openable = matches!(on_tag, "open" | "closed");
        if openable && !o.openable() {
            return Progress::Failed(FailureCode::NotOpenable, format!("{target} cannot be opened or closed"));
        }
        if !openable && !o.switchable() {
            return Progress::Failed(FailureCode::NotSwitchable, format!("{target} cannot be switched"));
        }
        if let Some(failure) = self.require_reach(target) {
            return failure;
        }
        let o = self.scene.objects.get_mut(target).expect("checked");
        let removed = o.states.remove(off_tag);
        let added = o.states.insert(on_tag.to_owned());
        if removed {
            let change = StateChange::StateRemoved { tag: off_tag.to_owned() };
            self.emit(graph, out, SimEventKind::StateChanged { instance: target.clone(), change });
        }
        if added {
            let change = StateChange::StateAdded { tag: on_tag.to_owned() };
            self.emit(graph, out, SimEventKind::StateChanged { instance: target.clone(), change });
        }
        Progress::Done
    }
}

fn unknown(id: &InstanceId) -> Progress {
    Progress::Failed(FailureCode::UnknownTarget, format!("unknown instance {id}"))
}
