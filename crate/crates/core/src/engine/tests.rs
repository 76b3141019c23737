use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use proptest::prelude::*;

use super::*;
use crate::graph::{EdgeKind, NodeClass};
use crate::sim::{SimEventKind, REACH_RADIUS};
use crate::test_support::lab;

fn engine() -> Engine {
    let (g, scene) = lab();
    Engine::new(g, scene)
}

fn id(s: &str) -> InstanceId {
    InstanceId::new(s)
}

fn words(reply: &str) -> BTreeSet<&str> {
    reply.split(", ").collect()
}

#[test]
fn drink_question_lists_three_locations_with_a_two_call_trace() {
    let mut e = engine();
    let s = e.create_session();
    let t = e.post_chat(&s, "where is something to drink?").unwrap();
    assert_eq!(t.kind, TurnKind::Question);
    assert_eq!(words(&t.reply), BTreeSet::from(["kitchen", "fridge", "dinner table"]));
    let trace = e.trace(t.turn_id).unwrap();
    assert_eq!(trace.calls.len(), 2);
    assert_eq!(reply_lemmas(trace), t.reply);
    assert!(trace.final_outputs().iter().all(|o| o.node_class == NodeClass::InstanceResult));
    assert!(trace.check_soundness(e.graph()).is_empty());
    for i in ["juice_1", "water_1", "kitchen", "fridge_1", "dinner_table_1"] {
        assert!(t.highlights.contains(&id(i)), "{i}");
    }
    assert_eq!(e.scene().scene.highlights, t.highlights.iter().cloned().collect());
}

#[test]
fn count_replies_with_a_number() {
    let mut e = engine();
    let s = e.create_session();
    assert_eq!(e.post_chat(&s, "how many tables are in the kitchen").unwrap().reply, "1");
    assert_eq!(e.post_chat(&s, "how many tables are there").unwrap().reply, "2");
    assert_eq!(e.post_chat(&s, "what is on the banana").unwrap().reply, "nothing");
}

#[test]
fn empty_and_failing_turns_are_recorded() {
    let mut e = engine();
    let s = e.create_session();
    let t = e.post_chat(&s, "   ").unwrap();
    assert_eq!(t.kind, TurnKind::Error);
    assert_eq!(t.error.as_ref().unwrap().code, "EMPTY_UTTERANCE");
    let u = e.post_chat(&s, "where is the unicorn").unwrap();
    assert_eq!(u.error.as_ref().unwrap().code, "UNRESOLVED_LEMMA");
    let v = e.post_chat(&s, "flibber the wug").unwrap();
    assert_eq!(v.kind, TurnKind::Unparseable);
    assert!(v.reply.contains("Try:"));
    assert_eq!(e.history(&s).unwrap(), vec![t.turn_id, u.turn_id, v.turn_id]);
    assert_eq!(e.trace(t.turn_id).unwrap_err().code, "NO_TRACE");
    assert_eq!(e.trace(999).unwrap_err().code, "UNKNOWN_TURN");
    assert_eq!(e.post_chat("nope", "hi").unwrap_err().code, "UNKNOWN_SESSION");
}

#[test]
fn ambiguous_table_is_clarified_then_driven_to() {
    let mut e = engine();
    let s = e.create_session();
    let t = e.post_chat(&s, "go to the table").unwrap();
    assert_eq!(t.kind, TurnKind::Clarification);
    assert_eq!(t.reply, "Do you mean the table in the kitchen or the living room?");
    assert!(t.plan.is_none());
    assert!(e.is_idle());

    let r = e.post_chat(&s, "the red one").unwrap();
    assert_eq!(r.kind, TurnKind::Clarification);
    assert!(r.reply.ends_with(&t.reply));

    let r = e.post_chat(&s, "kitchen").unwrap();
    assert_eq!(r.kind, TurnKind::Command);
    let plan = r.plan.unwrap();
    assert_eq!(plan.command.object, id("dinner_table_1"));
    assert!(e.dialogue(&s).unwrap().pending.is_none());
    e.run_until_idle(10_000);
    let scene = e.scene().scene;
    let table = scene.objects[&id("dinner_table_1")].position;
    assert!(scene.agent.position.distance(&table) <= REACH_RADIUS);
}

#[test]
fn sessions_keep_separate_clarifications() {
    let mut e = engine();
    let a = e.create_session();
    let b = e.create_session();
    e.post_chat(&a, "go to the table").unwrap();
    assert!(e.dialogue(&b).unwrap().pending.is_none());
    let t = e.post_chat(&b, "kitchen").unwrap();
    assert_eq!(t.kind, TurnKind::Unparseable, "{t:?}");
    let t = e.post_chat(&a, "living room").unwrap();
    assert_eq!(t.plan.unwrap().command.object, id("coffee_table_1"));
}

#[test]
fn a_question_drops_a_pending_clarification() {
    let mut e = engine();
    let s = e.create_session();
    e.post_chat(&s, "go to the table").unwrap();
    e.post_chat(&s, "where is the banana").unwrap();
    assert!(e.dialogue(&s).unwrap().pending.is_none());
}

#[test]
fn bring_the_key_keeps_one_key() {
    let mut e = engine();
    let s = e.create_session();
    let t = e.post_chat(&s, "bring the key to the kitchen").unwrap();
    assert_eq!(t.plan.as_ref().unwrap().actions.len(), 4);
    e.run_until_idle(10_000);
    assert_eq!(e.post_chat(&s, "where is the key").unwrap().reply, "kitchen");
    assert_eq!(e.post_chat(&s, "how many keys are there").unwrap().reply, "1");
    assert_eq!(e.post_chat(&s, "how many keys are in the kitchen").unwrap().reply, "1");
    assert!(e.scene().scene.check_against(e.graph()).is_empty());
}

#[test]
fn deleting_the_fork_pattern_and_undoing_it() {
    let mut e = engine();
    let s = e.create_session();
    let ask = |e: &mut Engine| {
        let t = e.post_chat(&s, "where is something to eat").unwrap();
        (t.reply.clone(), e.trace(t.turn_id).unwrap().clone())
    };
    let (before, before_trace) = ask(&mut e);
    let fork_edge = EdgeId::new("e_eat_fork");

    let mutations = e.graph().mutation_count();
    match e.delete_edge(&fork_edge, false).unwrap() {
        DeleteOutcome::Challenge { edge, prompt } => {
            assert!(edge.kind.starts_with("action_pattern"));
            assert_eq!((edge.source_lemma.as_str(), edge.target_lemma.as_str()), ("fork", "eat"));
            assert!(prompt.contains("e_eat_fork"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(e.graph().mutation_count(), mutations);

    let token = match e.delete_edge(&fork_edge, true).unwrap() {
        DeleteOutcome::Deleted { undo_token, .. } => undo_token,
        other => panic!("{other:?}"),
    };
    let (after, after_trace) = ask(&mut e);
    assert_ne!(before, after);
    let fork_out = |t: &Trace| t.calls[0].output_ids().any(|n| n == &NodeRef::Instance(id("fork_1")));
    assert!(fork_out(&before_trace) && !fork_out(&after_trace));
    assert!(after_trace.calls[0].output_ids().any(|n| n == &NodeRef::Instance(id("salmon_1"))));
    assert_eq!(e.delete_edge(&fork_edge, true).unwrap_err().code, "ALREADY_DELETED");
    assert_eq!(e.delete_edge(&fork_edge, false).unwrap_err().code, "ALREADY_DELETED");

    e.undo(&token).unwrap();
    let (restored, mut restored_trace) = ask(&mut e);
    assert_eq!(restored, before);
    restored_trace.utterance = before_trace.utterance.clone();
    assert_eq!(
        serde_json::to_string(&restored_trace).unwrap(),
        serde_json::to_string(&before_trace).unwrap()
    );
    assert_eq!(e.undo(&token).unwrap_err().code, "UNKNOWN_UNDO_TOKEN");
}

#[test]
fn delete_edge_errors() {
    let mut e = engine();
    assert_eq!(e.delete_edge(&EdgeId::new("e_nope"), true).unwrap_err().code, "UNKNOWN_EDGE");
    let stm = e.graph().edges().find(|x| x.kind == EdgeKind::InstanceOf).unwrap().id.clone();
    assert_eq!(e.delete_edge(&stm, false).unwrap_err().code, "PROTECTED_EDGE");
    assert_eq!(e.restore_edge(&EdgeId::new("e_eat_fork")).unwrap_err().code, "NOT_DELETED");
}

#[test]
fn neighborhoods() {
    let mut e = engine();
    let f = e.neighborhood("juice_1", 2).unwrap();
    assert!(f.node("c_juice").is_some());
    assert!(f.node("c_foodstuff").is_some());
    let single = e.neighborhood("juice_1", 0).unwrap();
    assert_eq!(single.nodes.len(), 1);
    assert!(single.edges.is_empty());
    assert_eq!(e.neighborhood("nothing_here", 1).unwrap_err().code, "UNKNOWN_ID");
    e.delete_edge(&EdgeId::new("e_eat_fork"), true).unwrap();
    let f = e.neighborhood("c_fork", 3).unwrap();
    assert!(f.edges.iter().all(|x| x.id.as_str() != "e_eat_fork"));
    assert!(f.is_self_contained());
}

#[test]
fn saved_knowledge_drops_deleted_edges() {
    let mut e = engine();
    assert!(e.knowledge_text().contains("e_eat_fork"));
    e.delete_edge(&EdgeId::new("e_eat_fork"), true).unwrap();
    assert!(!e.knowledge_text().contains("\"e_eat_fork\""));
}

#[test]
fn compact_trace_names_functions_lemmas_and_ids() {
    let mut e = engine();
    let s = e.create_session();
    let t = e.post_chat(&s, "where is the banana").unwrap();
    let text = render_trace(e.trace(t.turn_id).unwrap());
    let headers: Vec<&str> = text.lines().filter(|l| l.starts_with('#')).collect();
    assert_eq!(headers, ["#0 get_stm_objects @root.object", "#1 get_stm_locations @root"]);
    assert!(text.contains("object: \"banana\" -> banana [c_banana]"));
    assert!(text.contains("=> banana [banana_1]"));
    assert!(text.contains("path object banana_1: c_banana"));
    assert!(text.contains("coffee table [coffee_table_1]"));
}

#[test]
fn events_carry_increasing_sequence_numbers() {
    let mut e = engine();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let sink = seen.clone();
    e.add_listener(move |env| sink.lock().unwrap().push(env.clone()));
    let s = e.create_session();
    e.post_chat(&s, "bring the key to the kitchen").unwrap();
    e.run_until_idle(10_000);
    e.post_chat(&s, "where is the key").unwrap();
    e.delete_edge(&EdgeId::new("e_eat_fork"), true).unwrap();
    let seen = seen.lock().unwrap();
    assert!(seen.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    assert_eq!(seen.last().unwrap().seq, e.last_seq());
    let positions: Vec<u64> = seen
        .iter()
        .filter_map(|env| match &env.payload {
            EventPayload::Sim { event } if matches!(event.kind, SimEventKind::PositionUpdate { .. }) => Some(event.seq),
            _ => None,
        })
        .collect();
    assert!(positions.len() > 5);
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
    assert!(seen.iter().any(|env| matches!(env.payload, EventPayload::TraceReady { .. })));
    assert!(seen.iter().any(|env| matches!(env.payload, EventPayload::KnowledgeMutation { .. })));
    let json = serde_json::to_value(&seen[0]).unwrap();
    assert_eq!(json["kind"], "sim");
    assert_eq!(e.heartbeat().seq, e.last_seq());
}

#[test]
fn resuming_replays_missed_events() {
    let mut e = engine();
    let s = e.create_session();
    e.post_chat(&s, "go to the fridge").unwrap();
    e.run_until_idle(5);
    let mark = e.last_seq();
    e.run_until_idle(10_000);
    let sub = e.subscribe(Some(mark));
    assert!(sub.snapshot.is_none());
    assert_eq!(sub.backlog.first().unwrap().seq, mark + 1);
    assert_eq!(sub.backlog.last().unwrap().seq, sub.covered_seq);
    let fresh = e.subscribe(None);
    assert!(fresh.snapshot.is_some() && fresh.backlog.is_empty());
    assert!(e.subscribe(Some(e.last_seq() + 10)).snapshot.is_some());
}

fn apply_all(mut snap: SceneSnapshot, events: &[EventEnvelope]) -> SceneSnapshot {
    for env in events {
        if let EventPayload::Sim { event } = &env.payload {
            snap.apply(event);
        }
    }
    snap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn late_subscribers_reconstruct_the_scene(
        commands in prop::collection::vec(prop::sample::select(vec![
            "bring the key to the kitchen", "go to the fridge", "bring the banana to the dinner table",
            "go to the coffee table", "grab the apple", "put the apple on the coffee table", "open the fridge",
            "bring something to drink to the living room", "where is the key",
        ]), 1..6),
        join_at in 0usize..400,
    ) {
        let mut e = engine();
        let log = Arc::new(Mutex::new(Vec::new()));
        let sink = log.clone();
        e.add_listener(move |env| sink.lock().unwrap().push(env.clone()));
        let start = e.subscribe(None).snapshot.unwrap();
        let EventPayload::Snapshot { scene: start_scene } = start.payload else { unreachable!() };

        let s = e.create_session();
        let mut late = None;
        let mut steps = 0;
        for c in &commands {
            e.post_chat(&s, c).unwrap();
            while !e.is_idle() {
                if steps == join_at {
                    late = Some(e.subscribe(None));
                }
                e.tick();
                steps += 1;
            }
        }
        let late = late.unwrap_or_else(|| e.subscribe(None));
        let log = log.lock().unwrap();
        let from_start = apply_all(start_scene, &log);
        let EventPayload::Snapshot { scene: late_scene } = late.snapshot.unwrap().payload else { unreachable!() };
        let after: Vec<EventEnvelope> = log.iter().filter(|env| env.seq > late.covered_seq).cloned().collect();
        let from_late = apply_all(late_scene, &after);
        prop_assert_eq!(&from_start, &from_late);
        prop_assert_eq!(&from_start, &e.scene());
    }
}
