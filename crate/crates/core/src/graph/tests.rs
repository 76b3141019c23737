use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::test_support::seed_graph;

fn c(id: &str) -> ConceptId {
    ConceptId::new(id)
}

fn e(id: &str) -> EdgeId {
    EdgeId::new(id)
}

#[test]
fn resolve_lemma_normalizes() {
    let g = seed_graph();
    assert_eq!(g.resolve_lemma("drink"), BTreeSet::from([c("c_drink")]));
    assert_eq!(g.resolve_lemma("DRINK "), g.resolve_lemma("drink"));
    assert!(g.resolve_lemma("xyzzy").is_empty());
    assert_eq!(g.resolve_lemma("Dining  Table"), BTreeSet::from([c("c_dinner_table")]));
}

#[test]
fn homonyms_resolve_to_every_concept() {
    let mut g = Graph::new();
    g.add_concept(c("c_bank_river"), &["bank"]).unwrap();
    g.add_concept(c("c_bank_money"), &["bank", "lender"]).unwrap();
    assert_eq!(g.resolve_lemma("bank").len(), 2);
}

#[test]
fn seed_hierarchy_contains_the_food_chain() {
    let g = seed_graph();
    let d = g.descendants_of(&c("c_something")).unwrap();
    for id in ["c_something", "c_matter", "c_substance", "c_food", "c_foodstuff", "c_juice"] {
        assert!(d.contains(&c(id)), "missing {id}");
    }
    assert_eq!(g.descendants_of(&c("c_juice")).unwrap(), BTreeSet::from([c("c_juice")]));
    assert!(matches!(g.descendants_of(&c("c_nope")), Err(GraphError::UnknownConcept(_))));
}

#[test]
fn patterns_for_action_on_seed() {
    let g = seed_graph();
    let drink = g.patterns_for_action(&c("c_drink"), PatternRole::Object).unwrap();
    assert_eq!(
        drink,
        BTreeSet::from([(c("c_juice"), e("e_drink_juice")), (c("c_water"), e("e_drink_water"))])
    );
    let eat = g.patterns_for_action(&c("c_eat"), PatternRole::Object).unwrap();
    assert!(eat.contains(&(c("c_fork"), e("e_eat_fork"))));
    assert_eq!(g.edge(&e("e_eat_fork")).unwrap().note.as_deref(), Some("seeded-error"));
    assert!(g.patterns_for_action(&c("c_juice"), PatternRole::Object).unwrap().is_empty());
}

#[test]
fn delete_and_restore() {
    let mut g = seed_graph();
    let receipt = g.delete_edge(&e("e_eat_fork")).unwrap();
    assert_eq!(receipt.edge, e("e_eat_fork"));
    let eat = g.patterns_for_action(&c("c_eat"), PatternRole::Object).unwrap();
    assert!(!eat.iter().any(|(concept, _)| concept == &c("c_fork")));

    let before = format!("{:?}", g.edges().collect::<Vec<_>>());
    assert_eq!(g.delete_edge(&e("e_eat_fork")), Err(GraphError::AlreadyDeleted(e("e_eat_fork"))));
    assert_eq!(before, format!("{:?}", g.edges().collect::<Vec<_>>()));

    g.restore_edge(&e("e_eat_fork")).unwrap();
    assert_eq!(g.restore_edge(&e("e_eat_fork")), Err(GraphError::NotDeleted(e("e_eat_fork"))));
    assert!(g.patterns_for_action(&c("c_eat"), PatternRole::Object).unwrap().contains(&(c("c_fork"), e("e_eat_fork"))));
    assert!(matches!(g.delete_edge(&e("nope")), Err(GraphError::UnknownEdge(_))));
}

#[test]
fn scene_edges_are_protected() {
    let mut g = seed_graph();
    g.add_instance(InstanceId::new("k"), &c("c_kitchen"), None, Position::default()).unwrap();
    g.add_instance(InstanceId::new("j"), &c("c_juice"), Some((&InstanceId::new("k"), Relation::In)), Position::default())
        .unwrap();
    let (_, io) = g.concept_of(&InstanceId::new("j")).unwrap();
    assert!(matches!(g.delete_edge(&io), Err(GraphError::Protected(..))));
}

#[test]
fn is_a_cycles_rejected_at_mutation_including_tombstones() {
    let mut g = Graph::new();
    for id in ["a", "b", "x"] {
        g.add_concept(c(id), &[id]).unwrap();
    }
    g.add_is_a(e("ab"), &c("a"), &c("b")).unwrap();
    let err = g.add_is_a(e("ba"), &c("b"), &c("a")).unwrap_err();
    assert_eq!(err, GraphError::Cycle(vec![c("b"), c("a"), c("b")]));
    g.delete_edge(&e("ab")).unwrap();
    // a deleted edge still blocks, so a later restore cannot close a cycle
    assert!(matches!(g.add_is_a(e("ba"), &c("b"), &c("a")), Err(GraphError::Cycle(_))));
    assert!(matches!(g.add_is_a(e("aa"), &c("x"), &c("x")), Err(GraphError::Cycle(_))));
}

#[test]
fn subgraph_around_an_instance() {
    let mut g = seed_graph();
    let kitchen = InstanceId::new("kitchen");
    let fridge = InstanceId::new("fridge_1");
    let juice = InstanceId::new("juice_1");
    g.add_instance(kitchen.clone(), &c("c_kitchen"), None, Position::new(3.0, 2.5)).unwrap();
    g.add_instance(fridge.clone(), &c("c_fridge"), Some((&kitchen, Relation::In)), Position::new(1.0, 4.0))
        .unwrap();
    g.add_instance(juice.clone(), &c("c_juice"), Some((&fridge, Relation::In)), Position::new(1.0, 4.0))
        .unwrap();
    g.add_state(&juice, "cold").unwrap();

    let f = g.subgraph(&[NodeRef::Instance(juice.clone())], 1).unwrap();
    let ids: BTreeSet<&str> = f.nodes.iter().map(|n| n.id.as_str()).collect();
    assert_eq!(ids, BTreeSet::from(["juice_1", "c_juice", "fridge_1", "state:cold"]));
    assert_eq!(f.edges.len(), 3);
    assert!(f.is_self_contained());

    let f0 = g.subgraph(&[NodeRef::Instance(juice.clone())], 0).unwrap();
    assert_eq!(f0.nodes.len(), 1);
    assert!(f0.edges.is_empty());

    let f2 = g.subgraph(&[NodeRef::Instance(juice.clone())], 2).unwrap();
    assert!(f2.node("c_foodstuff").is_some());

    // depth beyond the diameter reaches the whole connected component
    let all = g.subgraph(&[NodeRef::Instance(juice)], 1000).unwrap();
    assert_eq!(all.edges.len(), g.live_edges().count());
    assert!(matches!(g.subgraph(&[NodeRef::Instance(InstanceId::new("zz"))], 1), Err(GraphError::UnknownNode(_))));
}

#[test]
fn subgraph_omits_deleted_edges() {
    let mut g = seed_graph();
    g.delete_edge(&e("e_eat_fork")).unwrap();
    let f = g.subgraph(&[NodeRef::Concept(c("c_fork"))], 3).unwrap();
    assert!(f.edges.iter().all(|edge| edge.id != "e_eat_fork"));
}

#[test]
fn move_instance_rewrites_the_single_containment_edge() {
    let mut g = seed_graph();
    let lr = InstanceId::new("living_room");
    let k = InstanceId::new("kitchen");
    let key = InstanceId::new("key_1");
    g.add_instance(lr.clone(), &c("c_living_room"), None, Position::default()).unwrap();
    g.add_instance(k.clone(), &c("c_kitchen"), None, Position::default()).unwrap();
    g.add_instance(key.clone(), &c("c_key"), Some((&lr, Relation::In)), Position::default()).unwrap();
    let instances = g.instances().count();

    let outcome = g.move_instance(&key, &k, Relation::In).unwrap();
    assert!(matches!(outcome, MoveOutcome::Moved { .. }));
    assert_eq!(g.containment_chain(&key).iter().map(|(i, _)| i.clone()).collect::<Vec<_>>(), vec![k.clone()]);
    assert_eq!(g.move_instance(&key, &k, Relation::In).unwrap(), MoveOutcome::NoOp);
    assert_eq!(g.instances().count(), instances);
    assert!(g.check_invariants().is_empty());
    assert!(matches!(g.move_instance(&k, &lr, Relation::In), Err(GraphError::InvalidMove { .. })));

    // removed IDs are never handed out again
    if let MoveOutcome::Moved { removed_edge: Some(old), .. } = outcome {
        g.move_instance(&key, &lr, Relation::In).unwrap();
        let (_, now, _) = g.container_of(&key).unwrap();
        assert_ne!(now, old);
    }
}

// ---------------------------------------------------------------- properties

/// A random DAG: concept `i` may only have parents with a smaller index.
fn arb_dag(max: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max).prop_flat_map(|n| {
        let edges = proptest::collection::vec((0..n, 0..n), 0..(n * 2));
        (Just(n), edges).prop_map(|(n, raw)| {
            let mut edges: Vec<(usize, usize)> = raw
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| if a > b { (a, b) } else { (b, a) })
                .collect();
            edges.sort();
            edges.dedup();
            (n, edges)
        })
    })
}

fn build_dag(n: usize, edges: &[(usize, usize)]) -> Graph {
    let mut g = Graph::new();
    for i in 0..n {
        g.add_concept(c(&format!("n{i}")), &[format!("l{i}")]).unwrap();
    }
    for (k, (child, parent)) in edges.iter().enumerate() {
        g.add_is_a(e(&format!("e{k}")), &c(&format!("n{child}")), &c(&format!("n{parent}"))).unwrap();
    }
    g
}

/// Naive reachability: repeatedly add children of anything already reached.
fn oracle_descendants(n: usize, edges: &[(usize, usize)], deleted: &BTreeSet<usize>, root: usize) -> BTreeSet<usize> {
    let mut reached = vec![false; n];
    reached[root] = true;
    loop {
        let mut changed = false;
        for (k, &(child, parent)) in edges.iter().enumerate() {
            if !deleted.contains(&k) && reached[parent] && !reached[child] {
                reached[child] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&i| reached[i]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn descendants_match_reachability_oracle((n, edges) in arb_dag(100), del in proptest::collection::vec(any::<prop::sample::Index>(), 0..5)) {
        let mut g = build_dag(n, &edges);
        let mut deleted = BTreeSet::new();
        if !edges.is_empty() {
            for ix in del {
                let k = ix.index(edges.len());
                if deleted.insert(k) {
                    g.delete_edge(&e(&format!("e{k}"))).unwrap();
                }
            }
        }
        for root in 0..n {
            let got: BTreeSet<usize> = g
                .descendants_of(&c(&format!("n{root}")))
                .unwrap()
                .iter()
                .map(|id| id.as_str()[1..].parse().unwrap())
                .collect();
            prop_assert_eq!(got, oracle_descendants(n, &edges, &deleted, root));
        }
    }

    #[test]
    fn delete_restore_round_trip_is_identity((n, edges) in arb_dag(40), picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..100)) {
        prop_assume!(!edges.is_empty());
        let pristine = build_dag(n, &edges);
        let mut g = pristine.clone();
        let snapshot = |g: &Graph| -> Vec<BTreeSet<ConceptId>> {
            (0..n).map(|i| g.descendants_of(&c(&format!("n{i}"))).unwrap()).collect()
        };
        let mut deleted = Vec::new();
        for ix in picks {
            let id = e(&format!("e{}", ix.index(edges.len())));
            if g.delete_edge(&id).is_ok() {
                deleted.push(id);
            }
        }
        for id in deleted {
            g.restore_edge(&id).unwrap();
        }
        prop_assert_eq!(snapshot(&g), snapshot(&pristine));
        prop_assert_eq!(crate::knowledge_file::to_canonical_string(&g), crate::knowledge_file::to_canonical_string(&pristine));
    }

    #[test]
    fn deleting_equals_never_adding((n, edges) in arb_dag(40), pick in any::<prop::sample::Index>()) {
        prop_assume!(!edges.is_empty());
        let k = pick.index(edges.len());
        let mut with_tombstone = build_dag(n, &edges);
        with_tombstone.delete_edge(&e(&format!("e{k}"))).unwrap();
        let mut without: Vec<(usize, usize)> = edges.clone();
        without.remove(k);
        let rebuilt = build_dag(n, &without);
        for i in 0..n {
            let id = c(&format!("n{i}"));
            prop_assert_eq!(with_tombstone.descendants_of(&id).unwrap(), rebuilt.descendants_of(&id).unwrap());
            prop_assert_eq!(with_tombstone.ancestors_of(&id).unwrap(), rebuilt.ancestors_of(&id).unwrap());
        }
    }
}
