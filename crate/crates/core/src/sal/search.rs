//! Shortest-justification search.
//!
//! Paths are ordered by length, then by their step sequence (edge IDs
//! first), then by anchor. The order is monotone under appending a step, so
//! a Dijkstra pass that keeps one best label per (node, phase) state finds
//! the minimum for every reachable state.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::graph::{Edge, PathStep};
use crate::ids::NodeRef;

/// Search state: a node plus a small phase counter that encodes where in a
/// multi-stage walk the search is.
pub(crate) type State = (NodeRef, u8);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Label {
    pub anchor: NodeRef,
    pub steps: Vec<PathStep>,
}

impl Label {
    pub fn empty(anchor: NodeRef) -> Self {
        Self { anchor, steps: Vec::new() }
    }

    pub fn extend(&self, edge: &Edge, from: &NodeRef, to: &NodeRef) -> Self {
        let mut steps = self.steps.clone();
        steps.push(PathStep { edge: edge.id.clone(), kind: edge.kind, from: from.clone(), to: to.clone() });
        Self { anchor: self.anchor.clone(), steps }
    }

    pub fn end(&self) -> &NodeRef {
        self.steps.last().map(|s| &s.to).unwrap_or(&self.anchor)
    }
}

type Key = (usize, Vec<PathStep>, NodeRef, State);

/// Runs the search from `sources`; `expand` lists the (edge, next state)
/// moves available from a settled state.
pub(crate) fn shortest_labels<'g, F>(sources: Vec<(State, Label)>, mut expand: F) -> BTreeMap<State, Label>
where
    F: FnMut(&State) -> Vec<(&'g Edge, State)>,
{
    let mut heap: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    for (state, label) in sources {
        heap.push(Reverse((label.steps.len(), label.steps, label.anchor, state)));
    }
    let mut settled: BTreeMap<State, Label> = BTreeMap::new();
    while let Some(Reverse((_, steps, anchor, state))) = heap.pop() {
        if settled.contains_key(&state) {
            continue;
        }
        let label = Label { anchor, steps };
        for (edge, next) in expand(&state) {
            if settled.contains_key(&next) {
                continue;
            }
            let extended = label.extend(edge, &state.0, &next.0);
            heap.push(Reverse((extended.steps.len(), extended.steps, extended.anchor, next)));
        }
        settled.insert(state, label);
    }
    settled
}
