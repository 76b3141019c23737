//! Grounding noun phrases in scene instances.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ObjectRef;
use crate::graph::Graph;
use crate::ids::{InstanceId, NodeRef};
use crate::sal::{Reasoner, SalFunction, SalOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// The room the candidate is in.
    Room,
    /// The candidate's own lemma, when rooms do not tell them apart.
    Lemma,
    /// The instance ID, as a last resort.
    Id,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: InstanceId,
    pub feature: String,
    pub feature_kind: FeatureKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "resolution", rename_all = "snake_case")]
pub enum Resolution {
    Unique { id: InstanceId },
    Ambiguous { candidates: Vec<Candidate> },
    None { reason: String },
}

/// Resolves a phrase through `get_stm_objects`. Several matches come back
/// with the feature that best tells them apart.
pub fn resolve_reference(r: &ObjectRef, graph: &Graph) -> Resolution {
    if let Some(id) = &r.resolved {
        return if graph.instance(id).is_some() {
            Resolution::Unique { id: id.clone() }
        } else {
            Resolution::None { reason: format!("{id} no longer exists") }
        };
    }
    let found = match Reasoner::new(graph).eval(&r.tree(SalFunction::GetStmObjects)) {
        Ok((SalOutput::Instances(found), _)) => found,
        Ok(_) => unreachable!("get_stm_objects yields instances"),
        Err(e) => return Resolution::None { reason: e.message },
    };
    match found.len() {
        0 => Resolution::None { reason: format!("I can't see any {}", r.text()) },
        1 => Resolution::Unique { id: found.into_iter().next().expect("one") },
        _ => Resolution::Ambiguous { candidates: distinguish(graph, &found) },
    }
}

fn distinguish(graph: &Graph, ids: &BTreeSet<InstanceId>) -> Vec<Candidate> {
    let attempts: [(FeatureKind, Box<dyn Fn(&InstanceId) -> String>); 2] = [
        (FeatureKind::Room, Box::new(|i| graph.display_lemma(&NodeRef::Instance(graph.room_of(i))))),
        (FeatureKind::Lemma, Box::new(|i| graph.display_lemma(&NodeRef::Instance(i.clone())))),
    ];
    for (kind, feature) in attempts {
        let features: Vec<String> = ids.iter().map(|i| feature(i)).collect();
        let distinct: BTreeSet<&String> = features.iter().collect();
        if distinct.len() == features.len() {
            let mut out: Vec<Candidate> = ids
                .iter()
                .zip(features)
                .map(|(id, feature)| Candidate { id: id.clone(), feature, feature_kind: kind })
                .collect();
            out.sort_by(|a, b| a.feature.cmp(&b.feature));
            return out;
        }
    }
    ids.iter()
        .map(|id| Candidate { id: id.clone(), feature: id.to_string(), feature_kind: FeatureKind::Id })
        .collect()
}

/// "Do you mean the table in the kitchen or the living room?"
pub fn render_clarification(lemma: &str, candidates: &[Candidate]) -> String {
    let kind = candidates.first().map_or(FeatureKind::Id, |c| c.feature_kind);
    let items: Vec<String> = candidates
        .iter()
        .map(|c| match kind {
            FeatureKind::Room | FeatureKind::Lemma => format!("the {}", c.feature),
            FeatureKind::Id => c.feature.clone(),
        })
        .collect();
    let list = match items.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} or {last}", init.join(", ")),
    };
    match kind {
        FeatureKind::Room => format!("Do you mean the {lemma} in {list}?"),
        FeatureKind::Lemma | FeatureKind::Id => format!("Do you mean {list}?"),
    }
}
