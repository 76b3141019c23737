//! Random knowledge/scene worlds and a brute-force query oracle.
//!
//! The oracle works on the generator's own edge lists and computes closures
//! by naive fixpoint iteration. It never calls graph queries, so agreement
//! with the reasoner is a real cross-check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ke_core::graph::{Graph, PatternRole, Relation};
use ke_core::sal::{Arg, ArgExpr, CallTree, SalErrorCode, SalFunction, SalOutput};
use ke_core::{ConceptId, EdgeId, InstanceId, NodeRef, Position};
use rand::seq::{IndexedRandom, IteratorRandom};
use rand::Rng;

pub const STATES: [&str; 4] = ["red", "open", "cold", "big"];

#[derive(Clone, Debug)]
pub struct Inst {
    pub id: String,
    pub concept: String,
    pub container: Option<String>,
    pub states: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct World {
    pub concepts: Vec<(String, Vec<String>)>,
    /// (edge, child, parent)
    pub isa: Vec<(String, String, String)>,
    /// (edge, concept, action)
    pub patterns: Vec<(String, String, String)>,
    pub instances: Vec<Inst>,
    pub deleted: BTreeSet<String>,
}

impl World {
    pub fn random(rng: &mut impl Rng, max_concepts: usize, max_instances: usize) -> World {
        let n = rng.random_range(2..=max_concepts);
        // a lemma pool smaller than the concept count produces homonyms
        let pool = (n * 3 / 4).max(1);
        let concepts: Vec<(String, Vec<String>)> = (0..n)
            .map(|i| {
                let k = rng.random_range(1..=2);
                let mut lemmas: Vec<String> = (0..k).map(|_| format!("w{}", rng.random_range(0..pool))).collect();
                lemmas.dedup();
                (format!("k{i}"), lemmas)
            })
            .collect();
        let mut isa = Vec::new();
        for child in 1..n {
            let parents = rng.random_range(0..=2);
            let mut chosen = BTreeSet::new();
            for _ in 0..parents {
                chosen.insert(rng.random_range(0..child));
            }
            for p in chosen {
                isa.push((format!("isa_{}", isa.len()), format!("k{child}"), format!("k{p}")));
            }
        }
        let mut patterns = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..rng.random_range(0..=n) {
            let c = rng.random_range(0..n);
            let a = rng.random_range(0..n);
            if seen.insert((c, a)) {
                patterns.push((format!("pat_{}", patterns.len()), format!("k{c}"), format!("k{a}")));
            }
        }
        let total = rng.random_range(1..=max_instances);
        let rooms = rng.random_range(1..=3usize.min(total));
        let mut instances: Vec<Inst> = Vec::new();
        for i in 0..total {
            let container = (i >= rooms).then(|| instances[rng.random_range(0..i)].id.clone());
            let states = STATES.iter().filter(|_| rng.random_bool(0.25)).map(|s| s.to_string()).collect();
            instances.push(Inst {
                id: format!("i{i}"),
                concept: format!("k{}", rng.random_range(0..n)),
                container,
                states,
            });
        }
        World { concepts, isa, patterns, instances, deleted: BTreeSet::new() }
    }

    pub fn build(&self) -> Graph {
        let mut g = Graph::new();
        for (id, lemmas) in &self.concepts {
            g.add_concept(ConceptId::new(id), lemmas).unwrap();
        }
        for (e, c, p) in &self.isa {
            g.add_is_a(EdgeId::new(e), &ConceptId::new(c), &ConceptId::new(p)).unwrap();
        }
        for (e, c, a) in &self.patterns {
            g.add_action_pattern(EdgeId::new(e), &ConceptId::new(c), &ConceptId::new(a), PatternRole::Object, None)
                .unwrap();
        }
        for inst in &self.instances {
            let container = inst.container.as_ref().map(InstanceId::new);
            g.add_instance(
                InstanceId::new(&inst.id),
                &ConceptId::new(&inst.concept),
                container.as_ref().map(|c| (c, Relation::In)),
                Position::default(),
            )
            .unwrap();
            for s in &inst.states {
                g.add_state(&InstanceId::new(&inst.id), s).unwrap();
            }
        }
        for e in &self.deleted {
            g.delete_edge(&EdgeId::new(e)).unwrap();
        }
        g
    }

    pub fn knowledge_edges(&self) -> Vec<String> {
        self.isa.iter().map(|e| &e.0).chain(self.patterns.iter().map(|e| &e.0)).cloned().collect()
    }

    pub fn live_knowledge_edges(&self) -> Vec<String> {
        self.knowledge_edges().into_iter().filter(|e| !self.deleted.contains(e)).collect()
    }

    // ------------------------------------------------------------ oracle

    fn live_isa(&self) -> impl Iterator<Item = &(String, String, String)> {
        self.isa.iter().filter(|e| !self.deleted.contains(&e.0))
    }

    fn live_patterns(&self) -> impl Iterator<Item = &(String, String, String)> {
        self.patterns.iter().filter(|e| !self.deleted.contains(&e.0))
    }

    /// Reflexive closure downward, by fixpoint.
    pub fn descendants(&self, roots: &BTreeSet<String>) -> BTreeSet<String> {
        let mut set = roots.clone();
        loop {
            let before = set.len();
            for (_, child, parent) in self.live_isa() {
                if set.contains(parent) {
                    set.insert(child.clone());
                }
            }
            if set.len() == before {
                return set;
            }
        }
    }

    pub fn ancestors(&self, c: &str) -> BTreeSet<String> {
        let mut set = BTreeSet::from([c.to_owned()]);
        loop {
            let before = set.len();
            for (_, child, parent) in self.live_isa() {
                if set.contains(child) {
                    set.insert(parent.clone());
                }
            }
            if set.len() == before {
                return set;
            }
        }
    }

    fn inst(&self, id: &str) -> &Inst {
        self.instances.iter().find(|i| i.id == id).unwrap()
    }

    /// Containers strictly above `id`.
    pub fn chain(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = self.inst(id).container.clone();
        while let Some(c) = cur {
            cur = self.inst(&c).container.clone();
            out.push(c);
        }
        out
    }

    fn lemma_concepts(&self, lemma: &str) -> BTreeSet<String> {
        self.concepts.iter().filter(|(_, ls)| ls.iter().any(|l| l == lemma)).map(|(id, _)| id.clone()).collect()
    }

    /// (concepts, instances) an argument denotes.
    fn denote(&self, arg: &QArg) -> Result<(BTreeSet<String>, BTreeSet<String>), SalErrorCode> {
        match arg {
            QArg::Lemma(l) => {
                let cs = self.lemma_concepts(l);
                if cs.is_empty() {
                    Err(SalErrorCode::UnresolvedLemma)
                } else {
                    Ok((cs, BTreeSet::new()))
                }
            }
            QArg::Concept(c) => Ok((BTreeSet::from([c.clone()]), BTreeSet::new())),
            QArg::Instances(is) => Ok((BTreeSet::new(), is.iter().cloned().collect())),
        }
    }

    pub fn objects(&self, q: &Query) -> Result<BTreeSet<String>, SalErrorCode> {
        if q.object.is_none() && q.action.is_none() && q.location.is_none() && q.state.is_none() {
            return Err(SalErrorCode::BadTree);
        }
        let object = q.object.as_ref().map(|a| self.denote(a)).transpose()?;
        let action = q.action.as_ref().map(|a| self.denote(a)).transpose()?;
        let location = q.location.as_ref().map(|a| self.denote(a)).transpose()?;
        let mut out = BTreeSet::new();
        for i in &self.instances {
            if let Some((cs, is)) = &object {
                if !self.descendants(cs).contains(&i.concept) && !is.contains(&i.id) {
                    continue;
                }
            }
            if let Some((acts, _)) = &action {
                let anc = self.ancestors(&i.concept);
                if !self.live_patterns().any(|(_, c, a)| anc.contains(c) && acts.contains(a)) {
                    continue;
                }
            }
            if let Some(tag) = &q.state {
                if !i.states.contains(tag) {
                    continue;
                }
            }
            if let Some((cs, is)) = &location {
                let desc = self.descendants(cs);
                let hit = self.chain(&i.id).iter().any(|c| is.contains(c) || desc.contains(&self.inst(c).concept));
                if !hit {
                    continue;
                }
            }
            out.insert(i.id.clone());
        }
        Ok(out)
    }

    pub fn locations(&self, q: &Query) -> Result<BTreeSet<String>, SalErrorCode> {
        Ok(self.objects(q)?.iter().flat_map(|i| self.chain(i)).collect())
    }

    pub fn actions(&self, q: &Query) -> Result<BTreeSet<String>, SalErrorCode> {
        if q.object.is_none() {
            return Err(SalErrorCode::BadTree);
        }
        let mut out = BTreeSet::new();
        for i in self.objects(q)? {
            let anc = self.ancestors(&self.inst(&i).concept);
            for (_, c, a) in self.live_patterns() {
                if anc.contains(c) {
                    out.insert(a.clone());
                }
            }
        }
        Ok(out)
    }

    /// Oracle answer for a (possibly nested) query, as sorted ID strings or
    /// a count.
    pub fn answer(&self, q: &OracleQuery) -> Result<Answer, SalErrorCode> {
        match q {
            OracleQuery::Flat(f, q) => self.flat(*f, q),
            OracleQuery::Nested { outer, outer_extra, inner_fn, inner } => {
                let inner_ids = match self.flat(*inner_fn, inner)? {
                    Answer::Ids(ids) => ids,
                    Answer::Count(_) => return Err(SalErrorCode::BadTree),
                };
                let mut q = outer_extra.clone();
                q.object = Some(QArg::Instances(inner_ids.into_iter().collect()));
                self.flat(*outer, &q)
            }
        }
    }

    fn flat(&self, f: SalFunction, q: &Query) -> Result<Answer, SalErrorCode> {
        Ok(match f {
            SalFunction::GetStmObjects => Answer::Ids(self.objects(q)?),
            SalFunction::GetStmLocations => Answer::Ids(self.locations(q)?),
            SalFunction::GetStmActions => Answer::Ids(self.actions(q)?),
            SalFunction::GetCount => Answer::Count(self.objects(q)?.len()),
        })
    }

    // ------------------------------------------------------------ queries

    fn random_arg(&self, rng: &mut impl Rng, allow_instances: bool) -> QArg {
        let roll = rng.random_range(0..100);
        if roll < 3 {
            QArg::Lemma("zz_unknown".into())
        } else if roll < 70 || !allow_instances {
            if roll < 55 {
                let (_, lemmas) = self.concepts.choose(rng).unwrap();
                QArg::Lemma(lemmas.choose(rng).unwrap().clone())
            } else {
                QArg::Concept(self.concepts.choose(rng).unwrap().0.clone())
            }
        } else {
            let k = rng.random_range(1..=3);
            QArg::Instances(self.instances.iter().map(|i| i.id.clone()).choose_multiple(rng, k).into_iter().collect())
        }
    }

    pub fn random_flat_query(&self, rng: &mut impl Rng, f: SalFunction) -> Query {
        let mut q = Query::default();
        if f == SalFunction::GetStmActions || rng.random_bool(0.7) {
            q.object = Some(self.random_arg(rng, true));
        }
        if rng.random_bool(0.35) {
            q.action = Some(self.random_arg(rng, false));
        }
        if rng.random_bool(0.3) {
            q.location = Some(self.random_arg(rng, true));
        }
        if rng.random_bool(0.3) {
            q.state = Some(STATES.choose(rng).unwrap().to_string());
        }
        if q.object.is_none() && q.action.is_none() && q.location.is_none() && q.state.is_none() && rng.random_bool(0.9) {
            q.object = Some(self.random_arg(rng, true));
        }
        q
    }

    pub fn random_query(&self, rng: &mut impl Rng) -> OracleQuery {
        let fns = [SalFunction::GetStmObjects, SalFunction::GetStmLocations, SalFunction::GetStmActions, SalFunction::GetCount];
        if rng.random_bool(0.25) {
            let outer = *[SalFunction::GetStmLocations, SalFunction::GetStmActions, SalFunction::GetCount, SalFunction::GetStmObjects]
                .choose(rng)
                .unwrap();
            let inner_fn = *[SalFunction::GetStmObjects, SalFunction::GetStmLocations].choose(rng).unwrap();
            let inner = self.random_flat_query(rng, inner_fn);
            let mut outer_extra = Query::default();
            if rng.random_bool(0.3) {
                outer_extra.state = Some(STATES.choose(rng).unwrap().to_string());
            }
            OracleQuery::Nested { outer, outer_extra, inner_fn, inner }
        } else {
            let f = *fns.choose(rng).unwrap();
            OracleQuery::Flat(f, self.random_flat_query(rng, f))
        }
    }
}

#[derive(Clone, Debug)]
pub enum QArg {
    Lemma(String),
    Concept(String),
    Instances(Vec<String>),
}

impl QArg {
    fn to_arg(&self) -> Arg {
        match self {
            QArg::Lemma(l) => Arg::Lemma(l.clone()),
            QArg::Concept(c) => Arg::Ids(vec![NodeRef::Concept(ConceptId::new(c))]),
            QArg::Instances(is) => Arg::Ids(is.iter().map(|i| NodeRef::Instance(InstanceId::new(i))).collect()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Query {
    pub object: Option<QArg>,
    pub action: Option<QArg>,
    pub location: Option<QArg>,
    pub state: Option<String>,
}

#[derive(Clone, Debug)]
pub enum OracleQuery {
    Flat(SalFunction, Query),
    Nested { outer: SalFunction, outer_extra: Query, inner_fn: SalFunction, inner: Query },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Ids(BTreeSet<String>),
    Count(usize),
}

impl Answer {
    pub fn from_output(out: &SalOutput) -> Answer {
        match out {
            SalOutput::Instances(s) => Answer::Ids(s.iter().map(|i| i.to_string()).collect()),
            SalOutput::Concepts(s) => Answer::Ids(s.iter().map(|c| c.to_string()).collect()),
            SalOutput::Count(n) => Answer::Count(*n),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Answer::Ids(s) => s.len(),
            Answer::Count(n) => *n,
        }
    }

    pub fn is_subset_of(&self, other: &Answer) -> bool {
        match (self, other) {
            (Answer::Ids(a), Answer::Ids(b)) => a.is_subset(b),
            (Answer::Count(a), Answer::Count(b)) => a <= b,
            _ => false,
        }
    }
}

fn flat_tree(f: SalFunction, q: &Query) -> CallTree {
    let mut t = CallTree::new(f);
    t.object = q.object.as_ref().map(|a| ArgExpr::Value(a.to_arg()));
    t.action = q.action.as_ref().map(|a| ArgExpr::Value(a.to_arg()));
    t.location = q.location.as_ref().map(|a| ArgExpr::Value(a.to_arg()));
    t.state = q.state.clone();
    t
}

impl OracleQuery {
    pub fn tree(&self) -> CallTree {
        match self {
            OracleQuery::Flat(f, q) => flat_tree(*f, q),
            OracleQuery::Nested { outer, outer_extra, inner_fn, inner } => {
                let mut t = flat_tree(*outer, outer_extra);
                t.object = Some(ArgExpr::Call(Box::new(flat_tree(*inner_fn, inner))));
                t
            }
        }
    }

    pub fn function(&self) -> SalFunction {
        match self {
            OracleQuery::Flat(f, _) => *f,
            OracleQuery::Nested { outer, .. } => *outer,
        }
    }
}

/// Outcome of checking one query against the oracle.
pub struct Checked {
    pub agreed: bool,
    pub detail: String,
    pub answer: Option<Answer>,
    pub soundness_issues: usize,
}

/// Runs `q` through the reasoner and the oracle and compares them. Trace
/// soundness is checked on successful evaluations.
pub fn check_query(world: &World, graph: &Graph, q: &OracleQuery) -> Checked {
    let expected = world.answer(q);
    let got = ke_core::sal::Reasoner::new(graph).eval(&q.tree());
    match (expected, got) {
        (Ok(want), Ok((out, trace))) => {
            let have = Answer::from_output(&out);
            let issues = trace.check_soundness(graph);
            let mut count_ok = true;
            if let (SalFunction::GetCount, Some(last)) = (q.function(), trace.calls.last()) {
                count_ok = last.outputs.len() == have.size();
            }
            Checked {
                agreed: want == have && count_ok,
                detail: format!("{}: oracle {want:?}, reasoner {have:?}", q.tree()),
                answer: Some(have),
                soundness_issues: issues.len(),
            }
        }
        (Err(code), Err(err)) => Checked {
            agreed: code == err.code,
            detail: format!("{}: oracle error {code:?}, reasoner error {:?}", q.tree(), err.code),
            answer: None,
            soundness_issues: 0,
        },
        (want, got) => Checked {
            agreed: false,
            detail: format!("{}: oracle {want:?}, reasoner {:?}", q.tree(), got.map(|(o, _)| o)),
            answer: None,
            soundness_issues: 0,
        },
    }
}

/// Deletes `k` random live knowledge edges from both the world and the
/// graph.
pub fn delete_random(world: &mut World, graph: &mut Graph, rng: &mut impl Rng, k: usize) -> Vec<String> {
    let picked: Vec<String> = world.live_knowledge_edges().into_iter().choose_multiple(rng, k);
    for e in &picked {
        graph.delete_edge(&EdgeId::new(e)).unwrap();
        world.deleted.insert(e.clone());
    }
    picked
}

pub fn counts(world: &World) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([("concepts", world.concepts.len()), ("instances", world.instances.len())])
}
