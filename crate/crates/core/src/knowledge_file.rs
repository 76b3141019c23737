//! JSON knowledge files: concepts with lemmas and parents, plus action
//! patterns. Saving is canonical (sorted IDs, fixed key order, no
//! tombstones) so that files round-trip byte-for-byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeKind, Graph, GraphCounts, GraphError, PatternRole};
use crate::ids::{ConceptId, EdgeId, NodeRef};

#[derive(Debug, Error)]
pub enum KnowledgeFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{field}` (line {line}, column {column}): {message}")]
    Parse { field: String, line: usize, column: usize, message: String },
    #[error("{context}: {source}")]
    Invalid {
        context: String,
        #[source]
        source: GraphError,
    },
}

// Field order is alphabetical so that plain struct serialization is canonical.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeFile {
    #[serde(default)]
    pub action_patterns: Vec<PatternEntry>,
    #[serde(default)]
    pub concepts: Vec<ConceptEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptEntry {
    pub id: ConceptId,
    pub lemmas: Vec<String>,
    #[serde(default)]
    pub parents: Vec<ConceptId>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternEntry {
    pub action: ConceptId,
    pub concept: ConceptId,
    pub id: EdgeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub role: PatternRole,
}

/// ID given to the is-a edge derived from a `parents` entry.
pub fn is_a_edge_id(child: &ConceptId, parent: &ConceptId) -> EdgeId {
    EdgeId::new(format!("isa:{child}:{parent}"))
}

pub fn load_knowledge(path: impl AsRef<Path>) -> Result<(Graph, GraphCounts), KnowledgeFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| KnowledgeFileError::Io { path: path.to_owned(), source })?;
    load_knowledge_str(&text)
}

pub fn load_knowledge_str(text: &str) -> Result<(Graph, GraphCounts), KnowledgeFileError> {
    let file = parse_knowledge(text)?;
    let graph = build_graph(&file)?;
    let counts = graph.counts();
    Ok((graph, counts))
}

pub fn parse_knowledge(text: &str) -> Result<KnowledgeFile, KnowledgeFileError> {
    if text.trim().is_empty() {
        return Ok(KnowledgeFile::default());
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        KnowledgeFileError::Parse {
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

pub fn build_graph(file: &KnowledgeFile) -> Result<Graph, KnowledgeFileError> {
    let mut graph = Graph::new();
    for c in &file.concepts {
        graph.add_concept(c.id.clone(), &c.lemmas).map_err(|source| KnowledgeFileError::Invalid {
            context: format!("concept {}", c.id),
            source,
        })?;
    }
    for c in &file.concepts {
        for p in &c.parents {
            graph.add_is_a(is_a_edge_id(&c.id, p), &c.id, p).map_err(|source| {
                KnowledgeFileError::Invalid { context: format!("parents of concept {}", c.id), source }
            })?;
        }
    }
    for p in &file.action_patterns {
        graph
            .add_action_pattern(p.id.clone(), &p.concept, &p.action, p.role, p.note.clone())
            .map_err(|source| KnowledgeFileError::Invalid {
                context: format!("action pattern {}", p.id),
                source,
            })?;
    }
    Ok(graph)
}

/// Extracts the knowledge part of `graph` (concepts, live is-a edges, live
/// action patterns) in canonical order. Instances are not part of the file.
pub fn to_knowledge_file(graph: &Graph) -> KnowledgeFile {
    let concepts = graph
        .concepts()
        .map(|c| {
            let mut parents: Vec<ConceptId> = graph
                .out_edges(&NodeRef::Concept(c.id.clone()))
                .filter(|e| e.kind == EdgeKind::IsA)
                .filter_map(|e| e.target.as_concept().cloned())
                .collect();
            parents.sort();
            ConceptEntry { id: c.id.clone(), lemmas: c.lemmas.clone(), parents }
        })
        .collect();
    let action_patterns = graph
        .live_edges()
        .filter_map(|e| match (e.kind, &e.source, &e.target) {
            (EdgeKind::ActionPattern(role), NodeRef::Concept(concept), NodeRef::Concept(action)) => {
                Some(PatternEntry {
                    action: action.clone(),
                    concept: concept.clone(),
                    id: e.id.clone(),
                    note: e.note.clone(),
                    role,
                })
            }
            _ => None,
        })
        .collect();
    KnowledgeFile { action_patterns, concepts }
}

pub fn to_canonical_string(graph: &Graph) -> String {
    let mut s = serde_json::to_string_pretty(&to_knowledge_file(graph))
        .expect("knowledge file serialization is infallible");
    s.push('\n');
    s
}

pub fn save_knowledge(graph: &Graph, path: impl AsRef<Path>) -> Result<(), KnowledgeFileError> {
    let path = path.as_ref();
    fs::write(path, to_canonical_string(graph))
        .map_err(|source| KnowledgeFileError::Io { path: path.to_owned(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_file_is_canonical() {
        let path = crate::test_support::repo_root().join("knowledge/seed.json");
        let text = fs::read_to_string(&path).unwrap();
        let (graph, counts) = load_knowledge(&path).unwrap();
        assert!(counts.concepts > 0);
        assert_eq!(to_canonical_string(&graph), text);
        let (again, _) = load_knowledge_str(&to_canonical_string(&graph)).unwrap();
        assert_eq!(to_canonical_string(&again), text);
    }

    #[test]
    fn empty_file_gives_empty_graph() {
        let (g, counts) = load_knowledge_str("").unwrap();
        assert_eq!(counts, GraphCounts::default());
        assert_eq!(g.concepts().count(), 0);
        let (_, counts) = load_knowledge_str("{}").unwrap();
        assert_eq!(counts, GraphCounts::default());
    }

    #[test]
    fn unknown_parent_is_named() {
        let text = r#"{"concepts": [{"id": "c_a", "lemmas": ["a"], "parents": ["c_ghost"]}]}"#;
        let err = load_knowledge_str(text).unwrap_err();
        assert!(err.to_string().contains("c_ghost"), "{err}");
    }

    #[test]
    fn pattern_with_unknown_concept_is_named() {
        let text = r#"{
            "concepts": [{"id": "c_drink", "lemmas": ["drink"]}],
            "action_patterns": [{"id": "e1", "action": "c_drink", "concept": "c_juice", "role": "object"}]
        }"#;
        let err = load_knowledge_str(text).unwrap_err();
        assert!(err.to_string().contains("c_juice"), "{err}");
    }

    #[test]
    fn parse_errors_carry_field_and_line() {
        let text = "{\n  \"concepts\": [\n    {\"id\": \"c_a\", \"lemmas\": 3}\n  ]\n}";
        match load_knowledge_str(text).unwrap_err() {
            KnowledgeFileError::Parse { field, line, .. } => {
                assert_eq!(field, "concepts[0].lemmas");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn cycles_are_rejected_with_the_cycle_named() {
        let text = r#"{"concepts": [
            {"id": "c_a", "lemmas": ["a"], "parents": ["c_b"]},
            {"id": "c_b", "lemmas": ["b"], "parents": ["c_c"]},
            {"id": "c_c", "lemmas": ["c"], "parents": ["c_a"]}
        ]}"#;
        let err = load_knowledge_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("is-a cycle"), "{msg}");
        for c in ["c_a", "c_b", "c_c"] {
            assert!(msg.contains(c), "{msg}");
        }
    }

    #[test]
    fn deleted_edges_are_dropped_on_save() {
        let text = r#"{
            "concepts": [{"id": "c_eat", "lemmas": ["eat"]}, {"id": "c_fork", "lemmas": ["fork"]}],
            "action_patterns": [{"id": "e_eat_fork", "action": "c_eat", "concept": "c_fork", "role": "object"}]
        }"#;
        let (mut g, _) = load_knowledge_str(text).unwrap();
        g.delete_edge(&EdgeId::new("e_eat_fork")).unwrap();
        let saved = to_canonical_string(&g);
        assert!(!saved.contains("e_eat_fork"));
    }
}
