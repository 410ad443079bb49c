//! Read-only knowledge graph loaded from a TSV triple file.
//!
//! One triple per line, `head<TAB>relation<TAB>tail`, UTF-8. Blank lines are
//! skipped; duplicate triples collapse. Labels are used verbatim as
//! embedding text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 3 tab-separated non-empty fields, found {found:?}")]
    Malformed { line: usize, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Triple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }

    fn is_valid(&self) -> bool {
        [&self.head, &self.relation, &self.tail]
            .iter()
            .all(|f| !f.is_empty() && !f.contains('\t') && !f.contains('\n'))
    }
}

impl fmt::Display for Triple {
    /// `('head', 'relation', 'tail')`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "('{}', '{}', '{}')", self.head, self.relation, self.tail)
    }
}

/// Edge direction relative to the entity being expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Outgoing,
    Incoming,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    triples: BTreeSet<Triple>,
    out_index: BTreeMap<String, BTreeSet<(String, String)>>,
    in_index: BTreeMap<String, BTreeSet<(String, String)>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Result<Self, LoadError> {
        let mut g = KnowledgeGraph::new();
        for (i, t) in triples.into_iter().enumerate() {
            if !t.is_valid() {
                return Err(LoadError::Malformed {
                    line: i + 1,
                    found: format!("{}\t{}\t{}", t.head, t.relation, t.tail),
                });
            }
            g.insert(t);
        }
        Ok(g)
    }

    fn insert(&mut self, t: Triple) {
        if self.triples.contains(&t) {
            return;
        }
        self.out_index
            .entry(t.head.clone())
            .or_default()
            .insert((t.relation.clone(), t.tail.clone()));
        self.in_index
            .entry(t.tail.clone())
            .or_default()
            .insert((t.relation.clone(), t.head.clone()));
        self.triples.insert(t);
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LoadError> {
        let mut g = KnowledgeGraph::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let malformed = || LoadError::Malformed {
                line: i + 1,
                found: line.to_string(),
            };
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(malformed());
            }
            g.insert(Triple::new(fields[0], fields[1], fields[2]));
        }
        Ok(g)
    }

    /// TSV serialization in sorted triple order; `parse` of the output
    /// reproduces the graph.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation, t.tail));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn has_entity(&self, e: &str) -> bool {
        self.out_index.contains_key(e) || self.in_index.contains_key(e)
    }

    pub fn out_edges(&self, e: &str) -> impl Iterator<Item = &(String, String)> {
        self.out_index.get(e).into_iter().flatten()
    }

    pub fn in_edges(&self, e: &str) -> impl Iterator<Item = &(String, String)> {
        self.in_index.get(e).into_iter().flatten()
    }

    /// Relations on edges incident to `e`, tagged by direction.
    pub fn relations_of(&self, e: &str) -> BTreeSet<(String, Direction)> {
        let outgoing = self.out_edges(e).map(|(r, _)| (r.clone(), Direction::Outgoing));
        let incoming = self.in_edges(e).map(|(r, _)| (r.clone(), Direction::Incoming));
        outgoing.chain(incoming).collect()
    }

    /// Tails of `e --r-->` edges (outgoing) or heads of `x --r--> e` edges
    /// (incoming).
    pub fn neighbors_of(&self, e: &str, relation: &str, dir: Direction) -> BTreeSet<String> {
        let edges = match dir {
            Direction::Outgoing => self.out_index.get(e),
            Direction::Incoming => self.in_index.get(e),
        };
        edges
            .into_iter()
            .flatten()
            .filter(|(r, _)| r == relation)
            .map(|(_, n)| n.clone())
            .collect()
    }
}
