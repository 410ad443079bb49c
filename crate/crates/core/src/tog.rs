//! Subgraph retrieval by beam search over the knowledge graph, pruned with
//! question/label embedding similarity instead of generator calls.
//!
//! Each iteration runs two selections over a shared, global pool:
//!
//! 1. relation expansion: every `(path, relation, direction)` at a live
//!    path's frontier is scored by `cos(question, relation)`; the top
//!    `width` survive;
//! 2. entity expansion: each surviving pair is extended to every neighbor
//!    not already on the path, scored by `cos(question, entity)`. Extended
//!    paths and frozen paths (no possible extension) are ranked by path
//!    score and the top `width` form the next beam.
//!
//! There is no early stop: the search runs `depth` iterations or until no
//! path can be extended. Path score is the mean of every relation and
//! entity score along the path. Ties fall back to the lexicographic order
//! of the `(relation, direction, entity)` label sequence.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::gateway::{Capability, Gateway, GatewayError, GatewayResult};
use crate::kg::{Direction, KnowledgeGraph, Triple};
use crate::scalar::{cosine, mean, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionPolicy {
    OutgoingOnly,
    Both,
}

impl DirectionPolicy {
    fn allows(self, d: Direction) -> bool {
        matches!(self, DirectionPolicy::Both) || d == Direction::Outgoing
    }
}

impl std::str::FromStr for DirectionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(DirectionPolicy::Both),
            "outgoing-only" | "outgoing" => Ok(DirectionPolicy::OutgoingOnly),
            _ => Err(format!(
                "unknown direction policy {s:?}; expected both or outgoing-only"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub width: usize,
    pub depth: usize,
    pub direction_policy: DirectionPolicy,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            width: 3,
            depth: 3,
            direction_policy: DirectionPolicy::Both,
        }
    }
}

impl BeamConfig {
    pub fn new(width: usize, depth: usize) -> crate::Result<Self> {
        let cfg = BeamConfig {
            width,
            depth,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_policy(mut self, policy: DirectionPolicy) -> Self {
        self.direction_policy = policy;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.width == 0 || self.depth == 0 {
            return Err(crate::Error::Config("beam width and depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// One traversed edge. `triple` keeps the stored orientation; `direction`
/// says whether it was walked head→tail or tail→head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub triple: Triple,
    pub direction: Direction,
}

impl Hop {
    pub fn source(&self) -> &str {
        match self.direction {
            Direction::Outgoing => &self.triple.head,
            Direction::Incoming => &self.triple.tail,
        }
    }

    pub fn target(&self) -> &str {
        match self.direction {
            Direction::Outgoing => &self.triple.tail,
            Direction::Incoming => &self.triple.head,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopScore<S> {
    pub relation: S,
    pub entity: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningPath<S> {
    pub topic: String,
    pub hops: Vec<Hop>,
    pub hop_scores: Vec<HopScore<S>>,
    pub score: S,
}

impl<S: Scalar> ReasoningPath<S> {
    pub fn seed(topic: impl Into<String>) -> Self {
        ReasoningPath {
            topic: topic.into(),
            hops: Vec::new(),
            hop_scores: Vec::new(),
            score: S::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn frontier(&self) -> &str {
        self.hops.last().map_or(self.topic.as_str(), Hop::target)
    }

    pub fn visits(&self, entity: &str) -> bool {
        self.topic == entity || self.hops.iter().any(|h| h.target() == entity)
    }

    /// Mean of all relation and entity scores; zero for an empty path.
    pub fn aggregate_score(&self) -> S {
        let all: Vec<S> = self.hop_scores.iter().flat_map(|h| [h.relation, h.entity]).collect();
        mean(&all)
    }

    pub fn extend(&self, hop: Hop, scores: HopScore<S>) -> Self {
        let mut p = self.clone();
        p.hops.push(hop);
        p.hop_scores.push(scores);
        p.score = p.aggregate_score();
        p
    }

    /// Contiguous, scored per hop, and with a score matching its hops.
    pub fn is_well_formed(&self) -> bool {
        let mut at = self.topic.as_str();
        for h in &self.hops {
            if h.source() != at {
                return false;
            }
            at = h.target();
        }
        self.hop_scores.len() == self.hops.len() && self.score == self.aggregate_score()
    }

    pub fn tie_key(&self) -> (Vec<(&str, Direction, &str)>, &str) {
        let hops = self
            .hops
            .iter()
            .map(|h| (h.triple.relation.as_str(), h.direction, h.target()))
            .collect();
        (hops, self.topic.as_str())
    }
}

/// Beam-search result: either scored paths, or the distinct outcome that
/// none of the topic entities exists in the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "paths", rename_all = "snake_case")]
pub enum KgRetrieval<S> {
    Paths(Vec<ReasoningPath<S>>),
    NoSubgraph,
}

impl<S: Scalar> KgRetrieval<S> {
    pub fn paths(&self) -> &[ReasoningPath<S>] {
        match self {
            KgRetrieval::Paths(p) => p,
            KgRetrieval::NoSubgraph => &[],
        }
    }
}

/// Descending by score, then ascending by label sequence.
pub fn rank_paths<S: Scalar>(a: &ReasoningPath<S>, b: &ReasoningPath<S>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tie_key().cmp(&b.tie_key()))
}

/// Cosine between the question and each label, computed in one embedding call.
pub fn score_candidates<S: Scalar>(gateway: &Gateway, question: &str, labels: &[String]) -> GatewayResult<Vec<S>> {
    if labels.is_empty() {
        return Err(GatewayError::precondition(
            Capability::Embed,
            "labels must be non-empty",
        ));
    }
    let mut texts = Vec::with_capacity(labels.len() + 1);
    texts.push(question.to_string());
    texts.extend(labels.iter().cloned());
    let vecs = gateway.embed(&texts)?;
    let q = to_scalar::<S>(vecs[0].as_slice());
    Ok(vecs[1..]
        .iter()
        .map(|v| cosine(&q, &to_scalar::<S>(v.as_slice())))
        .collect())
}

fn to_scalar<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| S::from_real(x)).collect()
}

/// Label → question cosine, embedding each distinct label once per search.
struct LabelScores<'a, S> {
    gateway: &'a Gateway,
    question: Vec<S>,
    cache: HashMap<String, S>,
}

impl<'a, S: Scalar> LabelScores<'a, S> {
    fn new(gateway: &'a Gateway, question: &str) -> GatewayResult<Self> {
        let q = gateway.embed(&[question.to_string()])?;
        Ok(LabelScores {
            gateway,
            question: to_scalar(q[0].as_slice()),
            cache: HashMap::new(),
        })
    }

    fn prepare<'l>(&mut self, labels: impl IntoIterator<Item = &'l str>) -> GatewayResult<()> {
        let missing: BTreeSet<&str> = labels.into_iter().filter(|l| !self.cache.contains_key(*l)).collect();
        if missing.is_empty() {
            return Ok(());
        }
        let texts: Vec<String> = missing.iter().map(|s| s.to_string()).collect();
        let vecs = self.gateway.embed(&texts)?;
        for (label, v) in texts.into_iter().zip(vecs) {
            let s = cosine(&self.question, &to_scalar::<S>(v.as_slice()));
            self.cache.insert(label, s);
        }
        Ok(())
    }

    fn get(&self, label: &str) -> S {
        self.cache[label]
    }
}

struct RelationCandidate<S> {
    parent: usize,
    relation: String,
    direction: Direction,
    score: S,
}

fn live_relations<S: Scalar>(
    g: &KnowledgeGraph,
    path: &ReasoningPath<S>,
    policy: DirectionPolicy,
) -> Vec<(String, Direction)> {
    let at = path.frontier();
    g.relations_of(at)
        .into_iter()
        .filter(|(r, d)| policy.allows(*d) && g.neighbors_of(at, r, *d).iter().any(|n| !path.visits(n)))
        .collect()
}

fn edge(at: &str, relation: &str, direction: Direction, neighbor: &str) -> Triple {
    match direction {
        Direction::Outgoing => Triple::new(at, relation, neighbor),
        Direction::Incoming => Triple::new(neighbor, relation, at),
    }
}

/// Runs the pruned beam search from `topic_entities`. Paths never revisit an
/// entity. The returned paths are sorted by [`rank_paths`].
pub fn beam_search<S: Scalar>(
    g: &KnowledgeGraph,
    gateway: &Gateway,
    question: &str,
    topic_entities: &[String],
    cfg: &BeamConfig,
) -> crate::Result<KgRetrieval<S>> {
    cfg.validate()?;
    let mut seen = BTreeSet::new();
    let mut beam: Vec<ReasoningPath<S>> = topic_entities
        .iter()
        .filter(|e| g.has_entity(e) && seen.insert(e.as_str()))
        .map(ReasoningPath::seed)
        .collect();
    if beam.is_empty() {
        return Ok(KgRetrieval::NoSubgraph);
    }
    beam.sort_by(rank_paths);
    let mut scores = LabelScores::<S>::new(gateway, question)?;

    for _ in 0..cfg.depth {
        let mut frozen = Vec::new();
        let mut rel_cands: Vec<(usize, String, Direction)> = Vec::new();
        for (i, path) in beam.iter().enumerate() {
            let rels = live_relations(g, path, cfg.direction_policy);
            if rels.is_empty() {
                frozen.push(i);
            }
            rel_cands.extend(rels.into_iter().map(|(r, d)| (i, r, d)));
        }
        if rel_cands.is_empty() {
            break;
        }

        scores.prepare(rel_cands.iter().map(|(_, r, _)| r.as_str()))?;
        let mut rel_cands: Vec<RelationCandidate<S>> = rel_cands
            .into_iter()
            .map(|(parent, relation, direction)| RelationCandidate {
                score: scores.get(&relation),
                parent,
                relation,
                direction,
            })
            .collect();
        rel_cands.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.relation.cmp(&b.relation))
                .then_with(|| a.direction.cmp(&b.direction))
                .then_with(|| beam[a.parent].tie_key().cmp(&beam[b.parent].tie_key()))
        });
        rel_cands.truncate(cfg.width);

        let mut extensions: Vec<(usize, &RelationCandidate<S>, String)> = Vec::new();
        for cand in &rel_cands {
            let parent = &beam[cand.parent];
            let at = parent.frontier();
            for n in g.neighbors_of(at, &cand.relation, cand.direction) {
                if !parent.visits(&n) {
                    extensions.push((cand.parent, cand, n));
                }
            }
        }
        scores.prepare(extensions.iter().map(|(_, _, n)| n.as_str()))?;

        let mut pool: Vec<ReasoningPath<S>> = extensions
            .iter()
            .map(|(pi, cand, n)| {
                let parent = &beam[*pi];
                let hop = Hop {
                    triple: edge(parent.frontier(), &cand.relation, cand.direction, n),
                    direction: cand.direction,
                };
                parent.extend(
                    hop,
                    HopScore {
                        relation: cand.score,
                        entity: scores.get(n),
                    },
                )
            })
            .collect();
        pool.extend(frozen.into_iter().map(|i| beam[i].clone()));
        pool.sort_by(rank_paths);
        pool.truncate(cfg.width);
        beam = pool;
    }

    beam.sort_by(rank_paths);
    Ok(KgRetrieval::Paths(beam))
}

/// Deduplicated triples in first-occurrence order over score-ranked paths.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub triples: Vec<Triple>,
}

impl Subgraph {
    pub fn from_paths<S: Scalar>(paths: &[ReasoningPath<S>]) -> Self {
        let mut ranked: Vec<&ReasoningPath<S>> = paths.iter().collect();
        ranked.sort_by(|a, b| rank_paths(a, b));
        let mut seen = BTreeSet::new();
        let triples = ranked
            .into_iter()
            .flat_map(|p| p.hops.iter().map(|h| &h.triple))
            .filter(|t| seen.insert(*t))
            .cloned()
            .collect();
        Subgraph { triples }
    }

    /// `('h', 'r', 't'), ('h', 'r', 't')`; empty string when there are no triples.
    pub fn serialize(&self) -> String {
        self.triples
            .iter()
            .map(Triple::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn serialize_subgraph<S: Scalar>(paths: &[ReasoningPath<S>]) -> String {
    Subgraph::from_paths(paths).serialize()
}
