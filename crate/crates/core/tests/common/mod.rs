#![allow(dead_code)]

pub mod html;

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use citeqa::gateway::{mock_embedding, MOCK_DIM};
use citeqa::tog::BeamConfig;
use citeqa::{Direction, KnowledgeGraph, Triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

// ---------------------------------------------------------------- random KGs

pub struct RandomKg {
    pub graph: KnowledgeGraph,
    pub triples: Vec<Triple>,
    pub entities: Vec<String>,
}

/// Up to 50 entities and 6 relations; self loops and parallel edges allowed.
pub fn random_kg(seed: u64) -> RandomKg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ent = rng.gen_range(2..=50);
    let n_rel = rng.gen_range(1..=6);
    let n_triples = rng.gen_range(1..=(n_ent * 2).min(90));
    let entities: Vec<String> = (0..n_ent).map(|i| format!("ent{i}")).collect();
    let mut set = BTreeSet::new();
    for _ in 0..n_triples {
        let h = rng.gen_range(0..n_ent);
        let t = rng.gen_range(0..n_ent);
        let r = rng.gen_range(0..n_rel);
        set.insert(Triple::new(&entities[h], format!("rel.{r}"), &entities[t]));
    }
    let triples: Vec<Triple> = set.into_iter().collect();
    RandomKg {
        graph: KnowledgeGraph::from_triples(triples.clone()).unwrap(),
        triples,
        entities,
    }
}

pub fn random_topics(seed: u64, kg: &RandomKg) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let k = rng.gen_range(1..=2);
    let mut topics: Vec<String> = (0..k)
        .map(|_| kg.entities[rng.gen_range(0..kg.entities.len())].clone())
        .collect();
    if rng.gen_bool(0.1) {
        topics.push("not-in-graph".into());
    }
    topics
}

// ---------------------------------------------------------- exhaustive oracle

#[derive(Debug, Clone)]
pub struct OraclePath {
    pub topic: String,
    /// (head, relation, tail, outgoing)
    pub hops: Vec<(String, String, String, bool)>,
    pub scores: Vec<(f64, f64)>,
}

impl OraclePath {
    fn frontier(&self) -> &str {
        match self.hops.last() {
            None => &self.topic,
            Some((h, _, t, out)) => {
                if *out {
                    t
                } else {
                    h
                }
            }
        }
    }

    fn visited(&self, e: &str) -> bool {
        self.topic == e || self.hops.iter().any(|(h, _, t, out)| (if *out { t } else { h }) == e)
    }

    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for (r, e) in &self.scores {
            sum += r;
            sum += e;
        }
        sum / (2 * self.scores.len()) as f64
    }

    fn key(&self) -> (Vec<(String, u8, String)>, String) {
        let hops = self
            .hops
            .iter()
            .map(|(h, r, t, out)| {
                (
                    r.clone(),
                    if *out { 0 } else { 1 },
                    if *out { t.clone() } else { h.clone() },
                )
            })
            .collect();
        (hops, self.topic.clone())
    }

    /// Comparable form: topic plus the triples along the path.
    pub fn signature(&self) -> (String, Vec<(String, String, String)>) {
        (
            self.topic.clone(),
            self.hops
                .iter()
                .map(|(h, r, t, _)| (h.clone(), r.clone(), t.clone()))
                .collect(),
        )
    }
}

pub fn path_signature(p: &citeqa::ReasoningPath) -> (String, Vec<(String, String, String)>) {
    (
        p.topic.clone(),
        p.hops
            .iter()
            .map(|h| (h.triple.head.clone(), h.triple.relation.clone(), h.triple.tail.clone()))
            .collect(),
    )
}

/// Question-label cosines straight from the mock vectors.
pub struct Cosines {
    question: Vec<f64>,
    cache: HashMap<String, f64>,
}

impl Cosines {
    pub fn new(question: &str) -> Self {
        Cosines {
            question: mock_embedding(question, MOCK_DIM).0,
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, label: &str) -> f64 {
        if let Some(v) = self.cache.get(label) {
            return *v;
        }
        let v = mock_embedding(label, MOCK_DIM).0;
        let dot: f64 = self.question.iter().zip(&v).map(|(a, b)| a * b).sum();
        let na: f64 = self.question.iter().map(|a| a * a).sum();
        let nb: f64 = v.iter().map(|b| b * b).sum();
        let c = dot / (na.sqrt() * nb.sqrt());
        self.cache.insert(label.to_string(), c);
        c
    }
}

/// Every one-hop extension of `p`, found by scanning the triple list.
fn children(triples: &[Triple], p: &OraclePath, both: bool) -> Vec<(String, String, String, bool)> {
    let at = p.frontier();
    let mut out = Vec::new();
    for t in triples {
        if t.head == at && !p.visited(&t.tail) {
            out.push((t.head.clone(), t.relation.clone(), t.tail.clone(), true));
        }
        if both && t.tail == at && !p.visited(&t.head) {
            out.push((t.head.clone(), t.relation.clone(), t.tail.clone(), false));
        }
    }
    out
}

/// All simple paths of length <= `depth` from the topics, by enumeration.
pub fn enumerate_paths(triples: &[Triple], topics: &[String], depth: usize, both: bool) -> Vec<OraclePath> {
    let mut all = Vec::new();
    let mut layer: Vec<OraclePath> = seeds(triples, topics);
    for d in 0..=depth {
        all.extend(layer.iter().cloned());
        if d == depth {
            break;
        }
        let mut next = Vec::new();
        for p in &layer {
            for hop in children(triples, p, both) {
                let mut q = p.clone();
                q.hops.push(hop);
                q.scores.push((0.0, 0.0));
                next.push(q);
            }
        }
        layer = next;
    }
    all
}

fn seeds(triples: &[Triple], topics: &[String]) -> Vec<OraclePath> {
    let mut seen = BTreeSet::new();
    topics
        .iter()
        .filter(|e| triples.iter().any(|t| &t.head == *e || &t.tail == *e))
        .filter(|e| seen.insert(e.to_string()))
        .map(|e| OraclePath {
            topic: e.clone(),
            hops: Vec::new(),
            scores: Vec::new(),
        })
        .collect()
}

fn rank(a: &OraclePath, b: &OraclePath) -> std::cmp::Ordering {
    b.mean()
        .partial_cmp(&a.mean())
        .unwrap()
        .then_with(|| a.key().cmp(&b.key()))
}

/// Brute-force reference: precompute each beam path's full child list by
/// scanning the triples, then apply the relation top-N and the path top-N.
/// `None` means no topic entity is in the graph.
pub fn oracle_beam(triples: &[Triple], question: &str, topics: &[String], cfg: &BeamConfig) -> Option<Vec<OraclePath>> {
    let both = cfg.direction_policy == citeqa::tog::DirectionPolicy::Both;
    let mut cos = Cosines::new(question);
    let mut beam = seeds(triples, topics);
    if beam.is_empty() {
        return None;
    }
    beam.sort_by(rank);
    for _ in 0..cfg.depth {
        let kids: Vec<Vec<(String, String, String, bool)>> = beam.iter().map(|p| children(triples, p, both)).collect();
        // (score, relation, dir, parent)
        let mut rels: Vec<(f64, String, u8, usize)> = Vec::new();
        for (i, ks) in kids.iter().enumerate() {
            let distinct: BTreeSet<(String, u8)> = ks
                .iter()
                .map(|(_, r, _, out)| (r.clone(), if *out { 0 } else { 1 }))
                .collect();
            for (r, d) in distinct {
                rels.push((cos.get(&r), r, d, i));
            }
        }
        if rels.is_empty() {
            break;
        }
        rels.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then_with(|| a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(&b.2))
                .then_with(|| beam[a.3].key().cmp(&beam[b.3].key()))
        });
        rels.truncate(cfg.width);
        let mut pool = Vec::new();
        for (score, r, d, i) in &rels {
            for (h, rel, t, out) in &kids[*i] {
                if rel == r && (if *out { 0 } else { 1 }) == *d {
                    let target = if *out { t } else { h };
                    let mut q = beam[*i].clone();
                    q.hops.push((h.clone(), rel.clone(), t.clone(), *out));
                    q.scores.push((*score, cos.get(target)));
                    pool.push(q);
                }
            }
        }
        for (i, ks) in kids.iter().enumerate() {
            if ks.is_empty() {
                pool.push(beam[i].clone());
            }
        }
        pool.sort_by(rank);
        pool.truncate(cfg.width);
        beam = pool;
    }
    beam.sort_by(rank);
    Some(beam)
}

pub fn direction_of(out: bool) -> Direction {
    if out {
        Direction::Outgoing
    } else {
        Direction::Incoming
    }
}

// ------------------------------------------------------------- HTTP server

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap()
    }
}

type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server on a random local port; one request per
/// connection. Records every request it sees.
pub struct TestServer {
    pub base: String,
    pub requests: Arc<Mutex<Vec<Request>>>,
    hits: Arc<AtomicUsize>,
}

impl TestServer {
    pub fn start(handler: impl Fn(&Request) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}/", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let (reqs, count) = (requests.clone(), hits.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (handler, reqs, count) = (handler.clone(), reqs.clone(), count.clone());
                thread::spawn(move || {
                    if let Some(req) = read_request(&stream) {
                        count.fetch_add(1, Ordering::SeqCst);
                        reqs.lock().unwrap().push(req.clone());
                        let (status, body) = handler(&req);
                        let _ = write_response(stream, status, &body);
                    }
                });
            }
        });
        TestServer { base, requests, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path.trim_start_matches('/'))
    }
}

fn read_request(stream: &TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut headers = Vec::new();
    let mut len = 0;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.eq_ignore_ascii_case("content-length") {
                len = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some(Request {
        method,
        path,
        headers,
        body: String::from_utf8(body).ok()?,
    })
}

fn write_response(mut stream: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let ctype = if body.trim_start().starts_with('<') {
        "text/html"
    } else {
        "application/json"
    };
    write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: {ctype}; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
