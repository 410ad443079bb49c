//! Uniform access to the four model capabilities the pipeline needs.
//!
//! Each capability (embedding, pairwise scoring, span extraction,
//! generation) sits behind its own backend trait so real HTTP models and the
//! deterministic mocks can be mixed per capability. [`Gateway`] wraps the
//! backends, validates preconditions and records every call in one or more
//! [`CallLedger`]s.

mod http;
mod ledger;
mod mock;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorKind;

pub use http::{HttpBackend, HttpOptions};
pub use ledger::{CallLedger, CapabilityStats, LedgerSnapshot};
pub use mock::{fnv1a64, mock_embedding, MockBackend, ScriptedGenerator, MOCK_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Embed,
    Score,
    Spans,
    Generate,
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Capability::Embed => "embed",
            Capability::Score => "score",
            Capability::Spans => "spans",
            Capability::Generate => "generate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{capability}: precondition violated: {message}")]
    Precondition { capability: Capability, message: String },
    #[error("{capability}: transport failure after {retries} retries: {message}")]
    Transport {
        capability: Capability,
        retries: u32,
        message: String,
    },
    #[error("{capability}: backend returned HTTP {status} after {retries} retries: {message}")]
    Status {
        capability: Capability,
        status: u16,
        retries: u32,
        message: String,
    },
    #[error("{capability}: malformed backend response: {message}")]
    Protocol { capability: Capability, message: String },
    #[error("generation failed for a {prompt_chars}-char prompt: {source}")]
    Generation {
        prompt_chars: usize,
        #[source]
        source: Box<GatewayError>,
    },
}

impl GatewayError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GatewayError::Precondition { .. } => ErrorKind::Data,
            GatewayError::Transport { .. } => ErrorKind::Network,
            GatewayError::Status { .. } | GatewayError::Protocol { .. } => ErrorKind::Backend,
            GatewayError::Generation { source, .. } => source.kind(),
        }
    }

    pub(crate) fn precondition(capability: Capability, message: impl Into<String>) -> Self {
        GatewayError::Precondition {
            capability,
            message: message.into(),
        }
    }
}

pub type GatewayResult<T> = Result<T, GatewayError>;

/// Unit-free embedding produced by one backend; all vectors from a backend
/// share a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        crate::scalar::cosine(&self.0, &other.0)
    }
}

/// Pairwise relevance tier: the cheap filter or the expensive reranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Cheap,
    Expensive,
}

/// Half-open character range `[start, end)` into a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, texts: &[String]) -> GatewayResult<Vec<EmbeddingVector>>;
}

pub trait ScoringBackend: Send + Sync {
    fn score(&self, tier: Tier, query: &str, passages: &[String]) -> GatewayResult<Vec<f64>>;
}

pub trait SpanBackend: Send + Sync {
    fn spans(&self, query: &str, document: &str, max_spans: usize) -> GatewayResult<Vec<Span>>;
}

pub trait GenerationBackend: Send + Sync {
    fn generate(&self, prompt: &str, max_tokens: usize) -> GatewayResult<String>;
}

/// Per-capability backend choice, as written on the command line:
/// `mock`, an `http://` / `https://` base URL, or `script:PATH` (generation only).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendSpec {
    Mock,
    Http(String),
    Script(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mock" {
            Ok(BackendSpec::Mock)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(BackendSpec::Http(s.to_string()))
        } else if let Some(path) = s.strip_prefix("script:") {
            Ok(BackendSpec::Script(path.to_string()))
        } else {
            Err(format!(
                "unknown backend {s:?}; expected mock, http(s)://URL or script:PATH"
            ))
        }
    }
}

impl TryFrom<String> for BackendSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<BackendSpec> for String {
    fn from(b: BackendSpec) -> String {
        match b {
            BackendSpec::Mock => "mock".into(),
            BackendSpec::Http(u) => u,
            BackendSpec::Script(p) => format!("script:{p}"),
        }
    }
}

#[derive(Clone)]
pub struct Gateway {
    embedder: Arc<dyn EmbeddingBackend>,
    scorer: Arc<dyn ScoringBackend>,
    spans: Arc<dyn SpanBackend>,
    generator: Arc<dyn GenerationBackend>,
    ledgers: Vec<Arc<CallLedger>>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("ledger", &self.ledger().snapshot())
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// All four capabilities served by [`MockBackend`].
    pub fn mock() -> Self {
        let m = Arc::new(MockBackend::default());
        Gateway::new(m.clone(), m.clone(), m.clone(), m)
    }

    pub fn new(
        embedder: Arc<dyn EmbeddingBackend>,
        scorer: Arc<dyn ScoringBackend>,
        spans: Arc<dyn SpanBackend>,
        generator: Arc<dyn GenerationBackend>,
    ) -> Self {
        Gateway {
            embedder,
            scorer,
            spans,
            generator,
            ledgers: vec![Arc::new(CallLedger::default())],
        }
    }

    /// Builds a gateway from per-capability specs. HTTP backends pointing at
    /// the same base URL share one client and in-flight limit.
    pub fn from_specs(
        embed: &BackendSpec,
        score: &BackendSpec,
        spans: &BackendSpec,
        generate: &BackendSpec,
        http: &HttpOptions,
    ) -> crate::Result<Self> {
        let mock = Arc::new(MockBackend::default());
        let mut clients: Vec<(String, Arc<HttpBackend>)> = Vec::new();
        let mut http_for = |url: &str| -> crate::Result<Arc<HttpBackend>> {
            if let Some((_, c)) = clients.iter().find(|(u, _)| u == url) {
                return Ok(c.clone());
            }
            let c = Arc::new(HttpBackend::new(url, http.clone())?);
            clients.push((url.to_string(), c.clone()));
            Ok(c)
        };
        let script_only =
            |cap: &str| crate::Error::Config(format!("script: backends are only supported for generation, not {cap}"));
        let embedder: Arc<dyn EmbeddingBackend> = match embed {
            BackendSpec::Mock => mock.clone(),
            BackendSpec::Http(u) => http_for(u)?,
            BackendSpec::Script(_) => return Err(script_only("embed")),
        };
        let scorer: Arc<dyn ScoringBackend> = match score {
            BackendSpec::Mock => mock.clone(),
            BackendSpec::Http(u) => http_for(u)?,
            BackendSpec::Script(_) => return Err(script_only("score")),
        };
        let span_backend: Arc<dyn SpanBackend> = match spans {
            BackendSpec::Mock => mock.clone(),
            BackendSpec::Http(u) => http_for(u)?,
            BackendSpec::Script(_) => return Err(script_only("spans")),
        };
        let generator: Arc<dyn GenerationBackend> = match generate {
            BackendSpec::Mock => mock,
            BackendSpec::Http(u) => http_for(u)?,
            BackendSpec::Script(p) => Arc::new(ScriptedGenerator::load(p)?),
        };
        Ok(Gateway::new(embedder, scorer, span_backend, generator))
    }

    pub fn with_generator(mut self, generator: Arc<dyn GenerationBackend>) -> Self {
        self.generator = generator;
        self
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn EmbeddingBackend>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn with_scorer(mut self, scorer: Arc<dyn ScoringBackend>) -> Self {
        self.scorer = scorer;
        self
    }

    pub fn with_spans(mut self, spans: Arc<dyn SpanBackend>) -> Self {
        self.spans = spans;
        self
    }

    /// The innermost ledger: counts every call made through this handle.
    pub fn ledger(&self) -> &CallLedger {
        self.ledgers.last().expect("gateway always has a ledger")
    }

    /// A handle sharing the same backends whose calls are additionally
    /// counted in a fresh ledger. Calls still reach every parent ledger.
    pub fn scoped(&self) -> Gateway {
        let mut g = self.clone();
        g.ledgers.push(Arc::new(CallLedger::default()));
        g
    }

    fn record<T>(&self, cap: Capability, started: Instant, result: &GatewayResult<T>) {
        let secs = started.elapsed().as_secs_f64();
        for l in &self.ledgers {
            l.record(cap, secs, result.is_ok());
        }
    }

    pub fn embed(&self, texts: &[String]) -> GatewayResult<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(GatewayError::precondition(Capability::Embed, "texts must be non-empty"));
        }
        let t = Instant::now();
        let out = self.embedder.embed(texts).and_then(|v| {
            if v.len() != texts.len() {
                return Err(GatewayError::Protocol {
                    capability: Capability::Embed,
                    message: format!("expected {} vectors, got {}", texts.len(), v.len()),
                });
            }
            Ok(v)
        });
        self.record(Capability::Embed, t, &out);
        out
    }

    pub fn score_pair(&self, tier: Tier, query: &str, passages: &[String]) -> GatewayResult<Vec<f64>> {
        if passages.is_empty() {
            return Err(GatewayError::precondition(
                Capability::Score,
                "passages must be non-empty",
            ));
        }
        let t = Instant::now();
        let out = self.scorer.score(tier, query, passages).and_then(|s| {
            if s.len() != passages.len() {
                return Err(GatewayError::Protocol {
                    capability: Capability::Score,
                    message: format!("expected {} scores, got {}", passages.len(), s.len()),
                });
            }
            Ok(s)
        });
        self.record(Capability::Score, t, &out);
        out
    }

    /// Spans are validated against the document: in-bounds, non-empty,
    /// non-overlapping and capped at `max_spans`; offending spans are dropped.
    pub fn extract_spans(&self, query: &str, document: &str, max_spans: usize) -> GatewayResult<Vec<Span>> {
        if document.is_empty() || max_spans == 0 {
            return Ok(Vec::new());
        }
        let t = Instant::now();
        let out = self.spans.spans(query, document, max_spans);
        self.record(Capability::Spans, t, &out);
        let len = document.chars().count();
        let mut kept: Vec<Span> = Vec::new();
        for s in out? {
            let valid = s.start < s.end && s.end <= len;
            let overlaps = kept.iter().any(|k| s.start < k.end && k.start < s.end);
            if valid && !overlaps {
                kept.push(s);
            } else {
                log::warn!(
                    "dropping invalid span {}..{} (document has {len} chars)",
                    s.start,
                    s.end
                );
            }
            if kept.len() == max_spans {
                break;
            }
        }
        Ok(kept)
    }

    /// One answer-composition call; counted in `llm_calls`.
    pub fn generate(&self, prompt: &str, max_tokens: usize) -> GatewayResult<String> {
        self.generate_inner(prompt, max_tokens, false)
    }

    /// One citation-judge call; counted in `judge_calls`, not `llm_calls`.
    pub fn generate_judgment(&self, prompt: &str, max_tokens: usize) -> GatewayResult<String> {
        self.generate_inner(prompt, max_tokens, true)
    }

    fn generate_inner(&self, prompt: &str, max_tokens: usize, judge: bool) -> GatewayResult<String> {
        if prompt.is_empty() {
            return Err(GatewayError::precondition(
                Capability::Generate,
                "prompt must be non-empty",
            ));
        }
        if max_tokens == 0 {
            return Err(GatewayError::precondition(
                Capability::Generate,
                "max_tokens must be positive",
            ));
        }
        for l in &self.ledgers {
            l.count_generation(judge);
        }
        let t = Instant::now();
        let out = self.generator.generate(prompt, max_tokens);
        self.record(Capability::Generate, t, &out);
        out.map_err(|e| GatewayError::Generation {
            prompt_chars: prompt.chars().count(),
            source: Box::new(e),
        })
    }
}
