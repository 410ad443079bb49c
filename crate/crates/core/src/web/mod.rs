//! Adaptive web retrieval: search → fetch → paragraph splitting and
//! evidence extraction → filter/rerank cascade → deduplication → top quotes.

pub mod cache;
mod rank;
pub mod sources;
pub mod splitter;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorKind;
use crate::gateway::{Gateway, GatewayError};

pub use cache::{CacheStats, WebCache};
pub use rank::{deduplicate, deduplicate_with, extract_evidence, filter_and_rerank, finalize, DEFAULT_DEDUP_THRESHOLD};
pub use sources::{FixtureWeb, HttpPages, HttpSearch, PageSource, Replay, SearchEngine};
pub use splitter::{page_text, split_paragraphs, split_text, split_with_mode, SplitterMode};

#[derive(Debug, Error)]
pub enum WebError {
    #[error("search failed{}: {message}", status_suffix(*.status))]
    Search { status: Option<u16>, message: String },
    #[error("fetch {url} failed{}: {message}", status_suffix(*.status))]
    Fetch {
        url: String,
        status: Option<u16>,
        message: String,
    },
    #[error("not in cache: {0}")]
    NotCached(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("invalid retrieval request: {0}")]
    Precondition(String),
    #[error("retrieval model failure: {0}")]
    Model(#[from] GatewayError),
}

fn status_suffix(status: Option<u16>) -> String {
    status.map(|s| format!(" (HTTP {s})")).unwrap_or_default()
}

impl WebError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            WebError::Search { .. } | WebError::Fetch { .. } | WebError::NotCached(_) => ErrorKind::Network,
            WebError::Cache(_) | WebError::Fixture(_) | WebError::Precondition(_) => ErrorKind::Data,
            WebError::Model(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub url: String,
    pub rank: u32,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub snippet: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuoteOrigin {
    ParagraphSplitter,
    EvidenceExtractor,
    Kg,
}

/// A candidate evidence passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub text: String,
    pub origin: QuoteOrigin,
    /// `None` exactly for knowledge-graph quotes.
    pub source_url: Option<String>,
    pub page_rank: u32,
    /// Char offset of the quote within the rendered page text.
    pub char_offset: usize,
    pub filter_score: Option<f64>,
    pub rerank_score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub search_k: usize,
    pub keep_filter: usize,
    pub keep_final: usize,
    pub max_quote_tokens: usize,
    pub evidence_spans_per_page: usize,
    pub dedup_threshold: f64,
    pub splitter: SplitterMode,
    pub parallelism: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            search_k: 10,
            keep_filter: 70,
            keep_final: 5,
            max_quote_tokens: 128,
            evidence_spans_per_page: 3,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            splitter: SplitterMode::Adaptive,
            parallelism: 8,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("search_k", self.search_k),
            ("keep_filter", self.keep_filter),
            ("keep_final", self.keep_final),
            ("max_quote_tokens", self.max_quote_tokens),
            ("parallelism", self.parallelism),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(crate::Error::Config(format!("{name} must be positive")));
        }
        if self.keep_final > self.keep_filter {
            return Err(crate::Error::Config("keep_final must not exceed keep_filter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub search: f64,
    pub fetch: f64,
    /// Paragraph splitting plus evidence extraction.
    pub extract: f64,
    pub filter_rerank: f64,
    pub dedup: f64,
    pub total: f64,
}

impl StageTimings {
    pub fn stage_sum(&self) -> f64 {
        self.search + self.fetch + self.extract + self.filter_rerank + self.dedup
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageError {
    pub url: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalTrace {
    pub timings: StageTimings,
    pub search_cached: bool,
    pub search_results: usize,
    pub pages_fetched: usize,
    pub pages_from_cache: usize,
    pub page_errors: Vec<PageError>,
    pub ps_candidates: usize,
    pub ee_candidates: usize,
    pub after_filter: usize,
    pub after_dedup: usize,
    pub final_quotes: usize,
}

/// Wires a search engine, a page source and an optional cache together.
#[derive(Clone)]
pub struct WebRetriever {
    engine: Arc<dyn SearchEngine>,
    pages: Arc<dyn PageSource>,
    cache: Option<Arc<WebCache>>,
    pool: Arc<rayon::ThreadPool>,
    pub config: RetrievalConfig,
}

impl std::fmt::Debug for WebRetriever {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WebRetriever")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

type FetchOutcome = Result<(String, bool), WebError>;

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

impl WebRetriever {
    pub fn new(
        engine: Arc<dyn SearchEngine>,
        pages: Arc<dyn PageSource>,
        cache: Option<Arc<WebCache>>,
        config: RetrievalConfig,
    ) -> crate::Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| crate::Error::Config(format!("cannot start fetch pool: {e}")))?;
        Ok(WebRetriever {
            engine,
            pages,
            cache,
            pool: Arc::new(pool),
            config,
        })
    }

    pub fn cache(&self) -> Option<&WebCache> {
        self.cache.as_deref()
    }

    /// Up to `k` results in rank order; the flag reports a cache hit.
    pub fn search(&self, query: &str, k: usize) -> Result<(Vec<SearchResult>, bool), WebError> {
        if query.trim().is_empty() {
            return Err(WebError::Precondition("query must be non-empty".into()));
        }
        if let Some(c) = &self.cache {
            if let Some(hit) = c.get_search(query, k)? {
                return Ok((hit, true));
            }
        }
        let results = sources::normalize_results(self.engine.search(query, k)?, k);
        if let Some(c) = &self.cache {
            c.put_search(query, k, &results)?;
        }
        Ok((results, false))
    }

    /// Raw page body; the flag reports a cache hit.
    pub fn fetch_page(&self, url: &str) -> Result<(String, bool), WebError> {
        if let Some(c) = &self.cache {
            if let Some(body) = c.get_page(url)? {
                return Ok((body, true));
            }
        }
        let body = self.pages.fetch(url)?;
        if let Some(c) = &self.cache {
            c.put_page(url, &body)?;
        }
        Ok((body, false))
    }

    /// Full retrieval for one query. Failing pages are recorded in the trace
    /// and skipped; if every page fails the result is empty, not an error.
    pub fn retrieve(&self, gateway: &Gateway, query: &str) -> Result<(Vec<Quote>, RetrievalTrace), WebError> {
        let cfg = &self.config;
        let started = Instant::now();
        let mut trace = RetrievalTrace::default();

        let t = Instant::now();
        let (results, cached) = self.search(query, cfg.search_k)?;
        trace.timings.search = secs(t);
        trace.search_cached = cached;
        trace.search_results = results.len();

        let t = Instant::now();
        let fetched: Vec<(SearchResult, FetchOutcome)> = self.pool.install(|| {
            results
                .par_iter()
                .map(|r| (r.clone(), self.fetch_page(&r.url)))
                .collect()
        });
        trace.timings.fetch = secs(t);
        let mut pages = Vec::new();
        for (r, outcome) in fetched {
            match outcome {
                Ok((body, from_cache)) => {
                    trace.pages_fetched += 1;
                    trace.pages_from_cache += usize::from(from_cache);
                    pages.push((r, body));
                }
                Err(e) => {
                    log::warn!("skipping page {}: {e}", r.url);
                    trace.page_errors.push(PageError {
                        url: r.url.clone(),
                        message: e.to_string(),
                    });
                }
            }
        }

        let t = Instant::now();
        let per_page: Vec<(Vec<Quote>, usize, usize)> = self.pool.install(|| {
            pages
                .par_iter()
                .map(|(r, body)| {
                    let text = page_text(body);
                    let ps = splitter::split_with_mode(&text, cfg.splitter);
                    let ee = extract_evidence(gateway, query, &text, cfg.evidence_spans_per_page);
                    let (n_ps, n_ee) = (ps.len(), ee.len());
                    let quotes = ps
                        .into_iter()
                        .chain(ee)
                        .map(|mut q| {
                            q.source_url = Some(r.url.clone());
                            q.page_rank = r.rank;
                            q
                        })
                        .collect();
                    (quotes, n_ps, n_ee)
                })
                .collect()
        });
        let mut candidates = Vec::new();
        for (quotes, n_ps, n_ee) in per_page {
            trace.ps_candidates += n_ps;
            trace.ee_candidates += n_ee;
            candidates.extend(quotes);
        }
        candidates.sort_by(|a, b| {
            (a.page_rank, a.char_offset, a.origin, &a.text).cmp(&(b.page_rank, b.char_offset, b.origin, &b.text))
        });
        trace.timings.extract = secs(t);

        let t = Instant::now();
        let ranked = filter_and_rerank(gateway, query, candidates, cfg.keep_filter, cfg.keep_final)?;
        trace.timings.filter_rerank = secs(t);
        trace.after_filter = ranked.len();

        let t = Instant::now();
        let unique = deduplicate_with(gateway, ranked, cfg.dedup_threshold)?;
        trace.timings.dedup = secs(t);
        trace.after_dedup = unique.len();

        let quotes = finalize(unique, cfg.max_quote_tokens, cfg.keep_final);
        trace.final_quotes = quotes.len();
        trace.timings.total = secs(started);
        Ok((quotes, trace))
    }
}

/// Request timeout used for live page fetches and search calls.
pub const DEFAULT_HTTP_TIMEOUT: Duration = Duration::from_secs(15);
