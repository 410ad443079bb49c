//! Search engines and page sources: live HTTP, on-disk fixtures, and
//! cache-only replay.
//!
//! Live search protocol: `POST {endpoint}` with JSON `{"query", "k"}` and
//! the API key in the `X-Api-Key` header; the response is a JSON list of
//! `{"url", "title", "snippet", "rank"}`.
//!
//! Fixture directory layout:
//!
//! ```text
//! search.json  {"results": {"<query>": [SearchResult, ..]}, "default": [SearchResult, ..]}
//! pages.json   {"<url>": {"file": "pages/a.html", "status": 200}, ..}
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::Deserialize;

use super::cache::{canonical_url, normalize_query};
use super::{SearchResult, WebError};

pub trait SearchEngine: Send + Sync {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, WebError>;
}

pub trait PageSource: Send + Sync {
    fn fetch(&self, url: &str) -> Result<String, WebError>;
}

/// Sorts by engine rank, keeps `k`, and renumbers ranks 1..=n.
pub(crate) fn normalize_results(mut results: Vec<SearchResult>, k: usize) -> Vec<SearchResult> {
    results.sort_by_key(|r| r.rank);
    results.truncate(k);
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i as u32 + 1;
    }
    results
}

#[derive(Debug)]
pub struct HttpSearch {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct WireResult {
    url: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    snippet: String,
    #[serde(default)]
    rank: Option<u32>,
}

impl HttpSearch {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, WebError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| WebError::Search {
                status: None,
                message: e.to_string(),
            })?;
        Ok(HttpSearch {
            endpoint: endpoint.into(),
            api_key,
            client,
        })
    }
}

impl SearchEngine for HttpSearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, WebError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "query": query, "k": k }));
        if let Some(key) = &self.api_key {
            req = req.header("X-Api-Key", key);
        }
        let resp = req.send().map_err(|e| WebError::Search {
            status: None,
            message: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(WebError::Search {
                status: Some(status.as_u16()),
                message: resp.text().unwrap_or_default(),
            });
        }
        let wire: Vec<WireResult> = resp.json().map_err(|e| WebError::Search {
            status: Some(status.as_u16()),
            message: format!("malformed results: {e}"),
        })?;
        let results = wire
            .into_iter()
            .enumerate()
            .map(|(i, w)| SearchResult {
                url: w.url,
                rank: w.rank.unwrap_or(i as u32 + 1),
                title: w.title,
                snippet: w.snippet,
            })
            .collect();
        Ok(normalize_results(results, k))
    }
}

#[derive(Debug)]
pub struct HttpPages {
    client: reqwest::blocking::Client,
}

impl HttpPages {
    pub fn new(timeout: Duration) -> Result<Self, WebError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("citeqa/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| WebError::Fetch {
                url: String::new(),
                status: None,
                message: e.to_string(),
            })?;
        Ok(HttpPages { client })
    }
}

impl PageSource for HttpPages {
    fn fetch(&self, url: &str) -> Result<String, WebError> {
        let err = |status: Option<u16>, message: String| WebError::Fetch {
            url: url.to_string(),
            status,
            message,
        };
        let resp = self.client.get(url).send().map_err(|e| err(None, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(err(Some(status.as_u16()), format!("HTTP {status}")));
        }
        resp.text().map_err(|e| err(Some(status.as_u16()), e.to_string()))
    }
}

#[derive(Debug, Default, Deserialize)]
struct SearchFixture {
    #[serde(default)]
    results: BTreeMap<String, Vec<SearchResult>>,
    #[serde(default)]
    default: Vec<SearchResult>,
}

#[derive(Debug, Deserialize)]
struct PageEntry {
    file: Option<String>,
    #[serde(default = "ok_status")]
    status: u16,
}

fn ok_status() -> u16 {
    200
}

/// Search engine and page source backed by a fixture directory. Counts every
/// call so tests can assert on cache behavior.
#[derive(Debug)]
pub struct FixtureWeb {
    root: PathBuf,
    search: SearchFixture,
    pages: BTreeMap<String, PageEntry>,
    search_calls: AtomicUsize,
    fetch_calls: AtomicUsize,
}

impl FixtureWeb {
    pub fn load(root: impl AsRef<Path>) -> Result<Self, WebError> {
        let root = root.as_ref().to_path_buf();
        let read = |name: &str| -> Result<Option<String>, WebError> {
            let p = root.join(name);
            if !p.exists() {
                return Ok(None);
            }
            std::fs::read_to_string(&p)
                .map(Some)
                .map_err(|e| WebError::Fixture(format!("{}: {e}", p.display())))
        };
        let parse_err = |name: &str, e: serde_json::Error| WebError::Fixture(format!("{name}: {e}"));
        let search = match read("search.json")? {
            Some(t) => serde_json::from_str(&t).map_err(|e| parse_err("search.json", e))?,
            None => SearchFixture::default(),
        };
        let raw_pages: BTreeMap<String, PageEntry> = match read("pages.json")? {
            Some(t) => serde_json::from_str(&t).map_err(|e| parse_err("pages.json", e))?,
            None => BTreeMap::new(),
        };
        let pages = raw_pages.into_iter().map(|(u, e)| (canonical_url(&u), e)).collect();
        let search = SearchFixture {
            results: search
                .results
                .into_iter()
                .map(|(q, r)| (normalize_query(&q), r))
                .collect(),
            default: search.default,
        };
        Ok(FixtureWeb {
            root,
            search,
            pages,
            search_calls: AtomicUsize::new(0),
            fetch_calls: AtomicUsize::new(0),
        })
    }

    pub fn search_calls(&self) -> usize {
        self.search_calls.load(Ordering::Relaxed)
    }

    pub fn fetch_calls(&self) -> usize {
        self.fetch_calls.load(Ordering::Relaxed)
    }
}

impl SearchEngine for FixtureWeb {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, WebError> {
        self.search_calls.fetch_add(1, Ordering::Relaxed);
        let results = self
            .search
            .results
            .get(&normalize_query(query))
            .unwrap_or(&self.search.default)
            .clone();
        Ok(normalize_results(results, k))
    }
}

impl PageSource for FixtureWeb {
    fn fetch(&self, url: &str) -> Result<String, WebError> {
        self.fetch_calls.fetch_add(1, Ordering::Relaxed);
        let err = |status: Option<u16>, message: &str| WebError::Fetch {
            url: url.to_string(),
            status,
            message: message.to_string(),
        };
        let entry = self
            .pages
            .get(&canonical_url(url))
            .ok_or_else(|| err(Some(404), "not in fixture"))?;
        if !(200..300).contains(&entry.status) {
            return Err(err(Some(entry.status), "fixture status"));
        }
        let file = entry
            .file
            .as_deref()
            .ok_or_else(|| err(None, "fixture entry has no file"))?;
        std::fs::read_to_string(self.root.join(file)).map_err(|e| err(None, &e.to_string()))
    }
}

/// Serves nothing: every lookup must be satisfied by the cache.
#[derive(Debug, Default)]
pub struct Replay;

impl SearchEngine for Replay {
    fn search(&self, query: &str, _k: usize) -> Result<Vec<SearchResult>, WebError> {
        Err(WebError::NotCached(format!("search {query:?}")))
    }
}

impl PageSource for Replay {
    fn fetch(&self, url: &str) -> Result<String, WebError> {
        Err(WebError::NotCached(format!("page {url}")))
    }
}
