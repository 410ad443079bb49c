//! Persistent cache of search results and fetched pages (SQLite).
//!
//! Search entries are keyed by the normalized query (lowercased,
//! whitespace-collapsed) and remember how many results were requested, so a
//! cached request for `k` results also serves any smaller `k`. Pages are
//! keyed by canonical URL. Writes replace existing rows (last write wins).

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use super::{SearchResult, WebError};

pub fn normalize_query(q: &str) -> String {
    crate::text::collapse_whitespace(&q.to_lowercase())
}

/// Scheme/host lowercased, default port and fragment dropped. Unparseable
/// URLs are used verbatim.
pub fn canonical_url(u: &str) -> String {
    match url::Url::parse(u.trim()) {
        Ok(mut parsed) => {
            parsed.set_fragment(None);
            parsed.to_string()
        }
        Err(_) => u.trim().to_string(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub search_entries: u64,
    pub page_entries: u64,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug)]
pub struct WebCache {
    conn: Mutex<Connection>,
    ttl: Option<Duration>,
    hits: AtomicU64,
    misses: AtomicU64,
}

fn now_secs() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64)
}

fn db_err(e: rusqlite::Error) -> WebError {
    WebError::Cache(e.to_string())
}

impl WebCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, WebError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| WebError::Cache(e.to_string()))?;
        }
        Self::init(Connection::open(path).map_err(db_err)?)
    }

    pub fn in_memory() -> Result<Self, WebError> {
        Self::init(Connection::open_in_memory().map_err(db_err)?)
    }

    fn init(conn: Connection) -> Result<Self, WebError> {
        conn.execute_batch(
            "PRAGMA journal_mode=WAL;
             PRAGMA busy_timeout=5000;
             CREATE TABLE IF NOT EXISTS search (
                 query TEXT PRIMARY KEY,
                 k INTEGER NOT NULL,
                 results TEXT NOT NULL,
                 stored_at INTEGER NOT NULL
             );
             CREATE TABLE IF NOT EXISTS pages (
                 url TEXT PRIMARY KEY,
                 body TEXT NOT NULL,
                 stored_at INTEGER NOT NULL
             );",
        )
        .map_err(db_err)?;
        Ok(WebCache {
            conn: Mutex::new(conn),
            ttl: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn with_ttl(mut self, ttl: Option<Duration>) -> Self {
        self.ttl = ttl;
        self
    }

    fn fresh(&self, stored_at: i64) -> bool {
        self.ttl
            .is_none_or(|ttl| now_secs() - stored_at <= ttl.as_secs() as i64)
    }

    fn count(&self, hit: bool) {
        let c = if hit { &self.hits } else { &self.misses };
        c.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get_search(&self, query: &str, k: usize) -> Result<Option<Vec<SearchResult>>, WebError> {
        let row: Option<(i64, String, i64)> = self
            .conn
            .lock()
            .unwrap()
            .query_row(
                "SELECT k, results, stored_at FROM search WHERE query = ?1",
                params![normalize_query(query)],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
            )
            .optional()
            .map_err(db_err)?;
        let hit = match row {
            Some((stored_k, json, at)) if stored_k as usize >= k && self.fresh(at) => {
                let mut results: Vec<SearchResult> =
                    serde_json::from_str(&json).map_err(|e| WebError::Cache(e.to_string()))?;
                results.truncate(k);
                Some(results)
            }
            _ => None,
        };
        self.count(hit.is_some());
        Ok(hit)
    }

    pub fn put_search(&self, query: &str, k: usize, results: &[SearchResult]) -> Result<(), WebError> {
        let json = serde_json::to_string(results).map_err(|e| WebError::Cache(e.to_string()))?;
        self.conn
            .lock()
            .unwrap()
            .execute(
                "INSERT OR REPLACE INTO search (query, k, results, stored_at) VALUES (?1, ?2, ?3, ?4)",
                params![normalize_query(query), k as i64, json, now_secs()],
            )
            .map_err(db_err)?;
        Ok(())
    }

    pub fn get_page(&self, url: &str) -> Result<Option<String>, WebError> {
        let row: Option<(String, i64)> = self
            .conn
            .lock()
            .unwrap()
            .query_row(
                "SELECT body, stored_at FROM pages WHERE url = ?1",
                params![canonical_url(url)],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()
            .map_err(db_err)?;
        let hit = row.filter(|(_, at)| self.fresh(*at)).map(|(b, _)| b);
        self.count(hit.is_some());
        Ok(hit)
    }

    pub fn put_page(&self, url: &str, body: &str) -> Result<(), WebError> {
        self.conn
            .lock()
            .unwrap()
            .execute(
                "INSERT OR REPLACE INTO pages (url, body, stored_at) VALUES (?1, ?2, ?3)",
                params![canonical_url(url), body, now_secs()],
            )
            .map_err(db_err)?;
        Ok(())
    }

    pub fn stats(&self) -> Result<CacheStats, WebError> {
        let conn = self.conn.lock().unwrap();
        let count = |table: &str| -> Result<u64, WebError> {
            conn.query_row(&format!("SELECT COUNT(*) FROM {table}"), [], |r| r.get::<_, i64>(0))
                .map(|n| n as u64)
                .map_err(db_err)
        };
        Ok(CacheStats {
            search_entries: count("search")?,
            page_entries: count("pages")?,
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        })
    }

    pub fn clear(&self) -> Result<(), WebError> {
        self.conn
            .lock()
            .unwrap()
            .execute_batch("DELETE FROM search; DELETE FROM pages;")
            .map_err(db_err)
    }
}
