use std::cmp::Ordering;

use super::{Quote, QuoteOrigin, WebError};
use crate::gateway::{Gateway, Tier};
use crate::scalar::{cosine, Scalar};
use crate::text::{char_to_byte, truncate_tokens};

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.9;

/// Evidence spans of `page_text` for `query`, as verbatim substrings.
/// A failing span backend yields no quotes (with a warning) so the page
/// still contributes its splitter passages.
pub fn extract_evidence(gateway: &Gateway, query: &str, page_text: &str, max_spans: usize) -> Vec<Quote> {
    let spans = match gateway.extract_spans(query, page_text, max_spans) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("evidence extraction unavailable, continuing with splitter passages only: {e}");
            return Vec::new();
        }
    };
    spans
        .into_iter()
        .filter_map(|s| {
            let (a, b) = (char_to_byte(page_text, s.start), char_to_byte(page_text, s.end));
            let raw = &page_text[a..b];
            let lead = raw.len() - raw.trim_start().len();
            let text = raw.trim();
            (!text.is_empty()).then(|| Quote {
                text: text.to_string(),
                origin: QuoteOrigin::EvidenceExtractor,
                source_url: None,
                page_rank: 0,
                char_offset: s.start + raw[..lead].chars().count(),
                filter_score: None,
                rerank_score: None,
            })
        })
        .collect()
}

fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Two-stage cascade: the cheap tier scores every candidate and keeps the
/// best `keep_filter`; the expensive tier scores the survivors, which are
/// returned in descending rerank order (ties by input position). Both stages
/// break ties by input position, so with at most `keep_filter` candidates
/// the result equals a direct expensive rerank.
pub fn filter_and_rerank(
    gateway: &Gateway,
    query: &str,
    candidates: Vec<Quote>,
    keep_filter: usize,
    keep_final: usize,
) -> Result<Vec<Quote>, WebError> {
    if keep_filter == 0 || keep_final == 0 || keep_final > keep_filter {
        return Err(WebError::Precondition(format!(
            "need 0 < keep_final <= keep_filter, got keep_final={keep_final} keep_filter={keep_filter}"
        )));
    }
    if candidates.is_empty() {
        return Ok(candidates);
    }
    let texts: Vec<String> = candidates.iter().map(|q| q.text.clone()).collect();
    let cheap = gateway.score_pair(Tier::Cheap, query, &texts)?;
    let mut survivors: Vec<usize> = descending(&cheap);
    survivors.truncate(keep_filter);
    // restore input order so the rerank tie-break is positional
    survivors.sort_unstable();

    let mut slots: Vec<Option<Quote>> = candidates.into_iter().map(Some).collect();
    let mut kept: Vec<Quote> = survivors
        .iter()
        .map(|&i| {
            let mut q = slots[i].take().expect("index kept once");
            q.filter_score = Some(cheap[i]);
            q
        })
        .collect();
    let texts: Vec<String> = kept.iter().map(|q| q.text.clone()).collect();
    let expensive = gateway.score_pair(Tier::Expensive, query, &texts)?;
    for (q, s) in kept.iter_mut().zip(&expensive) {
        q.rerank_score = Some(*s);
    }
    let order = descending(&expensive);
    let mut slots: Vec<Option<Quote>> = kept.drain(..).map(Some).collect();
    Ok(order.into_iter().map(|i| slots[i].take().unwrap()).collect())
}

/// Greedy scan in rank order: a quote is dropped iff its embedding cosine
/// with some already-kept quote exceeds `threshold` (strictly).
pub fn deduplicate_with<S: Scalar>(
    gateway: &Gateway,
    quotes: Vec<Quote>,
    threshold: S,
) -> Result<Vec<Quote>, WebError> {
    if quotes.len() < 2 {
        return Ok(quotes);
    }
    let texts: Vec<String> = quotes.iter().map(|q| q.text.clone()).collect();
    let vectors: Vec<Vec<S>> = gateway
        .embed(&texts)?
        .into_iter()
        .map(|v| v.0.into_iter().map(S::from_real).collect())
        .collect();
    let mut kept_idx: Vec<usize> = Vec::new();
    for i in 0..quotes.len() {
        if kept_idx.iter().all(|&j| cosine(&vectors[i], &vectors[j]) <= threshold) {
            kept_idx.push(i);
        }
    }
    let mut slots: Vec<Option<Quote>> = quotes.into_iter().map(Some).collect();
    Ok(kept_idx.into_iter().map(|i| slots[i].take().unwrap()).collect())
}

pub fn deduplicate(gateway: &Gateway, quotes: Vec<Quote>) -> Result<Vec<Quote>, WebError> {
    deduplicate_with(gateway, quotes, DEFAULT_DEDUP_THRESHOLD)
}

/// Caps every quote at `max_tokens` (sentence-aware) and keeps the first `keep`.
pub fn finalize(quotes: Vec<Quote>, max_tokens: usize, keep: usize) -> Vec<Quote> {
    quotes
        .into_iter()
        .take(keep)
        .map(|mut q| {
            q.text = truncate_tokens(&q.text, max_tokens).to_string();
            q
        })
        .filter(|q| !q.text.is_empty())
        .collect()
}
