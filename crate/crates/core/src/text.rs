//! Token counting, sentence segmentation and length caps.
//!
//! A token is a whitespace-delimited run. A sentence ends at `.`, `!` or `?`
//! followed by whitespace or end of text, unless the word carrying the mark
//! is a known abbreviation or a single-letter initial.

use std::collections::HashSet;
use std::ops::Range;

const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "etc.", "e.g.", "i.e.", "inc.", "ltd.", "co.",
    "corp.", "no.", "fig.", "approx.", "u.s.", "u.k.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.",
    "sept.", "oct.", "nov.", "dec.", "gen.", "gov.", "sen.", "rep.", "mt.", "ft.", "vol.", "cf.",
];

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased alphanumeric words, used by the mock scorers and span model.
pub fn word_set(text: &str) -> HashSet<String> {
    words(text).collect()
}

pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    if ABBREVIATIONS.contains(&word.to_lowercase().as_str()) {
        return true;
    }
    // single-letter initials such as "J." in "J. Smith"
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

/// Byte ranges of the sentences of `text`, trimmed of surrounding whitespace.
/// Text after the last terminal mark forms a final sentence.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut word_start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c.is_whitespace() {
            word_start = i + c.len_utf8();
            continue;
        }
        if start.is_none() {
            start = Some(i);
        }
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            let at_break = iter.peek().is_none_or(|&(_, n)| n.is_whitespace());
            if at_break && !(c == '.' && is_abbreviation(&text[word_start..end])) {
                spans.push(start.take().unwrap()..end);
            }
        }
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            spans.push(s..end);
        }
    }
    spans
}

pub fn sentences(text: &str) -> Vec<&str> {
    sentence_spans(text).into_iter().map(|r| &text[r]).collect()
}

/// Byte ranges of the whitespace tokens of `text`.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

/// Caps `text` at `max_tokens`: cut at the last sentence end at or before
/// the cap, or hard-cut after the cap-th token when no sentence fits.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> &str {
    let toks = token_spans(text);
    if toks.len() <= max_tokens {
        return text.trim();
    }
    if max_tokens == 0 {
        return "";
    }
    let limit = toks[max_tokens - 1].end;
    let start = toks[0].start;
    let best = sentence_spans(text)
        .into_iter()
        .map(|r| r.end)
        .rfind(|&end| end <= limit);
    match best {
        Some(end) => &text[start..end],
        None => &text[start..limit],
    }
}

/// Splits a single-spaced passage into chunks of at most `max_tokens`
/// tokens. Sentences are packed greedily in order; a sentence longer than
/// the cap is hard-split at token boundaries. Returned ranges index into
/// `passage` and cover its sentences in order.
pub fn chunk_by_sentences(passage: &str, max_tokens: usize) -> Vec<Range<usize>> {
    assert!(max_tokens > 0);
    let mut chunks: Vec<Range<usize>> = Vec::new();
    let mut current: Option<(Range<usize>, usize)> = None;
    for sent in sentence_spans(passage) {
        let toks = token_spans(&passage[sent.clone()]);
        let n = toks.len();
        if n > max_tokens {
            if let Some((r, _)) = current.take() {
                chunks.push(r);
            }
            let base = sent.start;
            let mut pieces = toks.chunks(max_tokens).peekable();
            while let Some(piece) = pieces.next() {
                let r = base + piece[0].start..base + piece[piece.len() - 1].end;
                if pieces.peek().is_some() {
                    chunks.push(r);
                } else {
                    current = Some((r, piece.len()));
                }
            }
            continue;
        }
        current = match current.take() {
            Some((r, count)) if count + n <= max_tokens => Some((r.start..sent.end, count + n)),
            Some((r, _)) => {
                chunks.push(r);
                Some((sent, n))
            }
            None => Some((sent, n)),
        };
    }
    if let Some((r, _)) = current {
        chunks.push(r);
    }
    chunks
}

/// Converts a char offset into a byte offset, clamping to the text length.
pub fn char_to_byte(text: &str, char_idx: usize) -> usize {
    text.char_indices().nth(char_idx).map_or(text.len(), |(b, _)| b)
}

pub fn byte_to_char(text: &str, byte_idx: usize) -> usize {
    text[..byte_idx].chars().count()
}
