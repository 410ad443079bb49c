//! Deterministic stand-ins for every capability.
//!
//! * Embedding: the 64-bit FNV-1a hash of the UTF-8 text seeds a
//!   `ChaCha8Rng` (`seed_from_u64`); [`MOCK_DIM`] standard-normal draws are
//!   taken in order and L2-normalized.
//! * Scoring: lowercase alphanumeric word sets. The cheap tier is the
//!   Jaccard index; the expensive tier averages Jaccard with the
//!   size-normalized overlap `|Q∩P| / sqrt(|Q||P|)`.
//! * Spans: sentences of the document ranked by the number of distinct
//!   query words they contain (ties by position); sentences without any
//!   query word are never returned.
//! * Generation: for composition prompts, `"Answer based on reference [1]: "`
//!   followed by the first 20 tokens of reference 1. For citation-judge
//!   prompts, `"Yes"` when at least half of the answer's words occur in the
//!   context, otherwise `"No"`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use super::{
    EmbeddingBackend, EmbeddingVector, GatewayResult, GenerationBackend, ScoringBackend, Span, SpanBackend, Tier,
};
use crate::scalar::{jaccard, normalize, ochiai};
use crate::text::{byte_to_char, sentence_spans, word_set, words};

pub const MOCK_DIM: usize = 384;

const MOCK_ANSWER_PREFIX: &str = "Answer based on reference [1]: ";
const MOCK_ANSWER_TOKENS: usize = 20;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn mock_embedding(text: &str, dim: usize) -> EmbeddingVector {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(text.as_bytes()));
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    EmbeddingVector(v)
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    pub dim: usize,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend { dim: MOCK_DIM }
    }
}

impl EmbeddingBackend for MockBackend {
    fn embed(&self, texts: &[String]) -> GatewayResult<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| mock_embedding(t, self.dim)).collect())
    }
}

impl ScoringBackend for MockBackend {
    fn score(&self, tier: Tier, query: &str, passages: &[String]) -> GatewayResult<Vec<f64>> {
        let q = word_set(query);
        Ok(passages
            .iter()
            .map(|p| {
                let p = word_set(p);
                let j: f64 = jaccard(&q, &p);
                match tier {
                    Tier::Cheap => j,
                    Tier::Expensive => (j + ochiai::<f64>(&q, &p)) / 2.0,
                }
            })
            .collect())
    }
}

impl SpanBackend for MockBackend {
    fn spans(&self, query: &str, document: &str, max_spans: usize) -> GatewayResult<Vec<Span>> {
        let q = word_set(query);
        let mut ranked: Vec<(usize, Span)> = sentence_spans(document)
            .into_iter()
            .filter_map(|r| {
                let overlap = word_set(&document[r.clone()]).intersection(&q).count();
                (overlap > 0).then(|| {
                    let span = Span {
                        start: byte_to_char(document, r.start),
                        end: byte_to_char(document, r.end),
                    };
                    (overlap, span)
                })
            })
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.start.cmp(&b.1.start)));
        Ok(ranked.into_iter().take(max_spans).map(|(_, s)| s).collect())
    }
}

/// Text of reference 1 in either prompt style.
fn first_reference(prompt: &str) -> Option<&str> {
    if let Some(i) = prompt.find("Reference [1]: ") {
        let rest = &prompt[i + "Reference [1]: ".len()..];
        let end = [" \\Reference [2]: ", " \\Question: "]
            .iter()
            .filter_map(|d| rest.find(d))
            .min()
            .unwrap_or(rest.len());
        return Some(&rest[..end]);
    }
    if let Some(i) = prompt.find("<|QUOTES|> \n1: ") {
        let rest = &prompt[i + "<|QUOTES|> \n1: ".len()..];
        let end = rest.find('\n').unwrap_or(rest.len());
        return Some(&rest[..end]);
    }
    None
}

fn judge_fields(prompt: &str) -> Option<(&str, &str)> {
    let a = prompt.find("\n    Answer: ")?;
    let c = prompt.find("\n    Context: ")?;
    let answer = &prompt[a + "\n    Answer: ".len()..c];
    let context = &prompt[c + "\n    Context: ".len()..];
    Some((answer, context))
}

impl GenerationBackend for MockBackend {
    fn generate(&self, prompt: &str, _max_tokens: usize) -> GatewayResult<String> {
        if prompt.starts_with(crate::eval::JUDGE_PREAMBLE) {
            let (answer, context) = judge_fields(prompt).unwrap_or(("", ""));
            let ctx = word_set(context);
            let answer_words: Vec<String> = words(answer).collect();
            let found = answer_words.iter().filter(|w| ctx.contains(*w)).count();
            let supported = !answer_words.is_empty() && 2 * found >= answer_words.len();
            return Ok(if supported { "Yes" } else { "No" }.to_string());
        }
        let head = first_reference(prompt)
            .map(|r| {
                r.split_whitespace()
                    .take(MOCK_ANSWER_TOKENS)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        Ok(format!("{MOCK_ANSWER_PREFIX}{head}"))
    }
}

/// Generator replaying fixed answers: the first key (in sorted order) that
/// occurs in the prompt selects the answer, else `default`.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ScriptedGenerator {
    pub answers: BTreeMap<String, String>,
    #[serde(default)]
    pub default: String,
}

impl ScriptedGenerator {
    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl GenerationBackend for ScriptedGenerator {
    fn generate(&self, prompt: &str, _max_tokens: usize) -> GatewayResult<String> {
        Ok(self
            .answers
            .iter()
            .find(|(k, _)| prompt.contains(k.as_str()))
            .map_or_else(|| self.default.clone(), |(_, v)| v.clone()))
    }
}
