//! Answer scoring: Hits@1, cited-source categories, judged citation
//! accuracy, quote annotation aggregation and dataset runs.

mod annotations;
mod run;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::composer::{strip_markers, ComposedAnswer, ReferenceSet, ReferenceSource};
use crate::gateway::{Gateway, GatewayError};

pub use annotations::{aggregate_annotations, load_annotations, AnnotationRow, AnnotationSummary, QuoteAnnotation};
pub use run::{
    load_dataset, parse_dataset, run_eval, sample_indices, write_distribution_csv, CategoryCounts, DatasetItem,
    EvalConfig, EvalRecord, EvalReport, JudgeSummary, DEFAULT_SEED,
};

/// Opening sentence of the citation-judge prompt.
pub const JUDGE_PREAMBLE: &str = "You are given an Answer and a Context.";

const JUDGE_INSTRUCTIONS: &str = " Your task is to identify whether the information in the Answer is present in (or supported by) the information in the Context. Output \"Yes\" if the Answer is supported by the Context.";

const JUDGE_MAX_TOKENS: usize = 8;

/// The judge prompt for one (claim, quote) pair.
pub fn judge_prompt(sub_answer: &str, quote: &str) -> String {
    format!("{JUDGE_PREAMBLE}{JUDGE_INSTRUCTIONS}\n    Answer: {sub_answer}\n    Context: {quote}")
}

fn normalize(text: &str) -> String {
    crate::text::collapse_whitespace(&text.to_lowercase())
}

/// 1 iff some gold answer, lowercased, whitespace-collapsed and stripped of
/// surrounding punctuation, occurs in the equally normalized answer.
pub fn hits_at_1(answer_text: &str, gold_answers: &[String]) -> u8 {
    let answer = normalize(answer_text);
    let hit = gold_answers.iter().any(|g| {
        let g = normalize(g);
        let g = g.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
        !g.is_empty() && answer.contains(g)
    });
    u8::from(hit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CitationCategory {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "web-only")]
    WebOnly,
    #[serde(rename = "kg-only")]
    KgOnly,
    #[serde(rename = "web+kg")]
    WebKg,
}

impl CitationCategory {
    pub const ALL: [CitationCategory; 4] = [
        CitationCategory::None,
        CitationCategory::WebOnly,
        CitationCategory::KgOnly,
        CitationCategory::WebKg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CitationCategory::None => "none",
            CitationCategory::WebOnly => "web-only",
            CitationCategory::KgOnly => "kg-only",
            CitationCategory::WebKg => "web+kg",
        }
    }
}

impl fmt::Display for CitationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which sources the cited references come from. Indices without a
/// matching reference are ignored.
pub fn classify_citations(citations: &BTreeSet<usize>, refs: &ReferenceSet) -> CitationCategory {
    let sources: BTreeSet<ReferenceSource> = citations
        .iter()
        .filter_map(|&i| refs.get(i))
        .map(|r| r.source)
        .collect();
    let kg = sources.contains(&ReferenceSource::Kg);
    let web = sources.contains(&ReferenceSource::Web);
    match (kg, web) {
        (false, false) => CitationCategory::None,
        (true, false) => CitationCategory::KgOnly,
        (false, true) => CitationCategory::WebOnly,
        (true, true) => CitationCategory::WebKg,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Supported,
    Unsupported,
}

/// Asks the judge whether `quote` supports `answer_sentence`: one generator
/// call, answered "Yes" (any case, leading whitespace ignored) or not.
pub fn judge_citation(gateway: &Gateway, answer_sentence: &str, quote: &str) -> Result<Judgment, GatewayError> {
    if answer_sentence.trim().is_empty() || quote.trim().is_empty() {
        return Err(GatewayError::precondition(
            crate::gateway::Capability::Generate,
            "judge needs a non-empty sentence and quote",
        ));
    }
    let reply = gateway.generate_judgment(&judge_prompt(answer_sentence, quote), JUDGE_MAX_TOKENS)?;
    let head: String = reply.trim_start().chars().take(3).collect();
    Ok(if head.eq_ignore_ascii_case("yes") {
        Judgment::Supported
    } else {
        Judgment::Unsupported
    })
}

/// One judged (cited sentence, cited reference) pair; `judgment` is `None`
/// when the judge call failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairJudgment {
    pub sentence: String,
    pub reference: usize,
    pub judgment: Option<Judgment>,
}

/// Judges every (cited sentence, cited reference) pair of an answer. The
/// sentence is passed without its citation markers.
pub fn judge_answer(gateway: &Gateway, answer: &ComposedAnswer, refs: &ReferenceSet) -> Vec<PairJudgment> {
    let mut out = Vec::new();
    for s in &answer.cited_sentences {
        let claim = strip_markers(&s.sentence);
        for &i in &s.citations {
            let Some(r) = refs.get(i) else { continue };
            let judgment = match judge_citation(gateway, &claim, &r.text) {
                Ok(j) => Some(j),
                Err(e) => {
                    log::warn!("citation judgment failed, excluding pair: {e}");
                    None
                }
            };
            out.push(PairJudgment {
                sentence: s.sentence.clone(),
                reference: i,
                judgment,
            });
        }
    }
    out
}

/// Supported fraction over successfully judged pairs; `None` when there are
/// no such pairs.
pub fn citation_accuracy<'a>(judgments: impl IntoIterator<Item = &'a PairJudgment>) -> Option<f64> {
    let (mut judged, mut supported) = (0usize, 0usize);
    for j in judgments {
        if let Some(v) = j.judgment {
            judged += 1;
            supported += usize::from(v == Judgment::Supported);
        }
    }
    (judged > 0).then(|| supported as f64 / judged as f64)
}

/// Generator calls needed by an LLM-pruned beam search of width `n` and
/// depth `d`: two per kept path per depth, one per depth, plus the answer.
pub fn tog_call_bound(n: usize, d: usize) -> usize {
    2 * n * d + d + 1
}
