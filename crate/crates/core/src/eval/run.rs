//! Dataset loading, seeded sampling and the evaluation loop.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    citation_accuracy, classify_citations, hits_at_1, judge_answer, tog_call_bound, CitationCategory, PairJudgment,
};
use crate::composer::{ComposedAnswer, ReferenceSet};
use crate::gateway::Gateway;
use crate::pipeline::{AnswerTrace, Mode, Pipeline};

pub const DEFAULT_SEED: u64 = 20240;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub topic_entities: Vec<String>,
    #[serde(alias = "gold_answers")]
    pub answers: Vec<String>,
}

/// Parses JSON Lines; blank lines are ignored. Ids must be unique and every
/// item needs at least one gold answer.
pub fn parse_dataset(text: &str) -> crate::Result<Vec<DatasetItem>> {
    let mut items = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: DatasetItem =
            serde_json::from_str(line).map_err(|e| crate::Error::Data(format!("dataset line {}: {e}", i + 1)))?;
        if item.answers.is_empty() {
            return Err(crate::Error::Data(format!("dataset line {}: no gold answers", i + 1)));
        }
        if !ids.insert(item.id.clone()) {
            return Err(crate::Error::Data(format!(
                "dataset line {}: duplicate id {:?}",
                i + 1,
                item.id
            )));
        }
        items.push(item);
    }
    if items.is_empty() {
        return Err(crate::Error::Data("dataset is empty".into()));
    }
    Ok(items)
}

pub fn load_dataset(path: impl AsRef<Path>) -> crate::Result<Vec<DatasetItem>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::Error::Data(format!("cannot read dataset {}: {e}", path.display())))?;
    parse_dataset(&text)
}

/// `k` distinct indices of `0..n` chosen with a seeded ChaCha8 stream,
/// returned in ascending order. All indices when `k >= n`.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub parallelism: usize,
    pub sample: Option<usize>,
    pub seed: u64,
    /// Judge every cited (sentence, reference) pair.
    pub judge: bool,
    /// Include wall-clock timings; reports are then no longer reproducible.
    pub trace: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            parallelism: 4,
            sample: None,
            seed: DEFAULT_SEED,
            judge: false,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub question: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<ComposedAnswer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub references: Option<ReferenceSet>,
    pub hit: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub citation_category: Option<CitationCategory>,
    pub llm_calls: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notices: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judgments: Option<Vec<PairJudgment>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<AnswerTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub none: usize,
    #[serde(rename = "web-only")]
    pub web_only: usize,
    #[serde(rename = "kg-only")]
    pub kg_only: usize,
    #[serde(rename = "web+kg")]
    pub web_kg: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, c: CitationCategory) {
        *self.slot(c) += 1;
    }

    fn slot(&mut self, c: CitationCategory) -> &mut usize {
        match c {
            CitationCategory::None => &mut self.none,
            CitationCategory::WebOnly => &mut self.web_only,
            CitationCategory::KgOnly => &mut self.kg_only,
            CitationCategory::WebKg => &mut self.web_kg,
        }
    }

    pub fn get(&self, c: CitationCategory) -> usize {
        match c {
            CitationCategory::None => self.none,
            CitationCategory::WebOnly => self.web_only,
            CitationCategory::KgOnly => self.kg_only,
            CitationCategory::WebKg => self.web_kg,
        }
    }

    pub fn total(&self) -> usize {
        self.none + self.web_only + self.kg_only + self.web_kg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallBound {
    pub beam_width: usize,
    pub beam_depth: usize,
    /// Generator calls an LLM-pruned search would need at this beam size.
    pub llm_pruned_calls: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeSummary {
    pub judged_pairs: usize,
    pub supported_pairs: usize,
    pub failed_pairs: usize,
    /// `None` when no pair could be judged.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub items: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    pub seed: u64,
    pub hits: usize,
    /// Failed items count as misses.
    pub hits_at_1: f64,
    pub citation_distribution: CategoryCounts,
    pub mean_llm_calls: f64,
    pub tog_call_bound: CallBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub citation_judging: Option<JudgeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_runtime_seconds: Option<f64>,
    pub records: Vec<EvalRecord>,
}

fn evaluate_item(pipeline: &Pipeline, gateway: &Gateway, item: &DatasetItem, cfg: &EvalConfig) -> EvalRecord {
    let started = Instant::now();
    let g = gateway.scoped();
    let mut record = EvalRecord {
        id: item.id.clone(),
        question: item.question.clone(),
        answer: None,
        references: None,
        hit: 0,
        citation_category: None,
        llm_calls: 0,
        notices: Vec::new(),
        judgments: None,
        error: None,
        trace: None,
        runtime_seconds: None,
    };
    match pipeline.answer(&g, &item.question, &item.topic_entities) {
        Ok(out) => {
            record.hit = hits_at_1(&out.answer.text, &item.answers);
            record.citation_category = Some(classify_citations(&out.answer.citations, &out.references));
            if cfg.judge {
                record.judgments = Some(judge_answer(&g, &out.answer, &out.references));
            }
            record.notices = out.notices;
            if cfg.trace {
                record.trace = Some(out.trace);
            }
            record.answer = Some(out.answer);
            record.references = Some(out.references);
        }
        Err(e) => {
            log::warn!("item {} failed: {e}", item.id);
            record.error = Some(e.to_string());
        }
    }
    record.llm_calls = g.ledger().llm_calls();
    if cfg.trace {
        record.runtime_seconds = Some(started.elapsed().as_secs_f64());
    }
    record
}

/// Evaluates `items` (or a seeded sample of them) concurrently. Per-item
/// failures are recorded and counted; records keep dataset order.
pub fn run_eval(
    pipeline: &Pipeline,
    gateway: &Gateway,
    items: &[DatasetItem],
    cfg: &EvalConfig,
) -> crate::Result<EvalReport> {
    if items.is_empty() {
        return Err(crate::Error::Data("dataset is empty".into()));
    }
    if cfg.parallelism == 0 {
        return Err(crate::Error::Config("parallelism must be positive".into()));
    }
    let chosen: Vec<&DatasetItem> = match cfg.sample {
        Some(0) => return Err(crate::Error::Config("sample size must be positive".into())),
        Some(k) => sample_indices(items.len(), k, cfg.seed)
            .into_iter()
            .map(|i| &items[i])
            .collect(),
        None => items.iter().collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| crate::Error::Config(format!("cannot start evaluation pool: {e}")))?;
    let records: Vec<EvalRecord> = pool.install(|| {
        chosen
            .par_iter()
            .map(|item| evaluate_item(pipeline, gateway, item, cfg))
            .collect()
    });

    let n = records.len();
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    let hits = records.iter().map(|r| usize::from(r.hit)).sum::<usize>();
    let mut dist = CategoryCounts::default();
    for c in records.iter().filter_map(|r| r.citation_category) {
        dist.add(c);
    }
    let mean_llm_calls = records.iter().map(|r| r.llm_calls as f64).sum::<f64>() / n as f64;
    let citation_judging = cfg.judge.then(|| {
        let pairs: Vec<&PairJudgment> = records.iter().flat_map(|r| r.judgments.iter().flatten()).collect();
        let judged = pairs.iter().filter(|p| p.judgment.is_some()).count();
        JudgeSummary {
            judged_pairs: judged,
            supported_pairs: pairs
                .iter()
                .filter(|p| p.judgment == Some(super::Judgment::Supported))
                .count(),
            failed_pairs: pairs.len() - judged,
            accuracy: citation_accuracy(pairs.iter().copied()),
        }
    });
    let mean_runtime_seconds = cfg
        .trace
        .then(|| records.iter().filter_map(|r| r.runtime_seconds).sum::<f64>() / n as f64);
    let beam = pipeline.config.beam;
    Ok(EvalReport {
        schema_version: crate::SCHEMA_VERSION,
        mode: pipeline.config.mode,
        items: n,
        failures,
        sample: cfg.sample,
        seed: cfg.seed,
        hits,
        hits_at_1: hits as f64 / n as f64,
        citation_distribution: dist,
        mean_llm_calls,
        tog_call_bound: CallBound {
            beam_width: beam.width,
            beam_depth: beam.depth,
            llm_pruned_calls: tog_call_bound(beam.width, beam.depth),
        },
        citation_judging,
        mean_runtime_seconds,
        records,
    })
}

/// Writes `category,count,fraction` rows for the answered items.
pub fn write_distribution_csv(path: impl AsRef<Path>, counts: &CategoryCounts) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::Error::Data(format!("{}: {e}", path.display())))?;
    let total = counts.total();
    let write_err = |e: csv::Error| crate::Error::Data(format!("{}: {e}", path.display()));
    w.write_record(["category", "count", "fraction"]).map_err(write_err)?;
    for c in CitationCategory::ALL {
        let n = counts.get(c);
        let frac = if total == 0 { 0.0 } else { n as f64 / total as f64 };
        w.write_record([c.as_str().to_string(), n.to_string(), format!("{frac:.4}")])
            .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}
