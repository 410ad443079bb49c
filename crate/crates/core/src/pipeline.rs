//! End-to-end answering: knowledge-graph and web retrieval (concurrently,
//! per mode), reference assembly, and a single composition call.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::composer::{build_references, compose, ComposedAnswer, PromptStyle, ReferenceSet};
use crate::gateway::Gateway;
use crate::kg::KnowledgeGraph;
use crate::tog::{beam_search, serialize_subgraph, BeamConfig};
use crate::web::{Quote, RetrievalTrace, WebError, WebRetriever};
use crate::{KgRetrieval, Real};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "kg")]
    Kg,
    #[serde(rename = "web")]
    Web,
    #[default]
    #[serde(rename = "kg+web")]
    KgWeb,
}

impl Mode {
    pub fn uses_kg(self) -> bool {
        matches!(self, Mode::Kg | Mode::KgWeb)
    }

    pub fn uses_web(self) -> bool {
        matches!(self, Mode::Web | Mode::KgWeb)
    }
}

impl FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kg" => Ok(Mode::Kg),
            "web" => Ok(Mode::Web),
            "kg+web" => Ok(Mode::KgWeb),
            other => Err(crate::Error::Config(format!(
                "unknown mode {other:?}; expected kg, web or kg+web"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Kg => "kg",
            Mode::Web => "web",
            Mode::KgWeb => "kg+web",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub beam: BeamConfig,
    pub refs_total: usize,
    pub prompt_style: PromptStyle,
    pub max_answer_tokens: usize,
    /// In `kg` mode, answer from the web when the graph yields no subgraph.
    pub fallback_web: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::KgWeb,
            beam: BeamConfig::default(),
            refs_total: crate::composer::DEFAULT_REFS_TOTAL,
            prompt_style: PromptStyle::Glm,
            max_answer_tokens: crate::composer::DEFAULT_MAX_ANSWER_TOKENS,
            fallback_web: false,
        }
    }
}

/// Timing and size details of one answer; excluded from default outputs
/// because wall-clock values differ between runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerTrace {
    pub kg_seconds: Option<f64>,
    pub kg_paths: Option<usize>,
    pub web: Option<RetrievalTrace>,
    pub compose_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub answer: ComposedAnswer,
    pub references: ReferenceSet,
    pub notices: Vec<String>,
    /// Composition calls made for this answer.
    pub llm_calls: u64,
    pub trace: AnswerTrace,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    kg: Option<Arc<KnowledgeGraph>>,
    web: Option<WebRetriever>,
    pub config: PipelineConfig,
}

type KgOutcome = (crate::Result<KgRetrieval>, f64);
type WebOutcome = Result<(Vec<Quote>, RetrievalTrace), WebError>;

impl Pipeline {
    pub fn new(
        kg: Option<Arc<KnowledgeGraph>>,
        web: Option<WebRetriever>,
        config: PipelineConfig,
    ) -> crate::Result<Self> {
        config.beam.validate()?;
        if config.refs_total == 0 || config.max_answer_tokens == 0 {
            return Err(crate::Error::Config(
                "refs_total and max_answer_tokens must be positive".into(),
            ));
        }
        if config.mode.uses_kg() && kg.is_none() {
            return Err(crate::Error::Config(format!(
                "mode {} requires a knowledge graph (--kg)",
                config.mode
            )));
        }
        let needs_web = config.mode.uses_web() || (config.mode == Mode::Kg && config.fallback_web);
        if needs_web && web.is_none() {
            return Err(crate::Error::Config(format!(
                "mode {} requires a web source",
                config.mode
            )));
        }
        Ok(Pipeline { kg, web, config })
    }

    pub fn knowledge_graph(&self) -> Option<&KnowledgeGraph> {
        self.kg.as_deref()
    }

    pub fn web(&self) -> Option<&WebRetriever> {
        self.web.as_ref()
    }

    fn run_kg(&self, gateway: &Gateway, question: &str, topics: &[String]) -> KgOutcome {
        let t = Instant::now();
        let kg = self.kg.as_deref().expect("checked in new");
        let r = beam_search::<Real>(kg, gateway, question, topics, &self.config.beam);
        (r, t.elapsed().as_secs_f64())
    }

    fn run_web(&self, gateway: &Gateway, question: &str) -> WebOutcome {
        self.web.as_ref().expect("checked in new").retrieve(gateway, question)
    }

    /// Answers `question` with exactly one composition call. Fails when no
    /// reference survives retrieval.
    pub fn answer(&self, gateway: &Gateway, question: &str, topics: &[String]) -> crate::Result<PipelineOutput> {
        let started = Instant::now();
        let g = gateway.scoped();
        let mode = self.config.mode;
        let (kg_out, web_out): (Option<KgOutcome>, Option<WebOutcome>) = match mode {
            Mode::Kg => (Some(self.run_kg(&g, question, topics)), None),
            Mode::Web => (None, Some(self.run_web(&g, question))),
            Mode::KgWeb => {
                let (k, w) = rayon::join(|| self.run_kg(&g, question, topics), || self.run_web(&g, question));
                (Some(k), Some(w))
            }
        };

        let mut notices = Vec::new();
        let mut trace = AnswerTrace::default();
        let mut subgraph = None;
        let mut kg_empty = false;
        if let Some((result, secs)) = kg_out {
            trace.kg_seconds = Some(secs);
            match result? {
                KgRetrieval::Paths(paths) => {
                    trace.kg_paths = Some(paths.len());
                    let s = serialize_subgraph(&paths);
                    kg_empty = s.is_empty();
                    if kg_empty {
                        notices.push("knowledge graph search found no triples".to_string());
                    }
                    subgraph = Some(s);
                }
                KgRetrieval::NoSubgraph => {
                    kg_empty = true;
                    trace.kg_paths = Some(0);
                    notices.push("no subgraph: no topic entity found in the knowledge graph".to_string());
                }
            }
        }

        let web_out = match web_out {
            None if mode == Mode::Kg && kg_empty && self.config.fallback_web => {
                notices.push("falling back to web retrieval".to_string());
                Some(self.run_web(&g, question))
            }
            other => other,
        };
        let mut quotes = Vec::new();
        if let Some(outcome) = web_out {
            match outcome {
                Ok((q, t)) => {
                    if q.is_empty() {
                        notices.push("web retrieval returned no quotes".to_string());
                    }
                    quotes = q;
                    trace.web = Some(t);
                }
                Err(e) if mode == Mode::KgWeb && !kg_empty => {
                    log::warn!("web retrieval failed, answering from the knowledge graph only: {e}");
                    notices.push(format!("web retrieval failed: {e}"));
                }
                Err(e) => return Err(e.into()),
            }
        }

        let references = build_references(subgraph.as_deref(), &quotes, self.config.refs_total);
        if references.is_empty() {
            let why = if notices.is_empty() {
                "no evidence retrieved".to_string()
            } else {
                notices.join("; ")
            };
            return Err(crate::Error::Data(format!("nothing to answer from: {why}")));
        }
        let t = Instant::now();
        let answer = compose(
            &g,
            question,
            &references,
            self.config.prompt_style,
            self.config.max_answer_tokens,
        )?;
        trace.compose_seconds = t.elapsed().as_secs_f64();
        trace.total_seconds = started.elapsed().as_secs_f64();
        Ok(PipelineOutput {
            answer,
            references,
            notices,
            llm_calls: g.ledger().llm_calls(),
            trace,
        })
    }
}
