//! Command-line interface.
//!
//! Settings resolve as flags, then the TOML file given by `--config`, then
//! environment variables (`SEARCH_API_ENDPOINT`), then defaults. The search
//! API key is read only from `SEARCH_API_KEY`. Errors are printed to stderr
//! as JSON and mapped to exit codes: 2 config, 3 network, 4 backend, 5 data.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::composer::{PromptStyle, DEFAULT_MAX_ANSWER_TOKENS, DEFAULT_REFS_TOTAL};
use crate::eval::{self, EvalConfig, DEFAULT_SEED};
use crate::gateway::{BackendSpec, Gateway, HttpOptions};
use crate::kg::KnowledgeGraph;
use crate::pipeline::{Mode, Pipeline, PipelineConfig, PipelineOutput};
use crate::tog::{beam_search, BeamConfig, DirectionPolicy, Subgraph};
use crate::web::{
    FixtureWeb, HttpPages, HttpSearch, PageSource, Replay, RetrievalConfig, SearchEngine, SplitterMode, WebCache,
    WebRetriever, DEFAULT_HTTP_TIMEOUT,
};
use crate::{Error, KgRetrieval, Real, Result, SCHEMA_VERSION};

pub const ENV_SEARCH_KEY: &str = "SEARCH_API_KEY";
pub const ENV_SEARCH_ENDPOINT: &str = "SEARCH_API_ENDPOINT";

#[derive(Debug, Parser)]
#[command(
    name = "citeqa",
    version,
    about = "Cited question answering over web and knowledge-graph evidence"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question and list the cited sources.
    Answer {
        question: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a JSONL dataset and write a JSON report.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Judge every cited sentence against the quote it cites.
        #[arg(long)]
        judge: bool,
        /// Also write the citation-category distribution as CSV.
        #[arg(long)]
        distribution_csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run only the knowledge-graph beam search.
    RetrieveKg {
        question: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run only web retrieval.
    RetrieveWeb {
        question: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Inspect or clear the web cache.
    Cache {
        #[arg(value_enum)]
        action: CacheAction,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Aggregate quote-quality annotations from CSV.
    Annotations { csv: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CacheAction {
    Stats,
    Clear,
}

/// Run settings shared by every command. Each may also come from the
/// config file, using the same names in kebab case.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunArgs {
    /// TOML file with defaults for the options below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// kg, web or kg+web.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub kg: Option<PathBuf>,
    #[arg(long = "topic-entity")]
    pub topic_entity: Vec<String>,
    #[arg(long)]
    pub beam_width: Option<usize>,
    #[arg(long)]
    pub beam_depth: Option<usize>,
    /// both or outgoing-only.
    #[arg(long)]
    pub direction_policy: Option<String>,
    #[arg(long)]
    pub refs_total: Option<usize>,
    #[arg(long)]
    pub keep_filter: Option<usize>,
    #[arg(long)]
    pub keep_final: Option<usize>,
    #[arg(long)]
    pub search_k: Option<usize>,
    /// adaptive or webglm.
    #[arg(long)]
    pub splitter: Option<String>,
    /// glm or llama-chat.
    #[arg(long)]
    pub prompt_style: Option<String>,
    #[arg(long)]
    pub max_answer_tokens: Option<usize>,
    /// mock, http(s)://host:port/ or (generation only) script:PATH.
    #[arg(long)]
    pub backend_embed: Option<String>,
    #[arg(long)]
    pub backend_score: Option<String>,
    #[arg(long)]
    pub backend_spans: Option<String>,
    #[arg(long)]
    pub backend_generate: Option<String>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Directory with search.json, pages.json and page files.
    #[arg(long)]
    pub web_fixture: Option<PathBuf>,
    /// Search endpoint; overrides SEARCH_API_ENDPOINT.
    #[arg(long)]
    pub search_endpoint: Option<String>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// In kg mode, use the web when no subgraph is found.
    #[arg(long)]
    pub fallback_web: bool,
    /// Include wall-clock timings in the output.
    #[arg(long)]
    pub trace: bool,
    /// Print JSON instead of text (answer only; other commands always print JSON).
    #[arg(long)]
    #[serde(skip)]
    pub json: bool,
}

impl RunArgs {
    /// Flags win; unset flags take the config file's value.
    fn merged_with(self, file: RunArgs) -> RunArgs {
        RunArgs {
            config: self.config,
            mode: self.mode.or(file.mode),
            kg: self.kg.or(file.kg),
            topic_entity: if self.topic_entity.is_empty() {
                file.topic_entity
            } else {
                self.topic_entity
            },
            beam_width: self.beam_width.or(file.beam_width),
            beam_depth: self.beam_depth.or(file.beam_depth),
            direction_policy: self.direction_policy.or(file.direction_policy),
            refs_total: self.refs_total.or(file.refs_total),
            keep_filter: self.keep_filter.or(file.keep_filter),
            keep_final: self.keep_final.or(file.keep_final),
            search_k: self.search_k.or(file.search_k),
            splitter: self.splitter.or(file.splitter),
            prompt_style: self.prompt_style.or(file.prompt_style),
            max_answer_tokens: self.max_answer_tokens.or(file.max_answer_tokens),
            backend_embed: self.backend_embed.or(file.backend_embed),
            backend_score: self.backend_score.or(file.backend_score),
            backend_spans: self.backend_spans.or(file.backend_spans),
            backend_generate: self.backend_generate.or(file.backend_generate),
            cache: self.cache.or(file.cache),
            web_fixture: self.web_fixture.or(file.web_fixture),
            search_endpoint: self.search_endpoint.or(file.search_endpoint),
            parallelism: self.parallelism.or(file.parallelism),
            fallback_web: self.fallback_web || file.fallback_web,
            trace: self.trace || file.trace,
            json: self.json,
        }
    }

    /// Applies the config file (paths in it are relative to the file).
    pub fn resolve(self) -> Result<RunConfig> {
        let merged = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
                let mut file: RunArgs =
                    toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                for p in [&mut file.kg, &mut file.cache, &mut file.web_fixture]
                    .into_iter()
                    .flatten()
                {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                self.merged_with(file)
            }
            None => self,
        };
        RunConfig::from_args(merged)
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub retrieval: RetrievalConfig,
    pub kg: Option<PathBuf>,
    pub topic_entities: Vec<String>,
    pub backends: [BackendSpec; 4],
    pub cache: Option<PathBuf>,
    pub web_fixture: Option<PathBuf>,
    pub search_endpoint: Option<String>,
    #[serde(skip)]
    pub search_api_key: Option<String>,
    pub parallelism: usize,
    pub trace: bool,
    pub json: bool,
}

fn parse_opt<T: std::str::FromStr>(v: Option<&str>, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match v {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: T::Err| Error::Config(e.to_string())),
    }
}

fn env_nonempty(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

impl RunConfig {
    fn from_args(a: RunArgs) -> Result<Self> {
        let mode: Mode = parse_opt(a.mode.as_deref(), Mode::KgWeb)?;
        let policy: DirectionPolicy = parse_opt(a.direction_policy.as_deref(), DirectionPolicy::Both)?;
        let beam_default = BeamConfig::default();
        let beam = BeamConfig::new(
            a.beam_width.unwrap_or(beam_default.width),
            a.beam_depth.unwrap_or(beam_default.depth),
        )?
        .with_policy(policy);
        let parallelism = a.parallelism.unwrap_or(RetrievalConfig::default().parallelism);
        let defaults = RetrievalConfig::default();
        let retrieval = RetrievalConfig {
            search_k: a.search_k.unwrap_or(defaults.search_k),
            keep_filter: a.keep_filter.unwrap_or(defaults.keep_filter),
            keep_final: a.keep_final.unwrap_or(defaults.keep_final),
            splitter: parse_opt(a.splitter.as_deref(), SplitterMode::Adaptive)?,
            parallelism,
            ..defaults
        };
        retrieval.validate()?;
        let pipeline = PipelineConfig {
            mode,
            beam,
            refs_total: a.refs_total.unwrap_or(DEFAULT_REFS_TOTAL),
            prompt_style: parse_opt(a.prompt_style.as_deref(), PromptStyle::Glm)?,
            max_answer_tokens: a.max_answer_tokens.unwrap_or(DEFAULT_MAX_ANSWER_TOKENS),
            fallback_web: a.fallback_web,
        };
        if pipeline.refs_total == 0 || pipeline.max_answer_tokens == 0 {
            return Err(Error::Config(
                "refs-total and max-answer-tokens must be positive".into(),
            ));
        }
        let spec = |v: &Option<String>| parse_opt(v.as_deref(), BackendSpec::Mock);
        let backends = [
            spec(&a.backend_embed)?,
            spec(&a.backend_score)?,
            spec(&a.backend_spans)?,
            spec(&a.backend_generate)?,
        ];
        Ok(RunConfig {
            pipeline,
            retrieval,
            kg: a.kg,
            topic_entities: a.topic_entity,
            backends,
            cache: a.cache,
            web_fixture: a.web_fixture,
            search_endpoint: a.search_endpoint.or_else(|| env_nonempty(ENV_SEARCH_ENDPOINT)),
            search_api_key: env_nonempty(ENV_SEARCH_KEY),
            parallelism,
            trace: a.trace,
            json: a.json,
        })
    }

    pub fn gateway(&self) -> Result<Gateway> {
        let [e, s, p, g] = &self.backends;
        Gateway::from_specs(e, s, p, g, &HttpOptions::default())
    }

    pub fn load_kg(&self) -> Result<Option<Arc<KnowledgeGraph>>> {
        match &self.kg {
            Some(p) => Ok(Some(Arc::new(KnowledgeGraph::load(p)?))),
            None => Ok(None),
        }
    }

    pub fn open_cache(&self) -> Result<Option<Arc<WebCache>>> {
        match &self.cache {
            Some(p) => Ok(Some(Arc::new(WebCache::open(p)?))),
            None => Ok(None),
        }
    }

    /// Fixture directory, then live search, then cache-only replay.
    pub fn web_retriever(&self) -> Result<Option<WebRetriever>> {
        let cache = self.open_cache()?;
        let (engine, pages): (Arc<dyn SearchEngine>, Arc<dyn PageSource>) = if let Some(dir) = &self.web_fixture {
            let f = Arc::new(FixtureWeb::load(dir)?);
            (f.clone(), f)
        } else if let Some(endpoint) = &self.search_endpoint {
            (
                Arc::new(HttpSearch::new(
                    endpoint.clone(),
                    self.search_api_key.clone(),
                    DEFAULT_HTTP_TIMEOUT,
                )?),
                Arc::new(HttpPages::new(DEFAULT_HTTP_TIMEOUT)?),
            )
        } else if cache.is_some() {
            (Arc::new(Replay), Arc::new(Replay))
        } else {
            return Ok(None);
        };
        Ok(Some(WebRetriever::new(engine, pages, cache, self.retrieval.clone())?))
    }

    fn require_web(&self) -> Result<WebRetriever> {
        self.web_retriever()?.ok_or_else(|| {
            Error::Config(format!(
                "no web source: pass --web-fixture, --cache, or set {ENV_SEARCH_ENDPOINT}"
            ))
        })
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        let mode = self.pipeline.mode;
        let kg = if mode.uses_kg() { self.load_kg()? } else { None };
        let wants_web = mode.uses_web() || (mode == Mode::Kg && self.pipeline.fallback_web);
        let web = if wants_web { Some(self.require_web()?) } else { None };
        Pipeline::new(kg, web, self.pipeline.clone())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn answer_text(out: &PipelineOutput) -> String {
    let mut s = String::new();
    s.push_str(out.answer.text.trim_end());
    s.push_str("\n\nSources:\n");
    for r in &out.references.references {
        let origin = r.source_url.as_deref().unwrap_or("KG");
        let cited = if out.answer.citations.contains(&r.index) {
            " (cited)"
        } else {
            ""
        };
        s.push_str(&format!("[{}] {origin}{cited}\n", r.index));
    }
    s
}

fn answer_json(question: &str, cfg: &RunConfig, out: &PipelineOutput) -> Result<String> {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "question": question,
        "mode": cfg.pipeline.mode,
        "answer": out.answer.text,
        "citations": out.answer.citations,
        "cited_sentences": out.answer.cited_sentences,
        "references": out.references.references,
        "notices": out.notices,
        "llm_calls": out.llm_calls,
    });
    if cfg.trace {
        v["trace"] = serde_json::to_value(&out.trace)?;
    }
    to_json(&v)
}

fn cmd_answer(question: &str, cfg: &RunConfig) -> Result<String> {
    let pipeline = cfg.pipeline()?;
    let gateway = cfg.gateway()?;
    let out = pipeline.answer(&gateway, question, &cfg.topic_entities)?;
    for n in &out.notices {
        eprintln!("notice: {n}");
    }
    if cfg.json {
        answer_json(question, cfg, &out)
    } else {
        Ok(answer_text(&out))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    dataset: &Path,
    output: Option<&Path>,
    sample: Option<usize>,
    seed: Option<u64>,
    judge: bool,
    distribution_csv: Option<&Path>,
    cfg: &RunConfig,
) -> Result<String> {
    let items = eval::load_dataset(dataset)?;
    let pipeline = cfg.pipeline()?;
    let gateway = cfg.gateway()?;
    let ecfg = EvalConfig {
        parallelism: cfg.parallelism,
        sample,
        seed: seed.unwrap_or(DEFAULT_SEED),
        judge,
        trace: cfg.trace,
    };
    let report = eval::run_eval(&pipeline, &gateway, &items, &ecfg)?;
    if let Some(p) = distribution_csv {
        eval::write_distribution_csv(p, &report.citation_distribution)?;
    }
    eprintln!(
        "evaluated {} items ({} failed): Hits@1 {:.4}, mean LLM calls {:.2}",
        report.items, report.failures, report.hits_at_1, report.mean_llm_calls
    );
    let text = to_json(&report)?;
    match output {
        Some(p) => {
            std::fs::write(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn cmd_retrieve_kg(question: &str, cfg: &RunConfig) -> Result<String> {
    let kg = cfg
        .load_kg()?
        .ok_or_else(|| Error::Config("retrieve-kg requires --kg".into()))?;
    let gateway = cfg.gateway()?;
    let result: KgRetrieval = beam_search::<Real>(&kg, &gateway, question, &cfg.topic_entities, &cfg.pipeline.beam)?;
    let (status, paths) = match &result {
        KgRetrieval::Paths(p) => ("paths", p.as_slice()),
        KgRetrieval::NoSubgraph => ("no_subgraph", &[][..]),
    };
    let subgraph = Subgraph::from_paths(paths);
    to_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "question": question,
        "topic_entities": cfg.topic_entities,
        "beam": cfg.pipeline.beam,
        "status": status,
        "paths": paths,
        "triples": subgraph.triples.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "subgraph": subgraph.serialize(),
        "llm_calls": gateway.ledger().llm_calls(),
    }))
}

fn cmd_retrieve_web(question: &str, cfg: &RunConfig) -> Result<String> {
    let web = cfg.require_web()?;
    let gateway = cfg.gateway()?;
    let (quotes, trace) = web.retrieve(&gateway, question)?;
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "question": question,
        "quotes": quotes,
        "page_errors": trace.page_errors,
    });
    if cfg.trace {
        v["trace"] = serde_json::to_value(&trace)?;
    }
    to_json(&v)
}

fn cmd_cache(action: CacheAction, cfg: &RunConfig) -> Result<String> {
    let cache = cfg
        .open_cache()?
        .ok_or_else(|| Error::Config("cache commands require --cache".into()))?;
    if let CacheAction::Clear = action {
        cache.clear()?;
    }
    let stats = cache.stats()?;
    to_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "action": match action { CacheAction::Stats => "stats", CacheAction::Clear => "clear" },
        "search_entries": stats.search_entries,
        "page_entries": stats.page_entries,
    }))
}

fn cmd_annotations(csv: &Path) -> Result<String> {
    let rows = eval::load_annotations(csv)?;
    let summary = eval::aggregate_annotations(&rows)?;
    to_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "pertinence": summary.pertinence,
        "answer_span": summary.answer_span,
        "self_containment": summary.self_containment,
        "accepted_rows": summary.accepted,
        "rejected_rows": summary.rejected,
    }))
}

/// Executes a parsed command and returns what should go to stdout.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Answer { question, run } => cmd_answer(&question, &run.resolve()?),
        Command::Evaluate {
            dataset,
            output,
            sample,
            seed,
            judge,
            distribution_csv,
            run,
        } => cmd_evaluate(
            &dataset,
            output.as_deref(),
            sample,
            seed,
            judge,
            distribution_csv.as_deref(),
            &run.resolve()?,
        ),
        Command::RetrieveKg { question, run } => cmd_retrieve_kg(&question, &run.resolve()?),
        Command::RetrieveWeb { question, run } => cmd_retrieve_web(&question, &run.resolve()?),
        Command::Cache { action, run } => cmd_cache(action, &run.resolve()?),
        Command::Annotations { csv } => cmd_annotations(&csv),
    }
}

/// The JSON document written to stderr for a failed command.
pub fn error_json(e: &Error) -> String {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": {
            "kind": e.kind(),
            "exit_code": e.kind().exit_code(),
            "message": e.to_string(),
        }
    })
    .to_string()
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.kind().exit_code()
        }
    }
}
