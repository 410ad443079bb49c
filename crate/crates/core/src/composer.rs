//! Reference assembly, prompt rendering and citation parsing.
//!
//! Knowledge-graph triples, when present, always occupy reference 1 and
//! take one of the `total` slots; web quotes fill the rest in rank order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gateway::Gateway;
use crate::text::{sentences, truncate_tokens};
use crate::web::Quote;

pub const DEFAULT_REFS_TOTAL: usize = 5;
pub const KG_MAX_TOKENS: usize = 128;
pub const DEFAULT_MAX_ANSWER_TOKENS: usize = 256;

const GLM_PREFIX: &str = "[CLS] ";
const GLM_SEPARATOR: &str = " \\";
const GLM_SUFFIX: &str = "Answer: [gMASK] <|endoftext|> <|startofpiece|>";

const LLAMA_HEADER: &str = "<s> [INST] <<SYS>> Given the following quotes answer the question. You are given five quotes with their numbers. Each quote used in the answer should be cited with [ and ] symbols and the number of the quote in between.  <</SYS>><s> [INST] <|QUESTION|> ";
const LLAMA_QUOTES: &str = " <s> [INST] <|QUESTION|> <|QUOTES|> \n";
const LLAMA_FOOTER: &str = "<s> <|ANSWER|>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Kg,
    Web,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub index: usize,
    pub text: String,
    pub source: ReferenceSource,
    pub source_url: Option<String>,
}

/// Numbered references, contiguous from 1; a knowledge-graph reference, if
/// any, is the single reference at index 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub references: Vec<Reference>,
}

impl ReferenceSet {
    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Reference> {
        index.checked_sub(1).and_then(|i| self.references.get(i))
    }

    pub fn has_kg(&self) -> bool {
        self.references.iter().any(|r| r.source == ReferenceSource::Kg)
    }

    pub fn is_well_formed(&self) -> bool {
        let contiguous = self.references.iter().enumerate().all(|(i, r)| r.index == i + 1);
        let kg: Vec<usize> = self
            .references
            .iter()
            .filter(|r| r.source == ReferenceSource::Kg)
            .map(|r| r.index)
            .collect();
        contiguous && (kg.is_empty() || kg == [1])
    }
}

/// Builds the reference list. Non-empty `subgraph_text` (capped at 128
/// tokens) becomes reference 1 and the top `total - 1` quotes follow;
/// otherwise the top `total` quotes are used.
pub fn build_references(subgraph_text: Option<&str>, quotes: &[Quote], total: usize) -> ReferenceSet {
    let mut references = Vec::new();
    if let Some(kg) = subgraph_text
        .map(|s| truncate_tokens(s, KG_MAX_TOKENS))
        .filter(|s| !s.is_empty())
    {
        if total > 0 {
            references.push(Reference {
                index: 1,
                text: kg.to_string(),
                source: ReferenceSource::Kg,
                source_url: None,
            });
        }
    }
    let room = total.saturating_sub(references.len());
    for q in quotes.iter().take(room) {
        references.push(Reference {
            index: references.len() + 1,
            text: q.text.clone(),
            source: ReferenceSource::Web,
            source_url: q.source_url.clone(),
        });
    }
    ReferenceSet { references }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStyle {
    #[default]
    Glm,
    LlamaChat,
}

impl FromStr for PromptStyle {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "glm" => Ok(PromptStyle::Glm),
            "llama-chat" => Ok(PromptStyle::LlamaChat),
            other => Err(crate::Error::Config(format!(
                "unknown prompt style {other:?}; expected glm or llama-chat"
            ))),
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptStyle::Glm => "glm",
            PromptStyle::LlamaChat => "llama-chat",
        })
    }
}

/// Instantiates the composition template for `style`.
pub fn render_prompt(style: PromptStyle, question: &str, refs: &ReferenceSet) -> crate::Result<String> {
    if refs.is_empty() {
        return Err(crate::Error::Data("cannot compose an answer without references".into()));
    }
    let mut out = String::new();
    match style {
        PromptStyle::Glm => {
            out.push_str(GLM_PREFIX);
            for r in &refs.references {
                out.push_str(&format!("Reference [{}]: {}{GLM_SEPARATOR}", r.index, r.text));
            }
            out.push_str(&format!("Question: {question}{GLM_SEPARATOR}{GLM_SUFFIX}"));
        }
        PromptStyle::LlamaChat => {
            out.push_str(LLAMA_HEADER);
            out.push_str(question);
            out.push_str(LLAMA_QUOTES);
            for r in &refs.references {
                out.push_str(&format!("{}: {}\n", r.index, r.text));
            }
            out.push_str(LLAMA_FOOTER);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedSentence {
    pub sentence: String,
    pub citations: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedAnswer {
    pub text: String,
    pub citations: BTreeSet<usize>,
    pub cited_sentences: Vec<CitedSentence>,
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[(\d+)\]").unwrap())
}

fn markers(text: &str) -> BTreeSet<usize> {
    marker_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

/// Every `[n]` marker in the text, plus each sentence carrying at least one
/// marker. Range forms such as `[1-3]` are not markers.
pub fn parse_citations(answer_text: &str) -> (BTreeSet<usize>, Vec<CitedSentence>) {
    let cited: Vec<CitedSentence> = sentences(answer_text)
        .into_iter()
        .filter_map(|s| {
            let citations = markers(s);
            (!citations.is_empty()).then(|| CitedSentence {
                sentence: s.to_string(),
                citations,
            })
        })
        .collect();
    (markers(answer_text), cited)
}

/// Removes citation markers, leaving the claim text.
pub fn strip_markers(text: &str) -> String {
    crate::text::collapse_whitespace(&marker_re().replace_all(text, ""))
}

/// Renders the prompt, calls the generator exactly once, and parses the
/// citations. Indices outside the reference range are dropped.
pub fn compose(
    gateway: &Gateway,
    question: &str,
    refs: &ReferenceSet,
    style: PromptStyle,
    max_tokens: usize,
) -> crate::Result<ComposedAnswer> {
    let prompt = render_prompt(style, question, refs)?;
    let text = gateway.generate(&prompt, max_tokens)?;
    let (mut citations, mut cited_sentences) = parse_citations(&text);
    let in_range = |i: &usize| (1..=refs.len()).contains(i);
    let dropped: Vec<usize> = citations.iter().copied().filter(|i| !in_range(i)).collect();
    if !dropped.is_empty() {
        log::warn!(
            "dropping out-of-range citations {dropped:?} ({} references)",
            refs.len()
        );
        citations.retain(in_range);
        for s in &mut cited_sentences {
            s.citations.retain(in_range);
        }
        cited_sentences.retain(|s| !s.citations.is_empty());
    }
    Ok(ComposedAnswer {
        text,
        citations,
        cited_sentences,
    })
}
