//! HTML → page text → candidate passages.
//!
//! Page text is rendered with HTML whitespace semantics: runs of whitespace
//! inside text become one space and block-level elements (`<p>`, `<div>`,
//! `<li>`, headings, table rows, `<br>`, ...) introduce line breaks. Script,
//! style and head content is skipped. Each non-empty line is one passage,
//! so no passage ever crosses a `<p>` boundary.

use scraper::{ElementRef, Html, Node};
use serde::{Deserialize, Serialize};

use super::{Quote, QuoteOrigin};
use crate::text::{byte_to_char, chunk_by_sentences, collapse_whitespace, token_count};

pub const MIN_PASSAGE_TOKENS: usize = 10;
pub const MAX_PASSAGE_TOKENS: usize = 80;

const WEBGLM_MIN_CHARS: usize = 50;
const WEBGLM_MAX_CHARS: usize = 1200;

const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "head", "svg", "iframe"];
const BLOCKS: &[&str] = &[
    "p",
    "div",
    "br",
    "li",
    "ul",
    "ol",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "tr",
    "table",
    "section",
    "article",
    "header",
    "footer",
    "blockquote",
    "pre",
    "nav",
    "aside",
    "main",
    "dd",
    "dt",
    "dl",
    "figcaption",
    "figure",
    "hr",
    "form",
    "title",
    "body",
    "html",
    "td",
    "th",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitterMode {
    /// Line breaks plus `<p>` boundaries, 10..=80 tokens, sentence-aware chunking.
    #[default]
    Adaptive,
    /// Line breaks only, lines under 50 chars dropped, longer lines cut at
    /// 1200 chars followed by `...`.
    WebGlm,
}

impl std::str::FromStr for SplitterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adaptive" => Ok(SplitterMode::Adaptive),
            "webglm" | "web-glm" => Ok(SplitterMode::WebGlm),
            _ => Err(format!("unknown splitter mode {s:?}; expected adaptive or webglm")),
        }
    }
}

fn render(el: ElementRef<'_>, out: &mut String, in_pre: bool) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => {
                if in_pre {
                    out.push_str(t);
                } else {
                    // lines are whitespace-collapsed after rendering
                    out.extend(t.chars().map(|c| if c.is_whitespace() { ' ' } else { c }));
                }
            }
            Node::Element(e) => {
                let name = e.name();
                if SKIPPED.contains(&name) {
                    continue;
                }
                let Some(child_el) = ElementRef::wrap(child) else {
                    continue;
                };
                let block = BLOCKS.contains(&name);
                if block {
                    out.push('\n');
                }
                render(child_el, out, in_pre || name == "pre");
                if block {
                    out.push('\n');
                }
            }
            _ => {}
        }
    }
}

/// Visible text of `html`, one normalized line per block.
pub fn page_text(html: &str) -> String {
    let doc = Html::parse_document(html);
    let mut raw = String::new();
    render(doc.root_element(), &mut raw, false);
    raw.lines()
        .map(collapse_whitespace)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn passage_quote(text: &str, char_offset: usize) -> Quote {
    Quote {
        text: text.to_string(),
        origin: QuoteOrigin::ParagraphSplitter,
        source_url: None,
        page_rank: 0,
        char_offset,
        filter_score: None,
        rerank_score: None,
    }
}

/// Splits rendered page text into passages. Every output has between 10 and
/// 80 tokens; over-long lines are chunked on sentence boundaries.
pub fn split_text(text: &str) -> Vec<Quote> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for line in text.split('\n') {
        let n = token_count(line);
        if n >= MIN_PASSAGE_TOKENS {
            let pieces = if n > MAX_PASSAGE_TOKENS {
                chunk_by_sentences(line, MAX_PASSAGE_TOKENS)
            } else {
                std::iter::once(0..line.len()).collect()
            };
            for r in pieces {
                let chunk = &line[r.clone()];
                if token_count(chunk) >= MIN_PASSAGE_TOKENS {
                    out.push(passage_quote(chunk, byte_to_char(text, line_start + r.start)));
                }
            }
        }
        line_start += line.len() + 1;
    }
    out
}

pub fn split_paragraphs(html: &str) -> Vec<Quote> {
    split_text(&page_text(html))
}

/// Line-based splitting without the token bounds.
pub fn split_text_webglm(text: &str) -> Vec<Quote> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for line in text.split('\n') {
        let chars = line.chars().count();
        if chars >= WEBGLM_MIN_CHARS {
            let body = if chars > WEBGLM_MAX_CHARS {
                let cut: String = line.chars().take(WEBGLM_MAX_CHARS).collect();
                format!("{cut}...")
            } else {
                line.to_string()
            };
            out.push(passage_quote(&body, byte_to_char(text, line_start)));
        }
        line_start += line.len() + 1;
    }
    out
}

pub fn split_with_mode(text: &str, mode: SplitterMode) -> Vec<Quote> {
    match mode {
        SplitterMode::Adaptive => split_text(text),
        SplitterMode::WebGlm => split_text_webglm(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        (1..=n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn nine_tokens_dropped_ten_kept() {
        assert!(split_paragraphs(&format!("<p>{}</p>", words(9))).is_empty());
        let q = split_paragraphs(&format!("<p>{}</p>", words(10)));
        assert_eq!(q.len(), 1);
        assert_eq!(token_count(&q[0].text), 10);
        assert_eq!(q[0].origin, QuoteOrigin::ParagraphSplitter);
    }

    #[test]
    fn paragraphs_do_not_merge() {
        let html = format!("<html><body><p>{}</p><p>{}</p></body></html>", words(6), words(6));
        assert!(split_paragraphs(&html).is_empty());
        let html = format!("<div>{}<br>{}</div>", words(12), words(12));
        assert_eq!(split_paragraphs(&html).len(), 2);
    }

    #[test]
    fn inline_markup_and_source_newlines_join() {
        let html = "<p>The <b>Laleli</b> Mosque\n  is an imperial mosque located in Laleli, Fatih, Istanbul.</p>";
        let text = page_text(html);
        assert_eq!(
            text,
            "The Laleli Mosque is an imperial mosque located in Laleli, Fatih, Istanbul."
        );
    }

    #[test]
    fn scripts_and_styles_skipped() {
        let html = format!(
            "<html><head><title>t</title><style>p {{}}</style></head><body><script>var a = 1;</script><p>{}</p></body></html>",
            words(10)
        );
        assert_eq!(page_text(&html), words(10));
    }

    #[test]
    fn offsets_point_into_page_text() {
        let html = format!("<p>{}</p><p>{}</p>", words(12), words(15));
        let text = page_text(&html);
        for q in split_text(&text) {
            let got: String = text.chars().skip(q.char_offset).take(q.text.chars().count()).collect();
            assert_eq!(got, q.text);
        }
    }

    #[test]
    fn malformed_html_tolerated() {
        assert!(split_paragraphs("<p><<<>>").is_empty());
        assert!(split_paragraphs("").is_empty());
    }

    #[test]
    fn webglm_mode_bounds() {
        let short = "tiny line";
        let long = "x".repeat(1300);
        let text = format!("{short}\n{long}\n{}", "y".repeat(60));
        let q = split_text_webglm(&text);
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].text.chars().count(), 1203);
        assert!(q[0].text.ends_with("..."));
        assert_eq!(q[1].char_offset, short.len() + 1 + long.len() + 1);
    }
}
