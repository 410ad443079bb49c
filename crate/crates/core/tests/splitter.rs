mod common;

use citeqa::text::token_count;
use citeqa::web::{page_text, split_paragraphs, split_text, split_with_mode, SplitterMode};
use common::html::random_doc;

#[test]
fn generated_pages_match_reference_chunker() {
    let mut checked = 0;
    for seed in 0..150 {
        let (html, expected) = random_doc(seed);
        let quotes = split_paragraphs(&html);
        let texts: Vec<&str> = quotes.iter().map(|q| q.text.as_str()).collect();
        assert_eq!(texts, expected, "seed {seed}\n{html}");
        let page = page_text(&html);
        for q in &quotes {
            let n = token_count(&q.text);
            assert!((10..=80).contains(&n), "seed {seed}: {n} tokens");
            let at: String = page.chars().skip(q.char_offset).take(q.text.chars().count()).collect();
            assert_eq!(at, q.text);
            assert!(!q.text.contains("script words"));
        }
        checked += 1;
    }
    assert!(checked >= 100);
}

#[test]
fn nine_token_paragraph_dropped() {
    let nine = "one two three four five six seven eight nine.";
    assert!(split_paragraphs(&format!("<p>{nine}</p>")).is_empty());
    let ten = "one two three four five six seven eight nine ten.";
    assert_eq!(split_paragraphs(&format!("<p>{ten}</p>"))[0].text, ten);
}

#[test]
fn long_paragraph_chunks_80_80_40() {
    let sents: Vec<String> = (0..5)
        .map(|s| {
            let mut w: Vec<String> = (0..40).map(|i| format!("s{s}w{i}")).collect();
            w[39].push('.');
            w.join(" ")
        })
        .collect();
    let para = sents.join(" ");
    assert_eq!(token_count(&para), 200);
    let quotes = split_text(&para);
    let sizes: Vec<usize> = quotes.iter().map(|q| token_count(&q.text)).collect();
    assert_eq!(sizes, vec![80, 80, 40]);
    let joined: Vec<&str> = quotes.iter().map(|q| q.text.as_str()).collect();
    assert_eq!(joined.join(" "), para);
}

#[test]
fn paragraphs_never_merge() {
    let a = "alpha ".repeat(12);
    let b = "beta ".repeat(12);
    let quotes = split_paragraphs(&format!("<p>{a}</p><p>{b}</p>"));
    assert_eq!(quotes.len(), 2);
    assert!(quotes[0].text.starts_with("alpha") && !quotes[0].text.contains("beta"));
}

#[test]
fn webglm_mode_bounds_by_characters() {
    let short = "x".repeat(49);
    let ok = "word ".repeat(20);
    let long = "y".repeat(1300);
    let text = format!("{short}\n{}\n{long}", ok.trim());
    let quotes = split_with_mode(&text, SplitterMode::WebGlm);
    assert_eq!(quotes.len(), 2);
    assert_eq!(quotes[1].text.chars().count(), 1203);
    assert!(quotes[1].text.ends_with("..."));
}
