//! Random HTML pages paired with the passages a correct splitter emits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Sentence = Vec<String>;

pub fn sentence(rng: &mut ChaCha8Rng, len: usize) -> Sentence {
    let mut words: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..500))).collect();
    let end = if rng.gen_bool(0.2) { "?" } else { "." };
    words.last_mut().unwrap().push_str(end);
    words
}

/// Reference chunker over token lists: greedy sentence packing up to 80
/// tokens; an oversized sentence closes the open chunk and is cut into
/// 80-token pieces whose remainder keeps packing.
pub fn expected_chunks(sentences: &[Sentence]) -> Vec<String> {
    let total: usize = sentences.iter().map(Vec::len).sum();
    if total < 10 {
        return vec![];
    }
    if total <= 80 {
        return vec![sentences.concat().join(" ")];
    }
    let mut chunks: Vec<Vec<String>> = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    for s in sentences {
        if s.len() > 80 {
            if !cur.is_empty() {
                chunks.push(std::mem::take(&mut cur));
            }
            let pieces: Vec<&[String]> = s.chunks(80).collect();
            for (i, p) in pieces.iter().enumerate() {
                if i + 1 < pieces.len() {
                    chunks.push(p.to_vec());
                } else {
                    cur = p.to_vec();
                }
            }
        } else if cur.len() + s.len() <= 80 {
            cur.extend(s.iter().cloned());
        } else {
            chunks.push(std::mem::replace(&mut cur, s.clone()));
        }
    }
    if !cur.is_empty() {
        chunks.push(cur);
    }
    chunks
        .into_iter()
        .filter(|c| c.len() >= 10)
        .map(|c| c.join(" "))
        .collect()
}

/// Renders words with random inline markup and whitespace.
fn inline_html(rng: &mut ChaCha8Rng, words: &[String]) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push_str(["  ", " ", "\n   ", "\t"][rng.gen_range(0..4)]);
        }
        match rng.gen_range(0..12) {
            0 => out.push_str(&format!("<b>{w}</b>")),
            1 => out.push_str(&format!("<a href=\"/x\">{w}</a>")),
            2 => out.push_str(&format!("<span class=\"c\">{w}</span>")),
            _ => out.push_str(w),
        }
    }
    out
}

pub fn random_doc(seed: u64) -> (String, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut html =
        String::from("<!doctype html><html><head><title>t</title><style>p{color:red}</style></head><body>\n");
    let mut expected = Vec::new();
    for _ in 0..rng.gen_range(1..10) {
        match rng.gen_range(0..6) {
            0 => html.push_str("<script>var hidden = 'script words never surface in passages ever';</script>\n"),
            1 => {
                let len = rng.gen_range(1..10);
                let s = vec![sentence(&mut rng, len)];
                html.push_str(&format!("<div>{}</div>\n", inline_html(&mut rng, &s[0])));
                expected.extend(expected_chunks(&s));
            }
            2 => {
                html.push_str("<ul>");
                for _ in 0..rng.gen_range(1..4) {
                    let len = rng.gen_range(3..30);
                    let s = vec![sentence(&mut rng, len)];
                    html.push_str(&format!("<li>{}</li>", inline_html(&mut rng, &s[0])));
                    expected.extend(expected_chunks(&s));
                }
                html.push_str("</ul>\n");
            }
            _ => {
                let n = rng.gen_range(1..8);
                let sents: Vec<Sentence> = (0..n)
                    .map(|_| {
                        let len = if rng.gen_bool(0.05) {
                            rng.gen_range(81..200)
                        } else {
                            rng.gen_range(1..45)
                        };
                        sentence(&mut rng, len)
                    })
                    .collect();
                html.push_str(&format!("<p>{}</p>\n", inline_html(&mut rng, &sents.concat())));
                expected.extend(expected_chunks(&sents));
            }
        }
    }
    html.push_str("</body></html>");
    (html, expected)
}
