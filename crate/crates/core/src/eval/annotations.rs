//! Quote-quality annotations: pertinence (0-3), highlighted answer span and
//! self-containment (0/1).

use std::path::Path;

use serde::{Deserialize, Serialize};

/// One CSV row as written by annotators. Offsets are signed so that bad
/// values surface as per-row validation errors rather than parse failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub query_id: String,
    pub quote_id: String,
    pub pertinence: i64,
    pub highlight_start: Option<i64>,
    pub highlight_end: Option<i64>,
    pub self_containment: i64,
    pub quote_length_chars: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteAnnotation {
    pub query_id: String,
    pub quote_id: String,
    pub pertinence: u8,
    pub highlight: Option<(usize, usize)>,
    pub self_containment: bool,
    pub quote_length_chars: usize,
}

impl QuoteAnnotation {
    pub fn answer_span(&self) -> f64 {
        self.highlight
            .map_or(0.0, |(s, e)| (e - s) as f64 / self.quote_length_chars as f64)
    }
}

impl TryFrom<&AnnotationRow> for QuoteAnnotation {
    type Error = String;

    fn try_from(r: &AnnotationRow) -> Result<Self, String> {
        if !(0..=3).contains(&r.pertinence) {
            return Err(format!("pertinence {} outside 0..=3", r.pertinence));
        }
        if !(0..=1).contains(&r.self_containment) {
            return Err(format!("self_containment {} not 0 or 1", r.self_containment));
        }
        if r.quote_length_chars <= 0 {
            return Err(format!("quote_length_chars {} not positive", r.quote_length_chars));
        }
        let highlight = match (r.highlight_start, r.highlight_end) {
            (None, None) => None,
            (Some(s), Some(e)) if 0 <= s && s <= e && e <= r.quote_length_chars => Some((s as usize, e as usize)),
            (s, e) => {
                return Err(format!(
                    "highlight {s:?}..{e:?} not within 0..={}",
                    r.quote_length_chars
                ))
            }
        };
        Ok(QuoteAnnotation {
            query_id: r.query_id.clone(),
            quote_id: r.quote_id.clone(),
            pertinence: r.pertinence as u8,
            highlight,
            self_containment: r.self_containment == 1,
            quote_length_chars: r.quote_length_chars as usize,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSummary {
    pub pertinence: f64,
    pub answer_span: f64,
    pub self_containment: f64,
    pub accepted: usize,
    pub rejected: usize,
}

/// Means over the valid rows; invalid rows are skipped with a warning.
/// Fails when no row is valid.
pub fn aggregate_annotations(rows: &[AnnotationRow]) -> crate::Result<AnnotationSummary> {
    let mut accepted = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        match QuoteAnnotation::try_from(row) {
            Ok(a) => accepted.push(a),
            Err(e) => log::warn!(
                "skipping annotation row {} ({}/{}): {e}",
                i + 1,
                row.query_id,
                row.quote_id
            ),
        }
    }
    if accepted.is_empty() {
        return Err(crate::Error::Data("no valid annotation rows".into()));
    }
    let n = accepted.len() as f64;
    let mean = |f: &dyn Fn(&QuoteAnnotation) -> f64| accepted.iter().map(f).sum::<f64>() / n;
    Ok(AnnotationSummary {
        pertinence: mean(&|a| f64::from(a.pertinence)),
        answer_span: mean(&QuoteAnnotation::answer_span),
        self_containment: mean(&|a| f64::from(u8::from(a.self_containment))),
        accepted: accepted.len(),
        rejected: rows.len() - accepted.len(),
    })
}

/// Reads annotation rows from CSV. Rows that do not parse are skipped with a
/// warning; blank highlight cells mean no highlight.
pub fn load_annotations(path: impl AsRef<Path>) -> crate::Result<Vec<AnnotationRow>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| crate::Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<AnnotationRow>().enumerate() {
        match rec {
            Ok(r) => rows.push(r),
            Err(e) => log::warn!("skipping unparseable annotation row {}: {e}", i + 1),
        }
    }
    Ok(rows)
}
