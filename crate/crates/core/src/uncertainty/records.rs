use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Method, Scored};
use crate::error::{Error, Result};
use crate::extraction::Vocabulary;

pub const SCORES_HEADER: [&str; 8] = ["sample_id", "method", "variant", "raw_score", "confidence", "predicted", "true", "split"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub sample_id: String,
    pub method: Method,
    pub variant: String,
    pub raw_score: f64,
    pub confidence: f64,
    pub predicted: String,
    #[serde(rename = "true")]
    pub truth: String,
    pub split: String,
    /// Estimator remarks (e.g. skipped layers); not part of the CSV row.
    #[serde(skip)]
    pub note: Option<String>,
}

impl ConfidenceRecord {
    pub fn is_correct(&self) -> bool {
        self.predicted == self.truth
    }
}

/// Attaches ids and label strings to estimator output.
#[allow(clippy::too_many_arguments)]
pub fn records(
    method: Method,
    variant: &str,
    split: &str,
    ids: &[String],
    truths: &[String],
    labels: &Vocabulary,
    scored: &[Scored],
    note: Option<&str>,
) -> Result<Vec<ConfidenceRecord>> {
    if ids.len() != scored.len() || truths.len() != scored.len() {
        return Err(Error::Shape(format!("{} ids, {} truths, {} scores", ids.len(), truths.len(), scored.len())));
    }
    scored
        .iter()
        .zip(ids)
        .zip(truths)
        .map(|((s, id), truth)| {
            if !(0.0..=1.0).contains(&s.confidence) {
                return Err(Error::Validation(format!("{method} confidence {} outside [0, 1] for {id}", s.confidence)));
            }
            let predicted = labels
                .token(s.predicted as u32)
                .ok_or_else(|| Error::Shape(format!("predicted class {} outside label vocabulary", s.predicted)))?;
            Ok(ConfidenceRecord {
                sample_id: id.clone(),
                method,
                variant: variant.to_string(),
                raw_score: s.raw_score,
                confidence: s.confidence,
                predicted: predicted.to_string(),
                truth: truth.clone(),
                split: split.to_string(),
                note: note.map(str::to_string),
            })
        })
        .collect()
}

/// Scores CSV; `comments` become leading `# ` lines, followed by any
/// distinct record notes.
pub fn write_scores_csv(comments: &[String], records: &[ConfidenceRecord]) -> Result<String> {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    let mut notes: Vec<&str> = records.iter().filter_map(|r| r.note.as_deref()).collect();
    notes.dedup();
    for n in notes {
        out.push_str(&format!("# note: {n}\n"));
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Validation(format!("scores CSV: {e}"));
    w.write_record(SCORES_HEADER).map_err(ser)?;
    for r in records {
        w.write_record([
            r.sample_id.as_str(),
            r.method.as_str(),
            &r.variant,
            &format_float(r.raw_score),
            &format_float(r.confidence),
            &r.predicted,
            &r.truth,
            &r.split,
        ])
        .map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(format!("scores CSV: {e}")))?;
    out.push_str(std::str::from_utf8(&bytes).expect("CSV of UTF-8 fields"));
    Ok(out)
}

/// Shortest text that parses back to the same `f64`.
fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn read_scores_csv(text: &str, source: &Path) -> Result<Vec<ConfidenceRecord>> {
    let parse = |m: String| Error::Parse { path: source.to_path_buf(), message: m };
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let headers = rdr.headers().map_err(|e| parse(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != SCORES_HEADER {
        return Err(parse(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<ConfidenceRecord>() {
        let r = row.map_err(|e| parse(e.to_string()))?;
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(parse(format!("confidence {} outside [0, 1]", r.confidence)));
        }
        out.push(r);
    }
    Ok(out)
}
