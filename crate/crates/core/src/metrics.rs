//! Threshold-independent binary metrics, reported on a ×100 scale.

use crate::error::{Error, Result};
use crate::uncertainty::ConfidenceRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredLabel {
    pub score: f64,
    pub positive: bool,
}

impl ScoredLabel {
    pub fn new(score: f64, positive: bool) -> Self {
        ScoredLabel { score, positive }
    }
}

fn check_finite(items: &[ScoredLabel]) -> Result<()> {
    match items.iter().find(|i| !i.score.is_finite()) {
        Some(i) => Err(Error::InvalidArgument(format!("non-finite score {}", i.score))),
        None => Ok(()),
    }
}

fn sorted_by_score(items: &[ScoredLabel]) -> Vec<ScoredLabel> {
    let mut v = items.to_vec();
    v.sort_by(|a, b| a.score.total_cmp(&b.score));
    v
}

/// Consecutive runs of equal scores in a sorted slice.
fn tie_groups(sorted: &[ScoredLabel]) -> impl Iterator<Item = &[ScoredLabel]> {
    sorted.chunk_by(|a, b| a.score == b.score)
}

/// ROC AUC via the Mann–Whitney rank statistic with midranks for ties.
pub fn roc_auc(items: &[ScoredLabel]) -> Result<f64> {
    check_finite(items)?;
    let np = items.iter().filter(|i| i.positive).count() as u64;
    let nn = items.len() as u64 - np;
    if np == 0 || nn == 0 {
        return Err(Error::Undefined(format!("AUC needs both classes ({np} positive, {nn} negative)")));
    }
    // Twice the rank sum, so midranks stay integral.
    let mut rank_sum2: u64 = 0;
    let mut start = 0u64;
    for group in tie_groups(&sorted_by_score(items)) {
        let len = group.len() as u64;
        let midrank2 = 2 * start + len + 1;
        rank_sum2 += midrank2 * group.iter().filter(|i| i.positive).count() as u64;
        start += len;
    }
    let u = (rank_sum2 - np * (np + 1)) as f64 / 2.0;
    Ok(100.0 * u / (np as f64 * nn as f64))
}

/// Non-interpolated area under the precision–recall curve, sweeping
/// thresholds from the highest score down; tied scores enter together.
pub fn aupr(items: &[ScoredLabel]) -> Result<f64> {
    check_finite(items)?;
    let total_pos = items.iter().filter(|i| i.positive).count();
    if total_pos == 0 {
        return Err(Error::Undefined("AUPR needs at least one positive".into()));
    }
    let mut sorted = sorted_by_score(items);
    sorted.reverse();
    let (mut tp, mut seen, mut prev_recall, mut area) = (0usize, 0usize, 0.0, 0.0);
    for group in tie_groups(&sorted) {
        tp += group.iter().filter(|i| i.positive).count();
        seen += group.len();
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(100.0 * area)
}

/// Mean squared error between score and outcome, ×100.
pub fn brier(items: &[ScoredLabel]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Empty("Brier score of no items".into()));
    }
    if let Some(i) = items.iter().find(|i| !(0.0..=1.0).contains(&i.score)) {
        return Err(Error::InvalidArgument(format!("Brier needs scores in [0, 1], got {}", i.score)));
    }
    let sum: f64 = items
        .iter()
        .map(|i| {
            let y = if i.positive { 1.0 } else { 0.0 };
            (i.score - y).powi(2)
        })
        .sum();
    Ok(100.0 * sum / items.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreScale {
    /// Already a confidence in [0, 1].
    Probability,
    /// Arbitrary real; min–max scaled over the population.
    Unbounded,
}

/// Min–max scaling; a constant population maps to 0.5.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Puts every record's `confidence` in [0, 1]. Probability-scale records
/// pass through; unbounded ones are rescaled from `raw_score`.
pub fn normalize_scores(records: &mut [ConfidenceRecord], scale: ScoreScale) {
    if scale == ScoreScale::Probability {
        return;
    }
    let raw: Vec<f64> = records.iter().map(|r| r.raw_score).collect();
    for (r, c) in records.iter_mut().zip(min_max(&raw)) {
        r.confidence = c;
    }
}
