//! End-to-end evaluations over persisted confidence records: error/success
//! prediction, in-/out-of-distribution detection, threshold sweeps, accuracy
//! drop and runtime input filtering. Everything here is a pure function of
//! the records, so reports can be rebuilt from the scores CSVs alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{ShiftKind, VALIDATION};
use crate::error::{Error, Result};
use crate::metrics::{aupr, brier, roc_auc, ScoredLabel};
use crate::tasks::Task;
use crate::uncertainty::{ConfidenceRecord, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub auc: Option<f64>,
    pub aupr: Option<f64>,
    pub brier: Option<f64>,
    pub n: usize,
    pub positives: usize,
    /// Why a metric is missing, when one is.
    pub note: Option<String>,
}

/// All three metrics; undefined ones become `None` with a reason.
pub fn metric_row(items: &[ScoredLabel]) -> Result<MetricRow> {
    let mut notes = Vec::new();
    let mut keep = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(m)) => {
            if !notes.contains(&m) {
                notes.push(m);
            }
            Ok(None)
        }
        Err(e) => Err(e),
    };
    let auc = keep(roc_auc(items))?;
    let pr = keep(aupr(items))?;
    let br = keep(brier(items))?;
    Ok(MetricRow {
        auc,
        aupr: pr,
        brier: br,
        n: items.len(),
        positives: items.iter().filter(|i| i.positive).count(),
        note: if notes.is_empty() { None } else { Some(notes.join("; ")) },
    })
}

/// Positives are the correctly predicted samples.
pub fn error_success_eval(records: &[ConfidenceRecord]) -> Result<MetricRow> {
    if records.is_empty() {
        return Err(Error::Empty("no records to evaluate".into()));
    }
    let items: Vec<ScoredLabel> = records.iter().map(|r| ScoredLabel::new(r.confidence, r.is_correct())).collect();
    metric_row(&items)
}

/// Positives are validation (in-distribution) samples, negatives the
/// shifted split.
pub fn ood_eval(validation: &[ConfidenceRecord], shifted: &[ConfidenceRecord]) -> Result<MetricRow> {
    if validation.is_empty() || shifted.is_empty() {
        return Err(Error::Empty(format!(
            "in/out-of-distribution evaluation needs both sides ({} validation, {} shifted)",
            validation.len(),
            shifted.len()
        )));
    }
    let key = |r: &ConfidenceRecord| (r.method, r.variant.clone());
    let k = key(&validation[0]);
    if validation.iter().chain(shifted).any(|r| key(r) != k) {
        return Err(Error::Validation("records from different methods or variants".into()));
    }
    let items: Vec<ScoredLabel> = validation
        .iter()
        .map(|r| ScoredLabel::new(r.confidence, true))
        .chain(shifted.iter().map(|r| ScoredLabel::new(r.confidence, false)))
        .collect();
    metric_row(&items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub count: usize,
    pub auc: Option<f64>,
}

pub const SWEEP_STEPS: usize = 20;

/// Error/success AUC over the records whose confidence reaches each
/// threshold in `0, 0.05, …, 1`.
pub fn threshold_sweep(records: &[ConfidenceRecord]) -> Vec<SweepPoint> {
    (0..=SWEEP_STEPS)
        .map(|i| {
            let threshold = i as f64 / SWEEP_STEPS as f64;
            let kept = input_filter(records, threshold).accepted;
            let items: Vec<ScoredLabel> = kept.iter().map(|r| ScoredLabel::new(r.confidence, r.is_correct())).collect();
            SweepPoint { threshold, count: kept.len(), auc: roc_auc(&items).ok() }
        })
        .collect()
}

/// `threshold,count,auc` with an empty field for undefined AUC.
pub fn sweep_csv(comments: &[String], points: &[SweepPoint]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("threshold,count,auc\n");
    for p in points {
        let auc = p.auc.map(|a| format!("{a:.4}")).unwrap_or_default();
        let _ = writeln!(out, "{:.2},{},{}", p.threshold, p.count, auc);
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub accepted: Vec<ConfidenceRecord>,
    pub rejected: Vec<ConfidenceRecord>,
}

/// Accepts inputs whose confidence is at least `threshold`.
pub fn input_filter(records: &[ConfidenceRecord], threshold: f64) -> FilterOutcome {
    let (accepted, rejected) = records.iter().cloned().partition(|r| r.confidence >= threshold);
    FilterOutcome { accepted, rejected }
}

/// Signed relative change of `test` against `val`, in percent.
pub fn drop_ratio(val: f64, test: f64) -> Option<f64> {
    if val == 0.0 {
        None
    } else {
        Some((test - val) / val * 100.0)
    }
}

/// `29.14(-2.74%)`.
pub fn format_drop(val: f64, test: f64) -> String {
    match drop_ratio(val, test) {
        None => format!("{test:.2}(n/a)"),
        Some(d) => {
            let d = (d * 100.0).round() / 100.0;
            let sign = if d > 0.0 { "+" } else { "" };
            let d = if d == 0.0 { 0.0 } else { d };
            format!("{test:.2}({sign}{d:.2}%)")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub task: Task,
    pub shift: ShiftKind,
    pub split: String,
    pub accuracy: f64,
    pub drop_pct: Option<f64>,
    pub display: String,
}

pub fn accuracy(records: &[ConfidenceRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    Some(100.0 * records.iter().filter(|r| r.is_correct()).count() as f64 / records.len() as f64)
}

/// Validation accuracy plus every test split with its drop against it.
pub fn accuracy_drop_report(task: Task, shift: ShiftKind, per_split: &[(String, f64)]) -> Vec<AccuracyRow> {
    let val = per_split.iter().find(|(s, _)| s == VALIDATION).map(|(_, a)| *a);
    per_split
        .iter()
        .map(|(split, acc)| {
            let is_val = split == VALIDATION;
            let drop = if is_val { None } else { val.and_then(|v| drop_ratio(v, *acc)) };
            let display = match (is_val, val) {
                (false, Some(v)) => format_drop(v, *acc),
                _ => format!("{acc:.2}"),
            };
            AccuracyRow { task, shift, split: split.clone(), accuracy: *acc, drop_pct: drop, display }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    ErrorSuccess,
    Ood,
}

impl EvalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalKind::ErrorSuccess => "error_success",
            EvalKind::Ood => "ood",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: Task,
    pub shift: ShiftKind,
    pub eval: EvalKind,
    /// Scored split; for OOD rows the shifted side (validation is the other).
    pub split: String,
    pub method: Method,
    /// Variant tag, or for best-of rows the winner per metric.
    pub variant: String,
    pub best_of: bool,
    pub metrics: MetricRow,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub accuracy: Vec<AccuracyRow>,
}

type GroupKey = (Method, String, String);

fn group(records: &[ConfidenceRecord]) -> BTreeMap<GroupKey, Vec<ConfidenceRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<ConfidenceRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method, r.variant.clone(), r.split.clone())).or_default().push(r.clone());
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    }
    groups
}

fn variant_order(method: Method, variant: &str) -> usize {
    method.variants().iter().position(|v| *v == variant).unwrap_or(usize::MAX)
}

fn split_order(split: &str) -> (bool, &str) {
    (split != VALIDATION, split)
}

impl ReportTable {
    /// Per-variant rows, best-of rows for methods with several variants, and
    /// accuracy rows from the vanilla records.
    pub fn build(task: Task, shift: ShiftKind, records: &[ConfidenceRecord]) -> Result<ReportTable> {
        let groups = group(records);
        let mut splits: Vec<&str> = groups.keys().map(|(_, _, s)| s.as_str()).collect();
        splits.sort_by_key(|s| split_order(s));
        splits.dedup();
        let mut methods: Vec<(Method, &str)> = groups.keys().map(|(m, v, _)| (*m, v.as_str())).collect();
        methods.sort_by_key(|(m, v)| (*m, variant_order(*m, v), v.to_string()));
        methods.dedup();

        let mut rows = Vec::new();
        for &(method, variant) in &methods {
            let get = |s: &str| groups.get(&(method, variant.to_string(), s.to_string()));
            for &split in &splits {
                let Some(recs) = get(split) else { continue };
                rows.push(ReportRow {
                    task,
                    shift,
                    eval: EvalKind::ErrorSuccess,
                    split: split.to_string(),
                    method,
                    variant: variant.to_string(),
                    best_of: false,
                    metrics: error_success_eval(recs)?,
                });
                if split != VALIDATION {
                    if let Some(val) = get(VALIDATION) {
                        rows.push(ReportRow {
                            task,
                            shift,
                            eval: EvalKind::Ood,
                            split: split.to_string(),
                            method,
                            variant: variant.to_string(),
                            best_of: false,
                            metrics: ood_eval(val, recs)?,
                        });
                    }
                }
            }
        }
        let best = best_of_rows(&rows);
        rows.extend(best);
        rows.sort_by(|a, b| {
            (a.eval, split_order(&a.split), a.method, a.best_of, variant_order(a.method, &a.variant)).cmp(&(
                b.eval,
                split_order(&b.split),
                b.method,
                b.best_of,
                variant_order(b.method, &b.variant),
            ))
        });

        let per_split: Vec<(String, f64)> = splits
            .iter()
            .filter_map(|&s| groups.get(&(Method::Vanilla, String::new(), s.to_string())).and_then(|r| accuracy(r)).map(|a| (s.to_string(), a)))
            .collect();
        Ok(ReportTable { rows, accuracy: accuracy_drop_report(task, shift, &per_split) })
    }

    pub fn merge(&mut self, other: ReportTable) {
        self.rows.extend(other.rows);
        self.accuracy.extend(other.accuracy);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,shift,eval,split,method,variant,best_of,auc,aupr,brier,n,positives,note\n");
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
                r.task,
                r.shift,
                r.eval.as_str(),
                r.split,
                r.method,
                r.variant,
                r.best_of,
                f(r.metrics.auc),
                f(r.metrics.aupr),
                f(r.metrics.brier),
                r.metrics.n,
                r.metrics.positives,
                r.metrics.note.as_deref().unwrap_or("").replace('"', "'")
            );
        }
        out
    }

    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("task,shift,split,accuracy,drop_pct,display\n");
        for a in &self.accuracy {
            let d = a.drop_pct.map(|d| format!("{d:.2}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{:.2},{},{}", a.task, a.shift, a.split, a.accuracy, d, a.display);
        }
        out
    }
}

/// For each (eval, split, method) with several variants, the best value of
/// each metric independently, naming the winner per metric.
fn best_of_rows(rows: &[ReportRow]) -> Vec<ReportRow> {
    let mut by: BTreeMap<(EvalKind, String, Method), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        if r.method.variants().len() > 1 {
            by.entry((r.eval, r.split.clone(), r.method)).or_default().push(r);
        }
    }
    let mut out = Vec::new();
    for ((eval, split, method), group) in by {
        let pick = |get: fn(&MetricRow) -> Option<f64>, higher: bool| -> Option<(String, f64)> {
            let candidates: Vec<(String, &ReportRow)> = group.iter().map(|r| (r.variant.clone(), *r)).collect();
            crate::uncertainty::best_of_variants(&candidates, |r| Ok(get(&r.metrics)), higher)
                .ok()
                .flatten()
                .map(|(v, s)| (v.to_string(), s))
        };
        let auc = pick(|m| m.auc, true);
        let pr = pick(|m| m.aupr, true);
        let br = pick(|m| m.brier, false);
        let name = |tag: &str, v: &Option<(String, f64)>| format!("{tag}:{}", v.as_ref().map(|(n, _)| n.as_str()).unwrap_or("-"));
        let first = group[0];
        out.push(ReportRow {
            task: first.task,
            shift: first.shift,
            eval,
            split,
            method,
            variant: [name("auc", &auc), name("aupr", &pr), name("brier", &br)].join("|"),
            best_of: true,
            metrics: MetricRow {
                auc: auc.map(|x| x.1),
                aupr: pr.map(|x| x.1),
                brier: br.map(|x| x.1),
                n: first.metrics.n,
                positives: first.metrics.positives,
                note: first.metrics.note.clone(),
            },
        });
    }
    out
}
