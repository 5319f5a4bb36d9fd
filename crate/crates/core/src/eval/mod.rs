//! Detection metrics, Best-F1 threshold search and synthetic type evaluation.

pub mod affiliation;
pub mod metrics;
pub mod search;
pub mod type_eval;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use affiliation::affiliation_f1;
pub use metrics::{delayed_f1, pa_f1, point_f1};
pub use search::{best_f1_search, evaluate, evaluate_dataset, search_dataset, EvalCase, Metric};
pub use type_eval::{type_eval, FamilyTypeEval, TypeEvalCase, TypeEvalReport};

/// Delay tolerance of Delayed-F1.
pub const DEFAULT_DELAY: usize = 3;
/// Threshold above every confidence: predicts nothing.
pub const THRESHOLD_SENTINEL: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("prediction length {pred} differs from ground truth length {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("ground truth has no anomalous events")]
    NoGroundTruthEvents,
}

pub(crate) fn check_len(pred: &[u8], gt: &[u8]) -> Result<(), EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        Self::from_scores(ratio(tp, tp + fp), ratio(tp, tp + fn_), tp, fp, fn_)
    }

    pub fn from_scores(precision: f64, recall: f64, tp: usize, fp: usize, fn_: usize) -> Self {
        Prf {
            precision,
            recall,
            f1: harmonic(precision, recall),
            tp,
            fp,
            fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub threshold: f64,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEval {
    pub id: String,
    pub metrics: BTreeMap<String, Prf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Micro-aggregated result per metric name.
    pub metrics: BTreeMap<String, MetricResult>,
    /// Each series scored at its metric's dataset threshold.
    pub per_series: Vec<SeriesEval>,
}

/// How thresholds are chosen for a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    Fixed(f64),
    BestF1,
}

/// Evaluate `cases` under every metric.
pub fn eval_report(cases: &[EvalCase], metrics: &[Metric], mode: ThresholdMode) -> Result<EvalReport, EvalError> {
    let mut out = BTreeMap::new();
    let mut per_series: Vec<SeriesEval> = cases
        .iter()
        .map(|c| SeriesEval {
            id: c.id.clone(),
            metrics: BTreeMap::new(),
        })
        .collect();
    for &m in metrics {
        let (threshold, prf) = match mode {
            ThresholdMode::Fixed(t) => (t, evaluate_dataset(cases, m, t)?),
            ThresholdMode::BestF1 => search_dataset(cases, m)?,
        };
        for (c, s) in cases.iter().zip(per_series.iter_mut()) {
            match evaluate(c, m, threshold) {
                Ok(p) => {
                    s.metrics.insert(m.name(), p);
                }
                Err(EvalError::NoGroundTruthEvents) => {}
                Err(e) => return Err(e),
            }
        }
        out.insert(m.name(), MetricResult { threshold, prf });
    }
    Ok(EvalReport { metrics: out, per_series })
}

const TABLE_COLUMNS: [(&str, &str); 4] = [("Pt", "point"), ("PA", "pa"), ("Aff", "affiliation"), ("Del", "delayed")];

/// Fixed-width F1 table, one row per named report.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
    let mut s = format!("{:<width$}", "dataset");
    for (col, _) in TABLE_COLUMNS {
        let _ = write!(s, " {col:>7}");
    }
    s.push('\n');
    for (name, report) in rows {
        let _ = write!(s, "{name:<width$}");
        for (_, key) in TABLE_COLUMNS {
            let cell = report
                .metrics
                .iter()
                .find(|(k, _)| k.split('@').next() == Some(key))
                .map(|(_, r)| format!("{:.4}", r.prf.f1))
                .unwrap_or_else(|| "-".into());
            let _ = write!(s, " {cell:>7}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AnomalyRecord, AnomalyType, Interval};

    #[test]
    fn f1_is_harmonic_mean() {
        let p = Prf::from_counts(3, 1, 2);
        assert_eq!(p.precision, 0.75);
        assert_eq!(p.recall, 0.6);
        assert!((p.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
        assert_eq!(Prf::from_counts(0, 0, 0).f1, 0.0);
    }

    fn case(id: &str, gt: Vec<u8>, recs: &[(usize, usize, u32)]) -> EvalCase {
        let records = recs
            .iter()
            .map(|&(s, e, c)| AnomalyRecord::new(Interval { start: s, end: e }, c, vec![AnomalyType::MeanChangePoint], "e").unwrap())
            .collect();
        EvalCase { id: id.into(), gt, records }
    }

    #[test]
    fn report_and_table() {
        let mut gt = vec![0; 30];
        gt[10..15].fill(1);
        let cases = vec![case("a", gt.clone(), &[(10, 14, 90), (25, 26, 60)]), case("b", vec![0; 30], &[])];
        let r = eval_report(&cases, &Metric::DEFAULT, ThresholdMode::BestF1).unwrap();
        assert_eq!(r.metrics["point"].prf.f1, 1.0);
        assert_eq!(r.metrics["point"].threshold, 0.9);
        assert_eq!(r.per_series.len(), 2);
        assert!(!r.per_series[1].metrics.contains_key("affiliation"));
        let t = render_table(&[("synthetic", &r)]);
        assert!(t.starts_with("dataset        Pt      PA     Aff     Del\n"), "{t}");
        assert!(t.contains("synthetic  1.0000  1.0000  1.0000  1.0000"), "{t}");
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), r);
    }
}
