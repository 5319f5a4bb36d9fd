//! Metric dispatch, micro aggregation and Best-F1 threshold search.

use serde::{Deserialize, Serialize};

use super::affiliation::{combine_zones, zone_scores, ZoneScore};
use super::metrics::{adjust, point_f1};
use super::{check_len, EvalError, Prf, DEFAULT_DELAY, THRESHOLD_SENTINEL};
use crate::detector::threshold;
use crate::types::AnomalyRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Point,
    Pa,
    Affiliation,
    Delayed(usize),
}

impl Metric {
    pub const DEFAULT: [Metric; 4] = [Metric::Point, Metric::Pa, Metric::Affiliation, Metric::Delayed(DEFAULT_DELAY)];

    /// Report key: `point`, `pa`, `affiliation`, `delayed` (or `delayed@k`
    /// for non-default delays).
    pub fn name(self) -> String {
        match self {
            Metric::Point => "point".into(),
            Metric::Pa => "pa".into(),
            Metric::Affiliation => "affiliation".into(),
            Metric::Delayed(DEFAULT_DELAY) => "delayed".into(),
            Metric::Delayed(k) => format!("delayed@{k}"),
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        match s {
            "point" | "pt" => Some(Metric::Point),
            "pa" => Some(Metric::Pa),
            "affiliation" | "aff" => Some(Metric::Affiliation),
            "delayed" | "del" => Some(Metric::Delayed(DEFAULT_DELAY)),
            _ => s.strip_prefix("delayed@").and_then(|k| k.parse().ok()).map(Metric::Delayed),
        }
    }
}

/// One series: ground-truth labels and the detector's records.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub id: String,
    pub gt: Vec<u8>,
    pub records: Vec<AnomalyRecord>,
}

enum Partial {
    Counts(usize, usize, usize),
    Zones(Vec<ZoneScore>, usize),
}

fn partial(c: &EvalCase, m: Metric, tau: f64) -> Result<Partial, EvalError> {
    let pred = threshold(&c.records, tau, c.gt.len());
    check_len(&pred, &c.gt)?;
    let counts = |p: &[u8]| {
        let r = point_f1(p, &c.gt).expect("equal lengths");
        Partial::Counts(r.tp, r.fp, r.fn_)
    };
    Ok(match m {
        Metric::Point => counts(&pred),
        Metric::Pa => counts(&adjust(&pred, &c.gt, usize::MAX)),
        Metric::Delayed(k) => counts(&adjust(&pred, &c.gt, k)),
        Metric::Affiliation => {
            let fp = pred.iter().zip(&c.gt).filter(|(&p, &g)| p != 0 && g == 0).count();
            match zone_scores(&pred, &c.gt) {
                Ok(z) => Partial::Zones(z, fp),
                Err(EvalError::NoGroundTruthEvents) => Partial::Zones(Vec::new(), fp),
                Err(e) => return Err(e),
            }
        }
    })
}

/// Score a single series at threshold `tau`.
pub fn evaluate(c: &EvalCase, m: Metric, tau: f64) -> Result<Prf, EvalError> {
    evaluate_dataset(std::slice::from_ref(c), m, tau)
}

/// Micro aggregate over series: counts are summed; affiliation pools the
/// zones of every series.
pub fn evaluate_dataset(cases: &[EvalCase], m: Metric, tau: f64) -> Result<Prf, EvalError> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut zones = Vec::new();
    let mut zone_fp = 0;
    for c in cases {
        match partial(c, m, tau)? {
            Partial::Counts(a, b, d) => {
                tp += a;
                fp += b;
                fn_ += d;
            }
            Partial::Zones(z, f) => {
                zones.extend(z);
                zone_fp += f;
            }
        }
    }
    if m == Metric::Affiliation {
        if zones.is_empty() {
            return Err(EvalError::NoGroundTruthEvents);
        }
        return Ok(combine_zones(&zones, zone_fp));
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

/// Candidate thresholds: unique confidences plus 0 and the sentinel, sorted.
pub fn candidate_thresholds<'a>(records: impl IntoIterator<Item = &'a AnomalyRecord>) -> Vec<f64> {
    let mut raw: Vec<u8> = records.into_iter().map(AnomalyRecord::raw_score).collect();
    raw.sort_unstable();
    raw.dedup();
    let mut out = vec![0.0];
    out.extend(raw.into_iter().filter(|&r| r > 0).map(|r| f64::from(r) / 100.0));
    out.push(THRESHOLD_SENTINEL);
    out
}

/// Best-F1 threshold over all cases jointly; ties keep the highest
/// threshold.
pub fn search_dataset(cases: &[EvalCase], m: Metric) -> Result<(f64, Prf), EvalError> {
    let mut best: Option<(f64, Prf)> = None;
    for tau in candidate_thresholds(cases.iter().flat_map(|c| &c.records)) {
        let prf = evaluate_dataset(cases, m, tau)?;
        if best.as_ref().is_none_or(|(_, b)| prf.f1 >= b.f1) {
            best = Some((tau, prf));
        }
    }
    Ok(best.expect("candidate set is never empty"))
}

pub fn best_f1_search(records: &[AnomalyRecord], gt: &[u8], m: Metric) -> Result<(f64, Prf), EvalError> {
    search_dataset(
        &[EvalCase {
            id: String::new(),
            gt: gt.to_vec(),
            records: records.to_vec(),
        }],
        m,
    )
}
