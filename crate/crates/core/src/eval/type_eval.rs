//! Detection recall and type agreement on typed synthetic samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{AnomalyFamily, AnomalyRecord, AnomalyType, Interval};

/// One benchmark sample after the pipeline ran.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeEvalCase {
    pub injected: AnomalyType,
    pub ground_truth: Vec<Interval>,
    /// Candidate intervals raised by each analyzer.
    pub evidence: Vec<(AnomalyFamily, Interval)>,
    pub records: Vec<AnomalyRecord>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilyTypeEval {
    pub samples: usize,
    pub detected: usize,
    pub agreed: usize,
    pub detection_recall: f64,
    /// `None` when nothing was detected.
    pub type_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TypeEvalReport {
    pub families: BTreeMap<AnomalyFamily, FamilyTypeEval>,
}

/// The highest-confidence record's top type; ties keep the earliest record.
pub fn representative_type(records: &[AnomalyRecord]) -> Option<AnomalyType> {
    records
        .iter()
        .fold(None::<&AnomalyRecord>, |best, r| match best {
            Some(b) if b.raw_score() >= r.raw_score() => Some(b),
            _ => Some(r),
        })
        .map(AnomalyRecord::top_type)
}

/// A sample is detected when the analyzer of the injected family raised an
/// interval overlapping the ground truth; agreement is measured over
/// detected samples only. Detected samples without records count as
/// disagreeing.
pub fn type_eval(cases: &[TypeEvalCase]) -> TypeEvalReport {
    let mut families: BTreeMap<AnomalyFamily, FamilyTypeEval> = BTreeMap::new();
    for c in cases {
        let family = c.injected.family();
        let e = families.entry(family).or_default();
        e.samples += 1;
        let detected = c
            .evidence
            .iter()
            .any(|(f, iv)| *f == family && c.ground_truth.iter().any(|g| g.overlaps(iv)));
        if detected {
            e.detected += 1;
            if representative_type(&c.records) == Some(c.injected) {
                e.agreed += 1;
            }
        }
    }
    for e in families.values_mut() {
        e.detection_recall = e.detected as f64 / e.samples as f64;
        e.type_agreement = (e.detected > 0).then(|| e.agreed as f64 / e.detected as f64);
    }
    TypeEvalReport { families }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(score: u32, t: AnomalyType) -> AnomalyRecord {
        AnomalyRecord::new(Interval { start: 0, end: 1 }, score, vec![t], "e").unwrap()
    }

    fn case(t: AnomalyType, hit: bool, records: Vec<AnomalyRecord>) -> TypeEvalCase {
        let at = if hit { 12 } else { 40 };
        TypeEvalCase {
            injected: t,
            ground_truth: vec![Interval { start: 10, end: 20 }],
            evidence: vec![(t.family(), Interval { start: at, end: at + 2 })],
            records,
        }
    }

    #[test]
    fn exact_types_agree_fully() {
        let cases: Vec<_> = AnomalyType::ALL.iter().map(|&t| case(t, true, vec![rec(80, t)])).collect();
        for e in type_eval(&cases).families.values() {
            assert_eq!((e.detection_recall, e.type_agreement), (1.0, Some(1.0)));
        }
    }

    #[test]
    fn missed_sample_is_excluded_from_agreement() {
        let t = AnomalyType::MeanChangePoint;
        let r = type_eval(&[case(t, true, vec![rec(80, t)]), case(t, false, vec![rec(80, AnomalyType::TrendChange)])]);
        let e = &r.families[&AnomalyFamily::Structural];
        assert_eq!((e.samples, e.detected, e.agreed), (2, 1, 1));
        assert_eq!((e.detection_recall, e.type_agreement), (0.5, Some(1.0)));
    }

    #[test]
    fn representative_is_highest_confidence() {
        let t6 = AnomalyType::from_id(6).unwrap();
        let t5 = AnomalyType::from_id(5).unwrap();
        let r = type_eval(&[case(t6, true, vec![rec(60, t5), rec(90, t6)])]);
        assert_eq!(r.families[&t6.family()].agreed, 1);
    }

    #[test]
    fn other_family_evidence_does_not_count() {
        let t = AnomalyType::GlobalPoint;
        let mut c = case(t, true, vec![]);
        c.evidence = vec![(AnomalyFamily::Pattern, Interval { start: 10, end: 20 })];
        assert_eq!(type_eval(&[c]).families[&AnomalyFamily::Point].detected, 0);
    }
}
