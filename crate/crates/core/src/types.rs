//! Domain types shared by every stage of the pipeline: series, the anomaly
//! taxonomy, inclusive intervals and the anomaly record.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation failures for the shared domain types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("series must contain at least one value")]
    EmptySeries,
    #[error("{field} has length {got}, expected {expected}")]
    LengthMismatch { field: &'static str, expected: usize, got: usize },
    #[error("label at index {index} is {value}, expected 0 or 1")]
    InvalidLabel { index: usize, value: u8 },
    #[error("interval start {start} exceeds end {end}")]
    InvertedInterval { start: usize, end: usize },
    #[error("unknown anomaly type id {0}")]
    UnknownType(u8),
    #[error("raw score {0} outside [0, 100]")]
    ScoreOutOfRange(u32),
    #[error("anomaly record must carry at least one type")]
    NoTypes,
}

/// A univariate series with optional timestamps and binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub id: String,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamps: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<u8>>,
}

impl Series {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self, TypeError> {
        Self::with_parts(id, values, None, None)
    }

    pub fn with_parts(id: impl Into<String>, values: Vec<f64>, timestamps: Option<Vec<i64>>, labels: Option<Vec<u8>>) -> Result<Self, TypeError> {
        if values.is_empty() {
            return Err(TypeError::EmptySeries);
        }
        let n = values.len();
        if let Some(ts) = &timestamps {
            if ts.len() != n {
                return Err(TypeError::LengthMismatch {
                    field: "timestamps",
                    expected: n,
                    got: ts.len(),
                });
            }
        }
        if let Some(ls) = &labels {
            if ls.len() != n {
                return Err(TypeError::LengthMismatch {
                    field: "labels",
                    expected: n,
                    got: ls.len(),
                });
            }
            if let Some((index, &value)) = ls.iter().enumerate().find(|(_, &l)| l > 1) {
                return Err(TypeError::InvalidLabel { index, value });
            }
        }
        Ok(Self {
            id: id.into(),
            values,
            timestamps,
            labels,
        })
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self, TypeError> {
        let s = Self::with_parts(
            std::mem::take(&mut self.id),
            std::mem::take(&mut self.values),
            self.timestamps.take(),
            Some(labels),
        )?;
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy of the half-open index range `[start, end)` with labels and
    /// timestamps carried along.
    pub fn slice(&self, id: impl Into<String>, start: usize, end: usize) -> Result<Self, TypeError> {
        let end = end.min(self.len());
        if start >= end {
            return Err(TypeError::EmptySeries);
        }
        Self::with_parts(
            id,
            self.values[start..end].to_vec(),
            self.timestamps.as_ref().map(|t| t[start..end].to_vec()),
            self.labels.as_ref().map(|l| l[start..end].to_vec()),
        )
    }
}

/// The four anomaly families, one per analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyFamily {
    Point,
    Structural,
    Seasonal,
    Pattern,
}

impl AnomalyFamily {
    /// Fixed analyzer order used everywhere bundles are listed.
    pub const ALL: [AnomalyFamily; 4] = [
        AnomalyFamily::Point,
        AnomalyFamily::Structural,
        AnomalyFamily::Seasonal,
        AnomalyFamily::Pattern,
    ];

    pub fn types(self) -> &'static [AnomalyType] {
        use AnomalyType::*;
        match self {
            AnomalyFamily::Point => &[GlobalPoint, ContextualPoint],
            AnomalyFamily::Structural => &[TrendChange, MeanChangePoint, VarianceChange],
            AnomalyFamily::Seasonal => &[AmplitudeChange, SeasonalityAnomaly],
            AnomalyFamily::Pattern => &[PatternShift, WaveformDistortion],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AnomalyFamily::Point => "point",
            AnomalyFamily::Structural => "structural",
            AnomalyFamily::Seasonal => "seasonal",
            AnomalyFamily::Pattern => "pattern",
        }
    }
}

impl fmt::Display for AnomalyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The nine anomaly types. Serialized as their integer id (1-9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum AnomalyType {
    GlobalPoint = 1,
    ContextualPoint = 2,
    AmplitudeChange = 3,
    SeasonalityAnomaly = 4,
    TrendChange = 5,
    MeanChangePoint = 6,
    VarianceChange = 7,
    PatternShift = 8,
    WaveformDistortion = 9,
}

impl AnomalyType {
    pub const ALL: [AnomalyType; 9] = [
        AnomalyType::GlobalPoint,
        AnomalyType::ContextualPoint,
        AnomalyType::AmplitudeChange,
        AnomalyType::SeasonalityAnomaly,
        AnomalyType::TrendChange,
        AnomalyType::MeanChangePoint,
        AnomalyType::VarianceChange,
        AnomalyType::PatternShift,
        AnomalyType::WaveformDistortion,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self, TypeError> {
        Self::ALL.get((id as usize).wrapping_sub(1)).copied().ok_or(TypeError::UnknownType(id))
    }

    pub fn family(self) -> AnomalyFamily {
        use AnomalyType::*;
        match self {
            GlobalPoint | ContextualPoint => AnomalyFamily::Point,
            AmplitudeChange | SeasonalityAnomaly => AnomalyFamily::Seasonal,
            TrendChange | MeanChangePoint | VarianceChange => AnomalyFamily::Structural,
            PatternShift | WaveformDistortion => AnomalyFamily::Pattern,
        }
    }

    pub fn name(self) -> &'static str {
        use AnomalyType::*;
        match self {
            GlobalPoint => "global point anomaly",
            ContextualPoint => "contextual point anomaly",
            AmplitudeChange => "amplitude change",
            SeasonalityAnomaly => "seasonality anomaly",
            TrendChange => "trend change",
            MeanChangePoint => "mean change point",
            VarianceChange => "variance change",
            PatternShift => "pattern shift",
            WaveformDistortion => "waveform distortion",
        }
    }

    /// Short identifier used in file names and CLI output.
    pub fn slug(self) -> &'static str {
        use AnomalyType::*;
        match self {
            GlobalPoint => "global_point",
            ContextualPoint => "contextual_point",
            AmplitudeChange => "amplitude_change",
            SeasonalityAnomaly => "seasonality",
            TrendChange => "trend_change",
            MeanChangePoint => "mean_change",
            VarianceChange => "variance_change",
            PatternShift => "pattern_shift",
            WaveformDistortion => "waveform_distortion",
        }
    }
}

impl From<AnomalyType> for u8 {
    fn from(t: AnomalyType) -> u8 {
        t.id()
    }
}

impl TryFrom<u8> for AnomalyType {
    type Error = TypeError;
    fn try_from(id: u8) -> Result<Self, Self::Error> {
        AnomalyType::from_id(id)
    }
}

impl fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id(), self.name())
    }
}

/// Inclusive index interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Result<Self, TypeError> {
        if start > end {
            return Err(TypeError::InvertedInterval { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn point(i: usize) -> Self {
        Self { start: i, end: i }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// Number of indices strictly between the two intervals (0 when they
    /// touch or overlap).
    pub fn gap_to(&self, other: &Interval) -> usize {
        if self.overlaps(other) {
            0
        } else if self.end < other.start {
            other.start - self.end - 1
        } else {
            self.start - other.end - 1
        }
    }

    pub fn shifted(&self, offset: usize) -> Self {
        Self {
            start: self.start + offset,
            end: self.end + offset,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Merge intervals whose separation (number of uncovered indices between
/// them) is at most `gap`. Overlapping and touching intervals always merge.
pub fn merge_intervals(intervals: &[Interval], gap: usize) -> Vec<Interval> {
    let mut sorted = intervals.to_vec();
    sorted.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match out.last_mut() {
            Some(last) if iv.start <= last.end.saturating_add(gap).saturating_add(1) => {
                last.end = last.end.max(iv.end);
            }
            _ => out.push(iv),
        }
    }
    out
}

/// Maximal runs of 1s as inclusive intervals.
pub fn labels_to_segments(labels: &[u8]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l != 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Interval { start: s, end: i - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Interval {
            start: s,
            end: labels.len() - 1,
        });
    }
    out
}

/// Rasterize intervals into a binary sequence of length `n`; indices past
/// `n` are ignored.
pub fn segments_to_labels(segments: &[Interval], n: usize) -> Vec<u8> {
    let mut labels = vec![0u8; n];
    for iv in segments {
        for l in labels.iter_mut().take(iv.end.saturating_add(1).min(n)).skip(iv.start) {
            *l = 1;
        }
    }
    labels
}

/// One detected anomaly: an inclusive interval with a rubric score, the
/// candidate types and the supporting evidence.
///
/// JSON shape: `{index, end_index, confidence, types, evidence}` where
/// `confidence` is `raw_score / 100`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordWire", into = "RecordWire")]
pub struct AnomalyRecord {
    interval: Interval,
    raw_score: u8,
    types: Vec<AnomalyType>,
    evidence: String,
}

impl AnomalyRecord {
    /// `types` is ordered by priority (first = representative type);
    /// duplicates are removed keeping the first occurrence.
    pub fn new(interval: Interval, raw_score: u32, types: Vec<AnomalyType>, evidence: impl Into<String>) -> Result<Self, TypeError> {
        if raw_score > 100 {
            return Err(TypeError::ScoreOutOfRange(raw_score));
        }
        let types = dedup_types(types);
        if types.is_empty() {
            return Err(TypeError::NoTypes);
        }
        Ok(Self {
            interval,
            raw_score: raw_score as u8,
            types,
            evidence: evidence.into(),
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn start(&self) -> usize {
        self.interval.start
    }

    pub fn end(&self) -> usize {
        self.interval.end
    }

    pub fn raw_score(&self) -> u8 {
        self.raw_score
    }

    pub fn confidence(&self) -> f64 {
        f64::from(self.raw_score) / 100.0
    }

    pub fn types(&self) -> &[AnomalyType] {
        &self.types
    }

    pub fn top_type(&self) -> AnomalyType {
        self.types[0]
    }

    pub fn evidence(&self) -> &str {
        &self.evidence
    }

    pub fn shifted(mut self, offset: usize) -> Self {
        self.interval = self.interval.shifted(offset);
        self
    }

    /// Checks the record fits a series of length `n`.
    pub fn fits(&self, n: usize) -> bool {
        self.interval.end < n
    }
}

pub(crate) fn dedup_types(types: Vec<AnomalyType>) -> Vec<AnomalyType> {
    let mut out = Vec::with_capacity(types.len());
    for t in types {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    index: usize,
    end_index: usize,
    confidence: f64,
    types: Vec<AnomalyType>,
    #[serde(default)]
    evidence: String,
}

impl From<AnomalyRecord> for RecordWire {
    fn from(r: AnomalyRecord) -> Self {
        RecordWire {
            index: r.interval.start,
            end_index: r.interval.end,
            confidence: r.confidence(),
            types: r.types,
            evidence: r.evidence,
        }
    }
}

impl TryFrom<RecordWire> for AnomalyRecord {
    type Error = TypeError;
    fn try_from(w: RecordWire) -> Result<Self, Self::Error> {
        let interval = Interval::new(w.index, w.end_index)?;
        let raw = (w.confidence * 100.0).round();
        if !(0.0..=100.0).contains(&raw) {
            return Err(TypeError::ScoreOutOfRange(raw.max(0.0) as u32));
        }
        AnomalyRecord::new(interval, raw as u32, w.types, w.evidence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(s: usize, e: usize) -> Interval {
        Interval::new(s, e).unwrap()
    }

    /// Oracle: union of index sets, with every uncovered run of length
    /// <= gap strictly between covered indices filled in, then maximal runs.
    fn merge_oracle(intervals: &[Interval], gap: usize) -> Vec<Interval> {
        let max = intervals.iter().map(|i| i.end).max();
        let Some(max) = max else { return vec![] };
        let mut covered = vec![0u8; max + 1];
        for i in intervals {
            for c in &mut covered[i.start..=i.end] {
                *c = 1;
            }
        }
        let mut filled = covered.clone();
        let segs = labels_to_segments(&covered);
        for w in segs.windows(2) {
            if w[1].start - w[0].end - 1 <= gap {
                for c in &mut filled[w[0].end..w[1].start] {
                    *c = 1;
                }
            }
        }
        labels_to_segments(&filled)
    }

    #[test]
    fn merge_examples() {
        assert!(merge_intervals(&[], 2).is_empty());
        assert_eq!(merge_intervals(&[iv(3, 5), iv(7, 9)], 2), vec![iv(3, 9)]);
        let input = [iv(0, 0), iv(10, 12), iv(13, 13)];
        let expected = merge_oracle(&input, 0);
        assert_eq!(expected, vec![iv(0, 0), iv(10, 13)]);
        assert_eq!(merge_intervals(&input, 0), expected);
    }

    #[test]
    fn segments_examples() {
        assert!(labels_to_segments(&[0, 0, 0]).is_empty());
        assert_eq!(labels_to_segments(&[1, 1, 0, 1]), vec![iv(0, 1), iv(3, 3)]);
        assert_eq!(labels_to_segments(&[1; 5]), vec![iv(0, 4)]);
    }

    #[test]
    fn series_validation() {
        assert_eq!(Series::new("a", vec![]), Err(TypeError::EmptySeries));
        assert!(matches!(
            Series::with_parts("a", vec![1.0, 2.0], None, Some(vec![0])),
            Err(TypeError::LengthMismatch { .. })
        ));
        assert_eq!(
            Series::with_parts("a", vec![1.0, 2.0], None, Some(vec![0, 2])),
            Err(TypeError::InvalidLabel { index: 1, value: 2 })
        );
    }

    #[test]
    fn taxonomy_families() {
        use AnomalyFamily::*;
        let expected = [Point, Point, Seasonal, Seasonal, Structural, Structural, Structural, Pattern, Pattern];
        for (t, fam) in AnomalyType::ALL.iter().zip(expected) {
            assert_eq!(t.family(), fam);
            assert!(fam.types().contains(t));
        }
        assert_eq!(AnomalyType::from_id(0), Err(TypeError::UnknownType(0)));
        assert_eq!(AnomalyType::from_id(10), Err(TypeError::UnknownType(10)));
    }

    #[test]
    fn record_json_shape() {
        let r = AnomalyRecord::new(iv(10, 12), 80, vec![AnomalyType::MeanChangePoint], "shift").unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"index": 10, "end_index": 12, "confidence": 0.8, "types": [6], "evidence": "shift"})
        );
        let back: AnomalyRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.confidence(), 0.8);
    }

    fn arb_intervals() -> impl Strategy<Value = Vec<Interval>> {
        prop::collection::vec((0usize..60, 0usize..6), 0..12).prop_map(|v| v.into_iter().map(|(s, l)| Interval { start: s, end: s + l }).collect())
    }

    proptest! {
        #[test]
        fn merge_matches_oracle_and_is_idempotent(ivs in arb_intervals(), gap in 0usize..5) {
            let merged = merge_intervals(&ivs, gap);
            prop_assert_eq!(&merged, &merge_oracle(&ivs, gap));
            prop_assert_eq!(merge_intervals(&merged, gap), merged.clone());
            for w in merged.windows(2) {
                prop_assert!(w[1].start > w[0].end + gap + 1);
            }
        }

        #[test]
        fn segments_roundtrip(labels in prop::collection::vec(0u8..2, 0..80)) {
            let segs = labels_to_segments(&labels);
            prop_assert_eq!(segments_to_labels(&segs, labels.len()), labels);
        }
    }
}
