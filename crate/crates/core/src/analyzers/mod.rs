//! The four family analyzers. Each runs its tool set over a window and
//! reports candidate intervals in a shared evidence format.

mod pattern;
mod point;
mod seasonal;
mod structural;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::represent::CompressedSummary;
use crate::tools::{ImageMatrix, ToolError};
use crate::types::{merge_intervals, AnomalyFamily, AnomalyType, Interval, Series};

pub use pattern::*;
pub use point::*;
pub use seasonal::*;
pub use structural::*;

/// Upper bound on candidate strength.
pub const MAX_STRENGTH: f64 = 10.0;
/// Candidates of one analyzer closer than this many points are merged.
pub const CANDIDATE_MERGE_GAP: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzerError {
    #[error("window too short for {family} analysis: need {need}, got {got}")]
    TooShort { family: AnomalyFamily, need: usize, got: usize },
    #[error(transparent)]
    Tool(#[from] ToolError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub interval: Interval,
    pub types: Vec<AnomalyType>,
    pub strength: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub family: AnomalyFamily,
    pub candidates: Vec<Candidate>,
    pub tool_summaries: BTreeMap<String, String>,
    /// Attached images; sent to the detector as PNGs, not in the JSON payload.
    #[serde(skip)]
    pub images: Vec<ImageMatrix>,
    pub summary: String,
}

impl EvidenceBundle {
    pub fn new(family: AnomalyFamily) -> Self {
        EvidenceBundle {
            family,
            candidates: Vec::new(),
            tool_summaries: BTreeMap::new(),
            images: Vec::new(),
            summary: String::new(),
        }
    }

    /// Bundle for an analyzer that could not run; the detector still sees
    /// all four families.
    pub fn failed(family: AnomalyFamily, reason: &str) -> Self {
        let mut b = EvidenceBundle::new(family);
        b.summary = format!("{family} analysis skipped: {reason}");
        b
    }

    pub fn summarize_tool(&mut self, tool: &str, text: impl Into<String>) {
        self.tool_summaries.insert(tool.to_string(), text.into());
    }

    /// Family scoping and bounds check.
    pub fn is_valid_for(&self, n: usize) -> bool {
        self.candidates
            .iter()
            .all(|c| !c.types.is_empty() && c.types.iter().all(|t| t.family() == self.family) && c.interval.end < n && c.strength >= 0.0)
    }
}

/// Two-sided p-value as the equivalent standard normal |z|, capped at
/// [`MAX_STRENGTH`].
pub fn p_to_strength(p: f64) -> f64 {
    if p.is_nan() || p <= 0.0 {
        return MAX_STRENGTH;
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(1.0 - (p / 2.0).min(0.5)).clamp(0.0, MAX_STRENGTH)
}

/// Merge candidates whose intervals lie within `gap` of each other: the
/// merged candidate keeps the union of types (strongest first), the max
/// strength and the joined notes.
pub fn merge_candidates(mut cands: Vec<Candidate>, gap: usize) -> Vec<Candidate> {
    cands.sort_by_key(|a| a.interval);
    let spans = merge_intervals(&cands.iter().map(|c| c.interval).collect::<Vec<_>>(), gap);
    spans
        .into_iter()
        .map(|span| {
            let mut members: Vec<&Candidate> = cands.iter().filter(|c| span.overlaps(&c.interval)).collect();
            members.sort_by(|a, b| b.strength.total_cmp(&a.strength));
            let mut types = Vec::new();
            for c in &members {
                for t in &c.types {
                    if !types.contains(t) {
                        types.push(*t);
                    }
                }
            }
            let mut notes: Vec<&str> = Vec::new();
            for c in &members {
                if !notes.contains(&c.note.as_str()) {
                    notes.push(&c.note);
                }
            }
            Candidate {
                interval: span,
                types,
                strength: members.first().map_or(0.0, |c| c.strength),
                note: notes.join("; "),
            }
        })
        .collect()
}

fn fmt(v: f64) -> String {
    crate::represent::format_number(v)
}

/// Run the four analyzers and return their bundles in the fixed order
/// Point, Structural, Seasonal, Pattern. A failing analyzer yields an
/// empty bundle whose summary records the failure.
pub fn run_all(window: &Series, summary: &CompressedSummary) -> Vec<EvidenceBundle> {
    type Analyzer = fn(&Series, &CompressedSummary) -> Result<EvidenceBundle, AnalyzerError>;
    let analyzers: [(AnomalyFamily, Analyzer); 4] = [
        (AnomalyFamily::Point, point_analyze),
        (AnomalyFamily::Structural, struct_analyze),
        (AnomalyFamily::Seasonal, season_analyze),
        (AnomalyFamily::Pattern, pattern_analyze),
    ];
    analyzers
        .iter()
        .map(|(family, f)| f(window, summary).unwrap_or_else(|e| EvidenceBundle::failed(*family, &e.to_string())))
        .collect()
}
