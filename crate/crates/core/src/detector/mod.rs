//! Evidence aggregation into scored anomaly records, with a deterministic
//! rubric backend and a completion-model backend.

mod backend;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::*;

use crate::agents::{parse_detector_response, render_prompt, AgentError, ParsedCandidate, Role};
use crate::analyzers::{merge_candidates, Candidate, EvidenceBundle};
use crate::icl::IclReference;
use crate::represent::{format_number, CompressedSummary};
use crate::tools::ImageMatrix;
use crate::types::{AnomalyFamily, AnomalyRecord, AnomalyType, Interval, TypeError};

/// Lowest raw score that is ever emitted.
pub const EMIT_MIN_SCORE: u32 = 50;
pub const AGREEMENT_BONUS: u32 = 10;
pub const DETECTOR_MERGE_GAP: usize = 2;
/// `(minimum strength, base score)`, strongest band first; weaker
/// candidates score [`WEAK_SCORE`].
pub const STRENGTH_BANDS: [(f64, u32); 4] = [(5.0, 85), (4.0, 70), (3.0, 60), (2.5, 50)];
pub const WEAK_SCORE: u32 = 30;
/// `(minimum interval length, score floor)` for candidates whose base band
/// is at least [`EMIT_MIN_SCORE`].
pub const CLUSTER_FLOORS: [(usize, u32); 2] = [(3, 70), (2, 60)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("invalid detector input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unparseable detector response after retry: {0}")]
    UnparseableResponse(String),
    #[error(transparent)]
    Record(#[from] TypeError),
}

impl From<AgentError> for DetectorError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::UnparseableResponse(s) => DetectorError::UnparseableResponse(s),
            AgentError::Backend(b) => DetectorError::Backend(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorInput {
    /// Global index of the window's first point.
    pub offset: usize,
    pub summary: CompressedSummary,
    /// One per family, in family order.
    pub bundles: Vec<EvidenceBundle>,
    pub references: Vec<IclReference>,
    pub images: Vec<ImageMatrix>,
    /// Gap bridged when merging candidates within a family.
    pub merge_gap: usize,
}

impl DetectorInput {
    pub fn new(
        offset: usize,
        summary: CompressedSummary,
        bundles: Vec<EvidenceBundle>,
        references: Vec<IclReference>,
        images: Vec<ImageMatrix>,
    ) -> Result<Self, DetectorError> {
        let families: Vec<AnomalyFamily> = bundles.iter().map(|b| b.family).collect();
        if families != AnomalyFamily::ALL {
            return Err(DetectorError::InvalidInput(format!(
                "need one bundle per family in order, got {families:?}"
            )));
        }
        if let Some(b) = bundles.iter().find(|b| !b.is_valid_for(summary.length)) {
            return Err(DetectorError::InvalidInput(format!(
                "{} bundle has out-of-scope or out-of-range candidates",
                b.family
            )));
        }
        Ok(DetectorInput {
            offset,
            summary,
            bundles,
            references,
            images,
            merge_gap: DETECTOR_MERGE_GAP,
        })
    }

    pub fn with_merge_gap(mut self, gap: usize) -> Self {
        self.merge_gap = gap;
        self
    }

    pub fn window_len(&self) -> usize {
        self.summary.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub interval: Interval,
    pub raw_score: u32,
    pub types: Vec<AnomalyType>,
    pub evidence: String,
    pub families: BTreeSet<AnomalyFamily>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub requests: usize,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

impl Usage {
    fn add(&mut self, c: &Completion) {
        self.requests += 1;
        self.prompt_tokens += c.prompt_tokens;
        self.completion_tokens += c.completion_tokens;
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, o: Usage) {
        self.requests += o.requests;
        self.prompt_tokens += o.prompt_tokens;
        self.completion_tokens += o.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub records: Vec<AnomalyRecord>,
    pub usage: Usage,
}

/// Scoring backend for [`detect`].
#[derive(Clone, Copy)]
pub enum Scoring<'a> {
    Rule,
    Completion(&'a dyn CompletionBackend),
}

/// Candidates of every bundle, merged within each family.
pub fn pooled_candidates(bundles: &[EvidenceBundle], gap: usize) -> Vec<(AnomalyFamily, Candidate)> {
    bundles
        .iter()
        .flat_map(|b| merge_candidates(b.candidates.clone(), gap).into_iter().map(move |c| (b.family, c)))
        .collect()
}

fn base_score(strength: f64) -> u32 {
    STRENGTH_BANDS.iter().find(|(s, _)| strength >= *s).map_or(WEAK_SCORE, |b| b.1)
}

/// Families other than `family` with a candidate overlapping `interval`.
fn agreeing(interval: &Interval, family: AnomalyFamily, bundles: &[EvidenceBundle]) -> BTreeSet<AnomalyFamily> {
    bundles
        .iter()
        .filter(|b| b.family != family && b.candidates.iter().any(|c| c.interval.overlaps(interval)))
        .map(|b| b.family)
        .collect()
}

/// Rubric score: strength band, plus a bonus per agreeing family, floored
/// for multi-point clusters when the band is already emit-worthy, capped
/// at 100.
pub fn rule_score(candidate: &Candidate, family: AnomalyFamily, bundles: &[EvidenceBundle]) -> u32 {
    let base = base_score(candidate.strength);
    let agree = agreeing(&candidate.interval, family, bundles).len() as u32;
    let mut score = base + AGREEMENT_BONUS * agree;
    if base >= EMIT_MIN_SCORE {
        if let Some((_, floor)) = CLUSTER_FLOORS.iter().find(|(len, _)| candidate.interval.len() >= *len) {
            score = score.max(*floor);
        }
    }
    score.min(100)
}

/// Every pooled candidate scored by the rubric, including those below
/// the emit threshold.
pub fn rule_candidates(input: &DetectorInput) -> Vec<ScoredCandidate> {
    pooled_candidates(&input.bundles, input.merge_gap)
        .into_iter()
        .map(|(family, c)| {
            let mut families = agreeing(&c.interval, family, &input.bundles);
            families.insert(family);
            ScoredCandidate {
                interval: c.interval,
                raw_score: rule_score(&c, family, &input.bundles),
                types: c.types.clone(),
                evidence: format!("{family}: {} (strength {})", c.note, format_number(c.strength)),
                families,
            }
        })
        .collect()
}

fn from_parsed(p: ParsedCandidate, input: &DetectorInput) -> Option<ScoredCandidate> {
    let n = input.window_len();
    if p.interval.start >= n {
        log::warn!("dropping detector interval {} outside window of {n}", p.interval);
        return None;
    }
    let interval = Interval {
        start: p.interval.start,
        end: p.interval.end.min(n - 1),
    };
    let notes: Vec<String> = pooled_candidates(&input.bundles, input.merge_gap)
        .into_iter()
        .filter(|(_, c)| c.interval.overlaps(&interval))
        .map(|(f, c)| format!("{f}: {}", c.note))
        .collect();
    Some(ScoredCandidate {
        interval,
        raw_score: p.raw_score,
        families: p.types.iter().map(|t| t.family()).collect(),
        types: p.types,
        evidence: if notes.is_empty() {
            "reported by the detector without an analyzer candidate".into()
        } else {
            notes.join("; ")
        },
    })
}

/// Render the detector prompt, query the backend and parse the answer;
/// a malformed answer is retried once with a repair instruction.
pub fn completion_candidates(input: &DetectorInput, backend: &dyn CompletionBackend) -> Result<(Vec<ScoredCandidate>, Usage), DetectorError> {
    let prompt = render_prompt(Role::Detector, &input.summary, &input.bundles, &input.references, &input.images);
    let mut usage = Usage::default();
    let first = backend.complete(&prompt)?;
    usage.add(&first);
    let parsed = match parse_detector_response(&first.text) {
        Ok(p) => p,
        Err(AgentError::UnparseableResponse(why)) => {
            log::warn!("detector answer unparseable ({why}); retrying once");
            let second = backend.complete(&prompt.with_repair())?;
            usage.add(&second);
            parse_detector_response(&second.text)?
        }
        Err(e) => return Err(e.into()),
    };
    Ok((parsed.into_iter().filter_map(|p| from_parsed(p, input)).collect(), usage))
}

/// Score, filter at [`EMIT_MIN_SCORE`], shift to global indices and sort.
pub fn detect(input: &DetectorInput, scoring: Scoring<'_>) -> Result<Detection, DetectorError> {
    let (cands, usage) = match scoring {
        Scoring::Rule => (rule_candidates(input), Usage::default()),
        Scoring::Completion(b) => completion_candidates(input, b)?,
    };
    let mut records = cands
        .into_iter()
        .filter(|c| c.raw_score >= EMIT_MIN_SCORE)
        .map(|c| AnomalyRecord::new(c.interval, c.raw_score, c.types, c.evidence).map(|r| r.shifted(input.offset)))
        .collect::<Result<Vec<_>, _>>()?;
    sort_records(&mut records);
    Ok(Detection { records, usage })
}

/// Order by start, then end, then descending score.
pub fn sort_records(records: &mut [AnomalyRecord]) {
    records.sort_by(|a, b| {
        a.start()
            .cmp(&b.start())
            .then(a.end().cmp(&b.end()))
            .then(b.raw_score().cmp(&a.raw_score()))
            .then(a.types().cmp(b.types()))
            .then(a.evidence().cmp(b.evidence()))
    });
}

/// Binary predictions of length `n`: covered by a record with confidence
/// at least `tau`.
pub fn threshold(records: &[AnomalyRecord], tau: f64, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    for r in records.iter().filter(|r| r.confidence() >= tau) {
        let end = r.end().min(n.saturating_sub(1));
        for v in out.iter_mut().take(end + 1).skip(r.start()) {
            *v = 1;
        }
    }
    out
}
