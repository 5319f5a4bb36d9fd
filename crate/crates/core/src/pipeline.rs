//! Window-level and series-level orchestration: summarize, analyze,
//! retrieve references, score, then supervise.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{supervise, supervise_with_backend, AgentError, DiagnosisReport};
use crate::analyzers::run_all;
use crate::detector::{detect, sort_records, CompletionBackend, DetectorError, DetectorInput, Scoring, Usage, DETECTOR_MERGE_GAP};
use crate::icl::{retrieve_k, IclDb, TOP_K};
use crate::ingest::{windows, WindowPlan};
use crate::represent::summarize;
use crate::tools::{statistics, ToolError};
use crate::types::{AnomalyFamily, AnomalyRecord, Interval, Series};

pub const DEFAULT_TOKEN_BUDGET: usize = 300;
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("series `{0}` is shorter than one point")]
    EmptySeries(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub plan: WindowPlan,
    pub token_budget: usize,
    pub merge_gap: usize,
    /// Prototypes consulted per window when a reference database is given.
    pub top_k: usize,
    /// Supervisor confirmation threshold.
    pub tau: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            plan: WindowPlan::default(),
            token_budget: DEFAULT_TOKEN_BUDGET,
            merge_gap: DETECTOR_MERGE_GAP,
            top_k: TOP_K,
            tau: DEFAULT_TAU,
        }
    }
}

/// Detector output for one window, in global indices.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub offset: usize,
    pub len: usize,
    pub records: Vec<AnomalyRecord>,
    /// Every analyzer candidate interval with its family.
    pub evidence: Vec<(AnomalyFamily, Interval)>,
    pub summary_tokens: usize,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub id: String,
    pub records: Vec<AnomalyRecord>,
    pub evidence: Vec<(AnomalyFamily, Interval)>,
    pub report: DiagnosisReport,
    pub windows: usize,
    pub usage: Usage,
}

/// Run one window whose first point has global index `offset`.
pub fn run_window(
    window: &Series,
    offset: usize,
    cfg: &PipelineConfig,
    db: Option<&IclDb>,
    scoring: Scoring<'_>,
) -> Result<WindowResult, PipelineError> {
    let started = Instant::now();
    let summary = summarize(window, cfg.token_budget);
    let bundles = run_all(window, &summary);
    let evidence: Vec<(AnomalyFamily, Interval)> = bundles
        .iter()
        .flat_map(|b| b.candidates.iter().map(move |c| (b.family, c.interval.shifted(offset))))
        .collect();
    let types: BTreeSet<_> = bundles.iter().flat_map(|b| &b.candidates).flat_map(|c| c.types.iter().copied()).collect();
    let references = match db {
        Some(db) if !types.is_empty() => match retrieve_k(db, window.values(), &types, cfg.top_k) {
            Ok(r) => r.references,
            Err(e) => {
                log::warn!("{}@{offset}: retrieval skipped: {e}", window.id);
                Vec::new()
            }
        },
        _ => Vec::new(),
    };
    let images = bundles.iter().flat_map(|b| b.images.iter().cloned()).collect();
    let summary_tokens = summary.estimated_tokens;
    let input = DetectorInput::new(offset, summary, bundles, references, images)?.with_merge_gap(cfg.merge_gap);
    let detection = detect(&input, scoring)?;
    log::info!(
        "{}@{offset}: {} records, {summary_tokens} summary tokens, {} prompt tokens, {:.1} ms",
        window.id,
        detection.records.len(),
        detection.usage.prompt_tokens,
        started.elapsed().as_secs_f64() * 1e3
    );
    Ok(WindowResult {
        offset,
        len: window.len(),
        records: detection.records,
        evidence,
        summary_tokens,
        usage: detection.usage,
    })
}

/// Run every window of `series`, then supervise the pooled records. The
/// supervisor uses the rule path unless a backend is given.
pub fn run_series(
    series: &Series,
    cfg: &PipelineConfig,
    db: Option<&IclDb>,
    scoring: Scoring<'_>,
    supervisor: Option<&dyn CompletionBackend>,
) -> Result<SeriesResult, PipelineError> {
    if series.is_empty() {
        return Err(PipelineError::EmptySeries(series.id.clone()));
    }
    let mut records = Vec::new();
    let mut evidence = Vec::new();
    let mut usage = Usage::default();
    let parts = windows(series, cfg.plan);
    for (offset, w) in &parts {
        let r = run_window(w, *offset, cfg, db, scoring)?;
        records.extend(r.records);
        evidence.extend(r.evidence);
        usage += r.usage;
    }
    sort_records(&mut records);
    records.dedup();
    let stats = statistics(series.values())?;
    let report = match supervisor {
        Some(b) => supervise_with_backend(&records, &stats, cfg.tau, b)?,
        None => supervise(&records, &stats, cfg.tau),
    };
    Ok(SeriesResult {
        id: series.id.clone(),
        records,
        evidence,
        report,
        windows: parts.len(),
        usage,
    })
}
