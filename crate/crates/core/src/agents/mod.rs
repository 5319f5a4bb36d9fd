//! Prompt templates, prompt rendering, detector-response parsing and the
//! Supervisor report.

mod parse;
mod supervisor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::*;
pub use supervisor::*;

use crate::analyzers::EvidenceBundle;
use crate::detector::BackendError;
use crate::icl::IclReference;
use crate::represent::{estimate_tokens, format_number, CompressedSummary};
use crate::tools::{downsample_mean, ImageMatrix};
use crate::types::AnomalyFamily;

pub const GLOBAL_RULES: &str = include_str!("../../assets/prompts/global_rules.txt");
pub const POINT_ANALYZER_PROMPT: &str = include_str!("../../assets/prompts/point_analyzer.txt");
pub const SEASON_ANALYZER_PROMPT: &str = include_str!("../../assets/prompts/season_analyzer.txt");
pub const STRUCT_ANALYZER_PROMPT: &str = include_str!("../../assets/prompts/struct_analyzer.txt");
pub const PATTERN_ANALYZER_PROMPT: &str = include_str!("../../assets/prompts/pattern_analyzer.txt");
pub const DETECTOR_PROMPT: &str = include_str!("../../assets/prompts/detector.txt");
pub const SUPERVISOR_PROMPT: &str = include_str!("../../assets/prompts/supervisor.txt");
pub const REPAIR_PROMPT: &str = include_str!("../../assets/prompts/repair.txt");
/// Bumped whenever an asset above changes wording.
pub const PROMPT_VERSION: &str = "1";
/// Reference excerpts are block-averaged to this many values.
pub const EXCERPT_LEN: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("unparseable response: {0}")]
    UnparseableResponse(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    PointAnalyzer,
    StructAnalyzer,
    SeasonAnalyzer,
    PatternAnalyzer,
    Detector,
    Supervisor,
}

impl Role {
    pub fn template(self) -> &'static str {
        match self {
            Role::PointAnalyzer => POINT_ANALYZER_PROMPT,
            Role::StructAnalyzer => STRUCT_ANALYZER_PROMPT,
            Role::SeasonAnalyzer => SEASON_ANALYZER_PROMPT,
            Role::PatternAnalyzer => PATTERN_ANALYZER_PROMPT,
            Role::Detector => DETECTOR_PROMPT,
            Role::Supervisor => SUPERVISOR_PROMPT,
        }
    }

    /// Family an analyzer role is scoped to.
    pub fn family(self) -> Option<AnomalyFamily> {
        match self {
            Role::PointAnalyzer => Some(AnomalyFamily::Point),
            Role::StructAnalyzer => Some(AnomalyFamily::Structural),
            Role::SeasonAnalyzer => Some(AnomalyFamily::Seasonal),
            Role::PatternAnalyzer => Some(AnomalyFamily::Pattern),
            Role::Detector | Role::Supervisor => None,
        }
    }

    /// Global rules followed by the role template.
    pub fn system_text(self) -> String {
        format!("{}\n{}", GLOBAL_RULES, self.template())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub role: Role,
    pub system: String,
    pub user: String,
    /// PNG-encoded images.
    pub images: Vec<Vec<u8>>,
    pub estimated_tokens: usize,
}

impl PromptBundle {
    pub fn new(role: Role, system: String, user: String, images: Vec<Vec<u8>>) -> Self {
        let estimated_tokens = estimate_tokens(&system) + estimate_tokens(&user);
        PromptBundle {
            role,
            system,
            user,
            images,
            estimated_tokens,
        }
    }

    /// Same prompt with the repair instruction appended to the user text.
    pub fn with_repair(&self) -> Self {
        PromptBundle::new(
            self.role,
            self.system.clone(),
            format!("{}\n\n{}", self.user, REPAIR_PROMPT),
            self.images.clone(),
        )
    }
}

fn excerpt(x: &[f64]) -> String {
    downsample_mean(x, EXCERPT_LEN)
        .iter()
        .map(|v| format_number(*v))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Evidence section for one bundle.
pub fn render_bundle(b: &EvidenceBundle) -> String {
    let mut s = format!("[{}] {}\n", b.family, b.summary);
    for (tool, text) in &b.tool_summaries {
        s.push_str(&format!("  {tool}: {text}\n"));
    }
    if b.candidates.is_empty() {
        s.push_str("  candidates: none\n");
    }
    for c in &b.candidates {
        let types: Vec<String> = c.types.iter().map(|t| t.id().to_string()).collect();
        s.push_str(&format!(
            "  candidate {} types [{}] strength {}: {}\n",
            c.interval,
            types.join(","),
            format_number(c.strength),
            c.note
        ));
    }
    s
}

/// Deterministic prompt assembly. Analyzer roles see only their own
/// family's bundle; the Detector sees all bundles and the references.
pub fn render_prompt(
    role: Role,
    summary: &CompressedSummary,
    bundles: &[EvidenceBundle],
    references: &[IclReference],
    images: &[ImageMatrix],
) -> PromptBundle {
    let mut user = format!("Window summary (length {})\n{}\n\nAnalyzer evidence\n", summary.length, summary.text);
    for b in bundles.iter().filter(|b| role.family().is_none_or(|f| f == b.family)) {
        user.push_str(&render_bundle(b));
    }
    if role == Role::Detector && !references.is_empty() {
        user.push_str("\nReference examples (synthetic normal/anomalous pairs)\n");
        for (i, r) in references.iter().enumerate() {
            user.push_str(&format!(
                "#{} {} type {} ({}), DTW distance {}\n  normal: {}\n  anomalous: {}\n  evidence: {}\n",
                i + 1,
                r.entry_id,
                r.anomaly_type.id(),
                r.anomaly_type.name(),
                format_number(r.distance),
                excerpt(&r.normal),
                excerpt(&r.anomalous),
                r.evidence
            ));
        }
    }
    let pngs = images
        .iter()
        .filter_map(|m| m.to_png().map_err(|e| log::warn!("dropping image: {e}")).ok())
        .collect();
    PromptBundle::new(role, role.system_text(), user, pngs)
}
