//! Run configuration: defaults, an optional JSON file, then flags.
//! Backend credentials are read from the environment only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsad_core::detector::DETECTOR_MERGE_GAP;
use tsad_core::eval::{ThresholdMode, DEFAULT_DELAY};
use tsad_core::icl::TOP_K;
use tsad_core::ingest::WindowPlan;
use tsad_core::pipeline::{PipelineConfig, DEFAULT_TAU, DEFAULT_TOKEN_BUDGET};

use crate::error::CliError;

pub const TOKEN_BUDGET_RANGE: (usize, usize) = (200, 500);
pub const MIN_WINDOW: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Deterministic rubric scoring.
    Rule,
    /// Canned answers read from `mock_dir`.
    Mock,
    /// HTTP completion endpoint from TSAD_BACKEND_URL / TSAD_API_KEY / TSAD_MODEL.
    Http,
}

/// A fixed threshold or `"best-f1"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Fixed(f64),
    BestF1,
}

impl Threshold {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "best-f1" => Ok(Threshold::BestF1),
            _ => s
                .parse()
                .map(Threshold::Fixed)
                .map_err(|_| format!("threshold `{s}` is neither a number nor best-f1")),
        }
    }

    pub fn mode(self) -> ThresholdMode {
        match self {
            Threshold::Fixed(t) => ThresholdMode::Fixed(t),
            Threshold::BestF1 => ThresholdMode::BestF1,
        }
    }

    /// Supervisor confirmation threshold.
    pub fn tau(self) -> f64 {
        match self {
            Threshold::Fixed(t) => t,
            Threshold::BestF1 => DEFAULT_TAU,
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threshold::Fixed(t) => s.serialize_f64(*t),
            Threshold::BestF1 => s.serialize_str("best-f1"),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(Threshold::Fixed(t)),
            Raw::Text(s) => Threshold::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub window: usize,
    pub stride: usize,
    /// Leading fraction of each series used to build references; `None`
    /// uses the whole training input.
    pub train_fraction: Option<f64>,
    pub token_budget: usize,
    pub merge_gap: usize,
    pub backend: BackendKind,
    pub mock_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    /// Reference database directory; retrieval is on when set.
    pub icl_dir: Option<PathBuf>,
    pub top_k: usize,
    pub segment_length: usize,
    pub seed: u64,
    pub threshold: Threshold,
    pub delay: usize,
    /// Send the supervisor prompt to the backend instead of the rule path.
    pub llm_supervisor: bool,
}

impl Default for Config {
    fn default() -> Self {
        let plan = WindowPlan::default();
        Config {
            window: plan.window,
            stride: plan.stride,
            train_fraction: None,
            token_budget: DEFAULT_TOKEN_BUDGET,
            merge_gap: DETECTOR_MERGE_GAP,
            backend: BackendKind::Rule,
            mock_dir: None,
            max_in_flight: tsad_core::detector::DEFAULT_MAX_IN_FLIGHT,
            icl_dir: None,
            top_k: TOP_K,
            segment_length: tsad_core::icl::DEFAULT_SEGMENT_LEN,
            seed: 0,
            threshold: Threshold::Fixed(DEFAULT_TAU),
            delay: DEFAULT_DELAY,
            llm_supervisor: false,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::InvalidConfig(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::InvalidConfig(m));
        if self.window < MIN_WINDOW {
            return bad(format!("window {} below {MIN_WINDOW}", self.window));
        }
        if self.stride == 0 || self.stride > self.window {
            return bad(format!("stride {} outside [1, window]", self.stride));
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("train_fraction {f} outside (0, 1)"));
            }
        }
        let (lo, hi) = TOKEN_BUDGET_RANGE;
        if !(lo..=hi).contains(&self.token_budget) {
            return bad(format!("token_budget {} outside [{lo}, {hi}]", self.token_budget));
        }
        if self.merge_gap > self.window {
            return bad(format!("merge_gap {} exceeds the window", self.merge_gap));
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if self.segment_length < tsad_core::icl::MIN_SEGMENT_LEN {
            return bad(format!(
                "segment_length {} below {}",
                self.segment_length,
                tsad_core::icl::MIN_SEGMENT_LEN
            ));
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1".into());
        }
        if let Threshold::Fixed(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("threshold {t} outside [0, 1]"));
            }
        }
        if self.backend == BackendKind::Mock && self.mock_dir.is_none() {
            return bad("backend mock needs mock_dir".into());
        }
        if self.llm_supervisor && self.backend == BackendKind::Rule {
            return bad("llm_supervisor needs a completion backend".into());
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            plan: WindowPlan {
                window: self.window,
                stride: self.stride,
            },
            token_budget: self.token_budget,
            merge_gap: self.merge_gap,
            top_k: self.top_k,
            tau: self.threshold.tau(),
        }
    }
}
