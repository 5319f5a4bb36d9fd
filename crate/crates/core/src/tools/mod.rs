//! Deterministic numerical and visual tools used by the analyzers.

mod change;
mod decompose;
mod image;
mod rolling;
mod sax;
mod spectral;
mod stats;

use thiserror::Error;

pub use change::*;
pub use decompose::*;
pub use image::*;
pub use rolling::*;
pub use sax::*;
pub use spectral::*;
pub use stats::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("series too short: need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("period {period} too large for a series of length {len}")]
    PeriodTooLarge { period: usize, len: usize },
    #[error("segments too short: need {need} points per side, got {left} and {right}")]
    SegmentTooShort { need: usize, left: usize, right: usize },
    #[error("reference prefix too short: need {need} points, got {got}")]
    PrefixTooShort { need: usize, got: usize },
    #[error("no dominant period found")]
    NoPeriodFound,
    #[error("image rendering failed: {0}")]
    Render(String),
}
