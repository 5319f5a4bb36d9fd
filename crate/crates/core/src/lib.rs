//! Univariate time-series anomaly detection toolkit.

pub mod agents;
pub mod analyzers;
pub mod detector;
pub mod eval;
pub mod fsutil;
pub mod icl;
pub mod ingest;
pub mod inject;
pub mod pipeline;
pub mod represent;
pub mod tools;
pub mod types;

pub use types::*;
