//! Point family: global z outliers and context-relative deviations.

use std::collections::BTreeMap;

use super::{fmt, merge_candidates, AnalyzerError, Candidate, EvidenceBundle, CANDIDATE_MERGE_GAP, MAX_STRENGTH};
use crate::represent::CompressedSummary;
use crate::tools::{detect_outliers, rolling_statistics, statistics, DEFAULT_WINDOWS};
use crate::types::{AnomalyFamily, AnomalyType, Interval, Series};

pub const POINT_MIN_LEN: usize = 4;

pub fn point_analyze(window: &Series, summary: &CompressedSummary) -> Result<EvidenceBundle, AnalyzerError> {
    let x = window.values();
    let n = x.len();
    if n < POINT_MIN_LEN {
        return Err(AnalyzerError::TooShort {
            family: AnomalyFamily::Point,
            need: POINT_MIN_LEN,
            got: n,
        });
    }
    let mut bundle = EvidenceBundle::new(AnomalyFamily::Point);
    let stats = statistics(x)?;
    bundle.summarize_tool(
        "statistics",
        format!(
            "mean={} std={} skew={} kurt={} min={} max={}",
            fmt(stats.mean),
            fmt(stats.std),
            fmt(stats.skewness),
            fmt(stats.kurtosis),
            fmt(stats.min),
            fmt(stats.max)
        ),
    );

    let outliers = detect_outliers(x)?;
    bundle.summarize_tool(
        "outliers",
        format!(
            "z>={}: {} point(s) {}; iqr fences [{}, {}]: {} point(s)",
            outliers.z_threshold,
            outliers.z_indices.len(),
            list(outliers.z_indices.iter().map(|&(i, z)| format!("{i}(z={})", fmt(z)))),
            fmt(outliers.q1 - outliers.iqr_multiplier * (outliers.q3 - outliers.q1)),
            fmt(outliers.q3 + outliers.iqr_multiplier * (outliers.q3 - outliers.q1)),
            outliers.iqr_indices.len()
        ),
    );
    let mut cands: Vec<Candidate> = outliers
        .z_indices
        .iter()
        .map(|&(i, z)| Candidate {
            interval: Interval::point(i),
            types: vec![AnomalyType::GlobalPoint],
            strength: z.abs().min(MAX_STRENGTH),
            note: format!("global z={}", fmt(z)),
        })
        .collect();

    let windows: Vec<usize> = DEFAULT_WINDOWS.iter().copied().filter(|&w| w >= 3 && w <= n).collect();
    if windows.is_empty() {
        bundle.summarize_tool("rolling_statistics", "window too short for rolling scales");
    } else {
        let rolling = rolling_statistics(x, &windows)?;
        // strongest local |z| per index across scales
        let mut local: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for h in &rolling.contextual {
            let e = local.entry(h.index).or_insert((0.0, h.window));
            if h.z.abs() > e.0.abs() {
                *e = (h.z, h.window);
            }
        }
        let global: Vec<usize> = outliers.z_indices.iter().map(|p| p.0).collect();
        bundle.summarize_tool(
            "rolling_statistics",
            format!(
                "scales {:?}, local |z|>={}: {} point(s) {}",
                windows,
                rolling.threshold,
                local.len(),
                list(local.iter().map(|(i, (z, w))| format!("{i}(z={},w={w})", fmt(*z))))
            ),
        );
        cands.extend(local.into_iter().filter(|(i, _)| !global.contains(i)).map(|(i, (z, w))| Candidate {
            interval: Interval::point(i),
            types: vec![AnomalyType::ContextualPoint],
            strength: z.abs().min(MAX_STRENGTH),
            note: format!("local z={} (window {w})", fmt(z)),
        }));
    }

    bundle.candidates = merge_candidates(cands, CANDIDATE_MERGE_GAP);
    bundle.summary = format!(
        "Point analysis of {} points (mean {}, std {}): {} candidate(s)",
        summary.length,
        fmt(summary.mean),
        fmt(summary.std),
        bundle.candidates.len()
    );
    Ok(bundle)
}

/// Comma-joined listing truncated to the first twelve items.
pub(crate) fn list(items: impl Iterator<Item = String>) -> String {
    let all: Vec<String> = items.collect();
    let shown = all.iter().take(12).cloned().collect::<Vec<_>>().join(", ");
    if all.len() > 12 {
        format!("[{shown}, ... {} more]", all.len() - 12)
    } else {
        format!("[{shown}]")
    }
}
