//! Multi-scale rolling statistics and contextual (local) outliers.

use serde::{Deserialize, Serialize};

use super::stats::{min_max, CONSTANT_EPS};
use super::ToolError;

pub const LOCAL_Z_THRESHOLD: f64 = 2.5;
pub const DEFAULT_WINDOWS: [usize; 3] = [10, 25, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingScale {
    pub window: usize,
    /// Centered rolling mean; windows are truncated at the edges.
    pub mean: Vec<f64>,
    /// Centered rolling population std, truncated at the edges.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextualHit {
    pub index: usize,
    /// Signed local z-score at the scale where `|z|` is largest.
    pub z: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReport {
    pub scales: Vec<RollingScale>,
    pub contextual: Vec<ContextualHit>,
    pub threshold: f64,
}

fn centered_bounds(i: usize, w: usize, n: usize) -> (usize, usize) {
    let left = (w - 1) / 2;
    let right = w / 2;
    (i.saturating_sub(left), (i + right + 1).min(n))
}

/// Full-width window around `i` shifted inward at the edges.
fn shifted_bounds(i: usize, w: usize, n: usize) -> (usize, usize) {
    let left = (w - 1) / 2;
    let start = i.saturating_sub(left).min(n - w);
    (start, start + w)
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Rolling mean/std at every requested scale, plus contextual candidates.
///
/// A point is a contextual candidate when, at some scale `w`, its deviation
/// from the mean of the other `w - 1` points of its window is at least
/// `LOCAL_Z_THRESHOLD` times their std. The comparison window keeps its
/// full width near the edges.
pub fn rolling_statistics(x: &[f64], windows: &[usize]) -> Result<RollingReport, ToolError> {
    let n = x.len();
    if windows.is_empty() {
        return Err(ToolError::InvalidParameter("no rolling windows".into()));
    }
    for &w in windows {
        if w < 3 {
            return Err(ToolError::InvalidParameter(format!("rolling window {w} < 3")));
        }
        if w > n {
            return Err(ToolError::TooShort { need: w, got: n });
        }
    }
    let (lo, hi) = min_max(x);
    let floor = CONSTANT_EPS * lo.abs().max(hi.abs()).max(1.0);

    let mut scales = Vec::with_capacity(windows.len());
    let mut best: Vec<Option<ContextualHit>> = vec![None; n];
    let mut neighbours = Vec::new();
    for &w in windows {
        let mut mean = Vec::with_capacity(n);
        let mut std = Vec::with_capacity(n);
        for i in 0..n {
            let (s, e) = centered_bounds(i, w, n);
            let (m, sd) = moments(&x[s..e]);
            mean.push(m);
            std.push(sd);

            let (s, e) = shifted_bounds(i, w, n);
            neighbours.clear();
            neighbours.extend(x[s..e].iter().enumerate().filter(|(j, _)| s + j != i).map(|(_, v)| *v));
            let (m, sd) = moments(&neighbours);
            if sd <= floor {
                continue;
            }
            let z = (x[i] - m) / sd;
            if z.abs() >= LOCAL_Z_THRESHOLD && best[i].is_none_or(|b| z.abs() > b.z.abs()) {
                best[i] = Some(ContextualHit { index: i, z, window: w });
            }
        }
        scales.push(RollingScale { window: w, mean, std });
    }
    Ok(RollingReport {
        scales,
        contextual: best.into_iter().flatten().collect(),
        threshold: LOCAL_Z_THRESHOLD,
    })
}
