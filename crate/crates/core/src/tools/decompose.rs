//! Additive moving-average decomposition.

use serde::{Deserialize, Serialize};

use super::spectral::detect_period;
use super::ToolError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Period used for the seasonal component; `None` when no dominant
    /// period was found and the seasonal component is identically zero.
    pub period: Option<usize>,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Value at virtual index `i` under point-symmetric (odd) extension about
/// both end points.
fn odd_extended(x: &[f64], i: isize) -> f64 {
    let n = x.len() as isize;
    if i < 0 {
        let j = (-i).min(n - 1);
        2.0 * x[0] - x[j as usize]
    } else if i >= n {
        let j = (n - 1 - (i - (n - 1))).max(0);
        2.0 * x[(n - 1) as usize] - x[j as usize]
    } else {
        x[i as usize]
    }
}

/// Centered moving average of width `window`; even widths use the 2 x w
/// weighting (half weight on both end taps).
pub fn centered_moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    if window <= 1 || n == 0 {
        return x.to_vec();
    }
    let half = (window / 2) as isize;
    let even = window.is_multiple_of(2);
    (0..n as isize)
        .map(|i| {
            let mut acc = 0.0;
            for k in -half..=half {
                let w = if even && k.abs() == half { 0.5 } else { 1.0 };
                acc += w * odd_extended(x, i + k);
            }
            acc / window as f64
        })
        .collect()
}

/// Split `x` into trend + seasonal + residual. When `period` is `None`
/// the period is detected from the spectrum (restricted to at most n / 2).
pub fn decompose(x: &[f64], period: Option<usize>) -> Result<Decomposition, ToolError> {
    let n = x.len();
    if n < 4 {
        return Err(ToolError::TooShort { need: 4, got: n });
    }
    let period = match period {
        Some(p) if p < 2 => {
            return Err(ToolError::InvalidParameter(format!("period {p} < 2")));
        }
        Some(p) if 2 * p > n => return Err(ToolError::PeriodTooLarge { period: p, len: n }),
        Some(p) => Some(p),
        None => detect_period(x, 2, n / 2),
    };
    let Some(p) = period else {
        let trend = centered_moving_average(x, (n / 10).max(3));
        let residual = x.iter().zip(&trend).map(|(v, t)| v - t).collect();
        return Ok(Decomposition {
            period: None,
            seasonal: vec![0.0; n],
            trend,
            residual,
        });
    };
    let trend = centered_moving_average(x, p);
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for (i, (v, t)) in x.iter().zip(&trend).enumerate() {
        sums[i % p] += v - t;
        counts[i % p] += 1;
    }
    let profile: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let centre = profile.iter().sum::<f64>() / p as f64;
    let seasonal: Vec<f64> = (0..n).map(|i| profile[i % p] - centre).collect();
    let residual = x.iter().zip(&trend).zip(&seasonal).map(|((v, t), s)| v - t - s).collect();
    Ok(Decomposition {
        period: Some(p),
        trend,
        seasonal,
        residual,
    })
}
