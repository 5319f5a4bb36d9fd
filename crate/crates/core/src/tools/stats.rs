//! Moments, quantiles and outlier screening.

use serde::{Deserialize, Serialize};

use super::ToolError;

/// Relative scale below which a series is treated as constant.
pub(crate) const CONSTANT_EPS: f64 = 1e-12;

/// Arithmetic mean, accumulated relative to the first value so constant
/// input returns that value exactly.
pub fn mean(x: &[f64]) -> f64 {
    let Some(&first) = x.first() else {
        return 0.0;
    };
    first + x.iter().map(|v| v - first).sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Sample variance (n - 1 denominator); 0 for fewer than two points.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// True when the spread is negligible relative to the magnitude.
pub(crate) fn is_constant(x: &[f64]) -> bool {
    let (lo, hi) = min_max(x);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    hi - lo <= CONSTANT_EPS * scale
}

pub(crate) fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Quantile of already-sorted data by linear interpolation between order
/// statistics (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Least-squares slope of `y` against its index.
pub fn ls_slope(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let tm = (n - 1) as f64 / 2.0;
    let ym = mean(y);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dt = i as f64 - tm;
        num += dt * (v - ym);
        den += dt * dt;
    }
    num / den
}

/// Remove the least-squares line.
pub fn detrend_linear(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let slope = ls_slope(y);
    let tm = (n.max(1) - 1) as f64 / 2.0;
    let ym = mean(y);
    y.iter().enumerate().map(|(i, v)| v - (ym + slope * (i as f64 - tm))).collect()
}

/// Z-normalize with the population std; constant input maps to zeros.
pub fn z_normalize(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let s = std_dev(x);
    if is_constant(x) || s == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - m) / s).collect()
}

/// Block-average `x` down to at most `max_len` points.
pub fn downsample_mean(x: &[f64], max_len: usize) -> Vec<f64> {
    if x.len() <= max_len {
        return x.to_vec();
    }
    let factor = x.len().div_ceil(max_len);
    x.chunks(factor).map(mean).collect()
}

/// Linear resampling to `len` points (endpoints preserved).
pub fn resample_linear(x: &[f64], len: usize) -> Vec<f64> {
    if x.len() == len || x.is_empty() {
        return x.to_vec();
    }
    if len == 1 {
        return vec![x[0]];
    }
    if x.len() == 1 {
        return vec![x[0]; len];
    }
    let scale = (x.len() - 1) as f64 / (len - 1) as f64;
    (0..len)
        .map(|i| {
            let pos = i as f64 * scale;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(x.len() - 1);
            let frac = pos - lo as f64;
            x[lo] + (x[hi] - x[lo]) * frac
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
}

/// Population moments. Constant input has zero skewness and kurtosis.
pub fn statistics(x: &[f64]) -> Result<StatsSummary, ToolError> {
    if x.is_empty() {
        return Err(ToolError::TooShort { need: 1, got: 0 });
    }
    let n = x.len() as f64;
    let m = mean(x);
    let (lo, hi) = min_max(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    if is_constant(x) || m2 == 0.0 {
        return Ok(StatsSummary {
            mean: m,
            std: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
            min: lo,
            max: hi,
        });
    }
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    Ok(StatsSummary {
        mean: m,
        std: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
        min: lo,
        max: hi,
    })
}

pub const Z_THRESHOLD: f64 = 3.0;
pub const IQR_MULTIPLIER: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    /// `(index, signed z-score)` for every `|z| >= z_threshold`.
    pub z_indices: Vec<(usize, f64)>,
    pub iqr_indices: Vec<usize>,
    pub z_threshold: f64,
    pub iqr_multiplier: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Global z-score and IQR fence outliers.
pub fn detect_outliers(x: &[f64]) -> Result<OutlierReport, ToolError> {
    if x.len() < 4 {
        return Err(ToolError::TooShort { need: 4, got: x.len() });
    }
    let m = mean(x);
    let s = std_dev(x);
    let constant = is_constant(x) || s == 0.0;
    let z_indices = if constant {
        Vec::new()
    } else {
        x.iter()
            .enumerate()
            .map(|(i, v)| (i, (v - m) / s))
            .filter(|(_, z)| z.abs() >= Z_THRESHOLD)
            .collect()
    };
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - IQR_MULTIPLIER * iqr, q3 + IQR_MULTIPLIER * iqr);
    let iqr_indices = x.iter().enumerate().filter(|(_, &v)| v < lo || v > hi).map(|(i, _)| i).collect();
    Ok(OutlierReport {
        z_indices,
        iqr_indices,
        z_threshold: Z_THRESHOLD,
        iqr_multiplier: IQR_MULTIPLIER,
        q1,
        q3,
    })
}

/// Forward difference of order 1 or 2.
pub fn difference(x: &[f64], order: usize) -> Result<Vec<f64>, ToolError> {
    if !(1..=2).contains(&order) {
        return Err(ToolError::InvalidParameter(format!("difference order {order}")));
    }
    if x.len() <= order {
        return Err(ToolError::TooShort {
            need: order + 1,
            got: x.len(),
        });
    }
    let mut d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    if order == 2 {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(d)
}
