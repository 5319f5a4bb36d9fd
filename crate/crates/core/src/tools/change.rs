//! CUSUM change points, two-sample segment comparison and regime
//! expansion around a change point.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::stats::{is_constant, mean, sample_variance};
use super::ToolError;

pub const CUSUM_DRIFT: f64 = 0.5;
pub const CUSUM_THRESHOLD: f64 = 5.0;
/// d2 constant for moving ranges of span 2.
const MOVING_RANGE_D2: f64 = 1.128;

pub const SIGNIFICANCE: f64 = 0.05;
pub const REFERENCE_WINDOW: usize = 100;
pub const MIN_REFERENCE: usize = 20;
pub const VERIFY_CHUNK: usize = 50;
pub const MIN_SEGMENT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// First index of the new regime.
    pub index: usize,
    pub direction: Direction,
    /// Peak cumulative sum (in sigma units) of the excursion.
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub points: Vec<ChangePoint>,
    pub threshold_sigma: f64,
    pub drift_sigma: f64,
}

/// Process sigma from the mean moving range, falling back to the
/// population std when the series has no point-to-point variation.
fn process_sigma(x: &[f64]) -> f64 {
    let mr = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (x.len() - 1) as f64;
    let s = mr / MOVING_RANGE_D2;
    if s > 0.0 {
        s
    } else {
        super::stats::std_dev(x)
    }
}

/// One side of the tabular CUSUM. `sign = 1` accumulates upward deviations.
fn one_sided(z: &[f64], sign: f64, out: &mut Vec<ChangePoint>) {
    let direction = if sign > 0.0 { Direction::Down } else { Direction::Up };
    let mut s = 0.0f64;
    let mut peak = 0.0f64;
    let mut peak_at = 0usize;
    for (i, &zi) in z.iter().enumerate() {
        s = (s + sign * zi - CUSUM_DRIFT).max(0.0);
        if s > peak {
            peak = s;
            peak_at = i;
        }
        if peak >= CUSUM_THRESHOLD && s <= peak - CUSUM_THRESHOLD {
            out.push(ChangePoint {
                index: (peak_at + 1).min(z.len() - 1),
                direction,
                statistic: peak,
            });
            s = 0.0;
            peak = 0.0;
        } else if s == 0.0 {
            peak = 0.0;
        }
    }
}

/// Two-sided CUSUM on the series standardized by its mean and its
/// moving-range sigma. A change is reported where an excursion of the
/// cumulative sum peaks above the threshold and then falls back by at
/// least the threshold; the statistic restarts after every alarm.
pub fn change_points(x: &[f64]) -> Result<ChangePointReport, ToolError> {
    if x.len() < 20 {
        return Err(ToolError::TooShort { need: 20, got: x.len() });
    }
    let mut points = Vec::new();
    if !is_constant(x) {
        let m = mean(x);
        let sigma = process_sigma(x);
        let z: Vec<f64> = x.iter().map(|v| (v - m) / sigma).collect();
        one_sided(&z, 1.0, &mut points);
        one_sided(&z, -1.0, &mut points);
        points.sort_by_key(|p| p.index);
    }
    Ok(ChangePointReport {
        points,
        threshold_sigma: CUSUM_THRESHOLD,
        drift_sigma: CUSUM_DRIFT,
    })
}

/// Minimum points on each side of a scanned kink or step.
pub const SCAN_MIN_SIDE: usize = 20;

/// Best continuous broken line (one kink) fitted to a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeChange {
    /// First index after the kink.
    pub index: usize,
    pub slope_before: f64,
    pub slope_after: f64,
    /// F statistic of the broken line against a single line.
    pub f_stat: f64,
    /// F-test p-value, Bonferroni-corrected over the scanned positions.
    pub p_value: f64,
    pub line_sse: f64,
    pub hinge_sse: f64,
    /// Residual sum of squares of the best line-plus-step model.
    pub step_sse: f64,
    #[serde(skip)]
    pub fitted: Vec<f64>,
}

/// Least squares on three regressors; returns coefficients and SSE.
#[allow(clippy::needless_range_loop)]
fn ols3(y: &[f64], row: impl Fn(usize) -> [f64; 3]) -> Option<([f64; 3], f64)> {
    let mut a = [[0.0; 4]; 3];
    for (i, v) in y.iter().enumerate() {
        let r = row(i);
        for j in 0..3 {
            for k in 0..3 {
                a[j][k] += r[j] * r[k];
            }
            a[j][3] += r[j] * v;
        }
    }
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        a.swap(c, piv);
        if a[c][c].abs() < 1e-12 {
            return None;
        }
        for r in 0..3 {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..4 {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let beta = [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]];
    let sse = y
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let r = row(i);
            (v - beta[0] * r[0] - beta[1] * r[1] - beta[2] * r[2]).powi(2)
        })
        .sum();
    Some((beta, sse))
}

/// Scan every kink position with at least [`SCAN_MIN_SIDE`] points on each
/// side and keep the broken line with the smallest residual. The best
/// line-plus-step model over the same positions is reported alongside so
/// callers can tell a slope change from a level shift.
pub fn slope_change(y: &[f64]) -> Result<SlopeChange, ToolError> {
    let n = y.len();
    let need = 2 * SCAN_MIN_SIDE + 1;
    if n < need {
        return Err(ToolError::TooShort { need, got: n });
    }
    let scale = n as f64;
    let t = |i: usize| (i as f64 - (n as f64 - 1.0) / 2.0) / scale;
    let line_slope = super::stats::ls_slope(y);
    let ym = mean(y);
    let line_sse: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - ym - line_slope * (i as f64 - (n as f64 - 1.0) / 2.0)).powi(2))
        .sum();
    let mut best: Option<(usize, [f64; 3], f64)> = None;
    let mut step_sse = f64::INFINITY;
    for k in SCAN_MIN_SIDE..=n - SCAN_MIN_SIDE {
        let kt = t(k);
        if let Some((beta, sse)) = ols3(y, |i| [1.0, t(i), (t(i) - kt).max(0.0)]) {
            if best.is_none_or(|b| sse < b.2) {
                best = Some((k, beta, sse));
            }
        }
        if let Some((_, sse)) = ols3(y, |i| [1.0, t(i), if i >= k { 1.0 } else { 0.0 }]) {
            step_sse = step_sse.min(sse);
        }
    }
    let (index, beta, hinge_sse) = best.ok_or(ToolError::TooShort { need, got: n })?;
    let kt = t(index);
    let fitted = (0..n).map(|i| beta[0] + beta[1] * t(i) + beta[2] * (t(i) - kt).max(0.0)).collect();
    let df = (n - 3) as f64;
    let f_stat = if hinge_sse > 0.0 {
        (line_sse - hinge_sse).max(0.0) / (hinge_sse / df)
    } else {
        f64::INFINITY
    };
    let scanned = (n - 2 * SCAN_MIN_SIDE + 1) as f64;
    let p = if f_stat.is_finite() {
        FisherSnedecor::new(1.0, df).map(|d| d.sf(f_stat)).unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(SlopeChange {
        index,
        slope_before: beta[1] / scale,
        slope_after: (beta[1] + beta[2]) / scale,
        f_stat,
        p_value: (p * scanned).min(1.0),
        line_sse,
        hinge_sse,
        step_sse,
        fitted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentComparison {
    /// Welch two-sample t-test p-value.
    pub mean_diff_p: f64,
    /// Two-sided F-test p-value on the variance ratio.
    pub var_diff_p: f64,
    /// `(mean_after - mean_before) / sd_before`.
    pub mean_shift_sigma: f64,
    /// `var_after / var_before` (sample variances).
    pub var_ratio: f64,
}

const EFFECT_CAP: f64 = 1e6;

/// Compare two samples; `before` is the reference.
pub fn compare_samples(before: &[f64], after: &[f64]) -> Result<SegmentComparison, ToolError> {
    let (na, nb) = (before.len(), after.len());
    if na < MIN_SEGMENT || nb < MIN_SEGMENT {
        return Err(ToolError::SegmentTooShort {
            need: MIN_SEGMENT,
            left: na,
            right: nb,
        });
    }
    let (ma, mb) = (mean(before), mean(after));
    let (va, vb) = (sample_variance(before), sample_variance(after));
    let scale = ma.abs().max(mb.abs()).max(1.0);
    let tiny = 1e-24 * scale * scale;
    let (za, zb) = (va <= tiny, vb <= tiny);
    let same_mean = (ma - mb).abs() <= 1e-12 * scale;

    let mean_diff_p = if za && zb {
        if same_mean {
            1.0
        } else {
            0.0
        }
    } else {
        let (sa, sb) = (va / na as f64, vb / nb as f64);
        let se = (sa + sb).sqrt();
        let t = (mb - ma) / se;
        let df = (sa + sb).powi(2) / (sa * sa / (na - 1) as f64 + sb * sb / (nb - 1) as f64);
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };

    let (var_ratio, var_diff_p) = match (za, zb) {
        (true, true) => (1.0, 1.0),
        (true, false) => (EFFECT_CAP, 0.0),
        (false, true) => (1.0 / EFFECT_CAP, 0.0),
        (false, false) => {
            let f = vb / va;
            let dist = FisherSnedecor::new((nb - 1) as f64, (na - 1) as f64).expect("positive dof");
            let p = 2.0 * dist.cdf(f).min(dist.sf(f));
            (f, p.min(1.0))
        }
    };

    let sd = if !za {
        va.sqrt()
    } else if !zb {
        vb.sqrt()
    } else {
        0.0
    };
    let mean_shift_sigma = if sd > 0.0 {
        ((mb - ma) / sd).clamp(-EFFECT_CAP, EFFECT_CAP)
    } else if same_mean {
        0.0
    } else {
        EFFECT_CAP.copysign(mb - ma)
    };
    Ok(SegmentComparison {
        mean_diff_p,
        var_diff_p,
        mean_shift_sigma,
        var_ratio,
    })
}

/// Compare `x[..split]` against `x[split..]`.
pub fn compare_segments(x: &[f64], split: usize) -> Result<SegmentComparison, ToolError> {
    let split = split.min(x.len());
    compare_samples(&x[..split], &x[split..])
}

impl SegmentComparison {
    pub fn differs(&self) -> bool {
        self.mean_diff_p < SIGNIFICANCE || self.var_diff_p < SIGNIFICANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeExpansion {
    /// `[change_index, end of last differing chunk]`; a single point when
    /// the first chunk already matches the reference.
    pub interval: crate::types::Interval,
    pub reference_start: usize,
    pub confirmed_chunks: usize,
}

/// Grow a regime forward from `change_index` in fixed chunks while each
/// chunk differs from the reference window that precedes the change.
pub fn regime_expand(x: &[f64], change_index: usize) -> Result<RegimeExpansion, ToolError> {
    let n = x.len();
    let change_index = change_index.min(n.saturating_sub(1));
    let reference_start = change_index.saturating_sub(REFERENCE_WINDOW);
    if change_index - reference_start < MIN_REFERENCE {
        return Err(ToolError::PrefixTooShort {
            need: MIN_REFERENCE,
            got: change_index - reference_start,
        });
    }
    let reference = &x[reference_start..change_index];
    let mut end = change_index;
    let mut confirmed_chunks = 0;
    let mut start = change_index;
    while start < n {
        let mut stop = (start + VERIFY_CHUNK).min(n);
        if n - stop < MIN_SEGMENT {
            stop = n;
        }
        if stop - start < MIN_SEGMENT {
            break;
        }
        let cmp = compare_samples(reference, &x[start..stop])?;
        if !cmp.differs() {
            break;
        }
        end = stop - 1;
        confirmed_chunks += 1;
        start = stop;
    }
    Ok(RegimeExpansion {
        interval: crate::types::Interval { start: change_index, end },
        reference_start,
        confirmed_chunks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Reference tabular CUSUM written directly from the recursion,
    /// returning the excursion peaks that later fall back by `h`.
    fn cusum_oracle(x: &[f64]) -> Vec<(usize, Direction)> {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let mr: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1.0);
        let sigma = mr / 1.128;
        let mut out = vec![];
        for (sign, dir) in [(1.0, Direction::Down), (-1.0, Direction::Up)] {
            let (mut s, mut peak, mut at) = (0.0f64, 0.0f64, 0);
            for (i, v) in x.iter().enumerate() {
                s = (s + sign * (v - m) / sigma - 0.5).max(0.0);
                if s > peak {
                    peak = s;
                    at = i;
                }
                if peak >= 5.0 && s <= peak - 5.0 {
                    out.push((at + 1, dir));
                    s = 0.0;
                    peak = 0.0;
                }
                if s == 0.0 {
                    peak = 0.0;
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn step_up_located() {
        let e = noise(100, 42);
        let x: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 10.0 } + e[i]).collect();
        let r = change_points(&x).unwrap();
        let got: Vec<(usize, Direction)> = r.points.iter().map(|p| (p.index, p.direction)).collect();
        assert_eq!(got, cusum_oracle(&x));
        assert_eq!(r.points.len(), 1);
        assert!((48..=55).contains(&r.points[0].index));
        assert_eq!(r.points[0].direction, Direction::Up);
    }

    #[test]
    fn step_down_direction() {
        let e = noise(200, 7);
        let x: Vec<f64> = (0..200).map(|i| if i < 100 { 0.0 } else { -5.0 } + e[i]).collect();
        let r = change_points(&x).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].direction, Direction::Down);
        assert!((95..=105).contains(&r.points[0].index));
    }

    #[test]
    fn constant_has_no_change_points() {
        assert!(change_points(&[1.0; 40]).unwrap().points.is_empty());
        assert!(change_points(&[1.0; 19]).is_err());
    }

    #[test]
    fn comparison_calibration() {
        let mut accepted = 0;
        for seed in 0..100 {
            let a = noise(100, 1000 + seed);
            let b = noise(100, 5000 + seed);
            if compare_samples(&a, &b).unwrap().mean_diff_p > 0.05 {
                accepted += 1;
            }
        }
        assert!(accepted >= 90, "{accepted}/100");
        let a = noise(50, 1);
        let b: Vec<f64> = noise(50, 2).iter().map(|v| v + 5.0).collect();
        let c = compare_samples(&a, &b).unwrap();
        assert!(c.mean_diff_p < 0.001);
        assert!(c.mean_shift_sigma > 3.0);
        let k = compare_segments(&[2.0; 20], 10).unwrap();
        assert_eq!((k.var_ratio, k.var_diff_p, k.mean_diff_p), (1.0, 1.0, 1.0));
        assert!(matches!(compare_segments(&[0.0; 8], 4), Err(ToolError::SegmentTooShort { .. })));
    }

    #[test]
    fn regime_examples() {
        let e = noise(400, 9);
        let step: Vec<f64> = (0..400).map(|i| e[i] + if i >= 200 { 5.0 } else { 0.0 }).collect();
        let r = regime_expand(&step, 200).unwrap();
        assert!(r.interval.end >= 395, "{:?}", r);
        let blip: Vec<f64> = (0..400).map(|i| e[i] + if (200..210).contains(&i) { 5.0 } else { 0.0 }).collect();
        let r = regime_expand(&blip, 200).unwrap();
        assert!(r.interval.end < 260, "{:?}", r);
        assert!(matches!(regime_expand(&step, 5), Err(ToolError::PrefixTooShort { .. })));
    }

    #[test]
    fn slope_change_finds_kink() {
        let y: Vec<f64> = (0..300)
            .map(|i| if i < 180 { 0.01 * i as f64 } else { 1.8 - 0.03 * (i - 180) as f64 })
            .collect();
        let sc = slope_change(&y).unwrap();
        assert!(sc.index.abs_diff(180) <= 1, "{}", sc.index);
        assert!((sc.slope_before - 0.01).abs() < 1e-6 && (sc.slope_after + 0.03).abs() < 1e-6);
        assert!(sc.hinge_sse < 1e-12 && sc.p_value < 1e-6);
        assert!(sc.fitted.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn slope_change_prefers_step_for_level_shift() {
        let y: Vec<f64> = (0..300)
            .map(|i| 0.002 * i as f64 + if i >= 150 { 3.0 } else { 0.0 } + 0.01 * ((i * 7919) % 13) as f64)
            .collect();
        let sc = slope_change(&y).unwrap();
        assert!(sc.step_sse < sc.hinge_sse);
    }
}
