//! Structural family: level shifts, variance changes and trend changes
//! located by CUSUM and confirmed by regime expansion.

use super::point::list;
use super::{fmt, merge_candidates, p_to_strength, AnalyzerError, Candidate, EvidenceBundle, CANDIDATE_MERGE_GAP};
use crate::represent::CompressedSummary;
use crate::tools::{change_points, compare_samples, decompose, median, regime_expand, slope_change, std_dev, Direction, ToolError, SIGNIFICANCE};
use crate::types::{AnomalyFamily, AnomalyType, Interval, Series};

pub const STRUCT_MIN_LEN: usize = 20;
pub const MEAN_SHIFT_MIN_SIGMA: f64 = 1.0;
pub const VAR_RATIO_BAND: (f64, f64) = (0.5, 2.0);
/// Slopes below this many residual sigmas per step count as flat.
pub const TREND_SLOPE_MIN_SIGMA: f64 = 0.02;
/// Change points closer than this are treated as one; regimes shorter
/// than this are dropped.
pub const CHANGE_POINT_DEDUP: usize = 10;

/// Median of lag-`n/4` differences divided by the lag. A level shift
/// affects fewer than half of the pairs, so it leaves the estimate alone.
pub fn robust_slope(y: &[f64]) -> f64 {
    let lag = (y.len() / 4).max(1);
    if y.len() <= lag {
        return 0.0;
    }
    let d: Vec<f64> = (0..y.len() - lag).map(|i| (y[i + lag] - y[i]) / lag as f64).collect();
    median(&d)
}

/// Common least-squares slope of `y` with a separate intercept for each
/// segment between `cuts`. Level shifts at the cuts do not bias it.
pub fn pooled_slope(y: &[f64], cuts: &[usize]) -> f64 {
    let mut bounds: Vec<usize> = cuts.iter().copied().filter(|&c| c > 0 && c < y.len()).collect();
    bounds.push(y.len());
    let (mut sxy, mut sxx, mut lo) = (0.0, 0.0, 0);
    for hi in bounds {
        if hi - lo >= 2 {
            let seg = &y[lo..hi];
            let tc = (seg.len() as f64 - 1.0) / 2.0;
            let ym = crate::tools::mean(seg);
            for (t, v) in seg.iter().enumerate() {
                sxy += (t as f64 - tc) * (v - ym);
                sxx += (t as f64 - tc).powi(2);
            }
        }
        lo = hi.max(lo);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Least-squares slope and its standard error over consecutive samples.
fn slope_with_se(y: &[f64]) -> (f64, f64) {
    let m = y.len() as f64;
    let tc = (m - 1.0) / 2.0;
    let sxx: f64 = (0..y.len()).map(|t| (t as f64 - tc).powi(2)).sum();
    let ym = crate::tools::mean(y);
    let slope = y.iter().enumerate().map(|(t, v)| (t as f64 - tc) * (v - ym)).sum::<f64>() / sxx;
    let ssr: f64 = y.iter().enumerate().map(|(t, v)| (v - ym - slope * (t as f64 - tc)).powi(2)).sum();
    let se = if y.len() > 2 { (ssr / (m - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (slope, se)
}

struct Finding {
    kind: AnomalyType,
    strength: f64,
    /// Uncapped z-scale statistic used for ordering.
    rank: f64,
    note: String,
}

fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let (va, vb) = (crate::tools::sample_variance(a), crate::tools::sample_variance(b));
    let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
    if se > 0.0 {
        ((crate::tools::mean(b) - crate::tools::mean(a)) / se).abs()
    } else {
        0.0
    }
}

/// Log variance ratio over its large-sample standard error.
fn log_var_z(a: &[f64], b: &[f64]) -> f64 {
    let (va, vb) = (crate::tools::sample_variance(a), crate::tools::sample_variance(b));
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    (vb / va).ln().abs() / (2.0 / (a.len() as f64 - 1.0) + 2.0 / (b.len() as f64 - 1.0)).sqrt()
}

fn classify(z: &[f64], w: &[f64], y: &[f64], reference: std::ops::Range<usize>, region: Interval, alpha: f64) -> Result<Vec<Finding>, ToolError> {
    let r = region.start..region.end + 1;
    let mut out = Vec::new();
    let mc = compare_samples(&z[reference.clone()], &z[r.clone()])?;
    if mc.mean_diff_p < alpha && mc.mean_shift_sigma.abs() >= MEAN_SHIFT_MIN_SIGMA {
        out.push(Finding {
            kind: AnomalyType::MeanChangePoint,
            strength: p_to_strength(mc.mean_diff_p),
            rank: welch_t(&z[reference.clone()], &z[r.clone()]),
            note: format!("mean shift {}σ (p={})", fmt(mc.mean_shift_sigma), fmt(mc.mean_diff_p)),
        });
    }
    let vc = compare_samples(&w[reference.clone()], &w[r.clone()])?;
    if vc.var_diff_p < alpha && (vc.var_ratio < VAR_RATIO_BAND.0 || vc.var_ratio > VAR_RATIO_BAND.1) {
        out.push(Finding {
            kind: AnomalyType::VarianceChange,
            strength: p_to_strength(vc.var_diff_p),
            rank: log_var_z(&w[reference.clone()], &w[r.clone()]),
            note: format!("variance ratio {} (p={})", fmt(vc.var_ratio), fmt(vc.var_diff_p)),
        });
    }
    let (sa, ea) = slope_with_se(&y[reference.clone()]);
    let (sb, eb) = slope_with_se(&y[r]);
    let sigma = std_dev(&crate::tools::detrend_linear(&z[reference]));
    let flat = TREND_SLOPE_MIN_SIGMA * sigma;
    let reversal = sa.abs() >= flat && sb.abs() >= flat && sa.signum() != sb.signum();
    let emerges = (sa.abs() < flat) != (sb.abs() < flat);
    let t = (sb - sa).abs() / (ea * ea + eb * eb).sqrt();
    let p = statrs::function::erf::erfc(t / std::f64::consts::SQRT_2);
    if (reversal || emerges) && (sb - sa).abs() >= flat && p < alpha {
        out.push(Finding {
            kind: AnomalyType::TrendChange,
            strength: p_to_strength(p),
            rank: t,
            note: format!("slope {} -> {} per step", fmt(sa), fmt(sb)),
        });
    }
    out.sort_by(|a, b| b.rank.total_cmp(&a.rank));
    Ok(out)
}

pub fn struct_analyze(window: &Series, summary: &CompressedSummary) -> Result<EvidenceBundle, AnalyzerError> {
    let x = window.values();
    let n = x.len();
    if n < STRUCT_MIN_LEN {
        return Err(AnalyzerError::TooShort {
            family: AnomalyFamily::Structural,
            need: STRUCT_MIN_LEN,
            got: n,
        });
    }
    let mut bundle = EvidenceBundle::new(AnomalyFamily::Structural);
    let d = decompose(x, None)?;
    bundle.summarize_tool(
        "decompose",
        match d.period {
            Some(p) => format!("period {p}; seasonal amplitude {}", fmt(std_dev(&d.seasonal))),
            None => "no dominant period; trend only".into(),
        },
    );
    // y: deseasonalized; z: y without its robust linear trend; w: x without the MA trend
    let y: Vec<f64> = x.iter().zip(&d.seasonal).map(|(v, s)| v - s).collect();
    let centre = (n as f64 - 1.0) / 2.0;
    let untilt = |slope: f64| -> Vec<f64> { y.iter().enumerate().map(|(i, v)| v - slope * (i as f64 - centre)).collect() };
    let mut cands = Vec::new();
    let kink = match slope_change(&y) {
        Ok(sc) => {
            let resid: Vec<f64> = y.iter().zip(&sc.fitted).map(|(a, b)| a - b).collect();
            let flat = TREND_SLOPE_MIN_SIGMA * std_dev(&resid);
            let accept = sc.p_value < SIGNIFICANCE && sc.hinge_sse < sc.step_sse && (sc.slope_after - sc.slope_before).abs() >= flat;
            bundle.summarize_tool(
                "slope_change",
                format!(
                    "best kink at {}: slope {} -> {} per step (F={}, p={}){}",
                    sc.index,
                    fmt(sc.slope_before),
                    fmt(sc.slope_after),
                    fmt(sc.f_stat),
                    fmt(sc.p_value),
                    if accept { "" } else { "; not retained" }
                ),
            );
            accept.then_some((sc, resid))
        }
        Err(ToolError::TooShort { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let z = match &kink {
        Some((sc, resid)) => {
            cands.push(Candidate {
                interval: Interval { start: sc.index, end: n - 1 },
                types: vec![AnomalyType::TrendChange],
                strength: p_to_strength(sc.p_value),
                note: format!(
                    "slope change at {}: {} -> {} per step",
                    sc.index,
                    fmt(sc.slope_before),
                    fmt(sc.slope_after)
                ),
            });
            resid.clone()
        }
        None => {
            let rough = change_points(&untilt(robust_slope(&y)))?;
            let cuts: Vec<usize> = rough.points.iter().map(|p| p.index).collect();
            untilt(pooled_slope(&y, &cuts))
        }
    };
    let w: Vec<f64> = x.iter().zip(&d.trend).map(|(v, t)| v - t).collect();

    let level = change_points(&z)?;
    let spread: Vec<f64> = z.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let mut points: Vec<(usize, String)> = level.points.iter().map(|p| (p.index, format!("level {}", dir(p.direction)))).collect();
    if spread.len() >= STRUCT_MIN_LEN {
        let sc = change_points(&spread)?;
        points.extend(
            sc.points
                .iter()
                .map(|p| ((p.index + 1).min(n - 1), format!("spread {}", dir(p.direction)))),
        );
    }
    points.sort_by_key(|p| p.0);
    let mut kept: Vec<(usize, String)> = Vec::new();
    for p in points {
        match kept.last() {
            Some(last) if p.0 - last.0 < CHANGE_POINT_DEDUP => {}
            _ => kept.push(p),
        }
    }
    bundle.summarize_tool(
        "change_points",
        format!(
            "CUSUM (k={}σ, h={}σ): {}",
            level.drift_sigma,
            level.threshold_sigma,
            list(kept.iter().map(|(i, what)| format!("{i} {what}")))
        ),
    );

    // Bonferroni over the change points tested
    let alpha = SIGNIFICANCE / kept.len().max(1) as f64;
    let mut regimes = Vec::new();
    for (cp, what) in &kept {
        let expansions: Vec<_> = [&z, &w]
            .into_iter()
            .filter_map(|s| match regime_expand(s, *cp) {
                Ok(e) => Some(Ok(e)),
                Err(ToolError::PrefixTooShort { .. }) => None,
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_, _>>()?;
        let Some(reference_start) = expansions.first().map(|e| e.reference_start) else {
            continue;
        };
        let Some(end) = expansions.iter().filter(|e| e.confirmed_chunks > 0).map(|e| e.interval.end).max() else {
            regimes.push(format!("{cp}: no differing chunk"));
            continue;
        };
        let region = Interval { start: *cp, end };
        if region.len() < CHANGE_POINT_DEDUP {
            continue;
        }
        regimes.push(format!("{cp}: regime [{}, {end}]", region.start));
        let findings = classify(&z, &w, &y, reference_start..*cp, region, alpha)?;
        if findings.is_empty() {
            continue;
        }
        cands.push(Candidate {
            interval: region,
            types: findings.iter().map(|f| f.kind).collect(),
            strength: findings.iter().map(|f| f.strength).fold(0.0, f64::max),
            note: format!(
                "{what} change at {cp}: {}",
                findings.iter().map(|f| f.note.as_str()).collect::<Vec<_>>().join(", ")
            ),
        });
    }
    bundle.summarize_tool("regime_expand", list(regimes.into_iter()));
    bundle.candidates = merge_candidates(cands, CANDIDATE_MERGE_GAP);
    bundle.summary = format!(
        "Structural analysis of {} points: {} change point(s), {} candidate(s)",
        summary.length,
        kept.len(),
        bundle.candidates.len()
    );
    Ok(bundle)
}

fn dir(d: Direction) -> &'static str {
    match d {
        Direction::Up => "up",
        Direction::Down => "down",
    }
}
