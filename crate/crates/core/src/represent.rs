//! Token-budgeted text summary of a window. The window itself is only
//! read; tools keep operating on the full-precision values.

use serde::{Deserialize, Serialize};

use crate::tools::{mean, std_dev};
use crate::types::{Interval, Series};

pub const MIN_BUDGET: usize = 50;
pub const SUMMARY_SEGMENTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStat {
    pub interval: Interval,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedSummary {
    pub length: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub segment_stats: Vec<SegmentStat>,
    pub stride: usize,
    pub sampled: Vec<(usize, i64)>,
    pub estimated_tokens: usize,
    pub text: String,
}

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Short decimal rendering: about four significant digits, trailing
/// zeros trimmed, integers without a fraction.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..15).contains(&mag) {
        return format!("{v:.3e}");
    }
    let decimals = (3 - mag).clamp(0, 8) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Uncompressed `idx:value` listing with full float precision.
pub fn full_listing(values: &[f64]) -> String {
    values.iter().enumerate().map(|(i, v)| format!("{i}:{v}")).collect::<Vec<_>>().join(" ")
}

fn segment_stats(x: &[f64]) -> Vec<SegmentStat> {
    let n = x.len();
    let k = SUMMARY_SEGMENTS.min(n);
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for s in 0..k {
        let len = base + usize::from(s < extra);
        let seg = &x[start..start + len];
        out.push(SegmentStat {
            interval: Interval::new(start, start + len - 1).expect("ordered"),
            mean: mean(seg),
            std: std_dev(seg),
        });
        start += len;
    }
    out
}

fn arg_extrema(x: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, &v) in x.iter().enumerate() {
        if v < x[lo] {
            lo = i;
        }
        if v > x[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

fn sample(x: &[f64], stride: usize, extrema: (usize, usize)) -> Vec<(usize, i64)> {
    let mut idx: Vec<usize> = (0..x.len()).step_by(stride).collect();
    idx.push(extrema.0);
    idx.push(extrema.1);
    idx.sort_unstable();
    idx.dedup();
    idx.into_iter().map(|i| (i, x[i].round() as i64)).collect()
}

fn header(len: usize, min: f64, max: f64, mean: f64, std: f64) -> String {
    format!(
        "len={len} min={} max={} mean={} std={}",
        format_number(min),
        format_number(max),
        format_number(mean),
        format_number(std)
    )
}

fn render(head: &str, segments: Option<&[SegmentStat]>, stride: usize, sampled: &[(usize, i64)]) -> String {
    let mut text = String::from(head);
    for s in segments.unwrap_or_default() {
        text.push_str(&format!(
            "\nseg {}-{}: mean={} std={}",
            s.interval.start,
            s.interval.end,
            format_number(s.mean),
            format_number(s.std)
        ));
    }
    if !sampled.is_empty() {
        text.push_str(&format!("\nvalues (stride {stride}):"));
        for (i, v) in sampled {
            text.push_str(&format!(" {i}:{v}"));
        }
    }
    text
}

/// Summarize a window within `token_budget` estimated tokens (at least
/// [`MIN_BUDGET`]). Picks the smallest sampling stride that fits; when
/// even the coarsest stride does not fit, the segment lines are left out.
pub fn summarize(window: &Series, token_budget: usize) -> CompressedSummary {
    let budget = token_budget.max(MIN_BUDGET);
    let x = window.values();
    let n = x.len();
    let (lo, hi) = arg_extrema(x);
    let (m, s) = (mean(x), std_dev(x));
    let head = header(n, x[lo], x[hi], m, s);
    let segs = segment_stats(x);

    let fits = |text: &String| estimate_tokens(text) <= budget;
    let chosen = (1..=n).find_map(|stride| {
        let sampled = sample(x, stride, (lo, hi));
        let text = render(&head, Some(&segs), stride, &sampled);
        fits(&text).then_some((stride, sampled, text))
    });
    // fallback keeps the coarsest stride so a smaller budget never
    // yields a finer sampling than a larger one
    let (stride, sampled, text) = chosen.unwrap_or_else(|| {
        let sampled = sample(x, n, (lo, hi));
        let text = render(&head, None, n, &sampled);
        if fits(&text) {
            (n, sampled, text)
        } else {
            (n, Vec::new(), head.clone())
        }
    });
    CompressedSummary {
        length: n,
        min: x[lo],
        max: x[hi],
        mean: m,
        std: s,
        segment_stats: segs,
        stride,
        sampled,
        estimated_tokens: estimate_tokens(&text),
        text,
    }
}
