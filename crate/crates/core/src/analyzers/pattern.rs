//! Pattern family: phase shifts and waveform distortion.

use super::point::list;
use super::{fmt, merge_candidates, p_to_strength, AnalyzerError, Candidate, EvidenceBundle, MAX_STRENGTH};
use crate::represent::CompressedSummary;
use crate::tools::{
    centered_moving_average, compare_samples, detect_period, gaf, mean, median, mtf, recurrence, sax, std_dev, MTF_BINS, RECURRENCE_PERCENTILE,
    SAX_ALPHABET,
};
use crate::types::{AnomalyFamily, AnomalyType, Interval, Series};

pub const PATTERN_MIN_LEN: usize = 40;
/// Rolling mean of the standardized seasonal difference that marks a shift.
pub const SHIFT_SCORE_MIN: f64 = 3.0;
/// Rolling std below this fraction of its median counts as flattened.
pub const COLLAPSE_RATIO: f64 = 0.5;
/// Minimum run of flattened points.
pub const COLLAPSE_MIN_RUN: usize = 20;
pub const DETERMINISM_DROP: f64 = 0.7;
pub const DETERMINISM_MIN: f64 = 0.5;
const MAD_SCALE: f64 = 1.4826;

/// Runs of `true` as inclusive intervals, offset by `offset`.
fn runs(mask: &[bool], offset: usize) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().chain(std::iter::once(&false)).enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Interval {
                    start: s + offset,
                    end: i - 1 + offset,
                });
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Centered rolling std over a window truncated at the edges.
fn rolling_std(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(w / 2);
            let hi = (lo + w).min(n);
            let s = &x[lo..hi];
            let m = s.iter().sum::<f64>() / s.len() as f64;
            (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64).sqrt()
        })
        .collect()
}

/// Phase-shift regions from the standardized seasonal difference
/// `x[i] - x[i - p]`, with their peak score.
fn shift_regions(x: &[f64], p: usize) -> Vec<(Interval, f64)> {
    let d: Vec<f64> = (p..x.len()).map(|i| x[i] - x[i - p]).collect();
    let centre = median(&d);
    let dev: Vec<f64> = d.iter().map(|v| (v - centre).abs()).collect();
    let scale = MAD_SCALE * median(&dev);
    if scale.is_nan() || scale <= 0.0 {
        return Vec::new();
    }
    let score: Vec<f64> = dev.iter().map(|v| v / scale).collect();
    let smooth = centered_moving_average(&score, (p / 4).max(5) | 1);
    runs(&smooth.iter().map(|&s| s >= SHIFT_SCORE_MIN).collect::<Vec<_>>(), p)
        .into_iter()
        .filter(|r| {
            // over one period a level step leaves a constant offset; a phase shift
            // oscillates around zero
            let from = r.start - p;
            let block: Vec<f64> = d[from..(from + p).min(d.len())].iter().map(|v| v - centre).collect();
            mean(&block).abs() < std_dev(&block)
        })
        .map(|r| {
            let peak = smooth[r.start - p..=r.end - p].iter().cloned().fold(0.0, f64::max);
            (r, peak.min(MAX_STRENGTH))
        })
        .collect()
}

pub fn pattern_analyze(window: &Series, summary: &CompressedSummary) -> Result<EvidenceBundle, AnalyzerError> {
    let x = window.values();
    let n = x.len();
    if n < PATTERN_MIN_LEN {
        return Err(AnalyzerError::TooShort {
            family: AnomalyFamily::Pattern,
            need: PATTERN_MIN_LEN,
            got: n,
        });
    }
    let mut bundle = EvidenceBundle::new(AnomalyFamily::Pattern);
    let period = detect_period(x, 4, n / 2);

    let symbols = sax(x, (n / 10).max(4), SAX_ALPHABET)?;
    bundle.summarize_tool(
        "sax",
        format!(
            "{} ; breaks at {}",
            symbols.symbols,
            if symbols.breaks.is_empty() {
                "none".into()
            } else {
                list(symbols.breaks.iter().map(|b| b.index.to_string()))
            }
        ),
    );
    let g = gaf(x)?.rendered()?;
    let m = mtf(x, MTF_BINS)?;
    let self_loops: f64 = (0..m.transitions.len()).map(|i| m.transitions[i][i]).sum::<f64>() / m.transitions.len() as f64;
    bundle.summarize_tool("mtf", format!("mean self-transition probability {}", fmt(self_loops)));
    bundle.images.push(g);
    bundle.images.push(m.image.rendered()?);

    let h = n / 2;
    let r1 = recurrence(&x[..h], RECURRENCE_PERCENTILE)?;
    let r2 = recurrence(&x[h..], RECURRENCE_PERCENTILE)?;
    bundle.summarize_tool(
        "recurrence",
        format!(
            "determinism {} / {}, laminarity {} / {}",
            fmt(r1.determinism),
            fmt(r2.determinism),
            fmt(r1.laminarity),
            fmt(r2.laminarity)
        ),
    );

    let w = period.unwrap_or(0).max(COLLAPSE_MIN_RUN);
    let rs = rolling_std(x, w);
    let floor = COLLAPSE_RATIO * median(&rs);
    let collapses: Vec<Interval> = runs(&rs.iter().map(|&s| s < floor).collect::<Vec<_>>(), 0)
        .into_iter()
        .filter(|r| r.len() >= COLLAPSE_MIN_RUN)
        .collect();

    let mut cands = Vec::new();
    for c in &collapses {
        let inside = &x[c.start..=c.end];
        let outside: Vec<f64> = x[..c.start].iter().chain(&x[c.end + 1..]).copied().collect();
        let strength = if outside.len() >= 2 {
            p_to_strength(compare_samples(&outside, inside)?.var_diff_p)
        } else {
            0.0
        };
        cands.push(Candidate {
            interval: *c,
            types: vec![AnomalyType::WaveformDistortion],
            strength,
            note: format!("waveform flattened over {c}"),
        });
    }

    match period {
        Some(p) => {
            bundle.summarize_tool("period", p.to_string());
            for (r, peak) in shift_regions(x, p) {
                let near_collapse = collapses.iter().any(|c| r.overlaps(c) || r.gap_to(c) <= p);
                if near_collapse {
                    continue;
                }
                cands.push(Candidate {
                    interval: Interval { start: r.start, end: n - 1 },
                    types: vec![AnomalyType::PatternShift],
                    strength: peak,
                    note: format!("cycle misaligned from {} (score {})", r.start, fmt(peak)),
                });
            }
        }
        None => bundle.summarize_tool("period", "none"),
    }

    let (hi, lo) = if r1.determinism >= r2.determinism {
        (r1.determinism, r2.determinism)
    } else {
        (r2.determinism, r1.determinism)
    };
    if hi >= DETERMINISM_MIN && lo / hi < DETERMINISM_DROP {
        let weaker = if r2.determinism < r1.determinism {
            Interval { start: h, end: n - 1 }
        } else {
            Interval { start: 0, end: h - 1 }
        };
        let ratio = lo / hi;
        cands.push(Candidate {
            interval: weaker,
            types: vec![AnomalyType::WaveformDistortion],
            strength: (2.5 / ratio.max(0.25)).min(MAX_STRENGTH),
            note: format!("recurrence determinism ratio {}", fmt(ratio)),
        });
    }

    bundle.candidates = merge_candidates(cands, super::CANDIDATE_MERGE_GAP);
    bundle.summary = format!(
        "Pattern analysis of {} points: period {}, {} flattened region(s), {} candidate(s)",
        summary.length,
        period.map_or("none".into(), |p| p.to_string()),
        collapses.len(),
        bundle.candidates.len()
    );
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::inject::{clip_region, inject_pattern_shift, inject_waveform_distortion};

    #[test]
    fn runs_are_inclusive() {
        let r = runs(&[false, true, true, false, true], 3);
        assert_eq!(r, vec![Interval { start: 4, end: 5 }, Interval { start: 7, end: 7 }]);
    }

    #[test]
    fn phase_shift() {
        for seed in 0..5 {
            let (y, inj) = inject_pattern_shift(&noisy_sine(400, 20.0 + 5.0 * seed as f64, 0.1, seed), seed).unwrap();
            let (s, c) = series(y);
            let b = pattern_analyze(&s, &c).unwrap();
            let hit = b
                .candidates
                .iter()
                .any(|c| c.types.contains(&AnomalyType::PatternShift) && c.interval.overlaps(&inj.ground_truth[0]));
            assert!(hit, "seed {seed}: {:?}", b.candidates);
        }
    }

    #[test]
    fn clipping() {
        for seed in 0..5 {
            let (y, _) = inject_waveform_distortion(&noisy_sine(400, 20.0 + 5.0 * seed as f64, 0.1, seed), seed).unwrap();
            let (s, c) = series(y);
            let b = pattern_analyze(&s, &c).unwrap();
            let r = clip_region(400);
            let hit = b
                .candidates
                .iter()
                .any(|c| c.types[0] == AnomalyType::WaveformDistortion && c.interval.overlaps(&r));
            assert!(hit, "seed {seed}: {:?}", b.candidates);
        }
    }

    #[test]
    fn clean_bases_are_quiet() {
        for seed in 0..10 {
            let (s, c) = series(noisy_sine(400, 16.0 + 3.0 * seed as f64, 0.1, seed));
            let b = pattern_analyze(&s, &c).unwrap();
            assert!(b.candidates.is_empty(), "sine {seed}: {:?}", b.candidates);
            let (s, c) = series(noise(400, seed));
            let b = pattern_analyze(&s, &c).unwrap();
            assert!(b.candidates.is_empty(), "noise {seed}: {:?}", b.candidates);
        }
        let (s, c) = series(noise(400, 0));
        assert_eq!(pattern_analyze(&s, &c).unwrap().images.len(), 2);
    }
}
