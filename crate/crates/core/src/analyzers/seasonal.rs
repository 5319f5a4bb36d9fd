//! Seasonal family: amplitude and periodicity changes between the two
//! halves of a window.

use super::point::list;
use super::{fmt, p_to_strength, AnalyzerError, Candidate, EvidenceBundle, MAX_STRENGTH};
use crate::represent::CompressedSummary;
use crate::tools::{autocorrelation_split, compare_samples, detrend_linear, fft_spectrum, stft, wavelet_energy, StftReport};
use crate::types::{AnomalyFamily, AnomalyType, Interval, Series};

pub const SEASON_MIN_LEN: usize = 64;
/// Second-half over first-half amplitude ratios inside this band are
/// treated as unchanged.
pub const AMPLITUDE_BAND: (f64, f64) = (0.67, 1.5);
/// Ratio below which the seasonal component counts as having collapsed.
pub const AMPLITUDE_COLLAPSE: f64 = 0.3;
/// Share of frames the dominant STFT bin must hold within each half.
pub const STFT_MODE_SHARE: f64 = 0.5;
pub const STFT_MIN_BIN_SHIFT: usize = 2;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Most common dominant bin among frames in `[lo, hi)` and its share.
fn frame_mode(st: &StftReport, lo: usize, hi: usize) -> Option<(usize, f64)> {
    let bins: Vec<usize> = (0..st.dominant_bins.len())
        .filter(|&f| st.frame_start(f) >= lo && st.frame_start(f) + st.window <= hi)
        .map(|f| st.dominant_bins[f])
        .collect();
    if bins.is_empty() {
        return None;
    }
    let mut best = (bins[0], 0usize);
    for &b in &bins {
        let c = bins.iter().filter(|&&v| v == b).count();
        if c > best.1 || (c == best.1 && b < best.0) {
            best = (b, c);
        }
    }
    Some((best.0, best.1 as f64 / bins.len() as f64))
}

/// Fisher-z statistic for the change of the autocorrelation at `lag`
/// between halves of length `m`.
fn acf_change_strength(r1: f64, r2: f64, m: usize) -> f64 {
    let clamp = |r: f64| r.clamp(-0.999, 0.999);
    let z = (clamp(r1).atanh() - clamp(r2).atanh()).abs() * ((m as f64 - 3.0) / 2.0).sqrt();
    z.min(MAX_STRENGTH)
}

pub fn season_analyze(window: &Series, summary: &CompressedSummary) -> Result<EvidenceBundle, AnalyzerError> {
    let x = window.values();
    let n = x.len();
    if n < SEASON_MIN_LEN {
        return Err(AnalyzerError::TooShort {
            family: AnomalyFamily::Seasonal,
            need: SEASON_MIN_LEN,
            got: n,
        });
    }
    let mut bundle = EvidenceBundle::new(AnomalyFamily::Seasonal);
    let h = n / 2;
    let acf = autocorrelation_split(x, n / 4)?;
    let spectrum = fft_spectrum(x)?;
    let st = stft(x)?;
    let wav = wavelet_energy(x)?;
    let show = |p: Option<usize>| p.map_or("none".to_string(), |p| p.to_string());
    bundle.summarize_tool(
        "autocorrelation_split",
        format!(
            "period first half {}, second half {}, changed: {}",
            show(acf.period_first),
            show(acf.period_second),
            acf.period_changed
        ),
    );
    bundle.summarize_tool(
        "fft_spectrum",
        format!(
            "dominant period {}, entropy {}, top {}",
            spectrum.dominant_period.map_or("none".into(), fmt),
            fmt(spectrum.spectral_entropy),
            list(spectrum.top_frequencies.iter().map(|(f, _)| fmt(*f)))
        ),
    );
    let m1 = frame_mode(&st, 0, h);
    let m2 = frame_mode(&st, h, n);
    let show_mode = |m: Option<(usize, f64)>| m.map_or("none".into(), |(b, s)| format!("bin {b} ({}% of frames)", fmt(100.0 * s)));
    bundle.summarize_tool(
        "stft",
        format!(
            "{} frames; dominant first half {}, second half {}",
            st.dominant_bins.len(),
            show_mode(m1),
            show_mode(m2)
        ),
    );
    bundle.summarize_tool(
        "wavelet_energy",
        format!(
            "second/first half detail energy by level {}",
            list((0..wav.levels).map(|l| fmt(wav.half_ratio(l))))
        ),
    );

    if acf.period_first.is_none() && acf.period_second.is_none() {
        bundle.summary = format!("Seasonal analysis of {} points: no seasonality found in either half", summary.length);
        return Ok(bundle);
    }

    let d1 = detrend_linear(&x[..h]);
    let d2 = detrend_linear(&x[h..]);
    let (a1, a2) = (rms(&d1), rms(&d2));
    let ratio = if a1 > 0.0 { a2 / a1 } else { f64::INFINITY };
    let amp = compare_samples(&d1, &d2)?;
    bundle.summarize_tool("amplitude", format!("detrended RMS {} -> {} (ratio {})", fmt(a1), fmt(a2), fmt(ratio)));

    let lag = acf.period_first.or(acf.period_second).expect("checked above");
    let r1 = acf.acf_first_half.get(lag).copied().unwrap_or(0.0);
    let r2 = acf.acf_second_half.get(lag).copied().unwrap_or(0.0);
    let periodic_strength = acf_change_strength(r1, r2, h);

    let mut found: Vec<(AnomalyType, f64, String)> = Vec::new();
    let outside = !(AMPLITUDE_BAND.0..=AMPLITUDE_BAND.1).contains(&ratio);
    if outside && !acf.period_changed {
        found.push((
            AnomalyType::AmplitudeChange,
            p_to_strength(amp.var_diff_p),
            format!("amplitude ratio {}", fmt(ratio)),
        ));
    }
    if ratio < AMPLITUDE_COLLAPSE {
        found.push((
            AnomalyType::SeasonalityAnomaly,
            p_to_strength(amp.var_diff_p),
            format!("seasonal amplitude collapsed to {}", fmt(ratio)),
        ));
    }
    if acf.period_changed {
        found.push((
            AnomalyType::SeasonalityAnomaly,
            periodic_strength,
            format!("period {} -> {}", show(acf.period_first), show(acf.period_second)),
        ));
    }
    if let (Some((b1, s1)), Some((b2, s2))) = (m1, m2) {
        if s1 >= STFT_MODE_SHARE && s2 >= STFT_MODE_SHARE && b1.abs_diff(b2) >= STFT_MIN_BIN_SHIFT {
            found.push((
                AnomalyType::SeasonalityAnomaly,
                periodic_strength,
                format!("STFT dominant bin {b1} -> {b2}"),
            ));
        }
    }
    if !found.is_empty() {
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut types = Vec::new();
        for f in &found {
            if !types.contains(&f.0) {
                types.push(f.0);
            }
        }
        bundle.candidates.push(Candidate {
            interval: Interval { start: h, end: n - 1 },
            types,
            strength: found[0].1,
            note: found.iter().map(|f| f.2.as_str()).collect::<Vec<_>>().join("; "),
        });
    }
    bundle.summary = format!(
        "Seasonal analysis of {} points: period {} / {}, amplitude ratio {}, {} candidate(s)",
        summary.length,
        show(acf.period_first),
        show(acf.period_second),
        fmt(ratio),
        bundle.candidates.len()
    );
    Ok(bundle)
}
