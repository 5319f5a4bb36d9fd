//! FFT spectrum, STFT, split-half autocorrelation and Haar wavelet energy.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::stats::{detrend_linear, is_constant, mean};
use super::ToolError;

/// Peak-to-median power ratio a spectral peak must reach to count as a
/// dominant period.
pub const PEAK_TO_MEDIAN: f64 = 3.0;
pub const STFT_WINDOW: usize = 64;
pub const STFT_HOP: usize = 32;
pub const ACF_PEAK_MIN: f64 = 0.2;
/// Relative period difference above which split-half periods disagree.
pub const PERIOD_CHANGE_TOLERANCE: f64 = 0.2;
pub const MAX_WAVELET_LEVELS: usize = 6;
/// Minimum share of non-DC power in the peak bin for [`detect_period`].
pub const PERIOD_POWER_SHARE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub dominant_period: Option<f64>,
    /// `(frequency in cycles per sample, power)` by descending power.
    pub top_frequencies: Vec<(f64, f64)>,
    /// Shannon entropy of the normalized power, scaled to [0, 1].
    pub spectral_entropy: f64,
}

/// One-sided power spectrum of the mean-removed series, bins `1..=n/2`.
pub(crate) fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..=n / 2).map(|k| buf[k].norm_sqr()).collect()
}

fn argmax_from(power: &[f64], first_bin: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &p) in power.iter().enumerate() {
        let k = i + 1;
        if k < first_bin {
            continue;
        }
        if best.is_none_or(|b| p > power[b - 1]) {
            best = Some(k);
        }
    }
    best
}

fn peak_is_dominant(power: &[f64], bin: usize) -> bool {
    let peak = power[bin - 1];
    if peak <= 0.0 {
        return false;
    }
    let mut sorted = power.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = super::stats::quantile_sorted(&sorted, 0.5);
    peak >= PEAK_TO_MEDIAN * med
}

pub fn fft_spectrum(x: &[f64]) -> Result<SpectrumReport, ToolError> {
    let n = x.len();
    if n < 8 {
        return Err(ToolError::TooShort { need: 8, got: n });
    }
    if is_constant(x) {
        return Ok(SpectrumReport {
            dominant_period: None,
            top_frequencies: Vec::new(),
            spectral_entropy: 0.0,
        });
    }
    let power = power_spectrum(x);
    let dominant_period = argmax_from(&power, 1)
        .filter(|&k| peak_is_dominant(&power, k))
        .map(|k| (n as f64 / k as f64).round());

    let mut order: Vec<usize> = (0..power.len()).collect();
    order.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    let top_frequencies = order.iter().take(5).map(|&i| ((i + 1) as f64 / n as f64, power[i])).collect();

    let total: f64 = power.iter().sum();
    let spectral_entropy = if total > 0.0 && power.len() > 1 {
        let h: f64 = power
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| {
                let q = p / total;
                -q * q.ln()
            })
            .sum();
        h / (power.len() as f64).ln()
    } else {
        0.0
    };
    Ok(SpectrumReport {
        dominant_period,
        top_frequencies,
        spectral_entropy,
    })
}

/// Dominant period of the linearly detrended series restricted to
/// `[min_period, max_period]`. On top of the peak-to-median rule of
/// [`fft_spectrum`] the peak bin must carry [`PERIOD_POWER_SHARE`] of the
/// spectrum, which white noise never does.
pub fn detect_period(x: &[f64], min_period: usize, max_period: usize) -> Option<usize> {
    let n = x.len();
    if n < 8 || is_constant(x) || max_period < min_period.max(2) {
        return None;
    }
    let residual = detrend_linear(x);
    if super::stats::variance(&residual) <= 1e-12 * super::stats::variance(x) {
        return None;
    }
    let power = power_spectrum(&residual);
    let first_bin = n.div_ceil(max_period).max(1);
    let k = argmax_from(&power, first_bin)?;
    let total: f64 = power.iter().sum();
    if !peak_is_dominant(&power, k) || power[k - 1] < PERIOD_POWER_SHARE * total {
        return None;
    }
    let p = (n as f64 / k as f64).round() as usize;
    (min_period..=max_period)
        .contains(&p)
        .then(|| refine_period(x, p, min_period, max_period))
}

/// Snap a spectral period estimate to the lag within 20% of it where the
/// lag-corrected autocorrelation peaks. Spectral bins are `n / k` apart,
/// too coarse for long periods.
fn refine_period(x: &[f64], p: usize, min_period: usize, max_period: usize) -> usize {
    let n = x.len();
    let lo = (p * 4 / 5).max(min_period).max(2);
    let hi = (p * 6).div_ceil(5).min(max_period).min(n.saturating_sub(2));
    if hi <= lo {
        return p;
    }
    let r = acf(x, hi);
    let corrected = |k: usize| r[k] * n as f64 / (n - k) as f64;
    (lo..=hi).max_by(|&a, &b| corrected(a).total_cmp(&corrected(b))).unwrap_or(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftReport {
    pub window: usize,
    pub hop: usize,
    /// `frames x (window / 2 + 1)` magnitudes, row-major per frame.
    pub magnitudes: Vec<Vec<f64>>,
    /// Per-frame dominant bin, DC excluded.
    pub dominant_bins: Vec<usize>,
}

impl StftReport {
    pub fn frame_start(&self, frame: usize) -> usize {
        frame * self.hop
    }
}

/// Hann-windowed short-time spectrum (window 64, hop 32).
pub fn stft(x: &[f64]) -> Result<StftReport, ToolError> {
    let n = x.len();
    if n < STFT_WINDOW {
        return Err(ToolError::TooShort { need: STFT_WINDOW, got: n });
    }
    let frames = (n - STFT_WINDOW) / STFT_HOP + 1;
    let hann: Vec<f64> = (0..STFT_WINDOW)
        .map(|j| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / STFT_WINDOW as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(STFT_WINDOW);
    let mut magnitudes = Vec::with_capacity(frames);
    let mut dominant_bins = Vec::with_capacity(frames);
    for f in 0..frames {
        let seg = &x[f * STFT_HOP..f * STFT_HOP + STFT_WINDOW];
        let m = mean(seg);
        let mut buf: Vec<Complex<f64>> = seg.iter().zip(&hann).map(|(v, w)| Complex::new((v - m) * w, 0.0)).collect();
        fft.process(&mut buf);
        let mags: Vec<f64> = buf[..=STFT_WINDOW / 2].iter().map(|c| c.norm()).collect();
        let dom = (1..mags.len()).fold(1, |b, k| if mags[k] > mags[b] { k } else { b });
        dominant_bins.push(dom);
        magnitudes.push(mags);
    }
    Ok(StftReport {
        window: STFT_WINDOW,
        hop: STFT_HOP,
        magnitudes,
        dominant_bins,
    })
}

/// Biased autocorrelation of the linearly detrended input up to `max_lag`.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let d = detrend_linear(x);
    let m = mean(&d);
    let c: Vec<f64> = d.iter().map(|v| v - m).collect();
    let denom: f64 = c.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return vec![0.0; max_lag + 1];
    }
    (0..=max_lag.min(c.len().saturating_sub(1)))
        .map(|k| c[..c.len() - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect()
}

/// Lag of the first local ACF maximum beyond lag 1 that exceeds
/// `ACF_PEAK_MIN` and rises at least `ACF_PEAK_MIN` above the lowest value
/// seen at smaller lags.
pub fn acf_period(r: &[f64]) -> Option<usize> {
    let mut trough = f64::INFINITY;
    for k in 2..r.len().saturating_sub(1) {
        trough = trough.min(r[k - 1]);
        if r[k] > r[k - 1] && r[k] >= r[k + 1] && r[k] > ACF_PEAK_MIN && r[k] - trough >= ACF_PEAK_MIN {
            return Some(k);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfSplitReport {
    pub acf_first_half: Vec<f64>,
    pub acf_second_half: Vec<f64>,
    pub period_first: Option<usize>,
    pub period_second: Option<usize>,
    pub period_changed: bool,
}

pub fn periods_differ(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (Some(p), Some(q)) => (p as f64 - q as f64).abs() / p.max(q) as f64 > PERIOD_CHANGE_TOLERANCE,
        (None, None) => false,
        _ => true,
    }
}

/// Compare the autocorrelation structure of the two halves of `x`.
pub fn autocorrelation_split(x: &[f64], max_lag: usize) -> Result<AcfSplitReport, ToolError> {
    let n = x.len();
    if n < 40 {
        return Err(ToolError::TooShort { need: 40, got: n });
    }
    let half = n / 2;
    let max_lag = max_lag.clamp(2, half - 2);
    let acf_first_half = acf(&x[..half], max_lag);
    let acf_second_half = acf(&x[half..], max_lag);
    let period_first = acf_period(&acf_first_half);
    let period_second = acf_period(&acf_second_half);
    Ok(AcfSplitReport {
        period_changed: periods_differ(period_first, period_second),
        acf_first_half,
        acf_second_half,
        period_first,
        period_second,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletReport {
    pub levels: usize,
    /// Detail energy per level, finest first.
    pub detail_energy: Vec<f64>,
    pub approx_energy: f64,
    /// Per-level detail energy whose support starts before `n / 2`.
    pub first_half_energy: Vec<f64>,
    pub second_half_energy: Vec<f64>,
}

impl WaveletReport {
    pub fn total_energy(&self) -> f64 {
        self.detail_energy.iter().sum::<f64>() + self.approx_energy
    }

    /// Second-half over first-half detail energy at `level` (0 = finest).
    pub fn half_ratio(&self, level: usize) -> f64 {
        let a = self.first_half_energy[level];
        let b = self.second_half_energy[level];
        if a <= 0.0 {
            if b <= 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            b / a
        }
    }
}

/// Orthonormal Haar DWT of the zero-padded input.
pub fn wavelet_energy(x: &[f64]) -> Result<WaveletReport, ToolError> {
    let n = x.len();
    if n < 8 {
        return Err(ToolError::TooShort { need: 8, got: n });
    }
    let padded_len = n.next_power_of_two();
    let levels = (n.ilog2() as usize).min(MAX_WAVELET_LEVELS);
    let mut approx = x.to_vec();
    approx.resize(padded_len, 0.0);
    let half_point = n / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut detail_energy = Vec::with_capacity(levels);
    let mut first_half_energy = Vec::with_capacity(levels);
    let mut second_half_energy = Vec::with_capacity(levels);
    for level in 1..=levels {
        let mut next = Vec::with_capacity(approx.len() / 2);
        let (mut total, mut first, mut second) = (0.0, 0.0, 0.0);
        for (c, pair) in approx.chunks(2).enumerate() {
            next.push((pair[0] + pair[1]) * s);
            let d = (pair[0] - pair[1]) * s;
            let e = d * d;
            total += e;
            if c << level < half_point {
                first += e;
            } else {
                second += e;
            }
        }
        detail_energy.push(total);
        first_half_energy.push(first);
        second_half_energy.push(second);
        approx = next;
    }
    Ok(WaveletReport {
        levels,
        detail_energy,
        approx_energy: approx.iter().map(|v| v * v).sum(),
        first_half_energy,
        second_half_energy,
    })
}
