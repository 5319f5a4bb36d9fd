//! Rule-based injectors for the nine anomaly types and the synthetic
//! benchmark built from them. All randomness comes from a ChaCha8
//! generator seeded with the caller's seed.

mod benchmark;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tools::{decompose, detect_period, ls_slope, mean, std_dev};
use crate::types::{AnomalyType, Interval};

pub use benchmark::*;

pub const MIN_INJECT_LEN: usize = 20;
pub const SIGMA_FLOOR: f64 = 1e-12;
pub const GLOBAL_MAGNITUDE: f64 = 5.0;
pub const CONTEXTUAL_MAGNITUDE: f64 = 3.0;
pub const POINT_EDGE_MARGIN: usize = 5;
pub const POINT_SEPARATION: usize = 10;
pub const AMPLITUDE_FACTOR: f64 = 2.0;
pub const FREQUENCY_MULTIPLIER: f64 = 2.5;
pub const FLATTEN_FACTOR: f64 = 0.15;
pub const TREND_SLOPE_SIGMA: f64 = 0.05;
pub const TREND_SLOPE_FLOOR: f64 = 0.05;
/// A pre-existing trend is strong when its slope exceeds this multiple
/// of the detrended residual std per step.
pub const STRONG_TREND_SIGMA: f64 = 0.02;
pub const MEAN_SHIFT_SIGMA: f64 = 1.5;
pub const VARIANCE_FACTORS: [f64; 2] = [2.0, 2.5];
pub const CLIP_HALF_WIDTH: f64 = 0.5;
pub const MIN_SHIFT_PERIOD: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InjectError {
    #[error("series too short for injection: need {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("series standard deviation is zero; nothing to scale the anomaly by")]
    DegenerateSigma,
    #[error("no usable dominant period (need {min} <= p <= n/2)")]
    NoPeriod { min: usize },
    #[error("could not place {0} isolated points")]
    NoRoom(usize),
    #[error("benchmark i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    #[serde(rename = "type")]
    pub anomaly_type: AnomalyType,
    /// Injected region(s); point types list one interval per position.
    pub ground_truth: Vec<Interval>,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl Injection {
    fn new(anomaly_type: AnomalyType, ground_truth: Vec<Interval>, seed: u64) -> Self {
        Injection {
            anomaly_type,
            ground_truth,
            params: BTreeMap::new(),
            seed,
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// Binary labels of length `n` covering the ground truth.
    pub fn labels(&self, n: usize) -> Vec<u8> {
        crate::types::segments_to_labels(&self.ground_truth, n)
    }
}

pub type Injected = (Vec<f64>, Injection);

fn check_len(x: &[f64]) -> Result<(), InjectError> {
    if x.len() < MIN_INJECT_LEN {
        return Err(InjectError::TooShort {
            need: MIN_INJECT_LEN,
            got: x.len(),
        });
    }
    Ok(())
}

fn sigma_of(x: &[f64]) -> Result<f64, InjectError> {
    let s = std_dev(x);
    if s < SIGMA_FLOOR {
        return Err(InjectError::DegenerateSigma);
    }
    Ok(s)
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Pick `count` distinct positions in `[lo, hi]` pairwise at least `sep`
/// apart, by seeded rejection sampling.
fn isolated_positions(
    rng: &mut ChaCha8Rng,
    count: usize,
    lo: usize,
    hi: usize,
    sep: usize,
    usable: impl Fn(usize) -> bool,
) -> Result<Vec<usize>, InjectError> {
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    for _ in 0..1000 {
        if picked.len() == count {
            break;
        }
        let p = rng.gen_range(lo..=hi);
        if usable(p) && picked.iter().all(|&q| q.abs_diff(p) >= sep) {
            picked.push(p);
        }
    }
    if picked.is_empty() {
        return Err(InjectError::NoRoom(count));
    }
    picked.sort_unstable();
    Ok(picked)
}

fn change_point(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let lo = (2 * n).div_ceil(5);
    let hi = (3 * n) / 5;
    rng.gen_range(lo..=hi)
}

/// Gaussian noise vector drawn from its own seeded stream.
pub fn noise_vector(seed: u64, len: usize, std: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std.max(0.0)).expect("finite std");
    (0..len).map(|_| normal.sample(&mut rng)).collect()
}

/// `m + factor * (x_i - m) + noise_i` over `x[start..]`, `m` being the
/// mean of that suffix.
pub fn flatten(x: &[f64], start: usize, factor: f64, noise: &[f64]) -> Vec<f64> {
    let m = mean(&x[start..]);
    let mut out = x.to_vec();
    for (k, v) in out[start..].iter_mut().enumerate() {
        *v = m + factor * (*v - m) + noise.get(k).copied().unwrap_or(0.0);
    }
    out
}

pub fn inject_global_point(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    let sigma = sigma_of(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let count = rng.gen_range(1..=3);
    let pos = isolated_positions(&mut rng, count, POINT_EDGE_MARGIN, n - 1 - POINT_EDGE_MARGIN, POINT_SEPARATION, |_| true)?;
    let mut out = x.to_vec();
    for &p in &pos {
        out[p] += sign(&mut rng) * GLOBAL_MAGNITUDE * sigma;
    }
    let inj = Injection::new(AnomalyType::GlobalPoint, pos.iter().map(|&p| Interval::point(p)).collect(), seed)
        .with("sigma", sigma)
        .with("magnitude_sigma", GLOBAL_MAGNITUDE)
        .with("count", pos.len() as f64);
    Ok((out, inj))
}

/// Width of the local window used by the contextual injector.
pub fn contextual_window(n: usize) -> usize {
    (n / 20).max(10)
}

/// Population std over the centered window of width `w` around `i`,
/// truncated at the edges.
pub fn local_std(x: &[f64], i: usize, w: usize) -> f64 {
    let lo = i.saturating_sub(w / 2);
    let hi = (lo + w).min(x.len());
    std_dev(&x[lo..hi])
}

pub fn inject_contextual_point(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    sigma_of(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let w = contextual_window(n);
    let count = rng.gen_range(1..=3);
    let pos = isolated_positions(
        &mut rng,
        count,
        POINT_EDGE_MARGIN,
        n - 1 - POINT_EDGE_MARGIN,
        POINT_SEPARATION.max(w),
        |p| local_std(x, p, w) >= SIGMA_FLOOR,
    )
    .map_err(|_| InjectError::DegenerateSigma)?;
    let mut out = x.to_vec();
    for &p in &pos {
        out[p] += sign(&mut rng) * CONTEXTUAL_MAGNITUDE * local_std(x, p, w);
    }
    let inj = Injection::new(AnomalyType::ContextualPoint, pos.iter().map(|&p| Interval::point(p)).collect(), seed)
        .with("window", w as f64)
        .with("magnitude_local_std", CONTEXTUAL_MAGNITUDE)
        .with("count", pos.len() as f64);
    Ok((out, inj))
}

fn second_half(n: usize) -> Interval {
    Interval { start: n / 2, end: n - 1 }
}

pub fn inject_amplitude_change(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    let n = x.len();
    let out = flatten(x, n / 2, AMPLITUDE_FACTOR, &[]);
    let inj = Injection::new(AnomalyType::AmplitudeChange, vec![second_half(n)], seed).with("factor", AMPLITUDE_FACTOR);
    Ok((out, inj))
}

fn usable_period(x: &[f64], min: usize) -> Option<usize> {
    detect_period(x, 2, x.len() / 2).filter(|&p| p >= min)
}

/// Replay the seasonal profile at `multiplier` times its rate from the
/// midpoint on, keeping trend and residual in place.
fn rescale_phase(x: &[f64], period: usize, multiplier: f64) -> Vec<f64> {
    let d = decompose(x, Some(period)).expect("period fits");
    let profile = &d.seasonal[..period];
    let p = period as f64;
    let at = |phase: f64| {
        let ph = phase.rem_euclid(p);
        let k = ph.floor() as usize % period;
        let frac = ph - ph.floor();
        profile[k] * (1.0 - frac) + profile[(k + 1) % period] * frac
    };
    let h = x.len() / 2;
    let mut out = x.to_vec();
    for (i, v) in out.iter_mut().enumerate().skip(h) {
        let phase = h as f64 + multiplier * (i - h) as f64;
        *v = d.trend[i] + at(phase) + d.residual[i];
    }
    out
}

pub fn inject_seasonality(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    let sigma = sigma_of(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let want_frequency = rng.gen_bool(0.5);
    let noise_seed: u64 = rng.gen();
    let inj = Injection::new(AnomalyType::SeasonalityAnomaly, vec![second_half(n)], seed);
    match usable_period(x, 2) {
        Some(p) if want_frequency => {
            let out = rescale_phase(x, p, FREQUENCY_MULTIPLIER);
            let inj = inj.with("variant", 0.0).with("period", p as f64).with("multiplier", FREQUENCY_MULTIPLIER);
            Ok((out, inj))
        }
        _ => {
            let noise_std = FLATTEN_FACTOR * sigma;
            let noise = noise_vector(noise_seed, n - n / 2, noise_std);
            let out = flatten(x, n / 2, FLATTEN_FACTOR, &noise);
            let inj = inj.with("variant", 1.0).with("factor", FLATTEN_FACTOR).with("noise_std", noise_std);
            Ok((out, inj.with_noise_seed(noise_seed)))
        }
    }
}

impl Injection {
    /// The exact noise seed (the f64 copy in `params` may round).
    fn with_noise_seed(mut self, noise_seed: u64) -> Self {
        self.params.insert("noise_seed_hi".into(), (noise_seed >> 32) as f64);
        self.params.insert("noise_seed_lo".into(), (noise_seed & 0xffff_ffff) as f64);
        self
    }

    /// Seed of the noise stream used by the flatten variant, if any.
    pub fn noise_seed(&self) -> Option<u64> {
        let hi = self.param("noise_seed_hi")? as u64;
        let lo = self.param("noise_seed_lo")? as u64;
        Some((hi << 32) | lo)
    }
}

pub fn inject_trend_change(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    let sigma = std_dev(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let magnitude = (TREND_SLOPE_SIGMA * sigma).max(TREND_SLOPE_FLOOR);
    let pre = ls_slope(x);
    let resid_sigma = std_dev(&crate::tools::detrend_linear(x));
    let s = if pre.abs() > STRONG_TREND_SIGMA * resid_sigma {
        -pre.signum() * magnitude
    } else {
        sign(&mut rng) * magnitude
    };
    let h = n / 2;
    let mut out = x.to_vec();
    for (i, v) in out.iter_mut().enumerate().skip(h) {
        *v += s * (i - h) as f64;
    }
    let inj = Injection::new(AnomalyType::TrendChange, vec![second_half(n)], seed)
        .with("slope", s)
        .with("pre_slope", pre);
    Ok((out, inj))
}

pub fn inject_mean_change(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    let sigma = sigma_of(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let cp = change_point(&mut rng, n);
    let shift = sign(&mut rng) * MEAN_SHIFT_SIGMA * sigma;
    let mut out = x.to_vec();
    out[cp..].iter_mut().for_each(|v| *v += shift);
    let inj = Injection::new(AnomalyType::MeanChangePoint, vec![Interval { start: cp, end: n - 1 }], seed)
        .with("change_point", cp as f64)
        .with("shift", shift)
        .with("sigma", sigma);
    Ok((out, inj))
}

pub fn inject_variance_change(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    sigma_of(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let factor = VARIANCE_FACTORS[rng.gen_range(0..VARIANCE_FACTORS.len())];
    let cp = change_point(&mut rng, n);
    let out = flatten(x, cp, factor, &[]);
    let inj = Injection::new(AnomalyType::VarianceChange, vec![Interval { start: cp, end: n - 1 }], seed)
        .with("change_point", cp as f64)
        .with("factor", factor);
    Ok((out, inj))
}

pub fn inject_pattern_shift(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    let n = x.len();
    let p = usable_period(x, MIN_SHIFT_PERIOD).ok_or(InjectError::NoPeriod { min: MIN_SHIFT_PERIOD })?;
    let shift = p / 4;
    let h = n / 2;
    let mut out = x.to_vec();
    out[h..].rotate_left(shift);
    let inj = Injection::new(AnomalyType::PatternShift, vec![second_half(n)], seed)
        .with("period", p as f64)
        .with("shift", shift as f64);
    Ok((out, inj))
}

/// Inclusive bounds `[floor(0.4n), floor(0.7n)]` of the clipped region.
pub fn clip_region(n: usize) -> Interval {
    Interval {
        start: 2 * n / 5,
        end: (7 * n / 10).min(n - 1),
    }
}

pub fn inject_waveform_distortion(x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    check_len(x)?;
    let n = x.len();
    let r = clip_region(n);
    let region = &x[r.start..=r.end];
    let (mu, s) = (mean(region), std_dev(region));
    let (lo, hi) = (mu - CLIP_HALF_WIDTH * s, mu + CLIP_HALF_WIDTH * s);
    let mut out = x.to_vec();
    out[r.start..=r.end].iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    let inj = Injection::new(AnomalyType::WaveformDistortion, vec![r], seed)
        .with("clip_low", lo)
        .with("clip_high", hi);
    Ok((out, inj))
}

/// Dispatch to the injector for `kind`.
pub fn inject(kind: AnomalyType, x: &[f64], seed: u64) -> Result<Injected, InjectError> {
    match kind {
        AnomalyType::GlobalPoint => inject_global_point(x, seed),
        AnomalyType::ContextualPoint => inject_contextual_point(x, seed),
        AnomalyType::AmplitudeChange => inject_amplitude_change(x, seed),
        AnomalyType::SeasonalityAnomaly => inject_seasonality(x, seed),
        AnomalyType::TrendChange => inject_trend_change(x, seed),
        AnomalyType::MeanChangePoint => inject_mean_change(x, seed),
        AnomalyType::VarianceChange => inject_variance_change(x, seed),
        AnomalyType::PatternShift => inject_pattern_shift(x, seed),
        AnomalyType::WaveformDistortion => inject_waveform_distortion(x, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::{acf, acf_period, detect_outliers, rolling_statistics, DEFAULT_WINDOWS};
    use std::f64::consts::PI;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        noise_vector(seed, n, 1.0)
    }

    fn sine(n: usize, p: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * i as f64 / p).sin()).collect()
    }

    fn unchanged_outside(x: &[f64], y: &[f64], inj: &Injection) {
        for i in 0..x.len() {
            if !inj.ground_truth.iter().any(|g| g.contains(i)) {
                assert_eq!(x[i], y[i], "index {i}");
            }
        }
    }

    #[test]
    fn global_points_exact() {
        assert_eq!(inject_global_point(&[1.0; 50], 1), Err(InjectError::DegenerateSigma));
        for seed in 0..20 {
            let x = noise(400, seed);
            let sigma = std_dev(&x);
            let (y, inj) = inject_global_point(&x, seed).unwrap();
            unchanged_outside(&x, &y, &inj);
            assert!((1..=3).contains(&inj.ground_truth.len()));
            for g in &inj.ground_truth {
                let i = g.start;
                assert!((5..=394).contains(&i));
                assert!(((y[i] - x[i]).abs() - 5.0 * sigma).abs() < 1e-9);
            }
            for w in inj.ground_truth.windows(2) {
                assert!(w[1].start - w[0].start >= 10);
            }
        }
        // on a bounded base (|x| <= sqrt(2) sigma) every spike clears z = 3
        for seed in 0..20 {
            let x = sine(400, 37.0);
            let (y, inj) = inject_global_point(&x, seed).unwrap();
            let flagged: Vec<usize> = detect_outliers(&y).unwrap().z_indices.iter().map(|p| p.0).collect();
            assert!(inj.ground_truth.iter().all(|g| flagged.contains(&g.start)), "seed {seed}");
        }
    }

    #[test]
    fn contextual_points_exact() {
        for seed in 0..20 {
            let x: Vec<f64> = sine(400, 50.0);
            let (y, inj) = inject_contextual_point(&x, seed).unwrap();
            unchanged_outside(&x, &y, &inj);
            for g in &inj.ground_truth {
                let want = 3.0 * local_std(&x, g.start, 20);
                assert!(((y[g.start] - x[g.start]).abs() - want).abs() < 1e-9);
            }
            let hits: Vec<usize> = rolling_statistics(&y, &DEFAULT_WINDOWS)
                .unwrap()
                .contextual
                .iter()
                .map(|h| h.index)
                .collect();
            assert!(inj.ground_truth.iter().any(|g| hits.contains(&g.start)), "seed {seed}");
        }
    }

    #[test]
    fn amplitude_doubles_second_half() {
        let x = noise(400, 3);
        let (y, inj) = inject_amplitude_change(&x, 0).unwrap();
        unchanged_outside(&x, &y, &inj);
        assert!((std_dev(&y[200..]) - 2.0 * std_dev(&x[200..])).abs() < 1e-9);
        let mut c = vec![0.0; 100];
        c[..50].iter_mut().for_each(|v| *v = 1.0);
        assert_eq!(inject_amplitude_change(&c, 0).unwrap().0, c);
    }

    #[test]
    fn seasonality_variants() {
        let x = sine(400, 20.0);
        let mut seen = [false; 2];
        for seed in 0..20 {
            let (y, inj) = inject_seasonality(&x, seed).unwrap();
            unchanged_outside(&x, &y, &inj);
            if inj.param("variant") == Some(0.0) {
                seen[0] = true;
                let p2 = acf_period(&acf(&y[200..], 100)).unwrap() as f64;
                assert!((p2 - 20.0 / 2.5).abs() <= 1.0, "period {p2}");
            } else {
                seen[1] = true;
                let noise = noise_vector(inj.noise_seed().unwrap(), 200, 0.15 * std_dev(&x));
                let want = flatten(&x, 200, 0.15, &noise);
                assert!(want.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
            }
        }
        assert!(seen[0] && seen[1]);
        // aperiodic base always flattens
        let ramp: Vec<f64> = (0..200).map(|i| 0.5 * i as f64).collect();
        for seed in 0..10 {
            assert_eq!(inject_seasonality(&ramp, seed).unwrap().1.param("variant"), Some(1.0));
        }
    }

    #[test]
    fn flatten_moments() {
        let x = noise(4000, 8);
        let sigma = std_dev(&x);
        let s = std_dev(&x[2000..]);
        let (y, inj) = inject_seasonality(&x, 5).unwrap();
        assert_eq!(inj.param("variant"), Some(1.0));
        let want = ((0.15 * s).powi(2) + (0.15 * sigma).powi(2)).sqrt();
        assert!((std_dev(&y[2000..]) - want).abs() < 0.05 * want);
    }

    #[test]
    fn trend_change_exact() {
        let x = noise(400, 4);
        let (y, inj) = inject_trend_change(&x, 2).unwrap();
        let s = inj.param("slope").unwrap();
        assert!((s.abs() - (0.05 * std_dev(&x)).max(0.05)).abs() < 1e-12);
        assert!(((y[399] - x[399]) - s * 199.0).abs() < 1e-9);
        unchanged_outside(&x, &y, &inj);
        let up: Vec<f64> = (0..400).map(|i| 0.1 * i as f64).collect();
        for seed in 0..5 {
            assert!(inject_trend_change(&up, seed).unwrap().1.param("slope").unwrap() < 0.0);
        }
    }

    #[test]
    fn mean_change_exact() {
        for seed in 0..20 {
            let x = noise(400, seed + 100);
            let sigma = std_dev(&x);
            let (y, inj) = inject_mean_change(&x, seed).unwrap();
            let cp = inj.ground_truth[0].start;
            assert!((160..=240).contains(&cp));
            let d = mean(&y[cp..]) - mean(&x[cp..]);
            assert!((d.abs() - 1.5 * sigma).abs() < 1e-9);
            unchanged_outside(&x, &y, &inj);
        }
    }

    #[test]
    fn variance_change_exact() {
        for seed in 0..20 {
            let x = noise(400, seed + 200);
            let (y, inj) = inject_variance_change(&x, seed).unwrap();
            let cp = inj.ground_truth[0].start;
            let f = inj.param("factor").unwrap();
            assert!(f == 2.0 || f == 2.5);
            assert!((std_dev(&y[cp..]) - f * std_dev(&x[cp..])).abs() < 1e-9);
            assert!((mean(&y[cp..]) - mean(&x[cp..])).abs() < 1e-9);
            let c = crate::tools::compare_samples(&y[..cp], &y[cp..]).unwrap();
            assert!(c.var_diff_p < 0.05);
        }
    }

    #[test]
    fn pattern_shift_quarter_period() {
        let x = sine(400, 20.0);
        let (y, inj) = inject_pattern_shift(&x, 0).unwrap();
        assert_eq!(inj.param("shift"), Some(5.0));
        let mut a = x[200..].to_vec();
        let mut b = y[200..].to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        // lag maximizing cross-correlation between shifted and original
        let best = (0..20)
            .max_by(|&p, &q| {
                let c = |l: usize| (0..150).map(|j| y[200 + j] * x[200 + j + l]).sum::<f64>();
                c(p).total_cmp(&c(q))
            })
            .unwrap();
        assert_eq!(best, 5);
        let ramp: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(matches!(inject_pattern_shift(&ramp, 0), Err(InjectError::NoPeriod { .. })));
    }

    #[test]
    fn waveform_clip_band() {
        let x = sine(400, 40.0);
        let (y, inj) = inject_waveform_distortion(&x, 0).unwrap();
        let r = inj.ground_truth[0];
        assert_eq!((r.start, r.end), (160, 280));
        let (lo, hi) = (inj.param("clip_low").unwrap(), inj.param("clip_high").unwrap());
        assert!(y[160..=280].iter().all(|&v| v >= lo && v <= hi));
        assert!(std_dev(&y[160..=280]) <= std_dev(&x[160..=280]));
        unchanged_outside(&x, &y, &inj);
        assert_eq!(inject_waveform_distortion(&[2.0; 50], 0).unwrap().0, vec![2.0; 50]);
    }

    #[test]
    fn deterministic_per_seed() {
        let x = sine(400, 25.0);
        for t in AnomalyType::ALL {
            assert_eq!(inject(t, &x, 9), inject(t, &x, 9));
        }
    }
}
