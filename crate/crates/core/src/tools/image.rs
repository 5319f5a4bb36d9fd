//! Matrix encodings of a series (GAF, MTF, recurrence plot, line chart)
//! and their grayscale PNG rendering.

use serde::{Deserialize, Serialize};

use super::stats::{downsample_mean, is_constant, min_max, quantile_sorted};
use super::ToolError;

pub const GAF_MAX_LEN: usize = 400;
pub const MTF_MAX_LEN: usize = 400;
pub const MTF_BINS: usize = 10;
pub const RECURRENCE_MAX_LEN: usize = 1000;
pub const RECURRENCE_PERCENTILE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageKind {
    #[serde(rename = "GAF")]
    Gaf,
    #[serde(rename = "MTF")]
    Mtf,
    Recurrence,
    LineChart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMatrix {
    pub kind: ImageKind,
    pub data: Vec<Vec<f64>>,
    #[serde(skip)]
    pub rendered: Option<Vec<u8>>,
}

impl ImageMatrix {
    pub fn new(kind: ImageKind, data: Vec<Vec<f64>>) -> Self {
        ImageMatrix { kind, data, rendered: None }
    }

    pub fn rows(&self) -> usize {
        self.data.len()
    }

    pub fn cols(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    /// 8-bit grayscale PNG, row-major, linear min-max scaling; a flat
    /// matrix renders mid-gray.
    pub fn to_png(&self) -> Result<Vec<u8>, ToolError> {
        let (rows, cols) = (self.rows(), self.cols());
        if rows == 0 || cols == 0 || self.data.iter().any(|r| r.len() != cols) {
            return Err(ToolError::Render("matrix must be non-empty and rectangular".into()));
        }
        let (lo, hi) = self
            .data
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let span = hi - lo;
        let pixels: Vec<u8> = self
            .data
            .iter()
            .flatten()
            .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 128 })
            .collect();
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, cols as u32, rows as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| ToolError::Render(e.to_string()))?;
            w.write_image_data(&pixels).map_err(|e| ToolError::Render(e.to_string()))?;
        }
        Ok(out)
    }

    /// Render and keep the PNG bytes alongside the matrix.
    pub fn rendered(mut self) -> Result<Self, ToolError> {
        self.rendered = Some(self.to_png()?);
        Ok(self)
    }
}

/// Gramian angular summation field.
pub fn gaf(x: &[f64]) -> Result<ImageMatrix, ToolError> {
    if x.len() < 4 {
        return Err(ToolError::TooShort { need: 4, got: x.len() });
    }
    let x = downsample_mean(x, GAF_MAX_LEN);
    let scaled: Vec<f64> = if is_constant(&x) {
        vec![0.0; x.len()]
    } else {
        let (lo, hi) = min_max(&x);
        x.iter().map(|v| (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)).collect()
    };
    let phi: Vec<f64> = scaled.iter().map(|v| v.acos()).collect();
    let data = phi.iter().map(|a| phi.iter().map(|b| (a + b).cos()).collect()).collect();
    Ok(ImageMatrix::new(ImageKind::Gaf, data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtfReport {
    pub image: ImageMatrix,
    /// Row-normalized bin transition matrix; rows of unvisited bins are 0.
    pub transitions: Vec<Vec<f64>>,
    pub bins: Vec<usize>,
}

/// Quantile bin index per value (linear-interpolation quantile edges).
pub fn quantile_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..bins).map(|k| quantile_sorted(&sorted, k as f64 / bins as f64)).collect();
    x.iter().map(|&v| edges.partition_point(|&e| e < v)).collect()
}

/// Markov transition field. The transition matrix uses the full series;
/// the field is block-averaged to at most `MTF_MAX_LEN` per side.
pub fn mtf(x: &[f64], bins: usize) -> Result<MtfReport, ToolError> {
    if bins < 2 {
        return Err(ToolError::InvalidParameter(format!("bins {bins} < 2")));
    }
    if x.len() < bins {
        return Err(ToolError::TooShort { need: bins, got: x.len() });
    }
    let b = quantile_bins(x, bins);
    let mut w = vec![vec![0.0; bins]; bins];
    for pair in b.windows(2) {
        w[pair[0]][pair[1]] += 1.0;
    }
    for row in &mut w {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    let factor = x.len().div_ceil(MTF_MAX_LEN);
    let hist: Vec<Vec<f64>> = b
        .chunks(factor)
        .map(|c| {
            let mut h = vec![0.0; bins];
            c.iter().for_each(|&k| h[k] += 1.0);
            let len = c.len() as f64;
            h.iter_mut().for_each(|v| *v /= len);
            h
        })
        .collect();
    // mean of W[bin_i][bin_j] over a block pair = h_I^T W h_J
    let wh: Vec<Vec<f64>> = hist
        .iter()
        .map(|hj| (0..bins).map(|a| (0..bins).map(|c| w[a][c] * hj[c]).sum()).collect())
        .collect();
    let data = hist
        .iter()
        .map(|hi| wh.iter().map(|whj: &Vec<f64>| hi.iter().zip(whj).map(|(p, q)| p * q).sum()).collect())
        .collect();
    Ok(MtfReport {
        image: ImageMatrix::new(ImageKind::Mtf, data),
        transitions: w,
        bins: b,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub recurrence_rate: f64,
    pub determinism: f64,
    pub laminarity: f64,
    pub threshold: f64,
    #[serde(skip)]
    pub matrix: Option<Vec<Vec<bool>>>,
}

impl RecurrenceReport {
    pub fn image(&self) -> Option<ImageMatrix> {
        self.matrix.as_ref().map(|m| {
            let data = m.iter().map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).collect();
            ImageMatrix::new(ImageKind::Recurrence, data)
        })
    }
}

/// Fraction of recurrent points lying on runs of length >= 2, where
/// `runs` yields every line of the matrix in the chosen orientation.
fn line_fraction<I>(lines: I, total: usize) -> f64
where
    I: Iterator<Item = Vec<bool>>,
{
    if total == 0 {
        return 0.0;
    }
    let mut on_lines = 0usize;
    for line in lines {
        let mut run = 0usize;
        for b in line.into_iter().chain(std::iter::once(false)) {
            if b {
                run += 1;
            } else {
                if run >= 2 {
                    on_lines += run;
                }
                run = 0;
            }
        }
    }
    on_lines as f64 / total as f64
}

/// Recurrence plot with embedding dimension 1 and a threshold at the
/// `percentile` quantile of the off-diagonal distances.
pub fn recurrence(x: &[f64], percentile: f64) -> Result<RecurrenceReport, ToolError> {
    if x.len() < 10 {
        return Err(ToolError::TooShort { need: 10, got: x.len() });
    }
    if !(0.0..=1.0).contains(&percentile) {
        return Err(ToolError::InvalidParameter(format!("percentile {percentile}")));
    }
    let x = downsample_mean(x, RECURRENCE_MAX_LEN);
    let n = x.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push((x[i] - x[j]).abs());
        }
    }
    dists.sort_by(f64::total_cmp);
    let eps = quantile_sorted(&dists, percentile);
    let m: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i != j && (x[i] - x[j]).abs() <= eps).collect()).collect();
    let total: usize = m.iter().map(|r| r.iter().filter(|&&b| b).count()).sum();
    let recurrence_rate = total as f64 / (n * (n - 1)) as f64;
    let diagonals = (1..n).flat_map(|k| {
        let upper: Vec<bool> = (0..n - k).map(|i| m[i][i + k]).collect();
        let lower: Vec<bool> = (0..n - k).map(|i| m[i + k][i]).collect();
        [upper, lower]
    });
    let determinism = line_fraction(diagonals, total);
    let verticals = (0..n).map(|j| (0..n).map(|i| m[i][j]).collect::<Vec<bool>>());
    let laminarity = line_fraction(verticals, total);
    Ok(RecurrenceReport {
        recurrence_rate,
        determinism,
        laminarity,
        threshold: eps,
        matrix: Some(m),
    })
}

/// Rasterized line chart (`height` x `width`, 1 on the trace).
pub fn line_chart(x: &[f64], width: usize, height: usize) -> Result<ImageMatrix, ToolError> {
    if x.len() < 2 {
        return Err(ToolError::TooShort { need: 2, got: x.len() });
    }
    if width < 2 || height < 2 {
        return Err(ToolError::InvalidParameter("chart must be at least 2x2".into()));
    }
    let y = super::stats::resample_linear(&downsample_mean(x, width), width);
    let (lo, hi) = min_max(&y);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let row_of = |v: f64| {
        let r = ((hi - v) / span * (height - 1) as f64).round() as usize;
        r.min(height - 1)
    };
    let mut data = vec![vec![0.0; width]; height];
    for c in 0..width {
        let r0 = row_of(y[c]);
        let r1 = if c + 1 < width { row_of(y[c + 1]) } else { r0 };
        for row in data.iter_mut().take(r0.max(r1) + 1).skip(r0.min(r1)) {
            row[c] = 1.0;
        }
    }
    Ok(ImageMatrix::new(ImageKind::LineChart, data))
}
