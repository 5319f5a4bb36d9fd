//! Symbolic aggregate approximation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::stats::{mean, z_normalize};
use super::ToolError;

pub const SAX_ALPHABET: usize = 10;
/// Adjacent-symbol rank jump that counts as a pattern break.
pub const SAX_BREAK_RANKS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaxBreak {
    /// Segment whose symbol jumped relative to the previous segment.
    pub segment: usize,
    /// First series index covered by that segment.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaxReport {
    pub symbols: String,
    pub breakpoints: Vec<f64>,
    pub segment_starts: Vec<usize>,
    pub breaks: Vec<SaxBreak>,
}

impl SaxReport {
    pub fn ranks(&self) -> Vec<usize> {
        self.symbols.bytes().map(|b| (b - b'a') as usize).collect()
    }
}

/// Standard normal quantiles splitting the line into `alphabet`
/// equiprobable regions.
pub fn gaussian_breakpoints(alphabet: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (1..alphabet).map(|k| normal.inverse_cdf(k as f64 / alphabet as f64)).collect()
}

/// Piece boundaries for `segments` near-equal pieces; the first
/// `n % segments` pieces get one extra point.
fn piece_starts(n: usize, segments: usize) -> Vec<usize> {
    let base = n / segments;
    let extra = n % segments;
    let mut starts = Vec::with_capacity(segments + 1);
    let mut at = 0;
    for s in 0..segments {
        starts.push(at);
        at += base + usize::from(s < extra);
    }
    starts.push(n);
    starts
}

pub fn sax(x: &[f64], segments: usize, alphabet: usize) -> Result<SaxReport, ToolError> {
    if !(2..=26).contains(&alphabet) {
        return Err(ToolError::InvalidParameter(format!("alphabet {alphabet} outside [2, 26]")));
    }
    if segments == 0 {
        return Err(ToolError::InvalidParameter("segments must be positive".into()));
    }
    if x.len() < segments {
        return Err(ToolError::TooShort {
            need: segments,
            got: x.len(),
        });
    }
    let breakpoints = gaussian_breakpoints(alphabet);
    let z = z_normalize(x);
    let constant = z.iter().all(|&v| v == 0.0);
    let bounds = piece_starts(x.len(), segments);
    let ranks: Vec<usize> = bounds
        .windows(2)
        .map(|w| {
            if constant {
                alphabet / 2
            } else {
                let v = mean(&z[w[0]..w[1]]);
                breakpoints.partition_point(|&b| b <= v)
            }
        })
        .collect();
    let symbols = ranks.iter().map(|&r| (b'a' + r as u8) as char).collect();
    let breaks = ranks
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].abs_diff(w[1]) >= SAX_BREAK_RANKS)
        .map(|(i, _)| SaxBreak {
            segment: i + 1,
            index: bounds[i + 1],
        })
        .collect();
    Ok(SaxReport {
        symbols,
        breakpoints,
        segment_starts: bounds[..segments].to_vec(),
        breaks,
    })
}
