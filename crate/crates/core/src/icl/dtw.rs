//! Banded dynamic time warping and the LB_Keogh lower bound.

use super::IclError;

/// Sakoe-Chiba band of `ceil(len / 10)`.
pub fn default_band(len: usize) -> usize {
    len.div_ceil(10)
}

/// Banded DTW with squared local cost and match/insert/delete steps;
/// returns the square root of the accumulated cost.
pub fn dtw(a: &[f64], b: &[f64], band: usize) -> Result<f64, IclError> {
    let (n, m) = (a.len(), b.len());
    if band < n.abs_diff(m) {
        return Err(IclError::BandTooNarrow { band, need: n.abs_diff(m) });
    }
    if n == 0 || m == 0 {
        return Ok(if n == m { 0.0 } else { f64::INFINITY });
    }
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur.fill(f64::INFINITY);
        let lo = i.saturating_sub(band).max(1);
        let hi = (i + band).min(m);
        for j in lo..=hi {
            let cost = (a[i - 1] - b[j - 1]).powi(2);
            cur[j] = cost + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m].sqrt())
}

/// Upper and lower envelopes of `x` over a window of `band` each side.
pub fn envelope(x: &[f64], band: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    (0..n)
        .map(|i| {
            let w = &x[i.saturating_sub(band)..(i + band + 1).min(n)];
            (
                w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                w.iter().cloned().fold(f64::INFINITY, f64::min),
            )
        })
        .unzip()
}

/// LB_Keogh: distance from `candidate` to the envelope of `query`.
pub fn lb_keogh(query: &[f64], candidate: &[f64], band: usize) -> Result<f64, IclError> {
    if query.len() != candidate.len() {
        return Err(IclError::LengthMismatch {
            left: query.len(),
            right: candidate.len(),
        });
    }
    let (upper, lower) = envelope(query, band);
    Ok(lb_keogh_envelope(&upper, &lower, candidate))
}

pub(crate) fn lb_keogh_envelope(upper: &[f64], lower: &[f64], candidate: &[f64]) -> f64 {
    candidate
        .iter()
        .zip(upper.iter().zip(lower))
        .map(|(&c, (&u, &l))| {
            if c > u {
                (c - u).powi(2)
            } else if c < l {
                (l - c).powi(2)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .sqrt()
}
