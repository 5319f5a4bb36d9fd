//! Affiliation precision/recall over nearest-event zones.

use super::{check_len, EvalError, Prf};
use crate::types::{labels_to_segments, Interval};

fn dist_to(i: usize, e: &Interval) -> usize {
    if i < e.start {
        e.start - i
    } else {
        i.saturating_sub(e.end)
    }
}

/// Zones partitioning `[0, n)`, one per event; a point between two events
/// belongs to the nearer one, the earlier on ties.
pub fn affiliation_zones(events: &[Interval], n: usize) -> Vec<Interval> {
    let mut zones = Vec::with_capacity(events.len());
    let mut start = 0;
    for (j, e) in events.iter().enumerate() {
        let end = match events.get(j + 1) {
            // last i with i - e.end <= next.start - i
            Some(next) => (e.end + next.start) / 2,
            None => n - 1,
        };
        zones.push(Interval { start, end });
        start = end + 1;
    }
    zones
}

/// Fraction of zone positions at distance at least `d` from `e`.
fn survival(zone: &Interval, e: &Interval, d: usize) -> f64 {
    let count = (zone.start..=zone.end).filter(|&z| dist_to(z, e) >= d).count();
    count as f64 / zone.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneScore {
    /// `None` when the zone holds no prediction.
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Per-zone affiliation precision and recall.
pub fn zone_scores(pred: &[u8], gt: &[u8]) -> Result<Vec<ZoneScore>, EvalError> {
    check_len(pred, gt)?;
    let events = labels_to_segments(gt);
    if events.is_empty() {
        return Err(EvalError::NoGroundTruthEvents);
    }
    let zones = affiliation_zones(&events, gt.len());
    Ok(events
        .iter()
        .zip(&zones)
        .map(|(e, z)| {
            let predicted: Vec<usize> = (z.start..=z.end).filter(|&i| pred[i] != 0).collect();
            if predicted.is_empty() {
                return ZoneScore {
                    precision: None,
                    recall: 0.0,
                };
            }
            let precision = predicted.iter().map(|&p| survival(z, e, dist_to(p, e))).sum::<f64>() / predicted.len() as f64;
            let recall = (e.start..=e.end)
                .map(|y| {
                    let d = predicted.iter().map(|&p| p.abs_diff(y)).min().expect("non-empty");
                    survival(z, &Interval { start: y, end: y }, d)
                })
                .sum::<f64>()
                / e.len() as f64;
            ZoneScore {
                precision: Some(precision),
                recall,
            }
        })
        .collect())
}

/// Combine zone scores: precision over zones with predictions, recall over
/// all zones. Counts are in event units (`tp` detected events, `fn_`
/// missed events) except `fp`, the predicted points outside every event.
pub fn combine_zones(zones: &[ZoneScore], fp_points: usize) -> Prf {
    let included: Vec<f64> = zones.iter().filter_map(|z| z.precision).collect();
    let precision = if included.is_empty() {
        0.0
    } else {
        included.iter().sum::<f64>() / included.len() as f64
    };
    let recall = if zones.is_empty() {
        0.0
    } else {
        zones.iter().map(|z| z.recall).sum::<f64>() / zones.len() as f64
    };
    let tp = included.len();
    Prf::from_scores(precision, recall, tp, fp_points, zones.len() - tp)
}

pub fn affiliation_f1(pred: &[u8], gt: &[u8]) -> Result<Prf, EvalError> {
    let zones = zone_scores(pred, gt)?;
    let fp = pred.iter().zip(gt).filter(|(&p, &g)| p != 0 && g == 0).count();
    Ok(combine_zones(&zones, fp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(n: usize, ranges: &[(usize, usize)]) -> Vec<u8> {
        let mut v = vec![0; n];
        for &(s, e) in ranges {
            v[s..=e].fill(1);
        }
        v
    }

    #[test]
    fn zones_split_at_midpoints() {
        let ev = [Interval { start: 2, end: 3 }, Interval { start: 9, end: 9 }];
        // 6 is 3 from both events: earlier wins
        assert_eq!(
            affiliation_zones(&ev, 12),
            vec![Interval { start: 0, end: 6 }, Interval { start: 7, end: 11 }]
        );
    }

    #[test]
    fn exact_prediction_is_perfect() {
        let gt = seg(50, &[(5, 9), (30, 31)]);
        let p = affiliation_f1(&gt, &gt).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_prediction_has_zero_recall() {
        let p = affiliation_f1(&[0; 20], &seg(20, &[(3, 4)])).unwrap();
        assert_eq!((p.recall, p.f1), (0.0, 0.0));
        assert_eq!(affiliation_f1(&[0; 5], &[0; 5]), Err(EvalError::NoGroundTruthEvents));
    }

    /// Brute-force survival: enumerate every zone position.
    fn oracle_single(n: usize, e: (usize, usize), p: usize) -> (f64, f64) {
        let d = |i: usize| {
            if i < e.0 {
                e.0 - i
            } else {
                i.saturating_sub(e.1)
            }
        };
        let prec = (0..n).filter(|&z| d(z) >= d(p)).count() as f64 / n as f64;
        let rec = (e.0..=e.1)
            .map(|y| (0..n).filter(|&z| z.abs_diff(y) >= p.abs_diff(y)).count() as f64 / n as f64)
            .sum::<f64>()
            / (e.1 - e.0 + 1) as f64;
        (prec, rec)
    }

    #[test]
    fn single_point_matches_oracle_and_decays_with_distance() {
        let gt = seg(100, &[(40, 44)]);
        let mut last = f64::INFINITY;
        for p in 45..100 {
            let mut pred = vec![0; 100];
            pred[p] = 1;
            let r = affiliation_f1(&pred, &gt).unwrap();
            let (op, or) = oracle_single(100, (40, 44), p);
            assert!((r.precision - op).abs() < 1e-12 && (r.recall - or).abs() < 1e-12);
            assert!(r.f1 < last, "p={p}");
            last = r.f1;
        }
    }
}
