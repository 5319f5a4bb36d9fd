//! Point, point-adjusted and delayed F1.

use super::{check_len, EvalError, Prf};
use crate::types::labels_to_segments;

fn counts(pred: &[u8], gt: &[u8]) -> Prf {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &g) in pred.iter().zip(gt) {
        match (p != 0, g != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Prf::from_counts(tp, fp, fn_)
}

pub fn point_f1(pred: &[u8], gt: &[u8]) -> Result<Prf, EvalError> {
    check_len(pred, gt)?;
    Ok(counts(pred, gt))
}

/// Predictions after point adjustment: every gt segment whose earliest
/// predicted point lies within `delay` of its start is fully predicted;
/// other gt segments are cleared.
pub fn adjust(pred: &[u8], gt: &[u8], delay: usize) -> Vec<u8> {
    let mut out = pred.to_vec();
    for seg in labels_to_segments(gt) {
        let first = (seg.start..=seg.end).find(|&i| pred[i] != 0);
        let hit = first.is_some_and(|f| f - seg.start <= delay);
        out[seg.start..=seg.end].fill(u8::from(hit));
    }
    out
}

pub fn pa_f1(pred: &[u8], gt: &[u8]) -> Result<Prf, EvalError> {
    check_len(pred, gt)?;
    Ok(counts(&adjust(pred, gt, usize::MAX), gt))
}

/// Segments first hit later than `k` steps after their start are missed
/// and the predictions inside them are discarded.
pub fn delayed_f1(pred: &[u8], gt: &[u8], k: usize) -> Result<Prf, EvalError> {
    check_len(pred, gt)?;
    Ok(counts(&adjust(pred, gt, k), gt))
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
    fn point_examples() {
        let p = point_f1(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
        let z = point_f1(&[0, 0, 0], &[0, 1, 1]).unwrap();
        assert_eq!((z.recall, z.f1), (0.0, 0.0));
        assert_eq!(point_f1(&[1, 0, 1], &[1, 0, 1]).unwrap().f1, 1.0);
        assert_eq!(point_f1(&[1], &[1, 0]), Err(EvalError::LengthMismatch { pred: 1, gt: 2 }));
    }

    #[test]
    fn pa_examples() {
        let gt = seg(40, &[(10, 19)]);
        let p = pa_f1(&seg(40, &[(15, 15)]), &gt).unwrap();
        assert_eq!((p.tp, p.fp, p.fn_), (10, 0, 0));
        let p = pa_f1(&seg(40, &[(15, 15), (30, 30)]), &gt).unwrap();
        assert_eq!((p.tp, p.fp, p.fn_), (10, 1, 0));
    }

    #[test]
    fn delayed_examples() {
        let gt = seg(40, &[(10, 19)]);
        let p = delayed_f1(&seg(40, &[(12, 12)]), &gt, 3).unwrap();
        assert_eq!((p.tp, p.fp, p.fn_), (10, 0, 0));
        let p = delayed_f1(&seg(40, &[(15, 15)]), &gt, 3).unwrap();
        assert_eq!((p.tp, p.fp, p.fn_), (0, 0, 10));
        assert_eq!(
            delayed_f1(&seg(40, &[(15, 15)]), &gt, 40).unwrap(),
            pa_f1(&seg(40, &[(15, 15)]), &gt).unwrap()
        );
    }

    fn pair() -> impl proptest::strategy::Strategy<Value = (Vec<u8>, Vec<u8>)> {
        use proptest::prelude::*;
        (1usize..60).prop_flat_map(|n| (proptest::collection::vec(0u8..2, n), proptest::collection::vec(0u8..2, n)))
    }

    proptest::proptest! {
        #[test]
        fn pa_dominates_point((pred, gt) in pair()) {
            let pa = pa_f1(&pred, &gt).unwrap();
            let pt = point_f1(&pred, &gt).unwrap();
            proptest::prop_assert!(pa.f1 >= pt.f1 && pa.recall >= pt.recall);
        }

        #[test]
        fn unbounded_delay_equals_pa((pred, gt) in pair()) {
            proptest::prop_assert_eq!(delayed_f1(&pred, &gt, usize::MAX).unwrap(), pa_f1(&pred, &gt).unwrap());
            proptest::prop_assert_eq!(delayed_f1(&pred, &gt, gt.len()).unwrap(), pa_f1(&pred, &gt).unwrap());
        }
    }
}
