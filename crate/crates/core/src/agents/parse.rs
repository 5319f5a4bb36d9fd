//! Extraction and validation of JSON answers from completion text.

use serde_json::Value;

use super::AgentError;
use crate::types::{AnomalyType, Interval};

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCandidate {
    pub interval: Interval,
    /// Clamped to `[0, 100]`.
    pub raw_score: u32,
    pub types: Vec<AnomalyType>,
}

/// First JSON value of the wanted shape (`[` or `{`) embedded in `text`.
pub fn first_json(text: &str, open: char) -> Option<Value> {
    text.char_indices().filter(|&(_, c)| c == open).find_map(|(i, _)| {
        let mut it = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match it.next() {
            Some(Ok(v)) if (open == '[' && v.is_array()) || (open == '{' && v.is_object()) => Some(v),
            _ => None,
        }
    })
}

fn index_field(o: &serde_json::Map<String, Value>, key: &str) -> Option<usize> {
    let v = o.get(key)?;
    v.as_u64()
        .map(|u| u as usize)
        .or_else(|| v.as_f64().filter(|f| *f >= 0.0 && f.fract() == 0.0).map(|f| f as usize))
}

/// Type ids in `v`; unknown ids are dropped with a warning.
pub fn parse_types(v: Option<&Value>) -> Vec<AnomalyType> {
    let Some(Value::Array(items)) = v else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|t| {
            let id = t.as_u64().or_else(|| t.as_str().and_then(|s| s.trim().parse().ok()));
            match id.and_then(|id| u8::try_from(id).ok()).map(AnomalyType::from_id) {
                Some(Ok(t)) => Some(t),
                _ => {
                    log::warn!("dropping unknown anomaly type {t}");
                    None
                }
            }
        })
        .collect()
}

/// Parse `[{index, end_index, confidence, types}, ...]` out of `text`.
/// Records left without a known type are dropped.
pub fn parse_detector_response(text: &str) -> Result<Vec<ParsedCandidate>, AgentError> {
    let Some(Value::Array(items)) = first_json(text, '[') else {
        return Err(AgentError::UnparseableResponse("no JSON array in response".into()));
    };
    let mut out = Vec::new();
    for (k, item) in items.iter().enumerate() {
        let bad = |what: &str| AgentError::UnparseableResponse(format!("record {k}: {what}"));
        let o = item.as_object().ok_or_else(|| bad("not an object"))?;
        let start = index_field(o, "index").ok_or_else(|| bad("missing or invalid index"))?;
        let end = match o.get("end_index") {
            None | Some(Value::Null) => start,
            Some(_) => index_field(o, "end_index").ok_or_else(|| bad("invalid end_index"))?,
        };
        if end < start {
            return Err(bad("end_index before index"));
        }
        let score = o.get("confidence").and_then(Value::as_f64).ok_or_else(|| bad("missing confidence"))?;
        let types = parse_types(o.get("types"));
        if types.is_empty() {
            log::warn!("dropping record {k} without known types");
            continue;
        }
        out.push(ParsedCandidate {
            interval: Interval { start, end },
            raw_score: score.clamp(0.0, 100.0).round() as u32,
            types,
        });
    }
    Ok(out)
}

/// The canonical answer text for `cands`; parses back to the same values.
pub fn format_detector_answer(cands: &[ParsedCandidate]) -> String {
    let items: Vec<Value> = cands
        .iter()
        .map(|c| {
            serde_json::json!({
                "index": c.interval.start,
                "end_index": c.interval.end,
                "confidence": c.raw_score,
                "types": c.types.iter().map(|t| t.id()).collect::<Vec<_>>(),
            })
        })
        .collect();
    Value::Array(items).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_list() {
        assert_eq!(parse_detector_response("[]").unwrap(), vec![]);
        assert_eq!(parse_detector_response("Nothing here: []").unwrap(), vec![]);
    }

    #[test]
    fn one_record() {
        let r = parse_detector_response(r#"Result: [{"index": 10, "end_index": 12, "confidence": 80, "types": [6]}] done"#).unwrap();
        assert_eq!(
            r,
            vec![ParsedCandidate {
                interval: Interval { start: 10, end: 12 },
                raw_score: 80,
                types: vec![AnomalyType::MeanChangePoint]
            }]
        );
    }

    #[test]
    fn prose_is_rejected() {
        assert!(matches!(
            parse_detector_response("I think index 10 is odd."),
            Err(AgentError::UnparseableResponse(_))
        ));
        assert!(matches!(
            parse_detector_response("[see below] nothing"),
            Err(AgentError::UnparseableResponse(_))
        ));
    }

    #[test]
    fn clamps_and_drops() {
        let r = parse_detector_response(r#"[{"index":1,"confidence":140,"types":[1,42]},{"index":5,"end_index":6,"confidence":-3,"types":[99]}]"#)
            .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].raw_score, 100);
        assert_eq!(r[0].interval, Interval { start: 1, end: 1 });
        assert_eq!(r[0].types, vec![AnomalyType::GlobalPoint]);
        let r = parse_detector_response(r#"[{"index":5,"end_index":6,"confidence":-3,"types":["7"]}]"#).unwrap();
        assert_eq!(r[0].raw_score, 0);
    }

    #[test]
    fn malformed_records_fail() {
        for bad in [
            r#"[{"confidence":50,"types":[1]}]"#,
            r#"[{"index":5,"end_index":2,"confidence":50,"types":[1]}]"#,
            r#"[{"index":1,"types":[1]}]"#,
            "[3]",
        ] {
            assert!(parse_detector_response(bad).is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(raw in prop::collection::vec((0usize..500, 0usize..50, 0u32..=100, prop::collection::btree_set(1u8..=9, 1..4)), 0..6)) {
            let cands: Vec<ParsedCandidate> = raw
                .into_iter()
                .map(|(s, len, score, ids)| ParsedCandidate {
                    interval: Interval { start: s, end: s + len },
                    raw_score: score,
                    types: ids.into_iter().map(|i| AnomalyType::from_id(i).unwrap()).collect(),
                })
                .collect();
            prop_assert_eq!(parse_detector_response(&format_detector_answer(&cands)).unwrap(), cands);
        }
    }
}
