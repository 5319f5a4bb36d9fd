//! Analyst-facing diagnosis built only from detector records and window
//! statistics.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{first_json, parse_types, AgentError, PromptBundle, Role};
use crate::detector::CompletionBackend;
use crate::represent::format_number as fmt_num;
use crate::tools::StatsSummary;
use crate::types::{AnomalyRecord, Interval};

/// Confidence lower bounds of the Warning, Error and Urgent levels; they
/// mirror the detector rubric's 50/70/85 score bands.
pub const SEVERITY_BANDS: [f64; 3] = [0.50, 0.70, 0.85];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Warning,
    Error,
    Urgent,
}

impl Severity {
    pub fn from_confidence(c: f64) -> Severity {
        if c >= SEVERITY_BANDS[2] {
            Severity::Urgent
        } else if c >= SEVERITY_BANDS[1] {
            Severity::Error
        } else if c >= SEVERITY_BANDS[0] {
            Severity::Warning
        } else {
            Severity::Info
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedAnomaly {
    #[serde(flatten)]
    pub record: AnomalyRecord,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub executive_summary: String,
    pub time_series_characteristics: String,
    pub confirmed_anomalies: Vec<ConfirmedAnomaly>,
    pub overall_alarm_level: Severity,
    pub alarm_reason: String,
    pub recommendations: Vec<String>,
}

fn confirm(records: &[AnomalyRecord], tau: f64) -> Vec<ConfirmedAnomaly> {
    records
        .iter()
        .filter(|r| r.confidence() >= tau)
        .map(|r| ConfirmedAnomaly {
            severity: Severity::from_confidence(r.confidence()),
            record: r.clone(),
        })
        .collect()
}

fn overall(confirmed: &[ConfirmedAnomaly]) -> Severity {
    confirmed.iter().map(|c| c.severity).max().unwrap_or(Severity::Info)
}

/// Characteristics line from window statistics only.
pub fn describe_stats(stats: &StatsSummary) -> String {
    format!(
        "Values range over [{}, {}] with mean {} and standard deviation {}; skewness {}, excess kurtosis {}.",
        fmt_num(stats.min),
        fmt_num(stats.max),
        fmt_num(stats.mean),
        fmt_num(stats.std),
        fmt_num(stats.skewness),
        fmt_num(stats.kurtosis)
    )
}

fn describe(c: &ConfirmedAnomaly) -> String {
    let types: Vec<&str> = c.record.types().iter().map(|t| t.name()).collect();
    format!(
        "{} ({}) at {} with confidence {}",
        c.severity,
        types.join(", "),
        c.record.interval(),
        fmt_num(c.record.confidence())
    )
}

/// Rule-path report: fixed templates per alarm level. Records below `tau`
/// are not confirmed; nothing beyond the input records is reported.
pub fn supervise(records: &[AnomalyRecord], stats: &StatsSummary, tau: f64) -> DiagnosisReport {
    let confirmed = confirm(records, tau);
    let level = overall(&confirmed);
    let (executive_summary, alarm_reason, recommendations) = match confirmed
        .iter()
        .max_by(|a, b| a.severity.cmp(&b.severity).then(b.record.start().cmp(&a.record.start())))
    {
        None => (
            "No anomalies were confirmed in this series; no action is required.".to_string(),
            format!("No detector record reached the confidence threshold {}.", fmt_num(tau)),
            vec!["Continue routine monitoring.".to_string()],
        ),
        Some(worst) => {
            let action = match level {
                Severity::Urgent | Severity::Error => "immediate investigation is recommended",
                _ => "no immediate action is required",
            };
            let mut recs = Vec::new();
            if level >= Severity::Error {
                recs.push(format!(
                    "Investigate the {} anomaly at {} first.",
                    worst.severity,
                    worst.record.interval()
                ));
            }
            recs.push("Monitor the flagged intervals for recurrence.".to_string());
            recs.push("Review the analyzer evidence attached to each record before acting.".to_string());
            (
                format!(
                    "{} anomal{} confirmed, highest severity {}; {}.",
                    confirmed.len(),
                    if confirmed.len() == 1 { "y" } else { "ies" },
                    level,
                    action
                ),
                format!("Highest-severity record: {}.", describe(worst)),
                recs,
            )
        }
    };
    DiagnosisReport {
        executive_summary,
        time_series_characteristics: describe_stats(stats),
        confirmed_anomalies: confirmed,
        overall_alarm_level: level,
        alarm_reason,
        recommendations,
    }
}

/// Supervisor prompt over the confirmed records and window statistics.
pub fn render_supervisor_prompt(records: &[AnomalyRecord], stats: &StatsSummary, tau: f64) -> PromptBundle {
    let confirmed = confirm(records, tau);
    let mut user = format!(
        "Window statistics\n{}\n\nConfirmed detector records (threshold {})\n",
        describe_stats(stats),
        fmt_num(tau)
    );
    if confirmed.is_empty() {
        user.push_str("none\n");
    }
    for c in &confirmed {
        let types: Vec<String> = c.record.types().iter().map(|t| t.id().to_string()).collect();
        user.push_str(&format!(
            "- index {} end_index {} confidence {} types [{}] severity {}: {}\n",
            c.record.start(),
            c.record.end(),
            c.record.raw_score(),
            types.join(","),
            c.severity,
            c.record.evidence()
        ));
    }
    PromptBundle::new(Role::Supervisor, Role::Supervisor.system_text(), user, Vec::new())
}

fn text_field(o: &serde_json::Map<String, Value>, key: &str) -> Result<String, AgentError> {
    match o.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(v) if !v.is_null() => Ok(v.to_string()),
        _ => Err(AgentError::UnparseableResponse(format!("missing {key}"))),
    }
}

/// Build a report from a completion answer. Free-text fields come from the
/// answer; the anomaly list is the intersection of the answer with the
/// confirmed input records, so no interval or type can be introduced.
pub fn report_from_answer(text: &str, records: &[AnomalyRecord], stats: &StatsSummary, tau: f64) -> Result<DiagnosisReport, AgentError> {
    let Some(Value::Object(o)) = first_json(text, '{') else {
        return Err(AgentError::UnparseableResponse("no JSON object in response".into()));
    };
    let listed = match o.get("confirmed_anomalies") {
        Some(Value::Array(a)) => a.clone(),
        _ => return Err(AgentError::UnparseableResponse("missing confirmed_anomalies".into())),
    };
    let recommendations = match o.get("recommendations") {
        Some(Value::Array(a)) => a.iter().map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string)).collect(),
        _ => return Err(AgentError::UnparseableResponse("missing recommendations".into())),
    };
    let mut confirmed = Vec::new();
    for item in &listed {
        let Some(m) = item.as_object() else { continue };
        let get = |k: &str| m.get(k).and_then(Value::as_u64).map(|v| v as usize);
        let Some(start) = get("index") else { continue };
        let iv = Interval {
            start,
            end: get("end_index").unwrap_or(start),
        };
        let types = parse_types(m.get("types"));
        let Some(c) = confirm(records, tau).into_iter().find(|c| c.record.interval() == iv) else {
            log::warn!("supervisor answer lists {iv}, which is not a confirmed record; ignored");
            continue;
        };
        let kept: Vec<_> = c
            .record
            .types()
            .iter()
            .copied()
            .filter(|t| types.is_empty() || types.contains(t))
            .collect();
        let record = if kept.is_empty() || kept.len() == c.record.types().len() {
            c.record
        } else {
            AnomalyRecord::new(iv, u32::from(c.record.raw_score()), kept, c.record.evidence()).expect("subset of a valid record")
        };
        if !confirmed.iter().any(|x: &ConfirmedAnomaly| x.record.interval() == iv) {
            confirmed.push(ConfirmedAnomaly {
                record,
                severity: c.severity,
            });
        }
    }
    let level = overall(&confirmed);
    Ok(DiagnosisReport {
        executive_summary: text_field(&o, "executive_summary")?,
        time_series_characteristics: text_field(&o, "time_series_characteristics").unwrap_or_else(|_| describe_stats(stats)),
        confirmed_anomalies: confirmed,
        overall_alarm_level: level,
        alarm_reason: text_field(&o, "alarm_reason")?,
        recommendations,
    })
}

/// Completion-path report; malformed answers are retried once.
pub fn supervise_with_backend(
    records: &[AnomalyRecord],
    stats: &StatsSummary,
    tau: f64,
    backend: &dyn CompletionBackend,
) -> Result<DiagnosisReport, AgentError> {
    let prompt = render_supervisor_prompt(records, stats, tau);
    let first = backend.complete(&prompt)?;
    match report_from_answer(&first.text, records, stats, tau) {
        Ok(r) => Ok(r),
        Err(AgentError::UnparseableResponse(why)) => {
            log::warn!("supervisor answer unparseable ({why}); retrying once");
            let second = backend.complete(&prompt.with_repair())?;
            report_from_answer(&second.text, records, stats, tau)
        }
        Err(e) => Err(e),
    }
}

impl DiagnosisReport {
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "# Diagnosis report\n\n**Alarm level:** {}\n\n## Executive summary\n\n{}\n\n## Time-series characteristics\n\n{}\n\n## Confirmed anomalies\n\n",
            self.overall_alarm_level, self.executive_summary, self.time_series_characteristics
        );
        if self.confirmed_anomalies.is_empty() {
            s.push_str("None.\n");
        } else {
            s.push_str("| Interval | Types | Confidence | Severity | Evidence |\n|---|---|---|---|---|\n");
            for c in &self.confirmed_anomalies {
                let types: Vec<String> = c.record.types().iter().map(|t| format!("{} {}", t.id(), t.name())).collect();
                s.push_str(&format!(
                    "| {} | {} | {} | {} | {} |\n",
                    c.record.interval(),
                    types.join(", "),
                    fmt_num(c.record.confidence()),
                    c.severity,
                    c.record.evidence().replace('|', "/")
                ));
            }
        }
        s.push_str(&format!("\n## Alarm reason\n\n{}\n\n## Recommendations\n\n", self.alarm_reason));
        for r in &self.recommendations {
            s.push_str(&format!("- {r}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::ScriptedBackend;
    use crate::tools::statistics;
    use crate::types::AnomalyType;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stats() -> StatsSummary {
        statistics(&[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap()
    }

    fn rec(s: usize, e: usize, score: u32, t: &[AnomalyType]) -> AnomalyRecord {
        AnomalyRecord::new(Interval { start: s, end: e }, score, t.to_vec(), "ev").unwrap()
    }

    #[test]
    fn bands() {
        assert_eq!(Severity::from_confidence(0.9), Severity::Urgent);
        assert_eq!(Severity::from_confidence(0.85), Severity::Urgent);
        assert_eq!(Severity::from_confidence(0.7), Severity::Error);
        assert_eq!(Severity::from_confidence(0.5), Severity::Warning);
        assert_eq!(Severity::from_confidence(0.49), Severity::Info);
    }

    #[test]
    fn no_records_is_info() {
        let r = supervise(&[], &stats(), 0.5);
        assert_eq!(r.overall_alarm_level, Severity::Info);
        assert!(r.executive_summary.contains("No anomalies"));
        assert!(r.to_markdown().contains("None."));
    }

    #[test]
    fn one_urgent_record() {
        let r = supervise(&[rec(3, 4, 90, &[AnomalyType::GlobalPoint])], &stats(), 0.5);
        assert_eq!(r.overall_alarm_level, Severity::Urgent);
        assert_eq!(r.confirmed_anomalies.len(), 1);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<DiagnosisReport>(&json).unwrap(), r);
    }

    #[test]
    fn never_adds_intervals_or_types() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let recs: Vec<AnomalyRecord> = (0..rng.gen_range(0..5))
                .map(|_| {
                    let s = rng.gen_range(0..300);
                    let t = AnomalyType::ALL[rng.gen_range(0..9)];
                    rec(s, s + rng.gen_range(0..20), rng.gen_range(0..=100), &[t])
                })
                .collect();
            let tau = rng.gen_range(0.0..1.0);
            let r = supervise(&recs, &stats(), tau);
            let expected = recs
                .iter()
                .filter(|x| x.confidence() >= tau)
                .map(|x| Severity::from_confidence(x.confidence()))
                .max();
            assert_eq!(r.overall_alarm_level, expected.unwrap_or(Severity::Info));
            for c in &r.confirmed_anomalies {
                assert!(recs
                    .iter()
                    .any(|x| x.interval() == c.record.interval() && c.record.types().iter().all(|t| x.types().contains(t))));
            }
        }
    }

    #[test]
    fn completion_path_filters_invented_entries() {
        let recs = vec![rec(10, 12, 75, &[AnomalyType::MeanChangePoint, AnomalyType::VarianceChange])];
        let answer = r#"{"executive_summary":"s","time_series_characteristics":"c","confirmed_anomalies":[
            {"index":10,"end_index":12,"types":[6]},{"index":50,"end_index":60,"types":[1]}],
            "overall_alarm_level":"Urgent","alarm_reason":"r","recommendations":["a"]}"#;
        let backend = ScriptedBackend::new(vec!["not json".into(), answer.into()]);
        let r = supervise_with_backend(&recs, &stats(), 0.5, &backend).unwrap();
        assert_eq!(r.confirmed_anomalies.len(), 1);
        assert_eq!(r.confirmed_anomalies[0].record.types(), &[AnomalyType::MeanChangePoint]);
        assert_eq!(r.overall_alarm_level, Severity::Error);
        assert_eq!(backend.prompts().len(), 2);
        assert!(backend.prompts()[1].user.ends_with(super::super::REPAIR_PROMPT));
    }
}
