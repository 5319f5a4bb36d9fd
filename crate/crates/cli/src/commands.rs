//! The five subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use tsad_core::agents::supervise;
use tsad_core::detector::{CompletionBackend, HttpBackend, MockBackend, Scoring};
use tsad_core::eval::{eval_report, render_table, type_eval, EvalCase, EvalReport, Metric, TypeEvalCase, TypeEvalReport};
use tsad_core::icl::{build_db, IclDb};
use tsad_core::ingest::temporal_split;
use tsad_core::inject::{export_benchmark, generate_benchmark};
use tsad_core::pipeline::{run_series, SeriesResult};
use tsad_core::tools::statistics;
use tsad_core::{AnomalyRecord, Series};

use crate::config::{BackendKind, Config, Threshold};
use crate::error::CliError;
use crate::io::{
    create_dir, file_stem, load_input, read_jsonl, require, write_jsonl, write_text, EvidenceLine, RecordLine, EVIDENCE_FILE, RECORDS_FILE,
};

fn backend(cfg: &Config) -> Result<Option<Box<dyn CompletionBackend>>, CliError> {
    Ok(match cfg.backend {
        BackendKind::Rule => None,
        BackendKind::Mock => {
            let dir = cfg
                .mock_dir
                .as_ref()
                .ok_or_else(|| CliError::InvalidConfig("backend mock needs mock_dir".into()))?;
            require(dir)?;
            Some(Box::new(MockBackend::new(dir.clone())))
        }
        BackendKind::Http => Some(Box::new(HttpBackend::from_env(cfg.max_in_flight)?)),
    })
}

fn write_report(dir: &Path, id: &str, report: &tsad_core::agents::DiagnosisReport) -> Result<(), CliError> {
    let stem = file_stem(id);
    write_text(&dir.join(format!("{stem}.md")), &report.to_markdown())?;
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::output(dir, e))?;
    write_text(&dir.join(format!("{stem}.json")), &json)
}

pub fn detect(cfg: &Config, dataset: &Path, out: &Path, reports: bool) -> Result<(), CliError> {
    cfg.validate()?;
    let input = load_input(dataset)?;
    let backend = backend(cfg)?;
    let db = match &cfg.icl_dir {
        Some(dir) => {
            require(dir)?;
            Some(IclDb::load(dir)?)
        }
        None => None,
    };
    let scoring = match &backend {
        Some(b) => Scoring::Completion(b.as_ref()),
        None => Scoring::Rule,
    };
    let supervisor = if cfg.llm_supervisor { backend.as_deref() } else { None };
    let pipeline = cfg.pipeline();
    let results: Vec<SeriesResult> = input
        .series
        .par_iter()
        .map(|s| run_series(s, &pipeline, db.as_ref(), scoring, supervisor))
        .collect::<Result<_, _>>()?;

    create_dir(out)?;
    let records: Vec<RecordLine> = results
        .iter()
        .flat_map(|r| {
            r.records.iter().map(|rec| RecordLine {
                series: r.id.clone(),
                record: rec.clone(),
            })
        })
        .collect();
    write_jsonl(&out.join(RECORDS_FILE), &records)?;
    let evidence: Vec<EvidenceLine> = results
        .iter()
        .flat_map(|r| {
            r.evidence.iter().map(|(family, iv)| EvidenceLine {
                series: r.id.clone(),
                family: *family,
                index: iv.start,
                end_index: iv.end,
            })
        })
        .collect();
    write_jsonl(&out.join(EVIDENCE_FILE), &evidence)?;
    if reports {
        let dir = out.join("reports");
        create_dir(&dir)?;
        for r in &results {
            write_report(&dir, &r.id, &r.report)?;
        }
    }
    let requests: usize = results.iter().map(|r| r.usage.requests).sum();
    let windows: usize = results.iter().map(|r| r.windows).sum();
    log::info!("{windows} windows, {requests} backend requests");
    println!("{} series, {} records -> {}", results.len(), records.len(), out.display());
    Ok(())
}

pub fn build_icl(cfg: &Config, train: &Path, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let input = load_input(train)?;
    let series: Vec<Series> = match cfg.train_fraction {
        Some(f) => input
            .series
            .iter()
            .map(|s| temporal_split(s, f).map(|(a, _)| a))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::InvalidInput(e.to_string()))?,
        None => input.series,
    };
    let db = build_db(&series, cfg.segment_length, cfg.seed)?;
    db.save(out)?;
    println!(
        "{} entries (silhouette {}) -> {}",
        db.entries.len(),
        db.silhouette.map_or("n/a".into(), |s| format!("{s:.3}")),
        out.display()
    );
    Ok(())
}

pub fn gen_synth(out: &Path, per_type: usize, seed: u64) -> Result<(), CliError> {
    if per_type == 0 {
        return Err(CliError::InvalidConfig("per_type must be at least 1".into()));
    }
    let samples = generate_benchmark(&[], per_type, seed);
    let manifest = export_benchmark(&samples, seed, per_type, out).map_err(|e| CliError::output(out, e))?;
    println!("{} samples -> {}", manifest.samples.len(), out.display());
    Ok(())
}

fn grouped(records: Vec<RecordLine>, series: &[Series]) -> Result<BTreeMap<String, Vec<AnomalyRecord>>, CliError> {
    let mut by_id: BTreeMap<String, Vec<AnomalyRecord>> = series.iter().map(|s| (s.id.clone(), Vec::new())).collect();
    let lengths: BTreeMap<&str, usize> = series.iter().map(|s| (s.id.as_str(), s.len())).collect();
    for line in records {
        let n = *lengths
            .get(line.series.as_str())
            .ok_or_else(|| CliError::InvalidInput(format!("record for unknown series `{}`", line.series)))?;
        if !line.record.fits(n) {
            return Err(CliError::InvalidInput(format!(
                "record {} outside series `{}` of length {n}",
                line.record.interval(),
                line.series
            )));
        }
        by_id.get_mut(&line.series).expect("known id").push(line.record);
    }
    Ok(by_id)
}

#[derive(Serialize)]
struct EvalOutput {
    dataset: String,
    threshold: Threshold,
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    type_eval: Option<TypeEvalReport>,
}

fn render_type_table(r: &TypeEvalReport) -> String {
    let mut s = format!("{:<11} {:>7} {:>8} {:>7} {:>9}\n", "family", "samples", "detected", "recall", "agreement");
    for (f, e) in &r.families {
        let agree = e.type_agreement.map_or("-".into(), |a| format!("{a:.4}"));
        s.push_str(&format!(
            "{:<11} {:>7} {:>8} {:>7.4} {:>9}\n",
            f.name(),
            e.samples,
            e.detected,
            e.detection_recall,
            agree
        ));
    }
    s
}

pub fn eval(cfg: &Config, records: &Path, dataset: &Path, metrics: &[Metric], evidence: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    let input = load_input(dataset)?;
    let lines: Vec<RecordLine> = read_jsonl(records)?;
    let by_id = grouped(lines, &input.series)?;
    let cases: Vec<EvalCase> = input
        .series
        .iter()
        .map(|s| {
            let gt = s
                .labels()
                .ok_or_else(|| CliError::InvalidInput(format!("series `{}` has no labels", s.id)))?;
            Ok(EvalCase {
                id: s.id.clone(),
                gt: gt.to_vec(),
                records: by_id[&s.id].clone(),
            })
        })
        .collect::<Result<_, CliError>>()?;
    let has_events = cases.iter().any(|c| c.gt.iter().any(|&g| g != 0));
    let metrics: Vec<Metric> = metrics
        .iter()
        .copied()
        .filter(|m| {
            let keep = has_events || *m != Metric::Affiliation;
            if !keep {
                log::warn!("no labeled events; skipping affiliation");
            }
            keep
        })
        .collect();
    let report = eval_report(&cases, &metrics, cfg.threshold.mode()).map_err(|e| CliError::Analysis(e.to_string()))?;
    print!("{}", render_table(&[(input.name.as_str(), &report)]));

    let evidence_path = evidence.map(Path::to_path_buf).or_else(|| {
        let sibling = records.with_file_name(EVIDENCE_FILE);
        sibling.is_file().then_some(sibling)
    });
    let type_report = match (&input.samples, evidence_path) {
        (Some(samples), Some(path)) => {
            let lines: Vec<EvidenceLine> = read_jsonl(&path)?;
            let mut ev: BTreeMap<&str, Vec<_>> = BTreeMap::new();
            for l in &lines {
                ev.entry(l.series.as_str()).or_default().push((l.family, l.interval()));
            }
            let tcases: Vec<TypeEvalCase> = samples
                .iter()
                .map(|s| TypeEvalCase {
                    injected: s.injection.anomaly_type,
                    ground_truth: s.injection.ground_truth.clone(),
                    evidence: ev.get(s.series.id.as_str()).cloned().unwrap_or_default(),
                    records: by_id[&s.series.id].clone(),
                })
                .collect();
            let r = type_eval(&tcases);
            print!("\n{}", render_type_table(&r));
            Some(r)
        }
        _ => None,
    };
    if let Some(out) = out {
        let body = EvalOutput {
            dataset: input.name.clone(),
            threshold: cfg.threshold,
            report,
            type_eval: type_report,
        };
        let json = serde_json::to_string_pretty(&body).map_err(|e| CliError::output(out, e))?;
        write_text(out, &json)?;
    }
    Ok(())
}

pub fn report(cfg: &Config, records: &Path, dataset: &Path, out: Option<&PathBuf>) -> Result<(), CliError> {
    cfg.validate()?;
    let input = load_input(dataset)?;
    let by_id = grouped(read_jsonl(records)?, &input.series)?;
    if let Some(dir) = out {
        create_dir(dir)?;
    }
    for s in &input.series {
        let stats = statistics(s.values()).map_err(|e| CliError::Analysis(e.to_string()))?;
        let r = supervise(&by_id[&s.id], &stats, cfg.threshold.tau());
        match out {
            Some(dir) => write_report(dir, &s.id, &r)?,
            None => println!("# {}\n\n{}", s.id, r.to_markdown()),
        }
    }
    Ok(())
}
