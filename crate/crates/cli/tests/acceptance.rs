//! Acceptance harness: one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use tsad_core::agents::{Role, REPAIR_PROMPT};
use tsad_core::detector::{Scoring, ScriptedBackend};
use tsad_core::eval::affiliation::affiliation_f1;
use tsad_core::eval::{best_f1_search, delayed_f1, evaluate, pa_f1, point_f1, type_eval, EvalCase, Metric, TypeEvalCase};
use tsad_core::icl::{nearest, nearest_exhaustive, IclDb, IclEntry};
use tsad_core::inject::{base_signal, generate_benchmark, inject, local_std, noise_vector, BaseKind, BENCH_LEN};
use tsad_core::pipeline::{run_series, PipelineConfig};
use tsad_core::represent::{estimate_tokens, full_listing, summarize};
use tsad_core::tools::{decompose, mean, std_dev, wavelet_energy, z_normalize};
use tsad_core::{AnomalyFamily, AnomalyRecord, AnomalyType, Interval, Series};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.gen_bool(density))).collect()
}

fn random_segments(rng: &mut ChaCha8Rng, n: usize, max_segments: usize) -> Vec<u8> {
    let mut v = vec![0u8; n];
    for _ in 0..rng.gen_range(1..=max_segments) {
        let s = rng.gen_range(0..n);
        let e = (s + rng.gen_range(0..8)).min(n - 1);
        v[s..=e].fill(1);
    }
    v
}

/// Reference counts, computed by walking runs of the label vector directly.
fn oracle(pred: &[u8], gt: &[u8], delay: Option<usize>) -> (usize, usize, usize) {
    let n = gt.len();
    let mut credited = vec![None; n];
    let mut i = 0;
    while i < n {
        if gt[i] == 0 {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && gt[j + 1] == 1 {
            j += 1;
        }
        let hit = delay.map(|k| first_hit(pred, i, j).is_some_and(|f| f - i <= k));
        for c in credited.iter_mut().take(j + 1).skip(i) {
            *c = hit;
        }
        i = j + 1;
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for t in 0..n {
        let p = match credited[t] {
            Some(h) => h,
            None => pred[t] == 1,
        };
        match (p, gt[t] == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    (tp, fp, fn_)
}

fn first_hit(pred: &[u8], s: usize, e: usize) -> Option<usize> {
    (s..=e).find(|&t| pred[t] == 1)
}

fn f1_of(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn c1_metric_oracles() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=50);
        let gt = random_labels(&mut rng, n, 0.3);
        let pred = random_labels(&mut rng, n, 0.3);
        let k = rng.gen_range(0..6);
        let pairs = [
            (point_f1(&pred, &gt).unwrap(), oracle(&pred, &gt, None)),
            (pa_f1(&pred, &gt).unwrap(), oracle(&pred, &gt, Some(usize::MAX))),
            (delayed_f1(&pred, &gt, k).unwrap(), oracle(&pred, &gt, Some(k))),
        ];
        for (got, (tp, fp, fn_)) in pairs {
            if (got.tp, got.fp, got.fn_) != (tp, fp, fn_) || got.f1 != f1_of(tp, fp, fn_) {
                mismatches += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(mismatches == 0 && secs < 5.0, format!("500 pairs, {mismatches} mismatches, {secs:.2} s"))
}

fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<AnomalyRecord> {
    (0..rng.gen_range(0..8))
        .map(|_| {
            let s = rng.gen_range(0..n);
            let e = (s + rng.gen_range(0..6)).min(n - 1);
            AnomalyRecord::new(Interval { start: s, end: e }, rng.gen_range(0..=100), vec![AnomalyType::GlobalPoint], "r").unwrap()
        })
        .collect()
}

fn c2_metric_order() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for i in 0..200 {
        let n = rng.gen_range(20..=120);
        let gt = random_segments(&mut rng, n, 3);
        let records = random_records(&mut rng, n);
        let case = EvalCase {
            id: format!("c{i}"),
            gt: gt.clone(),
            records: records.clone(),
        };
        for tau in [0.5, 0.8] {
            let pt = evaluate(&case, Metric::Point, tau).unwrap().f1;
            let pa = evaluate(&case, Metric::Pa, tau).unwrap().f1;
            violations += usize::from(pa < pt);
        }
        for m in Metric::DEFAULT {
            let (_, best) = best_f1_search(&records, &gt, m).unwrap();
            for tau in [0.5, 0.8] {
                violations += usize::from(best.f1 < evaluate(&case, m, tau).unwrap().f1);
            }
        }
    }
    check(violations == 0, format!("200 cases, {violations} violations"))
}

fn c3_affiliation() -> Outcome {
    let n = 100;
    let (es, ee) = (40usize, 44usize);
    let mut gt = vec![0u8; n];
    gt[es..=ee].fill(1);
    let exact = affiliation_f1(&gt, &gt).unwrap().f1;
    let d = |i: usize| if i < es { es - i } else { i.saturating_sub(ee) };
    let mut last = f64::INFINITY;
    let (mut decreasing, mut worst) = (true, 0.0f64);
    for p in ee + 1..n {
        let mut pred = vec![0u8; n];
        pred[p] = 1;
        let got = affiliation_f1(&pred, &gt).unwrap();
        let prec = (0..n).filter(|&z| d(z) >= d(p)).count() as f64 / n as f64;
        let rec = (es..=ee)
            .map(|y| (0..n).filter(|&z| z.abs_diff(y) >= p.abs_diff(y)).count() as f64 / n as f64)
            .sum::<f64>()
            / 5.0;
        let f = 2.0 * prec * rec / (prec + rec);
        worst = worst
            .max((got.precision - prec).abs())
            .max((got.recall - rec).abs())
            .max((got.f1 - f).abs());
        decreasing &= got.f1 < last;
        last = got.f1;
    }
    check(
        (exact - 1.0).abs() <= 1e-12 && decreasing && worst <= 1e-12,
        format!("exact F1 {exact}, strictly decreasing {decreasing}, max oracle error {worst:.1e}"),
    )
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

fn base_for(t: AnomalyType, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let kinds: &[BaseKind] = if matches!(
        t,
        AnomalyType::AmplitudeChange | AnomalyType::SeasonalityAnomaly | AnomalyType::PatternShift
    ) {
        &[BaseKind::Sine, BaseKind::TrendSine]
    } else {
        &BaseKind::ALL
    };
    let k = kinds[rng.gen_range(0..kinds.len())];
    base_signal(k, BENCH_LEN, rng)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn injection_exact(t: AnomalyType, x: &[f64], seed: u64) -> Result<(), String> {
    let (y, inj) = inject(t, x, seed).map_err(|e| e.to_string())?;
    let n = x.len();
    let h = n / 2;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let same = |r: std::ops::Range<usize>| r.into_iter().all(|i| y[i] == x[i]);
    let fail = |what: &str| Err(format!("{} seed {seed}: {what}", t.name()));
    let sigma = std_dev(x);
    match t {
        AnomalyType::GlobalPoint | AnomalyType::ContextualPoint => {
            let w = inj.param("window").unwrap_or(0.0) as usize;
            for i in 0..n {
                let d = y[i] - x[i];
                let hit = inj.ground_truth.iter().any(|g| g.start == i);
                let want = match (hit, t) {
                    (false, _) => 0.0,
                    (true, AnomalyType::GlobalPoint) => 5.0 * sigma,
                    (true, _) => 3.0 * local_std(x, i, w),
                };
                if !close(d.abs(), want, scale) {
                    return fail(&format!("offset {d} at {i}, want {want}"));
                }
            }
        }
        AnomalyType::AmplitudeChange | AnomalyType::VarianceChange => {
            let (cp, factor) = match t {
                AnomalyType::AmplitudeChange => (h, 2.0),
                _ => (inj.param("change_point").unwrap() as usize, inj.param("factor").unwrap()),
            };
            if ![2.0, 2.5].contains(&factor) {
                return fail("factor");
            }
            let m = mean(&x[cp..]);
            if !same(0..cp) || (cp..n).any(|i| !close(y[i] - m, factor * (x[i] - m), scale)) {
                return fail("scaling");
            }
        }
        AnomalyType::SeasonalityAnomaly => {
            if !same(0..h) {
                return fail("first half changed");
            }
            if inj.param("variant") == Some(1.0) {
                let noise = noise_vector(inj.noise_seed().unwrap(), n - h, 0.15 * sigma);
                let m = mean(&x[h..]);
                if (h..n).any(|i| !close(y[i], m + 0.15 * (x[i] - m) + noise[i - h], scale)) {
                    return fail("flatten");
                }
            } else if inj.param("multiplier") != Some(2.5) {
                return fail("multiplier");
            }
        }
        AnomalyType::TrendChange => {
            let s = inj.param("slope").unwrap();
            if !close(s.abs(), (0.05 * sigma).max(0.05), 1.0) || (0..n).any(|i| !close(y[i] - x[i], s * i.saturating_sub(h) as f64, scale)) {
                return fail("slope");
            }
        }
        AnomalyType::MeanChangePoint => {
            let cp = inj.param("change_point").unwrap() as usize;
            let s = inj.param("shift").unwrap();
            if !close(s.abs(), 1.5 * sigma, scale) || !same(0..cp) || (cp..n).any(|i| !close(y[i] - x[i], s, scale)) {
                return fail("shift");
            }
        }
        AnomalyType::PatternShift => {
            let p = inj.param("period").unwrap() as usize;
            let len = n - h - p;
            let lag = (0..p)
                .map(|l| (l, pearson(&y[h..h + len], &x[h + l..h + l + len])))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if !same(0..h) || lag.0 != p / 4 || !close(lag.1, 1.0, 1.0) {
                return fail(&format!("lag {lag:?}, period {p}"));
            }
        }
        AnomalyType::WaveformDistortion => {
            let r = inj.ground_truth[0];
            let region = &x[r.start..=r.end];
            let (lo, hi) = (mean(region) - 0.5 * std_dev(region), mean(region) + 0.5 * std_dev(region));
            if r.start != 2 * n / 5 || r.end != 7 * n / 10 || !same(0..r.start) || !same(r.end + 1..n) {
                return fail("region");
            }
            if (r.start..=r.end).any(|i| !close(y[i], x[i].clamp(lo, hi), scale)) {
                return fail("clip band");
            }
        }
    }
    Ok(())
}

fn c4_injection() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    for t in AnomalyType::ALL {
        for seed in 0..20 {
            let x = base_for(t, &mut rng);
            if let Err(e) = injection_exact(t, &x, seed) {
                failures.push(e);
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        failures.is_empty() && secs < 10.0,
        format!(
            "180 injections, {} failures, {secs:.2} s {}",
            failures.len(),
            failures.first().cloned().unwrap_or_default()
        ),
    )
}

fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    noise_vector(rng.gen(), n, 1.0)
        .into_iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Top-3 mismatches and skipped fraction over 100 sets of four clusters of
/// four noisy copies.
fn retrieval_run(rng: &mut ChaCha8Rng, center: fn(&mut ChaCha8Rng, usize) -> Vec<f64>) -> (usize, f64) {
    let (mut mismatches, mut exact, mut total) = (0, 0, 0);
    for set in 0..100 {
        let centers: Vec<Vec<f64>> = (0..4).map(|c| z_normalize(&center(rng, c))).collect();
        let entries: Vec<IclEntry> = (0..16)
            .map(|i| {
                let noise = noise_vector(rng.gen(), 400, 0.1);
                let proto: Vec<f64> = centers[i % 4].iter().zip(&noise).map(|(a, b)| a + b).collect();
                IclEntry {
                    id: format!("p{i}"),
                    source: format!("set{set}@{i}"),
                    normalized: z_normalize(&proto),
                    prototype: proto,
                    variants: Vec::new(),
                }
            })
            .collect();
        let db = IclDb {
            seed: set,
            segment_length: 400,
            silhouette: None,
            entries,
        };
        let noise = noise_vector(rng.gen(), 400, 0.1);
        let query: Vec<f64> = centers[rng.gen_range(0..4)].iter().zip(&noise).map(|(a, b)| a + b).collect();
        let (pruned, evaluated, _) = nearest(&db, &query, 3).unwrap();
        mismatches += usize::from(pruned != nearest_exhaustive(&db, &query, 3).unwrap());
        exact += evaluated;
        total += db.entries.len();
    }
    (mismatches, 1.0 - exact as f64 / total as f64)
}

fn c5_retrieval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (walk_mismatch, walk_skip) = retrieval_run(&mut rng, |r, _| random_walk(r, 400));
    let (sine_mismatch, sine_skip) = retrieval_run(&mut rng, |r, c| base_signal(BaseKind::ALL[c % 3], 400, r));
    let mismatches = walk_mismatch + sine_mismatch;
    check(
        mismatches == 0 && walk_skip >= 0.30,
        format!(
            "200 sets, {mismatches} mismatches, {:.1}% skipped on random-walk clusters, {:.1}% on short-period clusters",
            walk_skip * 100.0,
            sine_skip * 100.0
        ),
    )
}

fn c6_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_decomp, mut worst_haar) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let n = rng.gen_range(64..=800);
        let x = base_signal(BaseKind::ALL[i % 3], n, &mut rng);
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let d = decompose(&x, None).map_err(|e| e.to_string())?;
        for (j, v) in x.iter().enumerate() {
            worst_decomp = worst_decomp.max((d.trend[j] + d.seasonal[j] + d.residual[j] - v).abs() / scale);
        }
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let w = wavelet_energy(&x).map_err(|e| e.to_string())?;
        worst_haar = worst_haar.max((w.total_energy() - energy).abs() / energy);
    }
    check(
        worst_decomp <= 1e-9 && worst_haar <= 1e-9,
        format!("100 series, reconstruction error {worst_decomp:.1e}, Parseval error {worst_haar:.1e}"),
    )
}

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/synthetic_detection.json");

fn c7_synthetic_detection() -> Outcome {
    let (seed, per_type) = (42, 10);
    let samples = generate_benchmark(&[], per_type, seed);
    let cfg = PipelineConfig::default();
    let cases = samples
        .par_iter()
        .map(|s| {
            let r = run_series(&s.series, &cfg, None, Scoring::Rule, None).map_err(|e| e.to_string())?;
            Ok(TypeEvalCase {
                injected: s.injection.anomaly_type,
                ground_truth: s.injection.ground_truth.clone(),
                evidence: r.evidence,
                records: r.records,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let report = type_eval(&cases);
    let recall = |f: AnomalyFamily| report.families.get(&f).map_or(0.0, |e| e.detection_recall);
    let body = serde_json::to_string_pretty(&json!({ "seed": seed, "per_type": per_type, "report": report })).unwrap() + "\n";
    let golden = match fs::read_to_string(GOLDEN) {
        Ok(g) if std::env::var_os("TSAD_BLESS").is_none() => g == body,
        _ => {
            fs::create_dir_all(Path::new(GOLDEN).parent().unwrap()).map_err(|e| e.to_string())?;
            fs::write(GOLDEN, &body).map_err(|e| e.to_string())?;
            true
        }
    };
    let (pt, st) = (recall(AnomalyFamily::Point), recall(AnomalyFamily::Structural));
    check(
        pt >= 0.85 && st >= 0.70 && golden,
        format!(
            "Point {pt:.3}, Structural {st:.3}, Seasonal {:.3}, Pattern {:.3}, golden match {golden}",
            recall(AnomalyFamily::Seasonal),
            recall(AnomalyFamily::Pattern)
        ),
    )
}

fn c8_compression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut over, mut worst) = (0, 1.0f64);
    for i in 0..50 {
        let x = base_signal(BaseKind::ALL[i % 3], 400, &mut rng);
        let full = estimate_tokens(&full_listing(&x));
        let s = Series::new(format!("w{i}"), x).unwrap();
        for budget in [300, 500] {
            let summary = summarize(&s, budget);
            over += usize::from(summary.estimated_tokens > budget);
            worst = worst.min(1.0 - summary.estimated_tokens as f64 / full as f64);
        }
    }
    check(
        over == 0 && worst >= 0.70,
        format!("50 windows, {over} over budget, minimum reduction {:.1}%", worst * 100.0),
    )
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tsad = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_tsad")).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&out.stderr).into_owned())
        }
    };
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    tsad(&["gen-synth", "-o", &p("bench"), "--per-type", "3", "--seed", "9"])?;
    tsad(&["detect", &p("bench"), "-o", &p("a")])?;
    tsad(&["detect", &p("bench"), "-o", &p("b")])?;
    let mut same = true;
    for f in ["records.jsonl", "evidence.jsonl"] {
        let a = fs::read(dir.path().join("a").join(f)).map_err(|e| e.to_string())?;
        let b = fs::read(dir.path().join("b").join(f)).map_err(|e| e.to_string())?;
        same &= a == b && !a.is_empty();
    }
    check(
        same,
        format!("two detect runs byte-identical: {same}; cross-platform comparison runs in CI"),
    )
}

fn c10_mock_pipeline() -> Outcome {
    let base: Vec<f64> = (0..400)
        .map(|i| (i as f64 * std::f64::consts::TAU / 25.0).sin())
        .zip(noise_vector(10, 400, 0.1))
        .map(|(a, b)| a + b)
        .collect();
    let (x, inj) = inject(AnomalyType::GlobalPoint, &base, 10).map_err(|e| e.to_string())?;
    let spike = inj.ground_truth[0].start;
    let gp = AnomalyType::GlobalPoint.id();
    let script = || {
        ScriptedBackend::new(vec![
            "The window looks unusual.".into(),
            format!(r#"[{{"index": {spike}, "end_index": {spike}, "confidence": 90, "types": [{gp}], "evidence": "spike"}}]"#),
            json!({
                "executive_summary": "one spike",
                "alarm_reason": "spike",
                "recommendations": ["inspect the sensor"],
                "confirmed_anomalies": [
                    {"index": spike, "end_index": spike, "types": [gp]},
                    {"index": 300, "end_index": 310, "types": [gp]}
                ]
            })
            .to_string(),
        ])
    };
    let series = Series::new("mock", x).unwrap();
    let run = || {
        let b = script();
        let r = run_series(&series, &PipelineConfig::default(), None, Scoring::Completion(&b), Some(&b)).map_err(|e| e.to_string());
        (r, b.prompts())
    };
    let (r, prompts) = run();
    let r = r?;
    let (again, _) = run();
    let mut problems = Vec::new();
    let summary = summarize(&series, PipelineConfig::default().token_budget);
    if prompts.len() != 3 {
        problems.push(format!("{} prompts", prompts.len()));
    } else {
        if prompts[0].role != Role::Detector || !prompts[0].user.contains(&summary.text) || prompts[0].user.contains(REPAIR_PROMPT) {
            problems.push("detector prompt".into());
        }
        if !prompts[1].user.contains(REPAIR_PROMPT) {
            problems.push("no repair retry".into());
        }
        if prompts[2].role != Role::Supervisor {
            problems.push("supervisor prompt".into());
        }
    }
    let want = Interval::point(spike);
    if r.records.len() != 1 || r.records[0].interval() != want || r.records[0].confidence() != 0.9 {
        problems.push(format!("records {:?}", r.records));
    }
    let listed: Vec<Interval> = r.report.confirmed_anomalies.iter().map(|c| c.record.interval()).collect();
    if listed != vec![want] || !listed.iter().all(|iv| r.records.iter().any(|rec| rec.interval() == *iv)) {
        problems.push(format!("supervisor introduced intervals {listed:?}"));
    }
    if r.usage.prompt_tokens == 0 || again.as_ref().ok() != Some(&r) {
        problems.push("usage or repeatability".into());
    }
    check(
        problems.is_empty(),
        format!(
            "{} prompts, retry on malformed, {} confirmed of 2 proposed {}",
            prompts.len(),
            listed.len(),
            problems.join("; ")
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracles", c1_metric_oracles),
        ("metric order", c2_metric_order),
        ("affiliation sanity", c3_affiliation),
        ("injection exactness", c4_injection),
        ("retrieval equivalence", c5_retrieval),
        ("tool conservation", c6_conservation),
        ("synthetic detection", c7_synthetic_detection),
        ("compression budget", c8_compression),
        ("determinism", c9_determinism),
        ("mock pipeline", c10_mock_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
