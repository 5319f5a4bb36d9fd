//! Balanced synthetic benchmark over typed injections.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{inject, usable_period, InjectError, Injection, MIN_SHIFT_PERIOD};
use crate::fsutil::write_atomic;
use crate::types::{AnomalyType, Series};

pub const BENCH_LEN: usize = 400;
pub const BENCH_SCHEMA: &str = "tsad-bench/1";
const MAX_ATTEMPTS_PER_SAMPLE: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Sine,
    TrendSine,
    Noise,
}

impl BaseKind {
    pub const ALL: [BaseKind; 3] = [BaseKind::Sine, BaseKind::TrendSine, BaseKind::Noise];

    pub fn periodic(self) -> bool {
        !matches!(self, BaseKind::Noise)
    }
}

/// Types whose injection rule needs a seasonal base.
pub fn needs_periodic_base(t: AnomalyType) -> bool {
    matches!(
        t,
        AnomalyType::AmplitudeChange | AnomalyType::SeasonalityAnomaly | AnomalyType::PatternShift
    )
}

pub fn base_signal(kind: BaseKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let period = rng.gen_range(16..=50) as f64;
    let phase = rng.gen_range(0.0..2.0 * PI);
    let slope = rng.gen_range(0.002..0.006) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let noise_std = if kind == BaseKind::Noise { 1.0 } else { 0.1 };
    let noise = super::noise_vector(rng.gen(), n, noise_std);
    (0..n)
        .map(|i| {
            let t = i as f64;
            let s = (2.0 * PI * t / period + phase).sin();
            noise[i]
                + match kind {
                    BaseKind::Sine => s,
                    BaseKind::TrendSine => s + slope * t,
                    BaseKind::Noise => 0.0,
                }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub id: String,
    pub base: String,
    pub series: Series,
    pub injection: Injection,
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    id: String,
    base: String,
    values: Vec<f64>,
    labels: Vec<u8>,
    #[serde(rename = "type")]
    anomaly_type: AnomalyType,
    ground_truth: Vec<crate::types::Interval>,
    seed: u64,
    params: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub schema: String,
    pub seed: u64,
    pub per_type: usize,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    #[serde(rename = "type")]
    pub anomaly_type: AnomalyType,
}

fn sample_seed(seed: u64, t: AnomalyType, attempt: u64) -> u64 {
    seed ^ ((t.id() as u64) << 32 | attempt)
}

/// `per_type` samples for each of the nine types. Bases are generated
/// (sine, trend + sine, noise) when `bases` is empty; otherwise drawn from
/// `bases`. Failed injections are logged and retried on a fresh draw.
pub fn generate_benchmark(bases: &[Series], per_type: usize, seed: u64) -> Vec<BenchmarkSample> {
    let mut out = Vec::with_capacity(per_type * 9);
    for t in AnomalyType::ALL {
        let periodic_only = needs_periodic_base(t);
        let mut made = 0;
        let mut attempt = 0u64;
        while made < per_type && attempt < per_type as u64 * MAX_ATTEMPTS_PER_SAMPLE {
            let s = sample_seed(seed, t, attempt);
            attempt += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (base_name, values) = if bases.is_empty() {
                let kinds: Vec<BaseKind> = BaseKind::ALL.into_iter().filter(|k| k.periodic() || !periodic_only).collect();
                let k = kinds[rng.gen_range(0..kinds.len())];
                let name = serde_json::to_value(k).expect("enum").as_str().unwrap_or("").to_string();
                (name, base_signal(k, BENCH_LEN, &mut rng))
            } else {
                let b = &bases[rng.gen_range(0..bases.len())];
                if periodic_only && usable_period(b.values(), MIN_SHIFT_PERIOD).is_none() {
                    continue;
                }
                (b.id.clone(), b.values().to_vec())
            };
            match inject(t, &values, rng.gen()) {
                Ok((y, inj)) => {
                    let id = format!("{}_{:03}", t.slug(), made);
                    let labels = inj.labels(y.len());
                    let series = Series::new(id.clone(), y)
                        .and_then(|s| s.with_labels(labels))
                        .expect("injected series is valid");
                    out.push(BenchmarkSample {
                        id,
                        base: base_name,
                        series,
                        injection: inj,
                    });
                    made += 1;
                }
                Err(e) => log::warn!("skipping {} sample (attempt {attempt}): {e}", t.slug()),
            }
        }
    }
    out
}

fn io(e: impl std::fmt::Display) -> InjectError {
    InjectError::Io(e.to_string())
}

/// One JSON file per sample plus `manifest.json`.
pub fn export_benchmark(samples: &[BenchmarkSample], seed: u64, per_type: usize, dir: &Path) -> Result<BenchmarkManifest, InjectError> {
    fs::create_dir_all(dir).map_err(io)?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let file = format!("{}.json", s.id);
        let body = SampleFile {
            id: s.id.clone(),
            base: s.base.clone(),
            values: s.series.values().to_vec(),
            labels: s.series.labels().map(<[u8]>::to_vec).unwrap_or_default(),
            anomaly_type: s.injection.anomaly_type,
            ground_truth: s.injection.ground_truth.clone(),
            seed: s.injection.seed,
            params: s.injection.params.clone(),
        };
        write_atomic(&dir.join(&file), serde_json::to_string(&body).map_err(io)?.as_bytes()).map_err(io)?;
        entries.push(ManifestEntry {
            id: s.id.clone(),
            file,
            anomaly_type: s.injection.anomaly_type,
        });
    }
    let manifest = BenchmarkManifest {
        schema: BENCH_SCHEMA.into(),
        seed,
        per_type,
        samples: entries,
    };
    write_atomic(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(io)?.as_bytes(),
    )
    .map_err(io)?;
    Ok(manifest)
}

pub fn load_benchmark(dir: &Path) -> Result<Vec<BenchmarkSample>, InjectError> {
    let text = fs::read_to_string(dir.join("manifest.json")).map_err(io)?;
    let manifest: BenchmarkManifest = serde_json::from_str(&text).map_err(io)?;
    if manifest.schema != BENCH_SCHEMA {
        return Err(InjectError::Io(format!("unsupported schema {}", manifest.schema)));
    }
    manifest
        .samples
        .iter()
        .map(|e| {
            let text = fs::read_to_string(dir.join(&e.file)).map_err(io)?;
            let f: SampleFile = serde_json::from_str(&text).map_err(io)?;
            let series = Series::new(f.id.clone(), f.values).and_then(|s| s.with_labels(f.labels)).map_err(io)?;
            Ok(BenchmarkSample {
                id: f.id,
                base: f.base,
                series,
                injection: Injection {
                    anomaly_type: f.anomaly_type,
                    ground_truth: f.ground_truth,
                    params: f.params,
                    seed: f.seed,
                },
            })
        })
        .collect()
}
