//! Synthetic in-context reference database: normal prototypes picked by
//! k-medoids, nine injected variants per prototype with tool evidence,
//! and DTW retrieval with LB_Keogh pruning.

mod cluster;
mod dtw;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{distance_matrix, pam, select_k, silhouette, Clustering};
pub use dtw::{default_band, dtw, envelope, lb_keogh};

use crate::fsutil::write_atomic;
use crate::inject::{inject, Injection};
use crate::represent::format_number as fmt;
use crate::tools::{autocorrelation_split, change_points, compare_segments, fft_spectrum, mean, resample_linear, std_dev, z_normalize};
use crate::types::{labels_to_segments, AnomalyType, Series};

pub const ICL_SCHEMA: &str = "tsad-icl/1";
pub const DEFAULT_SEGMENT_LEN: usize = 400;
/// Up to this many normal segments are all kept without clustering.
pub const KEEP_ALL_MAX: usize = 12;
pub const TOP_K: usize = 3;
pub const MIN_SEGMENT_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IclError {
    #[error("band {band} narrower than the length difference {need}")]
    BandTooNarrow { band: usize, need: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no normal training segments left after excluding labeled anomalies")]
    NoNormalSegments,
    #[error("reference database is empty")]
    EmptyDb,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("database i/o: {0}")]
    Io(String),
    #[error("database format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum VariantOutcome {
    Injected {
        series: Vec<f64>,
        injection: Injection,
        evidence: String,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    #[serde(rename = "type")]
    pub anomaly_type: AnomalyType,
    #[serde(flatten)]
    pub outcome: VariantOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclEntry {
    pub id: String,
    /// `series_id@start` of the training segment.
    pub source: String,
    pub prototype: Vec<f64>,
    pub normalized: Vec<f64>,
    /// One per type, in type order.
    pub variants: Vec<Variant>,
}

impl IclEntry {
    pub fn variant(&self, t: AnomalyType) -> Option<&Variant> {
        self.variants.iter().find(|v| v.anomaly_type == t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IclDb {
    pub seed: u64,
    pub segment_length: usize,
    /// Mean silhouette of the chosen clustering; `None` when all segments
    /// were kept.
    pub silhouette: Option<f64>,
    pub entries: Vec<IclEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclReference {
    pub entry_id: String,
    pub normal: Vec<f64>,
    pub anomalous: Vec<f64>,
    #[serde(rename = "type")]
    pub anomaly_type: AnomalyType,
    pub evidence: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub references: Vec<IclReference>,
    /// `(entry index, DTW distance)` of the nearest prototypes, closest first.
    pub neighbours: Vec<(usize, f64)>,
    pub exact_evaluations: usize,
    pub pruned: usize,
}

/// Non-overlapping full-length segments that avoid labeled anomalies.
pub fn normal_segments(train: &[Series], segment_length: usize) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    for s in train {
        let bad = s.labels().map(labels_to_segments).unwrap_or_default();
        let mut start = 0;
        while start + segment_length <= s.len() {
            let end = start + segment_length - 1;
            if !bad.iter().any(|b| b.start <= end && start <= b.end) {
                out.push((format!("{}@{start}", s.id), s.values()[start..=end].to_vec()));
            }
            start += segment_length;
        }
    }
    out
}

fn variant_seed(seed: u64, entry: usize, t: AnomalyType) -> u64 {
    seed ^ ((entry as u64) << 8 | u64::from(t.id())).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Tool-evidence deltas between a normal prototype and its variant.
pub fn evidence_summary(normal: &[f64], variant: &[f64], injection: &Injection) -> String {
    let mut parts = vec![format!(
        "mean {} -> {}, std {} -> {}",
        fmt(mean(normal)),
        fmt(mean(variant)),
        fmt(std_dev(normal)),
        fmt(std_dev(variant))
    )];
    if let (Ok(a), Ok(b)) = (change_points(normal), change_points(variant)) {
        parts.push(format!("change points {} -> {}", a.points.len(), b.points.len()));
    }
    if let (Ok(a), Ok(b)) = (fft_spectrum(normal), fft_spectrum(variant)) {
        let p = |v: Option<f64>| v.map_or("none".to_string(), fmt);
        parts.push(format!(
            "dominant period {} -> {}, spectral entropy {} -> {}",
            p(a.dominant_period),
            p(b.dominant_period),
            fmt(a.spectral_entropy),
            fmt(b.spectral_entropy)
        ));
    }
    if let Ok(r) = autocorrelation_split(variant, variant.len() / 4) {
        let p = |v: Option<usize>| v.map_or("none".to_string(), |v| v.to_string());
        parts.push(format!("ACF period halves {} / {}", p(r.period_first), p(r.period_second)));
    }
    if let Some(gt) = injection.ground_truth.first() {
        if let Ok(c) = compare_segments(variant, gt.start) {
            parts.push(format!(
                "split at {}: mean shift {} sd (p={}), variance ratio {}",
                gt.start,
                fmt(c.mean_shift_sigma),
                fmt(c.mean_diff_p),
                fmt(c.var_ratio)
            ));
        }
    }
    parts.join("; ")
}

fn build_entry(index: usize, source: String, prototype: Vec<f64>, seed: u64) -> IclEntry {
    let variants = AnomalyType::ALL
        .iter()
        .map(|&t| {
            let outcome = match inject(t, &prototype, variant_seed(seed, index, t)) {
                Ok((series, injection)) => {
                    let evidence = evidence_summary(&prototype, &series, &injection);
                    VariantOutcome::Injected { series, injection, evidence }
                }
                Err(e) => VariantOutcome::Failed { reason: e.to_string() },
            };
            Variant { anomaly_type: t, outcome }
        })
        .collect();
    IclEntry {
        id: format!("entry_{index:04}"),
        source,
        normalized: z_normalize(&prototype),
        prototype,
        variants,
    }
}

/// Build the reference database from labeled (or unlabeled) training series.
pub fn build_db(train: &[Series], segment_length: usize, seed: u64) -> Result<IclDb, IclError> {
    if segment_length < MIN_SEGMENT_LEN {
        return Err(IclError::InvalidParameter(format!(
            "segment length {segment_length} below {MIN_SEGMENT_LEN}"
        )));
    }
    let segments = normal_segments(train, segment_length);
    if segments.is_empty() {
        return Err(IclError::NoNormalSegments);
    }
    let (chosen, silhouette): (Vec<usize>, Option<f64>) = if segments.len() <= KEEP_ALL_MAX {
        ((0..segments.len()).collect(), None)
    } else {
        let z: Vec<Vec<f64>> = segments.iter().map(|(_, v)| z_normalize(v)).collect();
        let (c, s) = select_k(&distance_matrix(&z));
        (c.medoids, Some(s))
    };
    let entries = chosen
        .par_iter()
        .enumerate()
        .map(|(i, &s)| build_entry(i, segments[s].0.clone(), segments[s].1.clone(), seed))
        .collect();
    Ok(IclDb {
        seed,
        segment_length,
        silhouette,
        entries,
    })
}

fn prepare_query(db: &IclDb, query: &[f64]) -> Vec<f64> {
    let q = if query.len() == db.segment_length {
        query.to_vec()
    } else {
        resample_linear(query, db.segment_length)
    };
    z_normalize(&q)
}

fn sort_neighbours(v: &mut [(usize, f64)]) {
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}

/// `(entry index, DTW distance)`, closest first.
pub type Neighbours = Vec<(usize, f64)>;

/// Exact banded-DTW top-k over every prototype.
pub fn nearest_exhaustive(db: &IclDb, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>, IclError> {
    if db.entries.is_empty() {
        return Err(IclError::EmptyDb);
    }
    let q = prepare_query(db, query);
    let band = default_band(q.len());
    let mut all = db
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| Ok((i, dtw(&q, &e.normalized, band)?)))
        .collect::<Result<Vec<_>, IclError>>()?;
    sort_neighbours(&mut all);
    all.truncate(k);
    Ok(all)
}

/// Top-k by banded DTW, skipping prototypes whose LB_Keogh bound already
/// exceeds the current k-th best exact distance. Returns the neighbours and
/// the number of exact evaluations and pruned prototypes.
pub fn nearest(db: &IclDb, query: &[f64], k: usize) -> Result<(Neighbours, usize, usize), IclError> {
    if db.entries.is_empty() {
        return Err(IclError::EmptyDb);
    }
    let q = prepare_query(db, query);
    let band = default_band(q.len());
    let (upper, lower) = envelope(&q, band);
    let mut bounds: Vec<(usize, f64)> = db
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if e.normalized.len() != q.len() {
                return Err(IclError::LengthMismatch {
                    left: q.len(),
                    right: e.normalized.len(),
                });
            }
            Ok((i, dtw::lb_keogh_envelope(&upper, &lower, &e.normalized)))
        })
        .collect::<Result<_, _>>()?;
    sort_neighbours(&mut bounds);
    let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
    let mut exact = 0;
    for (pos, &(i, lb)) in bounds.iter().enumerate() {
        if best.len() >= k && lb > best[k - 1].1 {
            return Ok((best, exact, bounds.len() - pos));
        }
        exact += 1;
        best.push((i, dtw(&q, &db.entries[i].normalized, band)?));
        sort_neighbours(&mut best);
        best.truncate(k);
    }
    Ok((best, exact, 0))
}

/// Contrastive references for the query: the matching-type variants of
/// the [`TOP_K`] nearest prototypes. Only raw values and candidate types
/// are read.
pub fn retrieve(db: &IclDb, query: &[f64], candidate_types: &BTreeSet<AnomalyType>) -> Result<Retrieval, IclError> {
    retrieve_k(db, query, candidate_types, TOP_K)
}

pub fn retrieve_k(db: &IclDb, query: &[f64], candidate_types: &BTreeSet<AnomalyType>, k: usize) -> Result<Retrieval, IclError> {
    let (neighbours, exact_evaluations, pruned) = nearest(db, query, k)?;
    let mut references = Vec::new();
    for &(i, distance) in &neighbours {
        let e = &db.entries[i];
        for &t in candidate_types {
            if let Some(Variant {
                outcome: VariantOutcome::Injected { series, evidence, .. },
                ..
            }) = e.variant(t)
            {
                references.push(IclReference {
                    entry_id: e.id.clone(),
                    normal: e.prototype.clone(),
                    anomalous: series.clone(),
                    anomaly_type: t,
                    evidence: evidence.clone(),
                    distance,
                });
            }
        }
    }
    Ok(Retrieval {
        references,
        neighbours,
        exact_evaluations,
        pruned,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    file: String,
    source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    schema: String,
    seed: u64,
    segment_length: usize,
    silhouette: Option<f64>,
    entries: Vec<ManifestEntry>,
}

fn io_err(e: impl std::fmt::Display) -> IclError {
    IclError::Io(e.to_string())
}

impl IclDb {
    /// Write `manifest.json` and `entries/entry_NNNN.json` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), IclError> {
        let entries_dir = dir.join("entries");
        fs::create_dir_all(&entries_dir).map_err(io_err)?;
        let mut listed = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let file = format!("entries/{}.json", e.id);
            let body = serde_json::to_vec(e).map_err(|e| IclError::Format(e.to_string()))?;
            write_atomic(&dir.join(&file), &body).map_err(io_err)?;
            listed.push(ManifestEntry {
                id: e.id.clone(),
                file,
                source: e.source.clone(),
            });
        }
        let manifest = Manifest {
            schema: ICL_SCHEMA.into(),
            seed: self.seed,
            segment_length: self.segment_length,
            silhouette: self.silhouette,
            entries: listed,
        };
        let body = serde_json::to_vec_pretty(&manifest).map_err(|e| IclError::Format(e.to_string()))?;
        write_atomic(&dir.join("manifest.json"), &body).map_err(io_err)
    }

    pub fn load(dir: &Path) -> Result<Self, IclError> {
        let text = fs::read_to_string(dir.join("manifest.json")).map_err(io_err)?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| IclError::Format(e.to_string()))?;
        if m.schema != ICL_SCHEMA {
            return Err(IclError::Format(format!("unsupported schema {}", m.schema)));
        }
        let entries = m
            .entries
            .iter()
            .map(|e| {
                let text = fs::read_to_string(dir.join(&e.file)).map_err(io_err)?;
                serde_json::from_str(&text).map_err(|err| IclError::Format(format!("{}: {err}", e.file)))
            })
            .collect::<Result<Vec<IclEntry>, _>>()?;
        Ok(IclDb {
            seed: m.seed,
            segment_length: m.segment_length,
            silhouette: m.silhouette,
            entries,
        })
    }
}
