//! Dataset loading and the JSON-lines record and evidence files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tsad_core::fsutil::write_atomic;
use tsad_core::ingest::{load_dataset, CsvColumns};
use tsad_core::inject::{load_benchmark, BenchmarkSample};
use tsad_core::{AnomalyFamily, AnomalyRecord, Interval, Series};

use crate::error::CliError;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const EVIDENCE_FILE: &str = "evidence.jsonl";

/// Series read from a dataset path, with injections when the path is a
/// generated benchmark.
pub struct Input {
    pub name: String,
    pub series: Vec<Series>,
    pub samples: Option<Vec<BenchmarkSample>>,
}

pub fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

/// A `.csv`/`.jsonl` file, a directory of them, or a benchmark directory
/// (one holding `manifest.json`).
pub fn load_input(path: &Path) -> Result<Input, CliError> {
    require(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    if path.join("manifest.json").is_file() {
        let samples = load_benchmark(path).map_err(|e| CliError::InvalidInput(e.to_string()))?;
        return Ok(Input {
            name,
            series: samples.iter().map(|s| s.series.clone()).collect(),
            samples: Some(samples),
        });
    }
    let ds = load_dataset(path, &CsvColumns::default()).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    Ok(Input {
        name,
        series: ds.into_series(),
        samples: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub series: String,
    #[serde(flatten)]
    pub record: AnomalyRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceLine {
    pub series: String,
    pub family: AnomalyFamily,
    pub index: usize,
    pub end_index: usize,
}

impl EvidenceLine {
    pub fn interval(&self) -> Interval {
        Interval {
            start: self.index,
            end: self.end_index,
        }
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).map_err(|e| CliError::output(path, e))?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes()).map_err(|e| CliError::output(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::InvalidInput(format!("{} line {}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::output(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::output(path, e))
}

/// File-name-safe form of a series id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}
