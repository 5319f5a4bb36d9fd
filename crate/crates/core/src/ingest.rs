//! Dataset loading, temporal train/test splits and fixed-size windowing.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Series, TypeError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("no finite values in column")]
    NoFiniteValues,
    #[error("split leaves an empty side (n = {n}, train = {train})")]
    DegenerateSplit { n: usize, train: usize },
    #[error("train fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("duplicate series id `{0}` in dataset")]
    DuplicateId(String),
    #[error("unsupported file extension for {0}")]
    UnsupportedFormat(PathBuf),
    #[error(transparent)]
    Invalid(#[from] TypeError),
}

/// A named collection of series with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    series: Vec<Series>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, series: Vec<Series>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for s in &series {
            if !seen.insert(s.id.clone()) {
                return Err(IngestError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self { name: name.into(), series })
    }

    pub fn series(&self) -> &[Series] {
        &self.series
    }

    pub fn into_series(self) -> Vec<Series> {
        self.series
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window: usize,
    pub stride: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self { window: 400, stride: 400 }
    }
}

/// Column names used when reading a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvColumns {
    pub value: String,
    pub label: Option<String>,
    pub timestamp: Option<String>,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            value: "value".into(),
            label: Some("label".into()),
            timestamp: Some("timestamp".into()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_value(raw: &str) -> Option<f64> {
    let t = raw.trim();
    if t.is_empty() {
        return Some(f64::NAN);
    }
    t.parse::<f64>().ok()
}

fn parse_label(raw: &str, row: usize) -> Result<u8, IngestError> {
    let t = raw.trim();
    match t {
        "0" | "false" | "False" => return Ok(0),
        "1" | "true" | "True" => return Ok(1),
        _ => {}
    }
    match t.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(IngestError::ParseError {
            row,
            message: format!("label `{t}` is not 0 or 1"),
        }),
    }
}

fn parse_timestamp(raw: &str, row: usize) -> Result<i64, IngestError> {
    let t = raw.trim();
    t.parse::<i64>()
        .or_else(|_| t.parse::<f64>().map(|v| v as i64))
        .map_err(|_| IngestError::ParseError {
            row,
            message: format!("timestamp `{t}` is not an integer"),
        })
}

/// Replace non-finite values by the previous finite value; leading
/// non-finite values take the first finite value.
pub fn forward_fill(values: &mut [f64]) -> Result<(), IngestError> {
    let first = values.iter().copied().find(|v| v.is_finite()).ok_or(IngestError::NoFiniteValues)?;
    let mut last = first;
    for v in values.iter_mut() {
        if v.is_finite() {
            last = *v;
        } else {
            *v = last;
        }
    }
    Ok(())
}

/// Load one series from a CSV file with a header row. Rows are numbered
/// from 0 (first data row) in error messages.
pub fn load_csv(path: &Path, columns: &CsvColumns) -> Result<Series, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::ParseError {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let value_idx = find(&columns.value)?;
    let label_idx = columns.label.as_deref().map(find).transpose()?;
    let ts_idx = columns.timestamp.as_deref().map(find).transpose()?;

    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut stamps = ts_idx.map(|_| Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::ParseError { row, message: e.to_string() })?;
        let field = |i: usize| {
            record.get(i).ok_or_else(|| IngestError::ParseError {
                row,
                message: format!("missing field {i}"),
            })
        };
        let raw = field(value_idx)?;
        let v = parse_value(raw).ok_or_else(|| IngestError::ParseError {
            row,
            message: format!("value `{raw}` is not a number"),
        })?;
        values.push(v);
        if let (Some(i), Some(ls)) = (label_idx, labels.as_mut()) {
            ls.push(parse_label(field(i)?, row)?);
        }
        if let (Some(i), Some(ts)) = (ts_idx, stamps.as_mut()) {
            ts.push(parse_timestamp(field(i)?, row)?);
        }
    }
    if values.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    forward_fill(&mut values)?;
    Ok(Series::with_parts(series_id(path), values, stamps, labels)?)
}

#[derive(Deserialize)]
struct JsonPoint {
    #[serde(default)]
    timestamp: Option<i64>,
    value: Option<f64>,
    #[serde(default)]
    label: Option<u8>,
}

/// Load one series from JSON lines: one `{"timestamp", "value", "label"}`
/// object per point. A `null` value counts as non-finite.
pub fn load_jsonl(path: &Path) -> Result<Series, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut stamps = Vec::new();
    let (mut any_label, mut any_ts) = (false, false);
    let mut row = 0;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: JsonPoint = serde_json::from_str(&line).map_err(|e| IngestError::ParseError { row, message: e.to_string() })?;
        values.push(p.value.unwrap_or(f64::NAN));
        any_label |= p.label.is_some();
        any_ts |= p.timestamp.is_some();
        labels.push(p.label.unwrap_or(0));
        stamps.push(p.timestamp.unwrap_or(row as i64));
        row += 1;
    }
    if values.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    forward_fill(&mut values)?;
    Ok(Series::with_parts(
        series_id(path),
        values,
        any_ts.then_some(stamps),
        any_label.then_some(labels),
    )?)
}

fn series_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

/// Load a single `.csv`/`.jsonl` file or every such file in a directory
/// (sorted by file name).
pub fn load_dataset(path: &Path, columns: &CsvColumns) -> Result<Dataset, IngestError> {
    let name = series_id(path);
    let load_one = |p: &Path| -> Result<Series, IngestError> {
        match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => load_csv(p, columns),
            Some("jsonl") | Some("ndjson") => load_jsonl(p),
            _ => Err(IngestError::UnsupportedFormat(p.to_path_buf())),
        }
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv") | Some("jsonl") | Some("ndjson")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(IngestError::EmptyFile);
        }
        let series = files.iter().map(|p| load_one(p)).collect::<Result<Vec<_>, _>>()?;
        Dataset::new(name, series)
    } else {
        Dataset::new(name, vec![load_one(path)?])
    }
}

/// Split preserving temporal order: the first `floor(n * train_fraction)`
/// points train, the rest test.
pub fn temporal_split(series: &Series, train_fraction: f64) -> Result<(Series, Series), IngestError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(IngestError::InvalidFraction(train_fraction));
    }
    let n = series.len();
    let train = (n as f64 * train_fraction).floor() as usize;
    if train == 0 || train >= n {
        return Err(IngestError::DegenerateSplit { n, train });
    }
    Ok((
        series.slice(format!("{}:train", series.id), 0, train)?,
        series.slice(format!("{}:test", series.id), train, n)?,
    ))
}

/// Half-open `(offset, end)` ranges produced by a window plan over `n`
/// points. A trailing window shorter than a quarter of the window size is
/// folded into its predecessor.
pub fn window_ranges(n: usize, plan: WindowPlan) -> Vec<(usize, usize)> {
    let window = plan.window.max(1);
    let stride = plan.stride.max(1);
    let mut ranges = Vec::new();
    let mut offset = 0;
    while offset < n {
        let end = (offset + window).min(n);
        ranges.push((offset, end));
        if end == n {
            break;
        }
        offset += stride;
    }
    if ranges.len() >= 2 {
        let (off, end) = *ranges.last().unwrap();
        if (end - off) * 4 < window {
            ranges.pop();
            ranges.last_mut().unwrap().1 = n;
        }
    }
    ranges
}

/// Slice a series into windows; each window keeps its offset in the parent.
pub fn windows(series: &Series, plan: WindowPlan) -> Vec<(usize, Series)> {
    window_ranges(series.len(), plan)
        .into_iter()
        .map(|(s, e)| {
            let w = series
                .slice(format!("{}@{}", series.id, s), s, e)
                .expect("window ranges are non-empty and in bounds");
            (s, w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    fn cols(label: Option<&str>) -> CsvColumns {
        CsvColumns {
            value: "value".into(),
            label: label.map(Into::into),
            timestamp: None,
        }
    }

    #[test]
    fn csv_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "value,label\n1,0\n2,1\n3,0\n");
        let s = load_csv(&p, &cols(Some("label"))).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.labels(), Some(&[0u8, 1, 0][..]));
        assert_eq!(s.id, "a");
    }

    #[test]
    fn csv_forward_fill() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "value\n5\nNaN\n7\n");
        assert_eq!(load_csv(&p, &cols(None)).unwrap().values(), &[5.0, 5.0, 7.0]);
        let p = write(dir.path(), "b.csv", "value\nnan\n4\ninf\n");
        assert_eq!(load_csv(&p, &cols(None)).unwrap().values(), &[4.0, 4.0, 4.0]);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "value\n1\n2\n");
        assert!(matches!(
            load_csv(&p, &cols(Some("label"))),
            Err(IngestError::MissingColumn(c)) if c == "label"
        ));
        let p = write(dir.path(), "b.csv", "value\n1\nabc\n");
        assert!(matches!(load_csv(&p, &cols(None)), Err(IngestError::ParseError { row: 1, .. })));
        let p = write(dir.path(), "c.csv", "value\n");
        assert!(matches!(load_csv(&p, &cols(None)), Err(IngestError::EmptyFile)));
    }

    #[test]
    fn jsonl_points() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "j.jsonl",
            "{\"timestamp\": 10, \"value\": 1.5, \"label\": 0}\n{\"timestamp\": 11, \"value\": null, \"label\": 1}\n",
        );
        let s = load_jsonl(&p).unwrap();
        assert_eq!(s.values(), &[1.5, 1.5]);
        assert_eq!(s.labels(), Some(&[0u8, 1][..]));
        assert_eq!(s.timestamps(), Some(&[10i64, 11][..]));
    }

    fn ramp(n: usize) -> Series {
        Series::new("r", (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn split_examples() {
        let (a, b) = temporal_split(&ramp(10), 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        assert!(matches!(temporal_split(&ramp(10), 0.05), Err(IngestError::DegenerateSplit { .. })));
        let (a, b) = temporal_split(&ramp(7), 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (3, 4));
        let joined: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
        assert_eq!(joined, ramp(7).values());
    }

    #[test]
    fn window_examples() {
        let plan = WindowPlan::default();
        let offs = |n| windows(&ramp(n), plan).iter().map(|(o, w)| (*o, w.len())).collect::<Vec<_>>();
        assert_eq!(offs(800), vec![(0, 400), (400, 400)]);
        assert_eq!(offs(850), vec![(0, 400), (400, 450)]);
        assert_eq!(offs(300), vec![(0, 300)]);
        assert_eq!(offs(900), vec![(0, 400), (400, 400), (800, 100)]);
    }

    #[test]
    fn windows_tile_exactly_when_stride_equals_window() {
        for n in [1usize, 37, 399, 400, 401, 999, 1234] {
            for window in [10usize, 64, 400] {
                let ranges = window_ranges(n, WindowPlan { window, stride: window });
                let mut cover = vec![0u32; n];
                for (s, e) in &ranges {
                    for c in &mut cover[*s..*e] {
                        *c += 1;
                    }
                }
                assert!(cover.iter().all(|&c| c == 1), "n={n} window={window}");
                assert!(ranges.windows(2).all(|w| w[0].0 < w[1].0));
            }
        }
    }
}
