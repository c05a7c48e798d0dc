//! File formats: time-series text, model JSON, measure CSV and peak JSON.

use std::fs;
use std::io::Write;
use std::ops::Index;
use std::path::Path;

use icoh::measures::find_curve_peaks;
use icoh::{ArModel, ConnectivityMap, Peak, TimeSeriesData};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Parses a time series: one sample per row, channels separated by
/// whitespace and/or commas. Blank lines and lines starting with `#` are
/// skipped.
pub fn parse_time_series(text: &str, sampling_rate: f64) -> CliResult<TimeSeriesData> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Data(format!("line {line_no}: cannot parse '{t}' as a finite number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Data(format!(
                    "line {line_no}: expected {} values, found {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data("no samples found".into()));
    }
    Ok(TimeSeriesData::from_samples(&rows, sampling_rate)?)
}

pub fn read_time_series(path: &Path, sampling_rate: f64) -> CliResult<TimeSeriesData> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_time_series(&text, sampling_rate).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes samples with shortest round-trip formatting so that re-reading
/// the file recovers every value exactly.
pub fn format_time_series(data: &TimeSeriesData) -> String {
    let q = data.channels();
    let v = data.values();
    let mut out = String::new();
    let header: Vec<String> = (1..=q).map(|k| format!("ch{k}")).collect();
    out.push_str(&format!("# {}\n", header.join(" ")));
    for t in 0..data.n_samples() {
        let row: Vec<String> = (0..q).map(|i| format!("{}", v[(i, t)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    /// `coefficients[k][i][j]` is entry `(i, j)` of lag `k + 1`.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub noise_cov: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(model: &ArModel) -> Self {
        let q = model.channels();
        Self {
            coefficients: model.coeffs().iter().map(|m| matrix_rows(m, q)).collect(),
            noise_cov: matrix_rows(model.noise_cov(), q),
        }
    }

    pub fn to_model(&self) -> CliResult<ArModel> {
        Ok(ArModel::from_rows(&self.coefficients, &self.noise_cov)?)
    }
}

fn matrix_rows(m: &impl Index<(usize, usize), Output = f64>, q: usize) -> Vec<Vec<f64>> {
    (0..q).map(|i| (0..q).map(|j| m[(i, j)]).collect()).collect()
}

pub fn read_model(path: &Path) -> CliResult<ArModel> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: invalid model file: {e}", path.display())))?;
    file.to_model()
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(CliError::io(path))
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(CliError::io("<stdout>")),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Nine significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub frequency_hz: f64,
    pub receiver: usize,
    pub sender: usize,
    pub value: f64,
}

/// One row per (frequency, receiver, sender) with 1-based channel indices,
/// diagonal cells included.
pub fn measure_csv(map: &ConnectivityMap) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frequency_hz", "receiver", "sender", "value"]).expect("in-memory write");
    let q = map.channels();
    for (f, m) in map.grid.frequencies().iter().zip(&map.values) {
        for i in 0..q {
            for j in 0..q {
                w.write_record([format!("{f}"), (i + 1).to_string(), (j + 1).to_string(), format_value(m[(i, j)])])
                    .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii output")
}

pub fn read_measure_csv(path: &Path) -> CliResult<Vec<MeasureRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| CliError::Data(format!("{}: line {}: {e}", path.display(), k + 2))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPeaks {
    /// 1-based channel indices.
    pub receiver: usize,
    pub sender: usize,
    pub peaks: Vec<Peak>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurePeaks {
    pub measure: String,
    pub min_prominence: f64,
    pub pairs: Vec<PairPeaks>,
}

/// Peaks of every off-diagonal cell of `map`.
pub fn map_peaks(map: &ConnectivityMap, min_prominence: f64) -> MeasurePeaks {
    let q = map.channels();
    let mut pairs = Vec::new();
    for i in 0..q {
        for j in 0..q {
            if i != j {
                pairs.push(PairPeaks {
                    receiver: i + 1,
                    sender: j + 1,
                    peaks: find_curve_peaks(map.grid.frequencies(), &map.curve(i, j), min_prominence),
                });
            }
        }
    }
    MeasurePeaks {
        measure: map.measure.name().to_string(),
        min_prominence,
        pairs,
    }
}

/// Peaks of the curves stored in measure CSV rows, grouped per cell in
/// order of first appearance. Rows of one cell must be sorted by frequency.
pub fn row_peaks(rows: &[MeasureRow], min_prominence: f64, include_diagonal: bool) -> CliResult<Vec<PairPeaks>> {
    type Cell = ((usize, usize), Vec<f64>, Vec<f64>);
    let mut cells: Vec<Cell> = Vec::new();
    for row in rows {
        if row.receiver == row.sender && !include_diagonal {
            continue;
        }
        let key = (row.receiver, row.sender);
        match cells.iter_mut().find(|c| c.0 == key) {
            Some(cell) => {
                if cell.1.last().is_some_and(|&f| f >= row.frequency_hz) {
                    return Err(CliError::Data(format!(
                        "cell ({}, {}): frequencies are not increasing at {} Hz",
                        row.receiver, row.sender, row.frequency_hz
                    )));
                }
                cell.1.push(row.frequency_hz);
                cell.2.push(row.value);
            }
            None => cells.push((key, vec![row.frequency_hz], vec![row.value])),
        }
    }
    Ok(cells
        .into_iter()
        .map(|((receiver, sender), f, v)| PairPeaks {
            receiver,
            sender,
            peaks: find_curve_peaks(&f, &v, min_prominence),
        })
        .collect())
}
