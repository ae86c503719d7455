//! On-disk formats: dataset CSV, model JSON, run manifests, and the
//! plot-ready CSV tables written by the command-line tool.
//!
//! Floats are written in Rust's shortest round-trip decimal form and parsed
//! with correct rounding, so every `f64` survives a write/read cycle exactly.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::anomaly::{AnomalyVerdict, Threshold};
use crate::eval::SweepRecord;
use crate::training::{EpochRecord, TrainConfig};
use crate::types::{BmTopology, Dataset, ModelParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// dataset CSV: header `x0,...,x{d-1}[,label]`, integer coordinates, 0/1 label

pub fn write_dataset_csv<W: Write>(writer: W, data: &Dataset) -> FormatResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.dim).map(|i| format!("x{i}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (idx, point) in data.points.iter().enumerate() {
        let mut record: Vec<String> = point.iter().map(u32::to_string).collect();
        if let Some(labels) = &data.labels {
            record.push(if labels[idx] { "1" } else { "0" }.into());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| FormatError::Csv(e.into()))?;
    Ok(())
}

/// Reads a dataset CSV whose coordinates must fit in `bits_per_dim` bits.
pub fn read_dataset_csv<R: Read>(reader: R, bits_per_dim: u32) -> FormatResult<Dataset> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    let has_label = header.iter().last() == Some("label");
    let dim = header.len() - usize::from(has_label);
    if dim == 0 {
        return Err(FormatError::Malformed("dataset has no coordinate columns".into()));
    }
    for (i, name) in header.iter().take(dim).enumerate() {
        if name != format!("x{i}") {
            return Err(FormatError::Malformed(format!(
                "expected column x{i}, found {name:?}"
            )));
        }
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let row = line + 2;
        if record.len() != header.len() {
            return Err(FormatError::Malformed(format!(
                "row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let point = record
            .iter()
            .take(dim)
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|_| FormatError::Malformed(format!("row {row}: bad coordinate {s:?}")))
            })
            .collect::<FormatResult<Vec<u32>>>()?;
        points.push(point);
        if has_label {
            labels.push(match &record[dim] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(FormatError::Malformed(format!("row {row}: bad label {other:?}")))
                }
            });
        }
    }
    Ok(Dataset::new(dim, bits_per_dim, points, has_label.then_some(labels))?)
}

pub fn save_dataset(path: &Path, data: &Dataset) -> FormatResult<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_dataset_csv(std::io::BufWriter::new(file), data)
}

pub fn load_dataset(path: &Path, bits_per_dim: u32) -> FormatResult<Dataset> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_dataset_csv(std::io::BufReader::new(file), bits_per_dim)
}

// ---------------------------------------------------------------------------
// model JSON

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub dim: usize,
    pub bits_per_dim: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// `N` rows of `M` visible–hidden couplings.
    pub visible_hidden: Vec<Vec<f64>>,
    /// `N x N` symmetric lateral matrix, present for semi-restricted machines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_visible: Option<Vec<Vec<f64>>>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

/// Self-describing trained model: parameters, encoding, threshold and the
/// configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub topology: BmTopology,
    pub encoding: Encoding,
    pub temperature: f64,
    pub effective_temperature: f64,
    pub weights: Weights,
    pub threshold: Threshold,
    pub train_config: TrainConfig,
}

fn to_rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    if cols == 0 {
        return Vec::new();
    }
    flat.chunks(cols).map(<[f64]>::to_vec).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> FormatResult<Vec<f64>> {
    // M = 0 serializes as an empty list of rows
    if ncols == 0 && rows.is_empty() {
        return Ok(Vec::new());
    }
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(FormatError::Malformed(format!("{what} must be {nrows} x {ncols}")));
    }
    Ok(rows.concat())
}

impl ModelFile {
    pub fn new(params: &ModelParams, encoding: Encoding, threshold: Threshold, train_config: TrainConfig) -> Self {
        let n = params.num_visible();
        let m = params.num_hidden();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            topology: params.topology,
            encoding,
            temperature: params.temperature,
            effective_temperature: params.effective_temperature,
            weights: Weights {
                visible_hidden: to_rows(&params.w_vh, m),
                visible_visible: params.w_vv.as_ref().map(|w| to_rows(w, n)),
                visible_bias: params.b_v.clone(),
                hidden_bias: params.b_h.clone(),
            },
            threshold,
            train_config,
        }
    }

    /// Rebuilds and validates the parameters.
    pub fn params(&self) -> FormatResult<ModelParams> {
        let n = self.topology.num_visible;
        let m = self.topology.num_hidden;
        if self.encoding.dim * self.encoding.bits_per_dim as usize != n {
            return Err(FormatError::Malformed(format!(
                "encoding {}x{} bits does not match {n} visible units",
                self.encoding.dim, self.encoding.bits_per_dim
            )));
        }
        let params = ModelParams {
            topology: self.topology,
            w_vh: from_rows(&self.weights.visible_hidden, n, m, "visible_hidden")?,
            w_vv: self
                .weights
                .visible_visible
                .as_ref()
                .map(|rows| from_rows(rows, n, n, "visible_visible"))
                .transpose()?,
            b_v: self.weights.visible_bias.clone(),
            b_h: self.weights.hidden_bias.clone(),
            temperature: self.temperature,
            effective_temperature: self.effective_temperature,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> FormatResult<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> FormatResult<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(FormatError::Malformed(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> FormatResult<()> {
        std::fs::write(path, self.to_json()?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> FormatResult<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }
}

// ---------------------------------------------------------------------------
// manifests

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> FormatResult<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: std::collections::BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_secs: f64,
    pub created_unix_secs: u64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> FormatResult<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> FormatResult<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path).map_err(io_err(path))?)?)
    }
}

// ---------------------------------------------------------------------------
// plot-ready tables

fn csv_file(path: &Path) -> FormatResult<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-epoch training diagnostics. Wall times are left to the manifest so the
/// table is reproducible byte for byte.
pub fn write_epoch_report(path: &Path, epochs: &[EpochRecord]) -> FormatResult<()> {
    let mut w = csv_file(path)?;
    w.write_record([
        "epoch",
        "mean_free_energy",
        "grad_norm_w_vh",
        "grad_norm_w_vv",
        "grad_norm_b_v",
        "grad_norm_b_h",
        "exact_kl",
    ])?;
    for e in epochs {
        w.write_record([
            e.epoch.to_string(),
            e.mean_free_energy.to_string(),
            e.gradient_norms.w_vh.to_string(),
            e.gradient_norms.w_vv.to_string(),
            e.gradient_norms.b_v.to_string(),
            e.gradient_norms.b_h.to_string(),
            opt(e.exact_kl),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_verdicts(path: &Path, verdicts: &[AnomalyVerdict], labels: Option<&[bool]>) -> FormatResult<()> {
    let mut w = csv_file(path)?;
    let mut header = vec!["row", "free_energy", "is_anomaly"];
    if labels.is_some() {
        header.push("label");
    }
    w.write_record(&header)?;
    for (i, v) in verdicts.iter().enumerate() {
        let mut rec = vec![i.to_string(), v.free_energy.to_string(), u8::from(v.is_anomaly).to_string()];
        if let Some(l) = labels {
            rec.push(u8::from(l[i]).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_sweep_records(path: &Path, records: &[SweepRecord]) -> FormatResult<()> {
    let mut w = csv_file(path)?;
    w.write_record(["stage", "candidate", "repetition", "f1", "precision", "recall", "tp", "fp", "tn", "fn"])?;
    for r in records {
        let m = &r.metrics;
        w.write_record([
            r.stage.name().to_string(),
            r.candidate.to_string(),
            r.repetition.to_string(),
            m.f1.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.true_positives.to_string(),
            m.false_positives.to_string(),
            m.true_negatives.to_string(),
            m.false_negatives.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

/// One row of the energy-distribution table.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub split: String,
    pub row: usize,
    pub free_energy: f64,
    pub normalized: f64,
    pub label: Option<bool>,
}

/// Min–max normalizes `energies` into `[0, 1]`; a constant set maps to 0.5.
pub fn min_max_normalize(energies: &[f64]) -> Vec<f64> {
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    energies
        .iter()
        .map(|&e| if span > 0.0 { ((e - lo) / span).clamp(0.0, 1.0) } else { 0.5 })
        .collect()
}

/// Also returns the threshold normalized on the same scale as the rows.
pub fn normalized_threshold(energies: &[f64], threshold: f64) -> f64 {
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (threshold - lo) / (hi - lo)
    } else {
        0.5
    }
}

pub fn write_energy_table(path: &Path, rows: &[EnergyRow], threshold: f64, threshold_normalized: f64) -> FormatResult<()> {
    let mut w = csv_file(path)?;
    w.write_record(["split", "row", "free_energy", "normalized_energy", "label", "threshold", "threshold_normalized"])?;
    for r in rows {
        w.write_record([
            r.split.clone(),
            r.row.to_string(),
            r.free_energy.to_string(),
            r.normalized.to_string(),
            r.label.map(|l| u8::from(l).to_string()).unwrap_or_default(),
            threshold.to_string(),
            threshold_normalized.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}
