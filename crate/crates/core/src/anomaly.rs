//! Unsupervised anomaly classification by a free-energy percentile threshold.
//!
//! The threshold is the nearest-rank percentile of the training rows' free
//! energies: the `k`-th smallest value with `k = ceil(p / 100 * n)`. A row is
//! anomalous when its free energy is strictly greater than the threshold, so
//! ties count as normal.

use serde::{Deserialize, Serialize};

use crate::energy::free_energy;
use crate::error::{Error, Result};
use crate::types::{EncodedDataset, ModelParams};

pub const DEFAULT_PERCENTILE: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub percentile: f64,
    pub source_count: usize,
}

impl Threshold {
    #[inline]
    pub fn is_anomalous(&self, free_energy: f64) -> bool {
        free_energy > self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    pub free_energy: f64,
    pub is_anomaly: bool,
}

/// `ceil(percentile / 100 * n)`, clamped to `1..=n`.
pub fn nearest_rank(percentile: f64, n: usize) -> usize {
    // multiply first so integral percentiles give exact products
    let k = (percentile * n as f64 / 100.0).ceil() as usize;
    k.clamp(1, n)
}

/// Nearest-rank percentile of a list of energies.
pub fn threshold_from_energies(energies: &[f64], percentile: f64) -> Result<Threshold> {
    if energies.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::PercentileOutOfRange(percentile));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = nearest_rank(percentile, sorted.len());
    Ok(Threshold {
        value: sorted[k - 1],
        percentile,
        source_count: sorted.len(),
    })
}

pub fn free_energies(p: &ModelParams, rows: &EncodedDataset) -> Result<Vec<f64>> {
    if rows.width != p.num_visible() {
        return Err(Error::ShapeMismatch {
            what: "row width",
            expected: p.num_visible(),
            found: rows.width,
        });
    }
    rows.rows.iter().map(|r| free_energy(p, r)).collect()
}

/// Threshold at the given percentile of the training rows' free energies.
pub fn fit_threshold(p: &ModelParams, train: &EncodedDataset, percentile: f64) -> Result<Threshold> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    threshold_from_energies(&free_energies(p, train)?, percentile)
}

pub fn classify_energies(t: &Threshold, energies: &[f64]) -> Vec<AnomalyVerdict> {
    energies
        .iter()
        .map(|&free_energy| AnomalyVerdict {
            free_energy,
            is_anomaly: t.is_anomalous(free_energy),
        })
        .collect()
}

pub fn classify(p: &ModelParams, t: &Threshold, rows: &EncodedDataset) -> Result<Vec<AnomalyVerdict>> {
    Ok(classify_energies(t, &free_energies(p, rows)?))
}
