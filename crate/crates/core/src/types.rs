//! Shared data model: network topology, parameters, binary states, datasets
//! and their binary encodings, and sample moment statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which couplings beyond the visible–hidden ones are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Laterals {
    /// Bipartite restricted Boltzmann machine.
    None,
    /// Semi-restricted machine: visible–visible couplings in addition to the bipartite ones.
    VisibleVisible,
}

/// Layer sizes and coupling pattern.
///
/// Edges are every `(v_i, h_j)` pair, plus every `(v_i, v_k)` with `i != k`
/// when laterals are enabled. Hidden–hidden couplings never exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BmTopology {
    pub num_visible: usize,
    pub num_hidden: usize,
    pub laterals: Laterals,
}

impl BmTopology {
    pub fn rbm(num_visible: usize, num_hidden: usize) -> Self {
        Self {
            num_visible,
            num_hidden,
            laterals: Laterals::None,
        }
    }

    pub fn semi_restricted(num_visible: usize, num_hidden: usize) -> Self {
        Self {
            num_visible,
            num_hidden,
            laterals: Laterals::VisibleVisible,
        }
    }

    pub fn has_laterals(&self) -> bool {
        self.laterals == Laterals::VisibleVisible
    }

    pub fn num_units(&self) -> usize {
        self.num_visible + self.num_hidden
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_visible == 0 {
            return Err(Error::InvalidConfig(
                "topology needs at least one visible unit".into(),
            ));
        }
        Ok(())
    }

    /// Every coupled pair of unit indices `(a, b)` with `a < b`, where
    /// visible unit `i` has index `i` and hidden unit `j` has index `N + j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_visible;
        let mut edges = Vec::new();
        if self.has_laterals() {
            for i in 0..n {
                for k in (i + 1)..n {
                    edges.push((i, k));
                }
            }
        }
        for i in 0..n {
            for j in 0..self.num_hidden {
                edges.push((i, n + j));
            }
        }
        edges
    }
}

/// Weights, biases and temperatures of a Boltzmann machine.
///
/// Matrices are stored row-major: `w_vh[i * M + j]` couples visible `i` to
/// hidden `j`, and `w_vv[i * N + k]` couples visible `i` to visible `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub topology: BmTopology,
    pub w_vh: Vec<f64>,
    pub w_vv: Option<Vec<f64>>,
    pub b_v: Vec<f64>,
    pub b_h: Vec<f64>,
    pub temperature: f64,
    pub effective_temperature: f64,
}

impl ModelParams {
    /// All-zero parameters at unit temperature.
    pub fn zeros(topology: BmTopology) -> Self {
        let n = topology.num_visible;
        let m = topology.num_hidden;
        Self {
            topology,
            w_vh: vec![0.0; n * m],
            w_vv: topology.has_laterals().then(|| vec![0.0; n * n]),
            b_v: vec![0.0; n],
            b_h: vec![0.0; m],
            temperature: 1.0,
            effective_temperature: 1.0,
        }
    }

    pub fn num_visible(&self) -> usize {
        self.topology.num_visible
    }

    pub fn num_hidden(&self) -> usize {
        self.topology.num_hidden
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w_vh[i * self.topology.num_hidden + j]
    }

    #[inline]
    pub fn lateral(&self, i: usize, k: usize) -> f64 {
        match &self.w_vv {
            Some(w) => w[i * self.topology.num_visible + k],
            None => 0.0,
        }
    }

    /// Sets both `(i, k)` and `(k, i)` of the lateral matrix.
    ///
    /// # Panics
    /// If the topology has no laterals or `i == k`.
    pub fn set_lateral(&mut self, i: usize, k: usize, value: f64) {
        assert_ne!(i, k, "lateral couplings have no diagonal");
        let n = self.topology.num_visible;
        let w = self
            .w_vv
            .as_mut()
            .expect("topology has no lateral couplings");
        w[i * n + k] = value;
        w[k * n + i] = value;
    }

    /// Hidden pre-activations `a_j = sum_i W_ij v_i + b_j` for a clamped visible vector.
    pub fn hidden_inputs(&self, visible: &[bool]) -> Vec<f64> {
        let m = self.topology.num_hidden;
        let mut a = self.b_h.clone();
        for (i, _) in visible.iter().enumerate().filter(|(_, &v)| v) {
            let row = &self.w_vh[i * m..(i + 1) * m];
            for (aj, w) in a.iter_mut().zip(row) {
                *aj += w;
            }
        }
        a
    }

    /// Checks every parameter invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let n = self.topology.num_visible;
        let m = self.topology.num_hidden;
        check_len("w_vh", n * m, self.w_vh.len())?;
        check_len("b_v", n, self.b_v.len())?;
        check_len("b_h", m, self.b_h.len())?;
        match (&self.w_vv, self.topology.has_laterals()) {
            (Some(w), true) => check_len("w_vv", n * n, w.len())?,
            (None, false) => {}
            (Some(w), false) => check_len("w_vv", 0, w.len())?,
            (None, true) => check_len("w_vv", n * n, 0)?,
        }
        if !self.temperature.is_finite() {
            return Err(Error::NonfiniteEntry("temperature"));
        }
        if !self.effective_temperature.is_finite() {
            return Err(Error::NonfiniteEntry("effective_temperature"));
        }
        if self.temperature <= 0.0 {
            return Err(Error::NonpositiveTemperature {
                name: "temperature",
                value: self.temperature,
            });
        }
        if self.effective_temperature <= 0.0 {
            return Err(Error::NonpositiveTemperature {
                name: "effective_temperature",
                value: self.effective_temperature,
            });
        }
        check_finite("w_vh", &self.w_vh)?;
        check_finite("b_v", &self.b_v)?;
        check_finite("b_h", &self.b_h)?;
        if let Some(w) = &self.w_vv {
            check_finite("w_vv", w)?;
            for i in 0..n {
                if w[i * n + i] != 0.0 {
                    return Err(Error::NonzeroLateralDiagonal(i));
                }
                for k in (i + 1)..n {
                    if w[i * n + k] != w[k * n + i] {
                        return Err(Error::AsymmetricLateral { row: i, col: k });
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            what,
            expected,
            found,
        })
    }
}

fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonfiniteEntry(what))
    }
}

/// A joint assignment of visible and hidden units.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryState {
    pub visible: Vec<bool>,
    pub hidden: Vec<bool>,
}

impl BinaryState {
    pub fn zeros(topology: &BmTopology) -> Self {
        Self {
            visible: vec![false; topology.num_visible],
            hidden: vec![false; topology.num_hidden],
        }
    }

    /// Decodes state number `index`: bit `u` of `index` is unit `u`,
    /// visible units first.
    pub fn from_index(topology: &BmTopology, index: u64) -> Self {
        let n = topology.num_visible;
        Self {
            visible: (0..n).map(|i| index >> i & 1 == 1).collect(),
            hidden: (0..topology.num_hidden)
                .map(|j| index >> (n + j) & 1 == 1)
                .collect(),
        }
    }

    /// Inverse of [`BinaryState::from_index`].
    pub fn index(&self) -> u64 {
        self.visible
            .iter()
            .chain(&self.hidden)
            .enumerate()
            .fold(0, |acc, (u, &b)| acc | (u64::from(b) << u))
    }

    pub fn check_shape(&self, topology: &BmTopology) -> Result<()> {
        check_len("visible state", topology.num_visible, self.visible.len())?;
        check_len("hidden state", topology.num_hidden, self.hidden.len())
    }

    /// Unit values, visible first.
    pub fn units(&self) -> impl Iterator<Item = bool> + '_ {
        self.visible.iter().chain(&self.hidden).copied()
    }
}

/// Integer points on a `dim`-dimensional grid with optional anomaly labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub dim: usize,
    pub bits_per_dim: u32,
    pub points: Vec<Vec<u32>>,
    /// Evaluation-only ground truth; `true` marks an anomaly.
    pub labels: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(
        dim: usize,
        bits_per_dim: u32,
        points: Vec<Vec<u32>>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        let data = Self {
            dim,
            bits_per_dim,
            points,
            labels,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dataset dimension must be >= 1".into()));
        }
        if self.bits_per_dim == 0 || self.bits_per_dim > 31 {
            return Err(Error::InvalidConfig(format!(
                "bits per dimension must be in 1..=31, got {}",
                self.bits_per_dim
            )));
        }
        for p in &self.points {
            check_len("point dimension", self.dim, p.len())?;
            for &x in p {
                check_coordinate(x, self.bits_per_dim)?;
            }
        }
        if let Some(labels) = &self.labels {
            check_len("labels", self.points.len(), labels.len())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Width of an encoded row.
    pub fn num_visible(&self) -> usize {
        self.dim * self.bits_per_dim as usize
    }

    pub fn encode(&self) -> Result<EncodedDataset> {
        let rows = self
            .points
            .iter()
            .map(|p| encode_point(p, self.bits_per_dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedDataset {
            width: self.num_visible(),
            rows,
            labels: self.labels.clone(),
        })
    }
}

/// Binary visible rows, one per data point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDataset {
    pub width: usize,
    pub rows: Vec<Vec<bool>>,
    pub labels: Option<Vec<bool>>,
}

impl EncodedDataset {
    pub fn new(width: usize, rows: Vec<Vec<bool>>) -> Result<Self> {
        for r in &rows {
            check_len("encoded row", width, r.len())?;
        }
        Ok(Self {
            width,
            rows,
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn check_coordinate(x: u32, bits: u32) -> Result<()> {
    if u64::from(x) >> bits != 0 {
        return Err(Error::CoordinateOutOfRange {
            value: u64::from(x),
            bits,
        });
    }
    Ok(())
}

/// Concatenated fixed-width base-2 encoding, most significant bit first
/// within each dimension.
pub fn encode_point(point: &[u32], bits_per_dim: u32) -> Result<Vec<bool>> {
    let mut row = Vec::with_capacity(point.len() * bits_per_dim as usize);
    for &x in point {
        check_coordinate(x, bits_per_dim)?;
        row.extend((0..bits_per_dim).rev().map(|b| x >> b & 1 == 1));
    }
    Ok(row)
}

pub fn decode_point(row: &[bool], dim: usize, bits_per_dim: u32) -> Result<Vec<u32>> {
    let width = bits_per_dim as usize;
    if row.len() != dim * width {
        return Err(Error::LengthMismatch {
            expected: dim * width,
            found: row.len(),
        });
    }
    if width == 0 {
        return Ok(vec![0; dim]);
    }
    Ok(row
        .chunks(width)
        .map(|chunk| chunk.iter().fold(0u32, |acc, &b| acc << 1 | u32::from(b)))
        .collect())
}

/// First and second moments of the units.
///
/// `visible_visible` is a symmetric `N x N` matrix with zero diagonal,
/// present exactly when the topology has laterals.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub visible: Vec<f64>,
    pub hidden: Vec<f64>,
    pub visible_hidden: Vec<f64>,
    pub visible_visible: Option<Vec<f64>>,
}

impl Moments {
    pub fn zeros(topology: &BmTopology) -> Self {
        let n = topology.num_visible;
        let m = topology.num_hidden;
        Self {
            visible: vec![0.0; n],
            hidden: vec![0.0; m],
            visible_hidden: vec![0.0; n * m],
            visible_visible: topology.has_laterals().then(|| vec![0.0; n * n]),
        }
    }

    /// Empirical moments of a list of states.
    pub fn from_states(topology: &BmTopology, states: &[BinaryState]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = topology.num_visible;
        let m = topology.num_hidden;
        let mut acc = Self::zeros(topology);
        for s in states {
            s.check_shape(topology)?;
            for i in (0..n).filter(|&i| s.visible[i]) {
                acc.visible[i] += 1.0;
                for j in (0..m).filter(|&j| s.hidden[j]) {
                    acc.visible_hidden[i * m + j] += 1.0;
                }
                if let Some(vv) = acc.visible_visible.as_mut() {
                    for k in (0..n).filter(|&k| k != i && s.visible[k]) {
                        vv[i * n + k] += 1.0;
                    }
                }
            }
            for j in (0..m).filter(|&j| s.hidden[j]) {
                acc.hidden[j] += 1.0;
            }
        }
        acc.divide(states.len() as f64);
        Ok(acc)
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.visible
            .iter_mut()
            .chain(self.hidden.iter_mut())
            .chain(self.visible_hidden.iter_mut())
            .chain(self.visible_visible.iter_mut().flatten())
    }

    pub(crate) fn divide(&mut self, count: f64) {
        self.values_mut().for_each(|x| *x /= count);
    }

    /// `<s_u>` for every unit, visible first.
    pub fn mean_units(&self) -> Vec<f64> {
        self.visible.iter().chain(&self.hidden).copied().collect()
    }

    /// `<s_a s_b>` for every edge `(a, b)` of [`BmTopology::edges`], in that order.
    pub fn mean_pairs(&self, topology: &BmTopology) -> Vec<((usize, usize), f64)> {
        let n = topology.num_visible;
        let m = topology.num_hidden;
        topology
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let value = if b < n {
                    self.visible_visible.as_ref().map_or(0.0, |vv| vv[a * n + b])
                } else {
                    self.visible_hidden[a * m + (b - n)]
                };
                ((a, b), value)
            })
            .collect()
    }

    /// Whether every pair moment lies within the Fréchet bounds implied by
    /// its two unit moments, up to `tol`.
    pub fn within_frechet_bounds(&self, topology: &BmTopology, tol: f64) -> bool {
        let units = self.mean_units();
        self.mean_pairs(topology).into_iter().all(|((a, b), pair)| {
            let (pa, pb) = (units[a], units[b]);
            let lower = (pa + pb - 1.0).max(0.0);
            let upper = pa.min(pb);
            pair >= lower - tol && pair <= upper + tol
        })
    }
}

/// Sampled states together with their moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub states: Vec<BinaryState>,
    pub moments: Moments,
}

impl SampleBatch {
    pub fn from_states(topology: &BmTopology, states: Vec<BinaryState>) -> Result<Self> {
        let moments = Moments::from_states(topology, &states)?;
        Ok(Self { states, moments })
    }
}
