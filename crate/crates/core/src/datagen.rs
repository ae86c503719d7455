//! Synthetic integer-grid datasets: Gaussian clusters plus a few isolated
//! uniform anomalies, and a stratified train/test split.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Dataset;

/// Rejection attempts allowed per placed center or anomaly.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub dim: usize,
    pub bits_per_dim: u32,
    pub num_clusters: usize,
    pub points_per_cluster: usize,
    pub num_anomalies: usize,
    /// Standard deviation of every cluster, in grid units.
    pub cluster_std: f64,
    /// Minimum distance between an anomaly and every cluster center.
    pub min_anomaly_separation: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    /// 3-D grid of 7-bit coordinates, 5 clusters of 200 points, 7 anomalies.
    fn default() -> Self {
        Self {
            dim: 3,
            bits_per_dim: 7,
            num_clusters: 5,
            points_per_cluster: 200,
            num_anomalies: 7,
            cluster_std: 6.0,
            min_anomaly_separation: 30.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn max_coordinate(&self) -> u32 {
        (1u32 << self.bits_per_dim) - 1
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.dim == 0 {
            return invalid("dim must be >= 1");
        }
        if self.bits_per_dim == 0 || self.bits_per_dim > 31 {
            return invalid("bits_per_dim must be in 1..=31");
        }
        if self.num_clusters == 0 || self.points_per_cluster == 0 {
            return invalid("num_clusters and points_per_cluster must be >= 1");
        }
        if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
            return invalid("cluster_std must be positive");
        }
        if !(self.min_anomaly_separation > 0.0 && self.min_anomaly_separation.is_finite()) {
            return invalid("min_anomaly_separation must be positive");
        }
        Ok(())
    }
}

fn distance(a: &[u32], b: &[u32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn uniform_point(rng: &mut impl Rng, dim: usize, max: u32) -> Vec<u32> {
    (0..dim).map(|_| rng.random_range(0..=max)).collect()
}

/// Draws `count` grid points, each at least `min_distance` from every point in
/// `avoid` (and from each other when `mutual`).
fn place(
    rng: &mut impl Rng,
    cfg: &GenConfig,
    count: usize,
    avoid: &[Vec<u32>],
    min_distance: f64,
    mutual: bool,
    what: &str,
) -> Result<Vec<Vec<u32>>> {
    let mut placed: Vec<Vec<u32>> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut attempts = 0;
        let candidate = loop {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementInfeasible(format!(
                    "could not place {what} {} of {count} after {MAX_PLACEMENT_ATTEMPTS} attempts",
                    placed.len() + 1
                )));
            }
            attempts += 1;
            let c = uniform_point(rng, cfg.dim, cfg.max_coordinate());
            let others = if mutual { &placed[..] } else { &[] };
            if avoid.iter().chain(others).all(|o| distance(&c, o) >= min_distance) {
                break c;
            }
        };
        placed.push(candidate);
    }
    Ok(placed)
}

/// Cluster centers uniform on the grid with pairwise separation of at least
/// four standard deviations, normal points rounded and clamped Gaussian draws
/// around them, anomalies uniform and rejected near any center.
///
/// Points are ordered cluster by cluster, anomalies last.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    Ok(generate_with_centers(cfg)?.0)
}

/// [`generate`], also returning the cluster centers.
pub fn generate_with_centers(cfg: &GenConfig) -> Result<(Dataset, Vec<Vec<u32>>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers = place(&mut rng, cfg, cfg.num_clusters, &[], 4.0 * cfg.cluster_std, true, "cluster center")?;
    let noise = Normal::new(0.0, cfg.cluster_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let max = f64::from(cfg.max_coordinate());

    let total = cfg.num_clusters * cfg.points_per_cluster + cfg.num_anomalies;
    let mut points = Vec::with_capacity(total);
    for center in &centers {
        for _ in 0..cfg.points_per_cluster {
            points.push(
                center
                    .iter()
                    .map(|&c| (f64::from(c) + noise.sample(&mut rng)).round().clamp(0.0, max) as u32)
                    .collect(),
            );
        }
    }
    let anomalies = place(
        &mut rng,
        cfg,
        cfg.num_anomalies,
        &centers,
        cfg.min_anomaly_separation,
        false,
        "anomaly",
    )?;
    let mut labels = vec![false; points.len()];
    labels.extend(std::iter::repeat_n(true, anomalies.len()));
    points.extend(anomalies);
    let data = Dataset::new(cfg.dim, cfg.bits_per_dim, points, Some(labels))?;
    Ok((data, centers))
}

/// Random split with `ceil(ratio * n)` rows in the first partition.
///
/// Labeled data is stratified: `ceil(ratio * a)` of the `a` anomalies go to
/// the first partition (as far as its size allows). Rows keep their original
/// relative order within each partition.
pub fn split(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n = data.len();
    let first_size = ((ratio * n as f64).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut in_first = vec![false; n];
    match &data.labels {
        Some(labels) => {
            let mut anomalies: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
            let mut normals: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
            anomalies.shuffle(&mut rng);
            normals.shuffle(&mut rng);
            let first_anomalies = ((ratio * anomalies.len() as f64).ceil() as usize)
                .min(first_size)
                .max(first_size.saturating_sub(normals.len()));
            let first_normals = first_size - first_anomalies;
            for &i in anomalies[..first_anomalies].iter().chain(&normals[..first_normals]) {
                in_first[i] = true;
            }
        }
        None => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            for &i in &all[..first_size] {
                in_first[i] = true;
            }
        }
    }

    let take = |want: bool| -> Result<Dataset> {
        let idx: Vec<usize> = (0..n).filter(|&i| in_first[i] == want).collect();
        Dataset::new(
            data.dim,
            data.bits_per_dim,
            idx.iter().map(|&i| data.points[i].clone()).collect(),
            data.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        )
    };
    Ok((take(true)?, take(false)?))
}
