//! Stochastic gradient training on the KL divergence between the data
//! distribution and the model's visible marginal.
//!
//! Each batch contributes a data-phase moment estimate (visible units clamped
//! to the rows, hidden moments exact) and one model-phase estimate from the
//! configured sampler. Parameters move along `<.>_data - <.>_model`, which is
//! `-T` times the KL gradient.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{free_energy, log_partition_exact};
use crate::error::{Error, Result};
use crate::sampler::{
    accumulate_clamped, derive_seed, exact_moments, sample_unclamped, SamplerConfig, SamplerKind,
};
use crate::types::{BmTopology, EncodedDataset, ModelParams, Moments};

/// Largest machine for which per-epoch exact KL is recorded.
pub const EXACT_KL_MAX_UNITS: usize = 20;

/// Half-width of the uniform weight initialization.
pub const INIT_WEIGHT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub sampler: SamplerConfig,
    /// Seeds weight initialization and per-epoch shuffling.
    pub shuffle_seed: u64,
    #[serde(default = "one")]
    pub temperature: f64,
    #[serde(default = "one")]
    pub effective_temperature: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 10,
            learning_rate: 0.01,
            sampler: SamplerConfig::default(),
            shuffle_seed: 0,
            temperature: 1.0,
            effective_temperature: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, value) in [
            ("temperature", self.temperature),
            ("effective_temperature", self.effective_temperature),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonpositiveTemperature { name, value });
            }
        }
        self.sampler.validate(self.temperature)
    }
}

/// Moment differences shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w_vh: Vec<f64>,
    pub w_vv: Option<Vec<f64>>,
    pub b_v: Vec<f64>,
    pub b_h: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GradientNorms {
    pub w_vh: f64,
    pub w_vv: f64,
    pub b_v: f64,
    pub b_h: f64,
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Gradient {
    pub fn zeros(topology: &BmTopology) -> Self {
        let m = Moments::zeros(topology);
        Self {
            w_vh: m.visible_hidden,
            w_vv: m.visible_visible,
            b_v: m.visible,
            b_h: m.hidden,
        }
    }

    /// `data - model`, component-wise.
    pub fn from_moments(data: &Moments, model: &Moments) -> Self {
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        Self {
            w_vh: diff(&data.visible_hidden, &model.visible_hidden),
            w_vv: match (&data.visible_visible, &model.visible_visible) {
                (Some(d), Some(m)) => Some(diff(d, m)),
                _ => None,
            },
            b_v: diff(&data.visible, &model.visible),
            b_h: diff(&data.hidden, &model.hidden),
        }
    }

    /// Per-group L2 norms; the lateral norm counts each unordered pair once.
    pub fn norms(&self) -> GradientNorms {
        GradientNorms {
            w_vh: l2(&self.w_vh),
            w_vv: self.w_vv.as_deref().map_or(0.0, |w| l2(w) / 2f64.sqrt()),
            b_v: l2(&self.b_v),
            b_h: l2(&self.b_h),
        }
    }
}

/// Data-phase moments of a batch, averaged over rows.
pub fn data_moments(p: &ModelParams, batch: &[Vec<bool>]) -> Result<Moments> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut acc = Moments::zeros(&p.topology);
    for row in batch {
        if row.len() != p.num_visible() {
            return Err(Error::ShapeMismatch {
                what: "batch row",
                expected: p.num_visible(),
                found: row.len(),
            });
        }
        accumulate_clamped(p, row, &mut acc);
    }
    acc.divide(batch.len() as f64);
    Ok(acc)
}

/// Model-phase moments: exact expectations for the enumeration backend,
/// empirical moments of one unclamped batch otherwise.
pub fn model_moments(p: &ModelParams, sampler: &SamplerConfig) -> Result<Moments> {
    match sampler.kind {
        SamplerKind::ExactEnumeration => {
            p.validate()?;
            exact_moments(p)
        }
        _ => Ok(sample_unclamped(p, sampler)?.moments),
    }
}

/// `<s_a s_b>_data - <s_a s_b>_model` for every coupling and
/// `<s_u>_data - <s_u>_model` for every bias.
pub fn kl_gradient(p: &ModelParams, batch: &[Vec<bool>], sampler: &SamplerConfig) -> Result<Gradient> {
    let data = data_moments(p, batch)?;
    let model = model_moments(p, sampler)?;
    Ok(Gradient::from_moments(&data, &model))
}

/// `theta + learning_rate * g`, keeping the lateral matrix symmetric with a
/// zero diagonal. Zero steps leave parameters bit-for-bit unchanged.
pub fn apply_update(p: &ModelParams, g: &Gradient, learning_rate: f64) -> Result<ModelParams> {
    let shape = |what, expected: usize, found: usize| {
        if expected == found {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { what, expected, found })
        }
    };
    shape("w_vh gradient", p.w_vh.len(), g.w_vh.len())?;
    shape("b_v gradient", p.b_v.len(), g.b_v.len())?;
    shape("b_h gradient", p.b_h.len(), g.b_h.len())?;
    shape(
        "w_vv gradient",
        p.w_vv.as_ref().map_or(0, Vec::len),
        g.w_vv.as_ref().map_or(0, Vec::len),
    )?;

    let step = |theta: &mut [f64], grad: &[f64]| {
        for (t, d) in theta.iter_mut().zip(grad) {
            let delta = learning_rate * d;
            if delta != 0.0 {
                *t += delta;
            }
        }
    };
    let mut next = p.clone();
    step(&mut next.w_vh, &g.w_vh);
    step(&mut next.b_v, &g.b_v);
    step(&mut next.b_h, &g.b_h);
    if let (Some(w), Some(d)) = (next.w_vv.as_mut(), g.w_vv.as_ref()) {
        let n = p.num_visible();
        for i in 0..n {
            w[i * n + i] = 0.0;
            for k in (i + 1)..n {
                let delta = learning_rate * d[i * n + k];
                let mut value = w[i * n + k];
                if delta != 0.0 {
                    value += delta;
                }
                w[i * n + k] = value;
                w[k * n + i] = value;
            }
        }
    }
    Ok(next)
}

/// Small uniform weights from a seeded stream, zero biases.
pub fn initial_params(topology: BmTopology, cfg: &TrainConfig) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    rng.set_stream(0);
    let mut p = ModelParams::zeros(topology);
    p.temperature = cfg.temperature;
    p.effective_temperature = cfg.effective_temperature;
    let mut draw = || rng.random_range(-INIT_WEIGHT_SCALE..=INIT_WEIGHT_SCALE);
    p.w_vh.iter_mut().for_each(|w| *w = draw());
    let n = topology.num_visible;
    if topology.has_laterals() {
        for i in 0..n {
            for k in (i + 1)..n {
                p.set_lateral(i, k, draw());
            }
        }
    }
    p
}

/// Exact `KL(P_data || P_model)` of the empirical row distribution against the
/// model's visible marginal.
pub fn exact_kl(p: &ModelParams, rows: &[Vec<bool>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let log_z = log_partition_exact(p)?;
    let mut counts: HashMap<&[bool], usize> = HashMap::new();
    for r in rows {
        *counts.entry(r.as_slice()).or_default() += 1;
    }
    let total = rows.len() as f64;
    let mut patterns: Vec<_> = counts.into_iter().collect();
    patterns.sort();
    patterns
        .into_iter()
        .map(|(v, c)| {
            let q = c as f64 / total;
            let log_model = -free_energy(p, v)? / p.temperature - log_z;
            Ok(q * (q.ln() - log_model))
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_free_energy: f64,
    /// Mean over the epoch's batches of each group's gradient norm.
    pub gradient_norms: GradientNorms,
    pub exact_kl: Option<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub params: ModelParams,
}

pub fn mean_free_energy(p: &ModelParams, rows: &[Vec<bool>]) -> Result<f64> {
    let total = rows.iter().map(|r| free_energy(p, r)).sum::<Result<f64>>()?;
    Ok(total / rows.len() as f64)
}

/// Trains a freshly initialized machine on `data`.
pub fn train(data: &EncodedDataset, topology: BmTopology, cfg: &TrainConfig) -> Result<TrainReport> {
    topology.validate()?;
    let init = initial_params(topology, cfg);
    train_from(init, data, cfg)
}

/// Continues training from `params`. Every step draws its model-phase batch
/// with a seed derived from the sampler seed and the global step index.
pub fn train_from(params: ModelParams, data: &EncodedDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    params.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.width != params.num_visible() {
        return Err(Error::ShapeMismatch {
            what: "dataset width",
            expected: params.num_visible(),
            found: data.width,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    rng.set_stream(1);
    let record_kl = params.topology.num_units() <= EXACT_KL_MAX_UNITS;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut params = params;
    let mut step = 0u64;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut norm_sum = GradientNorms::default();
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Vec<bool>> = chunk.iter().map(|&i| data.rows[i].clone()).collect();
            let sampler = cfg.sampler.with_seed(derive_seed(cfg.sampler.rng_seed, step));
            let g = kl_gradient(&params, &batch, &sampler)?;
            let n = g.norms();
            norm_sum.w_vh += n.w_vh;
            norm_sum.w_vv += n.w_vv;
            norm_sum.b_v += n.b_v;
            norm_sum.b_h += n.b_h;
            params = apply_update(&params, &g, cfg.learning_rate)?;
            batches += 1;
            step += 1;
        }
        let count = batches as f64;
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            mean_free_energy: mean_free_energy(&params, &data.rows)?,
            gradient_norms: GradientNorms {
                w_vh: norm_sum.w_vh / count,
                w_vv: norm_sum.w_vv / count,
                b_v: norm_sum.b_v / count,
                b_h: norm_sum.b_h / count,
            },
            exact_kl: if record_kl { Some(exact_kl(&params, &data.rows)?) } else { None },
            wall_time_secs: started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainReport { epochs, params })
}
