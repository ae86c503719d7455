//! Boltzmann samplers for the unclamped (model) phase and exact conditional
//! moments for the clamped (data) phase.
//!
//! Three backends draw joint states from `p(v, h) ∝ exp(-E(v, h) / T)`:
//!
//! * [`SamplerKind::ExactEnumeration`] tabulates the full distribution and
//!   draws i.i.d. reads from it. Only feasible for small machines.
//! * [`SamplerKind::Gibbs`] runs one thinned Gibbs chain.
//! * [`SamplerKind::SimulatedAnnealing`] runs independent single-flip
//!   Metropolis anneals, one per read, each ending at `beta_end`.

mod anneal;
mod exact;
mod gibbs;

use serde::{Deserialize, Serialize};

use crate::energy::sigmoid;
use crate::error::{Error, Result};
use crate::types::{ModelParams, Moments, SampleBatch};

pub use anneal::geometric_beta_schedule;
pub use exact::{exact_distribution, exact_distribution_with_limit, exact_moments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    ExactEnumeration,
    Gibbs,
    SimulatedAnnealing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// States returned per call.
    pub num_reads: usize,
    /// Gibbs sweeps discarded before the first retained state.
    pub gibbs_burn_in: usize,
    /// Gibbs sweeps per retained state (at least 1).
    pub gibbs_thin: usize,
    /// Metropolis sweeps per anneal.
    pub sa_sweeps: usize,
    pub sa_beta_start: f64,
    /// Final inverse temperature; `None` anneals down to `1 / T`.
    pub sa_beta_end: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Gibbs,
            num_reads: 100,
            gibbs_burn_in: 100,
            gibbs_thin: 1,
            sa_sweeps: 1000,
            sa_beta_start: 0.1,
            sa_beta_end: None,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn exact(num_reads: usize, rng_seed: u64) -> Self {
        Self {
            kind: SamplerKind::ExactEnumeration,
            num_reads,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn gibbs(num_reads: usize, burn_in: usize, thin: usize, rng_seed: u64) -> Self {
        Self {
            kind: SamplerKind::Gibbs,
            num_reads,
            gibbs_burn_in: burn_in,
            gibbs_thin: thin,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn annealing(num_reads: usize, sweeps: usize, rng_seed: u64) -> Self {
        Self {
            kind: SamplerKind::SimulatedAnnealing,
            num_reads,
            sa_sweeps: sweeps,
            rng_seed,
            ..Self::default()
        }
    }

    /// Same configuration with a different seed.
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }

    /// Final inverse temperature for a model at `temperature`.
    pub fn beta_end(&self, temperature: f64) -> f64 {
        self.sa_beta_end.unwrap_or(1.0 / temperature)
    }

    pub fn validate(&self, temperature: f64) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_reads == 0 {
            return invalid("num_reads must be >= 1".into());
        }
        match self.kind {
            SamplerKind::ExactEnumeration => {}
            SamplerKind::Gibbs => {
                if self.gibbs_thin == 0 {
                    return invalid("gibbs_thin must be >= 1".into());
                }
            }
            SamplerKind::SimulatedAnnealing => {
                let beta_end = self.beta_end(temperature);
                if self.sa_sweeps == 0 {
                    return invalid("sa_sweeps must be >= 1".into());
                }
                if !(self.sa_beta_start > 0.0 && self.sa_beta_start.is_finite()) {
                    return invalid(format!("sa_beta_start must be positive, got {}", self.sa_beta_start));
                }
                if !(beta_end > 0.0 && beta_end.is_finite()) {
                    return invalid(format!("sa_beta_end must be positive, got {beta_end}"));
                }
                if self.sa_beta_start > beta_end {
                    return invalid(format!(
                        "sa_beta_start {} exceeds sa_beta_end {beta_end}",
                        self.sa_beta_start
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Draws `cfg.num_reads` joint states from the model distribution.
///
/// Identical `(p, cfg)` always produce an identical batch, independent of the
/// number of rayon worker threads.
pub fn sample_unclamped(p: &ModelParams, cfg: &SamplerConfig) -> Result<SampleBatch> {
    p.validate()?;
    cfg.validate(p.temperature)?;
    let states = match cfg.kind {
        SamplerKind::ExactEnumeration => exact::sample(p, cfg)?,
        SamplerKind::Gibbs => gibbs::sample(p, cfg),
        SamplerKind::SimulatedAnnealing => anneal::sample(p, cfg),
    };
    SampleBatch::from_states(&p.topology, states)
}

/// Data-phase moments with the visible layer clamped to `visible`.
///
/// Hidden units are independent given the visibles, with
/// `p(h_j = 1 | v) = sigmoid(a_j / T)`, so the moments are returned exactly
/// and the state list is empty.
pub fn sample_clamped(p: &ModelParams, visible: &[bool]) -> Result<SampleBatch> {
    Ok(SampleBatch {
        states: Vec::new(),
        moments: clamped_moments(p, visible)?,
    })
}

pub fn clamped_moments(p: &ModelParams, visible: &[bool]) -> Result<Moments> {
    let n = p.num_visible();
    let m = p.num_hidden();
    if visible.len() != n {
        return Err(Error::ShapeMismatch {
            what: "visible state",
            expected: n,
            found: visible.len(),
        });
    }
    let mut out = Moments::zeros(&p.topology);
    accumulate_clamped(p, visible, &mut out);
    debug_assert_eq!(out.hidden.len(), m);
    Ok(out)
}

/// Adds the clamped moments of `visible` into `acc`.
pub(crate) fn accumulate_clamped(p: &ModelParams, visible: &[bool], acc: &mut Moments) {
    let n = p.num_visible();
    let m = p.num_hidden();
    let t = p.temperature;
    let hidden: Vec<f64> = p
        .hidden_inputs(visible)
        .into_iter()
        .map(|a| sigmoid(a / t))
        .collect();
    for (acc_j, h) in acc.hidden.iter_mut().zip(&hidden) {
        *acc_j += h;
    }
    for i in (0..n).filter(|&i| visible[i]) {
        acc.visible[i] += 1.0;
        for (acc_ij, h) in acc.visible_hidden[i * m..(i + 1) * m].iter_mut().zip(&hidden) {
            *acc_ij += h;
        }
        if let Some(vv) = acc.visible_visible.as_mut() {
            for k in (0..n).filter(|&k| k != i && visible[k]) {
                vv[i * n + k] += 1.0;
            }
        }
    }
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
