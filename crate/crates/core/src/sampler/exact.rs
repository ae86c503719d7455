use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SamplerConfig;
use crate::energy::{enumerate_neg_scaled_energies, log_sum_exp, MAX_ENUMERATION_UNITS};
use crate::error::Result;
use crate::types::{BinaryState, ModelParams, Moments};

/// Probability of every joint state, indexed as in [`BinaryState::from_index`].
pub fn exact_distribution(p: &ModelParams) -> Result<Vec<f64>> {
    exact_distribution_with_limit(p, MAX_ENUMERATION_UNITS)
}

pub fn exact_distribution_with_limit(p: &ModelParams, max_units: usize) -> Result<Vec<f64>> {
    let neg = enumerate_neg_scaled_energies(p, max_units)?;
    let log_z = log_sum_exp(neg.iter().copied());
    Ok(neg.into_iter().map(|x| (x - log_z).exp()).collect())
}

/// Model-phase moments computed exactly from the enumerated distribution.
pub fn exact_moments(p: &ModelParams) -> Result<Moments> {
    let probs = exact_distribution(p)?;
    let topology = p.topology;
    let n = topology.num_visible;
    let m = topology.num_hidden;
    let mut acc = Moments::zeros(&topology);
    for (idx, &prob) in probs.iter().enumerate() {
        let s = BinaryState::from_index(&topology, idx as u64);
        for i in (0..n).filter(|&i| s.visible[i]) {
            acc.visible[i] += prob;
            for j in (0..m).filter(|&j| s.hidden[j]) {
                acc.visible_hidden[i * m + j] += prob;
            }
            if let Some(vv) = acc.visible_visible.as_mut() {
                for k in (0..n).filter(|&k| k != i && s.visible[k]) {
                    vv[i * n + k] += prob;
                }
            }
        }
        for j in (0..m).filter(|&j| s.hidden[j]) {
            acc.hidden[j] += prob;
        }
    }
    Ok(acc)
}

/// I.i.d. draws by inverse-CDF lookup.
pub(super) fn sample(p: &ModelParams, cfg: &SamplerConfig) -> Result<Vec<BinaryState>> {
    let probs = exact_distribution(p)?;
    let cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().expect("at least one state");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    Ok((0..cfg.num_reads)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            BinaryState::from_index(&p.topology, idx as u64)
        })
        .collect())
}
