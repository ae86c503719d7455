//! Independent reference computations by brute-force enumeration.

use boltzmann_anomaly::prelude::*;
use boltzmann_anomaly::types::Moments;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_params(topology: BmTopology, scale: f64, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(topology);
    p.w_vh.iter_mut().for_each(|w| *w = rng.random_range(-scale..scale));
    p.b_v.iter_mut().for_each(|b| *b = rng.random_range(-scale..scale));
    p.b_h.iter_mut().for_each(|b| *b = rng.random_range(-scale..scale));
    let n = topology.num_visible;
    if topology.has_laterals() {
        for i in 0..n {
            for k in (i + 1)..n {
                p.set_lateral(i, k, rng.random_range(-scale..scale));
            }
        }
    }
    p
}

/// `units` total, visible count drawn from `1..=units`, laterals on a coin flip.
pub fn random_topology(rng: &mut impl Rng, units: usize) -> BmTopology {
    let n = rng.random_range(1..=units);
    if rng.random_bool(0.5) {
        BmTopology::semi_restricted(n, units - n)
    } else {
        BmTopology::rbm(n, units - n)
    }
}

pub fn random_rows(rng: &mut impl Rng, width: usize, count: usize) -> Vec<Vec<bool>> {
    (0..count).map(|_| (0..width).map(|_| rng.random()).collect()).collect()
}

pub fn bits(index: u64, width: usize) -> Vec<bool> {
    (0..width).map(|b| index >> b & 1 == 1).collect()
}

pub fn energy(p: &ModelParams, v: &[bool], h: &[bool]) -> f64 {
    let (n, m) = (v.len(), h.len());
    let x = |b: bool| if b { 1.0 } else { 0.0 };
    let mut e = 0.0;
    for i in 0..n {
        e -= p.b_v[i] * x(v[i]);
        for j in 0..m {
            e -= p.w_vh[i * m + j] * x(v[i]) * x(h[j]);
        }
        if let Some(l) = &p.w_vv {
            for k in 0..i {
                e -= l[i * n + k] * x(v[i]) * x(v[k]);
            }
        }
    }
    for j in 0..m {
        e -= p.b_h[j] * x(h[j]);
    }
    e
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn free_energy(p: &ModelParams, v: &[bool]) -> f64 {
    let m = p.topology.num_hidden;
    let terms: Vec<f64> = (0..1u64 << m)
        .map(|hi| -energy(p, v, &bits(hi, m)) / p.temperature)
        .collect();
    -p.temperature * log_sum_exp(&terms)
}

pub fn kl(p: &ModelParams, rows: &[Vec<bool>]) -> f64 {
    let n = p.topology.num_visible;
    let neg: Vec<f64> = (0..1u64 << n)
        .map(|vi| -free_energy(p, &bits(vi, n)) / p.temperature)
        .collect();
    let log_z = log_sum_exp(&neg);
    let mut counts = vec![0usize; 1 << n];
    for r in rows {
        counts[r.iter().enumerate().fold(0usize, |acc, (b, &on)| acc | (on as usize) << b)] += 1;
    }
    let total = rows.len() as f64;
    counts
        .iter()
        .zip(&neg)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, x)| {
            let q = c as f64 / total;
            q * (q.ln() - (x - log_z))
        })
        .sum()
}

/// Joint probabilities indexed like `BinaryState::index`.
pub fn joint_distribution(p: &ModelParams) -> Vec<f64> {
    let topo = p.topology;
    let (n, m) = (topo.num_visible, topo.num_hidden);
    let neg: Vec<f64> = (0..1u64 << (n + m))
        .map(|s| {
            let b = bits(s, n + m);
            -energy(p, &b[..n], &b[n..]) / p.temperature
        })
        .collect();
    let log_z = log_sum_exp(&neg);
    neg.into_iter().map(|x| (x - log_z).exp()).collect()
}

/// Exact first and second moments from the joint distribution, flattened as
/// unit means followed by every coupled pair.
pub fn exact_components(topology: &BmTopology, joint: &[f64]) -> Vec<f64> {
    let k = topology.num_units();
    let mut out: Vec<f64> = (0..k)
        .map(|u| joint.iter().enumerate().filter(|(s, _)| s >> u & 1 == 1).map(|(_, p)| p).sum())
        .collect();
    for (a, b) in topology.edges() {
        out.push(
            joint
                .iter()
                .enumerate()
                .filter(|(s, _)| s >> a & 1 == 1 && s >> b & 1 == 1)
                .map(|(_, p)| p)
                .sum(),
        );
    }
    out
}

pub fn sampled_components(topology: &BmTopology, m: &Moments) -> Vec<f64> {
    let mut out = m.mean_units();
    out.extend(m.mean_pairs(topology).into_iter().map(|(_, x)| x));
    out
}

/// Counts components within `k` binomial standard errors.
pub fn within_sigma(est: &[f64], exact: &[f64], samples: usize, k: f64) -> usize {
    est.iter()
        .zip(exact)
        .filter(|(e, x)| (*e - *x).abs() <= k * (*x * (1.0 - *x) / samples as f64).sqrt() + 1e-12)
        .count()
}

pub fn total_variation(states: &[BinaryState], exact: &[f64]) -> f64 {
    let mut counts = vec![0usize; exact.len()];
    for s in states {
        counts[s.index() as usize] += 1;
    }
    let n = states.len() as f64;
    0.5 * counts.iter().zip(exact).map(|(&c, &p)| (c as f64 / n - p).abs()).sum::<f64>()
}

/// Expected TV of `samples` i.i.d. draws from `p`, to first order.
pub fn iid_tv_floor(p: &[f64], samples: usize) -> f64 {
    0.5 * (2.0 / (std::f64::consts::PI * samples as f64)).sqrt() * p.iter().map(|x| (x * (1.0 - x)).sqrt()).sum::<f64>()
}
