use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::SamplerConfig;
use crate::types::{BinaryState, ModelParams};

/// `beta_t = beta_start * (beta_end / beta_start)^(t / (sweeps - 1))`.
/// A single sweep runs at `beta_end`.
pub fn geometric_beta_schedule(beta_start: f64, beta_end: f64, sweeps: usize) -> Vec<f64> {
    match sweeps {
        0 => Vec::new(),
        1 => vec![beta_end],
        _ => {
            let ratio = beta_end / beta_start;
            let last = (sweeps - 1) as f64;
            (0..sweeps)
                .map(|t| {
                    if t == sweeps - 1 {
                        beta_end
                    } else {
                        beta_start * ratio.powf(t as f64 / last)
                    }
                })
                .collect()
        }
    }
}

/// Symmetric couplings over all units (visible first, then hidden) plus
/// biases, divided by the effective temperature. Row `u` is dense but only
/// `spans[u]` can hold nonzero entries.
struct IsingProblem {
    units: usize,
    couplings: Vec<f64>,
    biases: Vec<f64>,
    spans: Vec<Range<usize>>,
}

impl IsingProblem {
    fn new(p: &ModelParams) -> Self {
        let n = p.num_visible();
        let m = p.num_hidden();
        let k = n + m;
        let scale = 1.0 / p.effective_temperature;
        let mut couplings = vec![0.0; k * k];
        for i in 0..n {
            for j in 0..m {
                let w = p.weight(i, j) * scale;
                couplings[i * k + n + j] = w;
                couplings[(n + j) * k + i] = w;
            }
            if p.w_vv.is_some() {
                for l in (0..n).filter(|&l| l != i) {
                    couplings[i * k + l] = p.lateral(i, l) * scale;
                }
            }
        }
        let visible_span = if p.w_vv.is_some() { 0..k } else { n..k };
        let spans = (0..k)
            .map(|u| if u < n { visible_span.clone() } else { 0..n })
            .collect();
        let biases = p.b_v.iter().chain(&p.b_h).map(|b| b * scale).collect();
        Self {
            units: k,
            couplings,
            biases,
            spans,
        }
    }

    /// Adds `sign` times row `u` of the couplings into `field`.
    #[inline]
    fn add_row(&self, u: usize, sign: f64, field: &mut [f64]) {
        let span = self.spans[u].clone();
        let row = &self.couplings[u * self.units + span.start..u * self.units + span.end];
        for (f, j) in field[span].iter_mut().zip(row) {
            *f += sign * j;
        }
    }

    /// One anneal from a uniformly random state; returns the final state.
    fn anneal(&self, schedule: &[f64], rng: &mut impl Rng) -> Vec<bool> {
        let k = self.units;
        let mut spins: Vec<bool> = (0..k).map(|_| rng.random()).collect();
        // field[u] = b_u + sum_w J_uw s_w; flipping u changes E by (2 s_u - 1) * field[u]
        let mut field = self.biases.clone();
        for w in (0..k).filter(|&w| spins[w]) {
            self.add_row(w, 1.0, &mut field);
        }
        for &beta in schedule {
            for u in 0..k {
                let delta_e = if spins[u] { field[u] } else { -field[u] };
                let accept = delta_e <= 0.0 || rng.random::<f64>() < (-beta * delta_e).exp();
                if accept {
                    let sign = if spins[u] { -1.0 } else { 1.0 };
                    spins[u] = !spins[u];
                    self.add_row(u, sign, &mut field);
                }
            }
        }
        spins
    }
}

/// Independent anneals, one per read; read `r` uses ChaCha stream `r` of the
/// configured seed so the result does not depend on scheduling.
pub(super) fn sample(p: &ModelParams, cfg: &SamplerConfig) -> Vec<BinaryState> {
    let problem = IsingProblem::new(p);
    let schedule = geometric_beta_schedule(cfg.sa_beta_start, cfg.beta_end(p.temperature), cfg.sa_sweeps);
    let n = p.num_visible();
    (0..cfg.num_reads)
        .into_par_iter()
        .map(|read| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(read as u64);
            let mut spins = problem.anneal(&schedule, &mut rng);
            let hidden = spins.split_off(n);
            BinaryState {
                visible: spins,
                hidden,
            }
        })
        .collect()
}
