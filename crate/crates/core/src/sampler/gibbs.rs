use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SamplerConfig;
use crate::energy::sigmoid;
use crate::types::{BinaryState, ModelParams};

/// One Gibbs chain from a uniformly random start, `burn_in` discarded sweeps,
/// then one retained state every `thin` sweeps.
pub(super) fn sample(p: &ModelParams, cfg: &SamplerConfig) -> Vec<BinaryState> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = p.num_visible();
    let m = p.num_hidden();
    let mut state = BinaryState {
        visible: (0..n).map(|_| rng.random()).collect(),
        hidden: (0..m).map(|_| rng.random()).collect(),
    };
    for _ in 0..cfg.gibbs_burn_in {
        sweep(p, &mut state, &mut rng);
    }
    let mut out = Vec::with_capacity(cfg.num_reads);
    for _ in 0..cfg.num_reads {
        for _ in 0..cfg.gibbs_thin {
            sweep(p, &mut state, &mut rng);
        }
        out.push(state.clone());
    }
    out
}

/// Visible update then hidden block update. Without laterals the visible
/// units are conditionally independent and the in-order scan is exactly a
/// block update; with laterals each unit sees its already-updated neighbours.
fn sweep(p: &ModelParams, state: &mut BinaryState, rng: &mut impl Rng) {
    let n = p.num_visible();
    let m = p.num_hidden();
    let inv_t = 1.0 / p.temperature;
    for i in 0..n {
        let row = &p.w_vh[i * m..(i + 1) * m];
        let mut field = p.b_v[i];
        for (w, &h) in row.iter().zip(&state.hidden) {
            if h {
                field += w;
            }
        }
        if let Some(vv) = &p.w_vv {
            for (k, &v) in state.visible.iter().enumerate() {
                if v && k != i {
                    field += vv[i * n + k];
                }
            }
        }
        state.visible[i] = rng.random::<f64>() < sigmoid(field * inv_t);
    }
    let inputs = p.hidden_inputs(&state.visible);
    for (h, a) in state.hidden.iter_mut().zip(inputs) {
        *h = rng.random::<f64>() < sigmoid(a * inv_t);
    }
}
