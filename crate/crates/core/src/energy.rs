//! Energies of joint states and free energies of visible states.
//!
//! With units in `{0, 1}` the energy of a joint state is
//!
//! ```text
//! E(v, h) = - sum_ij W_ij v_i h_j - sum_{k<i} L_ik v_i v_k - sum_i b_i v_i - sum_j c_j h_j
//! ```
//!
//! where the lateral matrix `L` is only populated for semi-restricted machines.
//! Hidden units never couple to each other, so they are conditionally
//! independent given the visible layer and can be summed out in closed form.

use crate::error::{Error, Result};
use crate::types::{BinaryState, BmTopology, ModelParams};

/// Largest number of units the exhaustive routines will enumerate by default.
pub const MAX_ENUMERATION_UNITS: usize = 24;

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sum_i e^{x_i}` with max-shift.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.into_iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

fn check_visible(p: &ModelParams, visible: &[bool]) -> Result<()> {
    if visible.len() != p.num_visible() {
        return Err(Error::ShapeMismatch {
            what: "visible state",
            expected: p.num_visible(),
            found: visible.len(),
        });
    }
    Ok(())
}

/// Energy of the visible-only terms: laterals and visible biases.
pub fn visible_energy(p: &ModelParams, visible: &[bool]) -> Result<f64> {
    check_visible(p, visible)?;
    let n = p.num_visible();
    let mut e = 0.0;
    for i in (0..n).filter(|&i| visible[i]) {
        e -= p.b_v[i];
        if p.w_vv.is_some() {
            for k in (0..i).filter(|&k| visible[k]) {
                e -= p.lateral(i, k);
            }
        }
    }
    Ok(e)
}

/// Energy of a joint state.
pub fn energy(p: &ModelParams, s: &BinaryState) -> Result<f64> {
    s.check_shape(&p.topology)?;
    let mut e = visible_energy(p, &s.visible)?;
    let m = p.num_hidden();
    for i in (0..p.num_visible()).filter(|&i| s.visible[i]) {
        for j in (0..m).filter(|&j| s.hidden[j]) {
            e -= p.weight(i, j);
        }
    }
    for j in (0..m).filter(|&j| s.hidden[j]) {
        e -= p.b_h[j];
    }
    Ok(e)
}

/// Free energy `F(v) = -T ln sum_h exp(-E(v, h) / T)`, evaluated in closed form.
pub fn free_energy(p: &ModelParams, visible: &[bool]) -> Result<f64> {
    let t = p.temperature;
    let e_vis = visible_energy(p, visible)?;
    let marginal: f64 = p
        .hidden_inputs(visible)
        .into_iter()
        .map(|a| softplus(a / t))
        .sum();
    Ok(e_vis - t * marginal)
}

/// Exact log partition function `ln Z` by summing `exp(-E / T)` over all
/// `2^(N+M)` joint states.
pub fn log_partition_exact(p: &ModelParams) -> Result<f64> {
    log_partition_exact_with_limit(p, MAX_ENUMERATION_UNITS)
}

pub fn log_partition_exact_with_limit(p: &ModelParams, max_units: usize) -> Result<f64> {
    let neg_energies = enumerate_neg_scaled_energies(p, max_units)?;
    Ok(log_sum_exp(neg_energies.iter().copied()))
}

/// `-E(s) / T` for every joint state, indexed as in [`BinaryState::from_index`].
pub(crate) fn enumerate_neg_scaled_energies(p: &ModelParams, max_units: usize) -> Result<Vec<f64>> {
    let topology = p.topology;
    check_enumerable(&topology, max_units)?;
    let count = 1u64 << topology.num_units();
    (0..count)
        .map(|idx| energy(p, &BinaryState::from_index(&topology, idx)).map(|e| -e / p.temperature))
        .collect()
}

pub(crate) fn check_enumerable(topology: &BmTopology, max_units: usize) -> Result<()> {
    let units = topology.num_units();
    if units > max_units || units >= 64 {
        return Err(Error::TooLargeToEnumerate {
            units,
            limit: max_units,
        });
    }
    Ok(())
}
