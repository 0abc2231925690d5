//! Enumeration and finite-difference helpers shared by the integration tests.
#![allow(dead_code)]

pub mod configs;
pub mod critic;

use beam_core::rbm::{LayerKind, RbmModel, State, StateBatch};
use beam_core::rng;
use ndarray::{Array1, Array2};
use rand::Rng;

/// All binary vectors of length `n`, in counting order.
pub fn binary_vectors(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n)
        .map(|k| (0..n).map(|i| ((k >> i) & 1) as f64).collect())
        .collect()
}

/// Bernoulli model with parameters uniform in `[-scale, scale]`.
pub fn random_bernoulli(nv: usize, nh: usize, seed: u64, scale: f64) -> RbmModel {
    let mut r = rng::stream(seed, 99);
    let mut m = RbmModel::zeros(LayerKind::Bernoulli, nv, nh);
    m.visible_loc.mapv_inplace(|_| r.random_range(-scale..scale));
    m.hidden_bias.mapv_inplace(|_| r.random_range(-scale..scale));
    m.weights.mapv_inplace(|_| r.random_range(-scale..scale));
    m
}

/// Gaussian-visible model with modest random parameters.
pub fn random_gaussian(nv: usize, nh: usize, seed: u64) -> RbmModel {
    let mut r = rng::stream(seed, 98);
    let mut m = RbmModel::zeros(LayerKind::Gaussian, nv, nh);
    m.visible_loc.mapv_inplace(|_| r.random_range(-1.0..1.0));
    m.visible_log_scale.mapv_inplace(|_| r.random_range(-0.5..0.5));
    m.hidden_bias.mapv_inplace(|_| r.random_range(-1.0..1.0));
    m.weights.mapv_inplace(|_| r.random_range(-1.0..1.0));
    m
}

/// Every joint state of a Bernoulli model with its probability under `exp(-βE)/Z(β)`.
pub fn joint_table(model: &RbmModel, beta: f64) -> (Vec<State>, Vec<f64>) {
    let log_z = model.exact_log_partition(beta).unwrap();
    let mut states = Vec::new();
    let mut probs = Vec::new();
    for v in binary_vectors(model.n_visible()) {
        for h in binary_vectors(model.n_hidden()) {
            let s = State::new(Array1::from(v.clone()), Array1::from(h));
            probs.push((-beta * model.state_energy(&s).unwrap() - log_z).exp());
            states.push(s);
        }
    }
    (states, probs)
}

/// Index of a binary joint state in [`joint_table`] order.
pub fn state_index(v: &[f64], h: &[f64]) -> usize {
    let code = |x: &[f64]| x.iter().enumerate().map(|(i, b)| (*b as usize) << i).sum::<usize>();
    code(v) * (1 << h.len()) + code(h)
}

/// Mean log-likelihood of binary rows under a Bernoulli model.
pub fn log_likelihood(model: &RbmModel, data: &Array2<f64>) -> f64 {
    let log_z = model.exact_log_partition(1.0).unwrap();
    let hs = binary_vectors(model.n_hidden());
    let mut total = 0.0;
    for v in data.rows() {
        let terms: Vec<f64> = hs
            .iter()
            .map(|h| -model.energy(v, Array1::from(h.clone()).view()).unwrap())
            .collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        total += max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    }
    total / data.nrows() as f64 - log_z
}

pub fn batch(states: &[State]) -> StateBatch {
    StateBatch::from_states(states)
}

/// Learnable parameters in bundle order (loc, log-scale, hidden bias, weights);
/// log-scales are skipped for Bernoulli visibles.
pub fn param_slots(model: &RbmModel) -> Vec<usize> {
    let nv = model.n_visible();
    let total = 2 * nv + model.n_hidden() + nv * model.n_hidden();
    (0..total)
        .filter(|&k| model.visible_kind == LayerKind::Gaussian || !(nv..2 * nv).contains(&k))
        .collect()
}

pub fn param_mut(model: &mut RbmModel, k: usize) -> &mut f64 {
    let nv = model.n_visible();
    let nh = model.n_hidden();
    if k < nv {
        &mut model.visible_loc[k]
    } else if k < 2 * nv {
        &mut model.visible_log_scale[k - nv]
    } else if k < 2 * nv + nh {
        &mut model.hidden_bias[k - 2 * nv]
    } else {
        let j = k - 2 * nv - nh;
        &mut model.weights[[j / nh, j % nh]]
    }
}

/// Central finite differences of `f` over the learnable parameters.
pub fn finite_difference(model: &RbmModel, step: f64, f: impl Fn(&RbmModel) -> f64) -> Vec<(usize, f64)> {
    param_slots(model)
        .into_iter()
        .map(|k| {
            let mut plus = model.clone();
            *param_mut(&mut plus, k) += step;
            let mut minus = model.clone();
            *param_mut(&mut minus, k) -= step;
            (k, (f(&plus) - f(&minus)) / (2.0 * step))
        })
        .collect()
}

/// `‖a - b‖ / ‖b‖` over the finite-difference slots.
pub fn relative_error(analytic: &[f64], numeric: &[(usize, f64)]) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for &(k, n) in numeric {
        diff += (analytic[k] - n).powi(2);
        norm += n * n;
    }
    (diff / norm.max(1e-300)).sqrt()
}

/// Largest componentwise `|a - b| / |b|` among components with `|b| > floor`.
pub fn max_component_error(analytic: &[f64], numeric: &[(usize, f64)], floor: f64) -> f64 {
    numeric
        .iter()
        .filter(|(_, n)| n.abs() > floor)
        .map(|&(k, n)| ((analytic[k] - n) / n).abs())
        .fold(0.0, f64::max)
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
