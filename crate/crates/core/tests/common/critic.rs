//! Random critic fixtures and a sort-based reference evaluation.

use beam_core::critic::{CriticCache, CriticKind, Side};
use beam_core::rng;
use ndarray::{Array1, Array2};
use rand::Rng;

pub struct Fixture {
    pub data: Array2<f64>,
    pub model: Array2<f64>,
    pub query: Array1<f64>,
    pub k: usize,
    pub epsilon: f64,
}

pub fn fixture(seed: u64) -> Fixture {
    let mut r = rng::stream(seed, 40);
    let dim = r.random_range(1..6);
    let nd = r.random_range(1..30);
    let nm = r.random_range(1..30);
    // Coarse coordinates on some fixtures so exact distance ties occur.
    let coarse = r.random::<bool>();
    let coord = |r: &mut rand_chacha::ChaCha8Rng| {
        if coarse {
            f64::from(r.random_range(-2i32..=2))
        } else {
            r.random_range(-1.0..1.0)
        }
    };
    let data = Array2::from_shape_fn((nd, dim), |_| coord(&mut r));
    let model = Array2::from_shape_fn((nm, dim), |_| coord(&mut r));
    let query = Array1::from_shape_fn(dim, |_| coord(&mut r));
    let k = r.random_range(1..=nd + nm);
    let epsilon = [1e-3, 1e-2, 0.1][r.random_range(0..3)];
    Fixture {
        data,
        model,
        query,
        k,
        epsilon,
    }
}

/// Sort every cached point by (distance², side, index) and evaluate on the first `k`.
pub fn brute_force(f: &Fixture, kind: CriticKind) -> f64 {
    let mut all: Vec<(f64, Side, usize)> = Vec::new();
    for (side, points) in [(Side::Data, &f.data), (Side::Model, &f.model)] {
        for (i, row) in points.rows().into_iter().enumerate() {
            let d2: f64 = row.iter().zip(f.query.iter()).map(|(a, b)| (b - a) * (b - a)).sum();
            all.push((d2, side, i));
        }
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nearest = &all[..f.k];
    match kind {
        CriticKind::Nearest => {
            let j = nearest.iter().filter(|n| n.1 == Side::Data).count();
            2.0 * j as f64 / f.k as f64 - 1.0
        }
        CriticKind::DistanceWeighted => {
            let (mut data, mut total) = (0.0, 0.0);
            for n in nearest {
                let w = 1.0 / (n.0.sqrt() + f.epsilon);
                total += w;
                if n.1 == Side::Data {
                    data += w;
                }
            }
            2.0 * data / total - 1.0
        }
    }
}

/// Cache holding the fixture, with data and model sides optionally exchanged.
pub fn cache(f: &Fixture, swapped: bool) -> CriticCache {
    let mut c = CriticCache::new(f.k, f.epsilon).unwrap();
    if swapped {
        c.update(f.model.clone(), f.data.clone()).unwrap();
    } else {
        c.update(f.data.clone(), f.model.clone()).unwrap();
    }
    c
}

/// Whether the k-th and (k+1)-th nearest points are at the same distance.
pub fn boundary_tie(f: &Fixture) -> bool {
    let mut d: Vec<f64> = f
        .data
        .rows()
        .into_iter()
        .chain(f.model.rows())
        .map(|r| r.iter().zip(f.query.iter()).map(|(a, b)| (b - a) * (b - a)).sum())
        .collect();
    d.sort_by(f64::total_cmp);
    f.k < d.len() && d[f.k - 1] == d[f.k]
}
