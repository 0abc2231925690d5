//! Nearest-neighbor critics on hidden activations.
//!
//! The cache holds the hidden mean activations of the previous minibatch of
//! data and of the fantasy particles. For a query `x` the `k` nearest cached
//! points are found by an exact scan (Euclidean distance, ties broken by
//! side with data first, then by index). With `j` of them on the data side:
//!
//! - `T_NN(x) = 2j/k - 1`
//! - `T_DNN(x) = 2 Σ_data 1/(d+ε) / Σ_all 1/(d+ε) - 1`

use ndarray::{Array2, ArrayView1, ArrayView2};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticError {
    #[error("critic cache needs at least one point on each side")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cache holds {available} usable points, fewer than k = {k}")]
    TooFewPoints { available: usize, k: usize },
    #[error("invalid critic setting: {0}")]
    InvalidConfig(String),
    #[error("k-th neighbor distance is zero; density is degenerate")]
    DegenerateDensity,
}

/// Which half of the cache a point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Data,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticKind {
    /// `T_NN`
    Nearest,
    /// `T_DNN`
    DistanceWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub side: Side,
    pub index: usize,
    /// Squared Euclidean distance, summed in coordinate order.
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn precedes(&self, other: &Neighbor) -> bool {
        (self.dist_sq, self.side, self.index) < (other.dist_sq, other.side, other.index)
    }
}

/// Activations of the most recent data minibatch and fantasy particles.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticCache {
    data_points: Array2<f64>,
    model_points: Array2<f64>,
    k: usize,
    epsilon: f64,
}

impl CriticCache {
    /// An empty cache; [`Self::update`] must be called before querying.
    pub fn new(k: usize, epsilon: f64) -> Result<Self, CriticError> {
        if k == 0 {
            return Err(CriticError::InvalidConfig("k must be at least 1".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(CriticError::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            data_points: Array2::zeros((0, 0)),
            model_points: Array2::zeros((0, 0)),
            k,
            epsilon,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn data_points(&self) -> ArrayView2<'_, f64> {
        self.data_points.view()
    }

    pub fn model_points(&self) -> ArrayView2<'_, f64> {
        self.model_points.view()
    }

    pub fn is_populated(&self) -> bool {
        self.data_points.nrows() > 0 && self.model_points.nrows() > 0
    }

    pub fn dim(&self) -> usize {
        self.data_points.ncols()
    }

    /// Replaces both halves of the cache.
    pub fn update(&mut self, data: Array2<f64>, model: Array2<f64>) -> Result<(), CriticError> {
        if data.nrows() == 0 || model.nrows() == 0 {
            return Err(CriticError::EmptyInput);
        }
        if data.ncols() != model.ncols() {
            return Err(CriticError::DimensionMismatch {
                expected: data.ncols(),
                got: model.ncols(),
            });
        }
        self.data_points = data;
        self.model_points = model;
        Ok(())
    }

    /// The `k` nearest cached points to `x`, closest first. `exclude` removes
    /// one cache member (by side and index) from consideration.
    pub fn neighbors(
        &self,
        x: ArrayView1<f64>,
        exclude: Option<(Side, usize)>,
    ) -> Result<Vec<Neighbor>, CriticError> {
        if !self.is_populated() {
            return Err(CriticError::TooFewPoints { available: 0, k: self.k });
        }
        if x.len() != self.dim() {
            return Err(CriticError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let available = self.data_points.nrows() + self.model_points.nrows() - usize::from(exclude.is_some());
        if available < self.k {
            return Err(CriticError::TooFewPoints { available, k: self.k });
        }
        let x = x.to_vec();
        let mut best: Vec<Neighbor> = Vec::with_capacity(self.k + 1);
        for (side, points) in [(Side::Data, &self.data_points), (Side::Model, &self.model_points)] {
            for (index, row) in points.rows().into_iter().enumerate() {
                if exclude == Some((side, index)) {
                    continue;
                }
                let row = row.as_slice().expect("cache rows are contiguous");
                let bound = if best.len() == self.k {
                    best[self.k - 1].dist_sq
                } else {
                    f64::INFINITY
                };
                let Some(dist_sq) = bounded_dist_sq(&x, row, bound) else {
                    continue;
                };
                let cand = Neighbor { side, index, dist_sq };
                if best.len() == self.k && !cand.precedes(&best[self.k - 1]) {
                    continue;
                }
                let pos = best.partition_point(|b| b.precedes(&cand));
                best.insert(pos, cand);
                best.truncate(self.k);
            }
        }
        Ok(best)
    }

    pub fn t_nn(&self, x: ArrayView1<f64>) -> Result<f64, CriticError> {
        self.evaluate(CriticKind::Nearest, x, None)
    }

    pub fn t_dnn(&self, x: ArrayView1<f64>) -> Result<f64, CriticError> {
        self.evaluate(CriticKind::DistanceWeighted, x, None)
    }

    pub fn evaluate(
        &self,
        kind: CriticKind,
        x: ArrayView1<f64>,
        exclude: Option<(Side, usize)>,
    ) -> Result<f64, CriticError> {
        let nbrs = self.neighbors(x, exclude)?;
        Ok(match kind {
            CriticKind::Nearest => {
                let j = nbrs.iter().filter(|n| n.side == Side::Data).count();
                2.0 * j as f64 / self.k as f64 - 1.0
            }
            CriticKind::DistanceWeighted => {
                let mut data = 0.0;
                let mut total = 0.0;
                for n in &nbrs {
                    let w = 1.0 / (n.dist() + self.epsilon);
                    total += w;
                    if n.side == Side::Data {
                        data += w;
                    }
                }
                2.0 * data / total - 1.0
            }
        })
    }

    /// Critic value for every row of `queries`.
    pub fn evaluate_rows(&self, kind: CriticKind, queries: ArrayView2<f64>) -> Result<Vec<f64>, CriticError> {
        queries
            .rows()
            .into_iter()
            .map(|q| self.evaluate(kind, q, None))
            .collect()
    }
}

/// Squared distance, or `None` as soon as the partial sum exceeds `bound`.
/// Partial sums of non-negative terms never decrease, so pruning does not
/// change which points are selected.
fn bounded_dist_sq(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
        if s > bound {
            return None;
        }
    }
    Some(s)
}

/// Volume of the unit ball in `n` dimensions.
pub fn unit_ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    (half * std::f64::consts::PI.ln() - ln_gamma(half + 1.0)).exp()
}

/// k-nearest-neighbor density estimate `k / (N · V_n · d_k^n)` from `N` points.
pub fn knn_density(points: ArrayView2<f64>, x: ArrayView1<f64>, k: usize) -> Result<f64, CriticError> {
    if k == 0 {
        return Err(CriticError::InvalidConfig("k must be at least 1".into()));
    }
    if points.nrows() < k {
        return Err(CriticError::TooFewPoints {
            available: points.nrows(),
            k,
        });
    }
    if points.ncols() != x.len() {
        return Err(CriticError::DimensionMismatch {
            expected: points.ncols(),
            got: x.len(),
        });
    }
    let mut d: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .collect();
    d.select_nth_unstable_by(k - 1, f64::total_cmp);
    let dk = d[k - 1].sqrt();
    if dk == 0.0 {
        return Err(CriticError::DegenerateDensity);
    }
    let n = x.len();
    let count = points.nrows() as f64;
    Ok(k as f64 / (count * unit_ball_volume(n) * dk.powi(n as i32)))
}
