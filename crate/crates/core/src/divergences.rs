//! Divergence estimates used to monitor training.
//!
//! [`knn_kl_estimate`] is the 1-nearest-neighbor KL estimator of Wang, Kulkarni
//! and Verdú (2009). The quadrature routines evaluate forward/reverse KL and the
//! discriminator divergence for analytic 1-D densities.

use ndarray::ArrayView2;
use thiserror::Error;

use crate::tds::ParticlePopulation;

const MIN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("density integrates to {0} on the quadrature grid")]
    NotNormalized(f64),
    #[error("invalid quadrature grid: {0}")]
    InvalidGrid(String),
    #[error("divergence is not finite")]
    NonFinite,
}

/// Forward and reverse KL estimates for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    pub epoch: usize,
    /// `D_KL(p_data ‖ p_model)`
    pub forward_kl: f64,
    /// `D_KL(p_model ‖ p_data)`
    pub reverse_kl: f64,
    pub n_minibatches_averaged: usize,
}

fn nearest_sq(x: &[f64], pts: ArrayView2<f64>, skip: Option<usize>) -> f64 {
    let mut best = f64::INFINITY;
    for (j, row) in pts.rows().into_iter().enumerate() {
        if skip == Some(j) {
            continue;
        }
        let mut s = 0.0;
        for (a, b) in x.iter().zip(row.iter()) {
            let d = a - b;
            s += d * d;
            if s >= best {
                break;
            }
        }
        if s < best {
            best = s;
        }
    }
    best
}

/// Estimate of `D_KL(p ‖ q)` from `x ~ p` (`n` rows) and `y ~ q` (`m` rows):
///
/// ```text
/// (d/n) Σ_i log(ν_m(i) / ρ_n(i)) + log(m / (n - 1))
/// ```
///
/// where `ρ_n(i)` is the distance from `x_i` to its nearest other `x` and
/// `ν_m(i)` the distance to its nearest `y`. Distances are floored at 1e-12.
pub fn knn_kl_estimate(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64, DivergenceError> {
    let n = x.nrows();
    let m = y.nrows();
    if n < 2 {
        return Err(DivergenceError::TooFewSamples { needed: 2, got: n });
    }
    if m < 1 {
        return Err(DivergenceError::TooFewSamples { needed: 1, got: m });
    }
    if x.ncols() != y.ncols() {
        return Err(DivergenceError::DimensionMismatch(x.ncols(), y.ncols()));
    }
    let d = x.ncols() as f64;
    let (rho_sq, nu_sq) = if x.ncols() == 1 {
        nearest_sq_1d(x, y)
    } else {
        x.rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let row = row.to_vec();
                (nearest_sq(&row, x, Some(i)), nearest_sq(&row, y, None))
            })
            .unzip()
    };
    let mut sum = 0.0;
    for (rho, nu) in rho_sq.iter().zip(&nu_sq) {
        let rho = rho.sqrt().max(MIN_DISTANCE);
        let nu = nu.sqrt().max(MIN_DISTANCE);
        sum += (nu / rho).ln();
    }
    Ok(d / n as f64 * sum + (m as f64 / (n as f64 - 1.0)).ln())
}

/// Same squared distances as the scan, found by sorting and bisection.
fn nearest_sq_1d(x: ArrayView2<f64>, y: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    let sq = |a: f64, b: f64| (a - b) * (a - b);
    let xs: Vec<f64> = x.column(0).to_vec();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ys: Vec<f64> = y.column(0).to_vec();
    ys.sort_by(f64::total_cmp);
    let mut rho = vec![f64::INFINITY; xs.len()];
    for (p, &i) in order.iter().enumerate() {
        if p > 0 {
            rho[i] = rho[i].min(sq(xs[i], xs[order[p - 1]]));
        }
        if p + 1 < order.len() {
            rho[i] = rho[i].min(sq(xs[i], xs[order[p + 1]]));
        }
    }
    let nu = xs
        .iter()
        .map(|&q| {
            let pos = ys.partition_point(|v| *v < q);
            let below = pos.checked_sub(1).map_or(f64::INFINITY, |j| sq(q, ys[j]));
            let above = ys.get(pos).map_or(f64::INFINITY, |&v| sq(q, v));
            below.min(above)
        })
        .collect();
    (rho, nu)
}

/// Forward and reverse KL between held-out data and the fantasy particles'
/// visible states, averaged over validation minibatches of size `minibatch`.
///
/// Each validation chunk is paired with the whole population. A ragged final
/// chunk is dropped unless it is the only one.
pub fn monitor(
    validation: ArrayView2<f64>,
    pop: &ParticlePopulation,
    minibatch: usize,
    epoch: usize,
) -> Result<DivergenceReport, DivergenceError> {
    monitor_samples(validation, pop.states.v.view(), minibatch, epoch)
}

/// [`monitor`] on an explicit sample matrix.
pub fn monitor_samples(
    validation: ArrayView2<f64>,
    samples: ArrayView2<f64>,
    minibatch: usize,
    epoch: usize,
) -> Result<DivergenceReport, DivergenceError> {
    let n = validation.nrows();
    if n == 0 {
        return Err(DivergenceError::EmptyValidation);
    }
    let size = minibatch.clamp(1, n);
    let chunks = (n / size).max(1);
    let mut forward = 0.0;
    let mut reverse = 0.0;
    for c in 0..chunks {
        let end = if chunks == 1 { n.max(size) } else { (c + 1) * size };
        let chunk = validation.slice(ndarray::s![c * size..end.min(n), ..]);
        forward += knn_kl_estimate(chunk, samples)?;
        reverse += knn_kl_estimate(samples, chunk)?;
    }
    let report = DivergenceReport {
        epoch,
        forward_kl: forward / chunks as f64,
        reverse_kl: reverse / chunks as f64,
        n_minibatches_averaged: chunks,
    };
    if report.forward_kl.is_finite() && report.reverse_kl.is_finite() {
        Ok(report)
    } else {
        Err(DivergenceError::NonFinite)
    }
}

/// Composite midpoint rule on `[lo, hi]` with `points` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Quadrature {
    /// Symmetric grid `±(half_width + 8·scale)` with 2^14 cells.
    pub fn symmetric(half_width: f64, scale: f64) -> Self {
        let r = half_width + 8.0 * scale;
        Self {
            lo: -r,
            hi: r,
            points: 1 << 14,
        }
    }

    fn validate(&self) -> Result<(), DivergenceError> {
        if self.points == 0 || !(self.hi > self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(DivergenceError::InvalidGrid(format!("{self:?}")));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / self.points as f64
    }

    fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.step();
        (0..self.points).map(move |k| self.lo + (k as f64 + 0.5) * dx)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes().map(f).sum::<f64>() * self.step()
    }
}

fn check_normalized(grid: &Quadrature, density: &impl Fn(f64) -> f64) -> Result<(), DivergenceError> {
    let mass = grid.integrate(density);
    if (mass - 1.0).abs() < 1e-6 {
        Ok(())
    } else {
        Err(DivergenceError::NotNormalized(mass))
    }
}

fn finite(x: f64) -> Result<f64, DivergenceError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(DivergenceError::NonFinite)
    }
}

/// `D_D(p ‖ q) = -∫ q log(2p / (p + q))`, with `q` in the role of the model.
pub fn discriminator_divergence_1d(
    p: impl Fn(f64) -> f64,
    q: impl Fn(f64) -> f64,
    grid: &Quadrature,
) -> Result<f64, DivergenceError> {
    grid.validate()?;
    check_normalized(grid, &p)?;
    check_normalized(grid, &q)?;
    finite(-grid.integrate(|x| {
        let (pv, qv) = (p(x), q(x));
        if qv == 0.0 {
            0.0
        } else {
            qv * (2.0 * pv / (pv + qv)).ln()
        }
    }))
}

/// `D_KL(p ‖ q) = ∫ p log(p / q)`.
pub fn kl_divergence_1d(
    p: impl Fn(f64) -> f64,
    q: impl Fn(f64) -> f64,
    grid: &Quadrature,
) -> Result<f64, DivergenceError> {
    grid.validate()?;
    check_normalized(grid, &p)?;
    check_normalized(grid, &q)?;
    finite(grid.integrate(|x| {
        let (pv, qv) = (p(x), q(x));
        if pv == 0.0 {
            0.0
        } else {
            pv * (pv / qv).ln()
        }
    }))
}

/// Generator of the discriminator divergence as an f-divergence.
pub fn discriminator_f(t: f64) -> f64 {
    ((t + 1.0) / (2.0 * t)).ln()
}

/// Density of `N(mean, std²)`.
pub fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}
