//! Temperature-driven sampling.
//!
//! Each fantasy particle carries its own inverse temperature `β`, which
//! follows an autoregressive Gamma process with stationary mean 1, variance
//! `var_beta` and lag-1 autocorrelation `phi`. Every update round first moves
//! `β` and then performs one block-Gibbs sweep at that `β`. All particles are
//! used as model samples.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use thiserror::Error;

use crate::rbm::{LayerKind, RbmModel, StateBatch};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TdsError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("population has {particles} particles but the model expects {expected} visible units, state has {got}")]
    ShapeMismatch {
        particles: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdsConfig {
    /// Number of persistent particles `m`.
    pub particles: usize,
    /// Autocorrelation of the inverse temperature, `0 ≤ phi < 1`.
    pub phi: f64,
    /// Stationary variance of the inverse temperature, `0 ≤ var_beta < 1`.
    /// Zero disables the temperature process (plain Gibbs at `β = 1`).
    pub var_beta: f64,
    /// Update rounds per gradient evaluation.
    pub steps_per_grad: usize,
}

impl TdsConfig {
    pub fn validate(&self) -> Result<(), TdsError> {
        if self.particles == 0 {
            return Err(TdsError::InvalidConfig("particle count must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.phi) {
            return Err(TdsError::InvalidConfig(format!("phi must lie in [0, 1), got {}", self.phi)));
        }
        if !(0.0..1.0).contains(&self.var_beta) {
            return Err(TdsError::InvalidConfig(format!(
                "var_beta must lie in [0, 1), got {}",
                self.var_beta
            )));
        }
        if self.steps_per_grad == 0 {
            return Err(TdsError::InvalidConfig("steps_per_grad must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_driven(&self) -> bool {
        self.var_beta > 0.0
    }
}

/// One step of the autoregressive Gamma process.
///
/// With `ν = 1/var_beta` and `c = (1 - phi)·var_beta`, draws
/// `z ~ Poisson(β·phi/c)` and returns a draw from `Gamma(shape = ν + z, scale = c)`.
/// Then `E[β' | β] = (1 - phi) + phi·β`.
pub fn gamma_step<R: Rng + ?Sized>(
    beta: f64,
    phi: f64,
    var_beta: f64,
    rng: &mut R,
) -> Result<f64, TdsError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(TdsError::InvalidBeta(beta));
    }
    if !(0.0..1.0).contains(&phi) || !(var_beta > 0.0 && var_beta < 1.0) {
        return Err(TdsError::InvalidConfig(format!(
            "gamma_step needs 0 <= phi < 1 and 0 < var_beta < 1, got phi={phi}, var_beta={var_beta}"
        )));
    }
    let shape = 1.0 / var_beta;
    let scale = (1.0 - phi) * var_beta;
    let rate = beta * phi / scale;
    let z = if rate > 0.0 {
        Poisson::new(rate)
            .map_err(|e| TdsError::InvalidConfig(format!("poisson rate {rate}: {e}")))?
            .sample(rng)
    } else {
        0.0
    };
    let gamma = Gamma::new(shape + z, scale)
        .map_err(|e| TdsError::InvalidConfig(format!("gamma({}, {scale}): {e}", shape + z)))?;
    Ok(gamma.sample(rng).max(f64::MIN_POSITIVE))
}

fn stationary_draw<R: Rng + ?Sized>(var_beta: f64, rng: &mut R) -> f64 {
    Gamma::new(1.0 / var_beta, var_beta)
        .expect("validated var_beta")
        .sample(rng)
        .max(f64::MIN_POSITIVE)
}

/// Persistent fantasy particles with per-particle inverse temperatures and
/// random streams.
#[derive(Debug, Clone)]
pub struct ParticlePopulation {
    pub states: StateBatch,
    pub betas: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
}

impl ParticlePopulation {
    /// Random initial states and stationary inverse temperatures.
    ///
    /// Particle `i` draws from stream `first_stream + i` of `seed`. Bernoulli
    /// units start as fair coins, Gaussian units as `N(loc_i, 1)`.
    pub fn init(
        model: &RbmModel,
        cfg: &TdsConfig,
        seed: u64,
        first_stream: u64,
    ) -> Result<Self, TdsError> {
        cfg.validate()?;
        let m = cfg.particles;
        let nv = model.n_visible();
        let nh = model.n_hidden();
        let mut v = Array2::zeros((m, nv));
        let mut h = Array2::zeros((m, nh));
        let mut betas = Vec::with_capacity(m);
        let mut rngs = Vec::with_capacity(m);
        for p in 0..m {
            let mut r = rng::stream(seed, first_stream + p as u64);
            for i in 0..nv {
                v[[p, i]] = match model.visible_kind {
                    LayerKind::Bernoulli => f64::from(u8::from(r.random::<bool>())),
                    LayerKind::Gaussian => {
                        let z: f64 = StandardNormal.sample(&mut r);
                        model.visible_loc[i] + z
                    }
                };
            }
            for mu in 0..nh {
                h[[p, mu]] = f64::from(u8::from(r.random::<bool>()));
            }
            betas.push(if cfg.is_driven() {
                stationary_draw(cfg.var_beta, &mut r)
            } else {
                1.0
            });
            rngs.push(r);
        }
        Ok(Self {
            states: StateBatch::new(v, h),
            betas,
            rngs,
        })
    }

    /// Rebuilds a population from saved parts.
    pub fn from_parts(
        states: StateBatch,
        betas: Vec<f64>,
        rngs: Vec<ChaCha8Rng>,
    ) -> Result<Self, TdsError> {
        let n = states.len();
        if betas.len() != n || rngs.len() != n {
            return Err(TdsError::InvalidConfig(format!(
                "population parts disagree: {n} states, {} betas, {} rngs",
                betas.len(),
                rngs.len()
            )));
        }
        if let Some(&b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(TdsError::InvalidBeta(b));
        }
        Ok(Self { states, betas, rngs })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn rngs(&self) -> &[ChaCha8Rng] {
        &self.rngs
    }

    pub fn mean_beta(&self) -> f64 {
        self.betas.iter().sum::<f64>() / self.len().max(1) as f64
    }

    /// `k` rounds of (temperature update, Gibbs sweep) for every particle.
    ///
    /// With `var_beta = 0` the temperature draw is skipped and every sweep runs
    /// at `β = 1`, i.e. plain persistent Gibbs sampling.
    pub fn advance(&mut self, model: &RbmModel, cfg: &TdsConfig, k: usize) -> Result<(), TdsError> {
        if self.states.v.ncols() != model.n_visible() || self.states.h.ncols() != model.n_hidden() {
            return Err(TdsError::ShapeMismatch {
                particles: self.len(),
                expected: model.n_visible(),
                got: self.states.v.ncols(),
            });
        }
        let driven = cfg.is_driven();
        let mut kernel = model.kernel();
        let mut v = vec![0.0; model.n_visible()];
        let mut h = vec![0.0; model.n_hidden()];
        for p in 0..self.len() {
            v.iter_mut().zip(self.states.v.row(p)).for_each(|(d, s)| *d = *s);
            h.iter_mut().zip(self.states.h.row(p)).for_each(|(d, s)| *d = *s);
            let rng = &mut self.rngs[p];
            let mut beta = self.betas[p];
            for _ in 0..k {
                if driven {
                    beta = gamma_step(beta, cfg.phi, cfg.var_beta, rng)?;
                }
                kernel.gibbs_step(&mut v, &mut h, beta, rng);
            }
            self.betas[p] = beta;
            self.states.v.row_mut(p).iter_mut().zip(&v).for_each(|(d, s)| *d = *s);
            self.states.h.row_mut(p).iter_mut().zip(&h).for_each(|(d, s)| *d = *s);
        }
        Ok(())
    }
}
