//! Gradients of the compound objective, Adam, and the two-phase training loop.
//!
//! The objective minimised is `C = -γ·L - (1-γ)·A`, where `L` is the average
//! log-likelihood and `A = E_model[T]` the expected critic value of fantasy
//! particles. Writing `g = -∂E/∂θ`,
//!
//! ```text
//! ∇L = E_data[g] - E_model[g]        ∇A = Cov_model(T, g)
//! ```
//!
//! Training runs `epochs_ml` epochs at `γ = 1` followed by `epochs_adv` epochs
//! at the configured `γ`. Adam moments are reset at the boundary and the
//! learning-rate schedule restarts from `lr_adv`.

use ndarray::{Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::critic::{CriticCache, CriticError, CriticKind, Side};
use crate::datasets::{Dataset, DatasetError};
use crate::divergences::{self, DivergenceError, DivergenceReport};
use crate::rbm::{GradientBundle, RbmError, RbmModel, StateBatch};
use crate::rng;
use crate::tds::{ParticlePopulation, TdsConfig, TdsError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Rbm(#[from] RbmError),
    #[error(transparent)]
    Tds(#[from] TdsError),
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("{values} critic values for {particles} particles")]
    CriticLength { values: usize, particles: usize },
    #[error("the covariance needs at least 2 particles, got {0}")]
    TooFewParticles(usize),
    #[error("gradient is not finite")]
    NonFiniteGradient,
    #[error("gamma must lie in [0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("non-finite parameters after epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
}

/// Mean of `g` over `data` with hidden units at their conditional means.
pub fn data_expectation(model: &RbmModel, data: ArrayView2<f64>) -> Result<GradientBundle, TrainError> {
    let act = model.hidden_mean_activations(data)?;
    Ok(data_expectation_with(model, data, act.view()))
}

fn data_expectation_with(model: &RbmModel, data: ArrayView2<f64>, act: ArrayView2<f64>) -> GradientBundle {
    let inv_var = model.inv_variance().to_vec();
    let mut out = GradientBundle::zeros_like(model);
    let coef = 1.0 / data.nrows() as f64;
    for (v, h) in data.rows().into_iter().zip(act.rows()) {
        model.accumulate_neg_energy_grad(&inv_var, &v.to_vec(), &h.to_vec(), coef, &mut out);
    }
    out
}

fn check_fantasy(model: &RbmModel, fantasy: &StateBatch) -> Result<(), TrainError> {
    if fantasy.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    for (what, expected, got) in [
        ("fantasy visible state", model.n_visible(), fantasy.v.ncols()),
        ("fantasy hidden state", model.n_hidden(), fantasy.h.ncols()),
    ] {
        if expected != got {
            return Err(RbmError::DimensionMismatch { what, expected, got }.into());
        }
    }
    Ok(())
}

fn check_weights(weights: &[f64], n: usize) -> Result<(), TrainError> {
    if weights.len() != n {
        return Err(TrainError::CriticLength {
            values: weights.len(),
            particles: n,
        });
    }
    Ok(())
}

/// `Σ_p w_p g(v_p, h_p)`, with `w_p = 1/m` when `weights` is `None`.
pub fn model_expectation(
    model: &RbmModel,
    fantasy: &StateBatch,
    weights: Option<&[f64]>,
) -> Result<GradientBundle, TrainError> {
    check_fantasy(model, fantasy)?;
    let m = fantasy.len();
    if let Some(w) = weights {
        check_weights(w, m)?;
    }
    let inv_var = model.inv_variance().to_vec();
    let mut out = GradientBundle::zeros_like(model);
    for p in 0..m {
        let coef = weights.map_or(1.0 / m as f64, |w| w[p]);
        model.accumulate_neg_energy_grad(
            &inv_var,
            &fantasy.v.row(p).to_vec(),
            &fantasy.h.row(p).to_vec(),
            coef,
            &mut out,
        );
    }
    Ok(out)
}

/// `∇L ≈ E_data[g] - E_model[g]`.
pub fn ml_gradient(
    model: &RbmModel,
    data: ArrayView2<f64>,
    fantasy: &StateBatch,
) -> Result<GradientBundle, TrainError> {
    if data.nrows() == 0 {
        return Err(TrainError::EmptyBatch);
    }
    let mut g = data_expectation(model, data)?;
    g.add_scaled(&model_expectation(model, fantasy, None)?, -1.0);
    Ok(g)
}

/// `∇A ≈ Cov(T, g)` over the fantasy particles, normalised by `1/m`.
pub fn adversarial_gradient(
    model: &RbmModel,
    fantasy: &StateBatch,
    critic: &[f64],
) -> Result<GradientBundle, TrainError> {
    let m = fantasy.len();
    let w = vec![1.0 / m.max(1) as f64; m];
    adversarial_gradient_weighted(model, fantasy, critic, &w)
}

/// `Σ_p w_p (T_p - T̄) g_p` with `T̄ = Σ_p w_p T_p`; weights should sum to one.
pub fn adversarial_gradient_weighted(
    model: &RbmModel,
    fantasy: &StateBatch,
    critic: &[f64],
    weights: &[f64],
) -> Result<GradientBundle, TrainError> {
    check_fantasy(model, fantasy)?;
    if fantasy.len() < 2 {
        return Err(TrainError::TooFewParticles(fantasy.len()));
    }
    check_weights(critic, fantasy.len())?;
    check_weights(weights, fantasy.len())?;
    let mean: f64 = critic.iter().zip(weights).map(|(t, w)| t * w).sum();
    let centred: Vec<f64> = critic.iter().zip(weights).map(|(t, w)| w * (t - mean)).collect();
    model_expectation(model, fantasy, Some(&centred))
}

/// `∇C = -γ·∇L - (1-γ)·∇A`. `critic` may be `None` only when `γ = 1`.
pub fn compound_gradient(
    model: &RbmModel,
    data: ArrayView2<f64>,
    fantasy: &StateBatch,
    critic: Option<&[f64]>,
    gamma: f64,
) -> Result<GradientBundle, TrainError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(TrainError::InvalidGamma(gamma));
    }
    let mut g = ml_gradient(model, data, fantasy)?.scaled(-gamma);
    if gamma < 1.0 {
        let t = critic.ok_or(TrainError::CriticLength {
            values: 0,
            particles: fantasy.len(),
        })?;
        g.add_scaled(&adversarial_gradient(model, fantasy, t)?, -(1.0 - gamma));
    }
    Ok(g)
}

/// `lr0 / (1 + decay·epoch)`.
pub fn lr_schedule(lr0: f64, decay: f64, epoch: usize) -> f64 {
    lr0 / (1.0 + decay * epoch as f64)
}

/// Adam with bias correction, minimising.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: GradientBundle,
    pub v: GradientBundle,
}

impl Adam {
    pub fn new(model: &RbmModel, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: GradientBundle::zeros_like(model),
            v: GradientBundle::zeros_like(model),
        }
    }

    pub fn reset(&mut self) {
        self.step = 0;
        self.m.for_each_mut(|x| *x = 0.0);
        self.v.for_each_mut(|x| *x = 0.0);
    }

    /// `θ ← θ - lr · m̂ / (√v̂ + eps)`.
    pub fn update(&mut self, model: &mut RbmModel, grad: &GradientBundle, lr: f64) -> Result<(), TrainError> {
        if !grad.shape_matches(model) || !self.m.shape_matches(model) {
            return Err(RbmError::DimensionMismatch {
                what: "gradient",
                expected: model.n_visible(),
                got: grad.visible_loc.len(),
            }
            .into());
        }
        if !grad.is_finite() {
            return Err(TrainError::NonFiniteGradient);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let apply = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for k in 0..theta.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                theta[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        };
        apply(
            model.visible_loc.as_slice_mut().expect("contiguous"),
            grad.visible_loc.as_slice().expect("contiguous"),
            self.m.visible_loc.as_slice_mut().expect("contiguous"),
            self.v.visible_loc.as_slice_mut().expect("contiguous"),
        );
        if model.visible_kind == crate::rbm::LayerKind::Gaussian {
            apply(
                model.visible_log_scale.as_slice_mut().expect("contiguous"),
                grad.visible_log_scale.as_slice().expect("contiguous"),
                self.m.visible_log_scale.as_slice_mut().expect("contiguous"),
                self.v.visible_log_scale.as_slice_mut().expect("contiguous"),
            );
        }
        apply(
            model.hidden_bias.as_slice_mut().expect("contiguous"),
            grad.hidden_bias.as_slice().expect("contiguous"),
            self.m.hidden_bias.as_slice_mut().expect("contiguous"),
            self.v.hidden_bias.as_slice_mut().expect("contiguous"),
        );
        apply(
            model.weights.as_slice_mut().expect("contiguous"),
            grad.weights.as_slice().expect("contiguous"),
            self.m.weights.as_slice_mut().expect("contiguous"),
            self.v.weights.as_slice_mut().expect("contiguous"),
        );
        Ok(())
    }
}

/// Critic settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticConfig {
    pub k: usize,
    pub epsilon: f64,
    pub kind: CriticKind,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            k: 5,
            epsilon: 1e-3,
            kind: CriticKind::Nearest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Likelihood weight in the adversarial phase.
    pub gamma: f64,
    pub lr: f64,
    /// Initial learning rate of the adversarial phase.
    pub lr_adv: f64,
    pub decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs_ml: usize,
    pub epochs_adv: usize,
    pub batch_size: usize,
    /// Validation rows per KL estimate.
    pub monitor_minibatch: usize,
    pub tds: TdsConfig,
    pub critic: CriticConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(TrainError::InvalidGamma(self.gamma));
        }
        for (name, x) in [("lr", self.lr), ("lr_adv", self.lr_adv)] {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("{name} must be positive, got {x}"));
            }
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return bad(format!("decay must be non-negative, got {}", self.decay));
        }
        for (name, x) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&x) {
                return bad(format!("{name} must lie in [0, 1), got {x}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.monitor_minibatch == 0 {
            return bad("monitor minibatch must be at least 1".into());
        }
        self.tds.validate()?;
        if self.tds.particles < 2 {
            return bad("at least two particles are needed for monitoring".into());
        }
        if self.uses_critic() {
            let c = &self.critic;
            if c.k == 0 || c.k > self.batch_size + self.tds.particles - 1 {
                return bad(format!(
                    "critic k = {} must lie in [1, {}]",
                    c.k,
                    self.batch_size + self.tds.particles - 1
                ));
            }
            if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
                return bad(format!("critic epsilon must be positive, got {}", c.epsilon));
            }
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs_ml + self.epochs_adv
    }

    /// Whether any epoch uses the critic.
    pub fn uses_critic(&self) -> bool {
        self.epochs_adv > 0 && self.gamma < 1.0
    }

    /// Phase of the 0-based `epoch`.
    pub fn phase(&self, epoch: usize) -> Phase {
        if epoch < self.epochs_ml {
            Phase::MaximumLikelihood
        } else {
            Phase::Adversarial
        }
    }

    pub fn gamma_at(&self, epoch: usize) -> f64 {
        match self.phase(epoch) {
            Phase::MaximumLikelihood => 1.0,
            Phase::Adversarial => self.gamma,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.phase(epoch) {
            Phase::MaximumLikelihood => lr_schedule(self.lr, self.decay, epoch),
            Phase::Adversarial => lr_schedule(self.lr_adv, self.decay, epoch - self.epochs_ml),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    MaximumLikelihood,
    Adversarial,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Self::MaximumLikelihood => "ml",
            Self::Adversarial => "adv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ml" => Some(Self::MaximumLikelihood),
            "adv" => Some(Self::Adversarial),
            _ => None,
        }
    }
}

/// Summary of one finished epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub phase: Phase,
    pub divergence: DivergenceReport,
    pub mean_beta: f64,
    pub learning_rate: f64,
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: RbmModel,
    pub adam: Adam,
    pub population: ParticlePopulation,
    pub cache: CriticCache,
    pub shuffle_rng: ChaCha8Rng,
    /// Completed epochs.
    pub epoch: usize,
}

impl Trainer {
    /// Fresh state: particles from `seed`, minibatch order from its shuffle stream.
    pub fn new(model: RbmModel, config: TrainConfig, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let population = ParticlePopulation::init(&model, &config.tds, seed, rng::STREAM_PARTICLES)?;
        let adam = Adam::new(&model, config.adam_beta1, config.adam_beta2, config.adam_eps);
        let cache = CriticCache::new(config.critic.k.max(1), config.critic.epsilon)?;
        Ok(Self {
            config,
            model,
            adam,
            population,
            cache,
            shuffle_rng: rng::stream(seed, rng::STREAM_SHUFFLE),
            epoch: 0,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.total_epochs()
    }

    /// Critic values for the fantasy particles. Before the first update the
    /// cache is seeded from the current batch, with each particle excluded
    /// from its own neighborhood.
    fn critic_values(&self, data_act: &Array2<f64>, model_act: &Array2<f64>) -> Result<Vec<f64>, TrainError> {
        let kind = self.config.critic.kind;
        if self.cache.is_populated() {
            return Ok(self.cache.evaluate_rows(kind, model_act.view())?);
        }
        let mut seed = self.cache.clone();
        seed.update(data_act.clone(), model_act.clone())?;
        Ok(model_act
            .rows()
            .into_iter()
            .enumerate()
            .map(|(p, row)| seed.evaluate(kind, row, Some((Side::Model, p))))
            .collect::<Result<_, _>>()?)
    }

    /// One gradient step on `batch`.
    pub fn train_step(&mut self, batch: ArrayView2<f64>, gamma: f64, lr: f64) -> Result<(), TrainError> {
        if batch.nrows() == 0 {
            return Err(TrainError::EmptyBatch);
        }
        self.population.advance(&self.model, &self.config.tds, self.config.tds.steps_per_grad)?;
        let data_act = self.model.hidden_mean_activations(batch)?;
        let fantasy = &self.population.states;
        let mut grad = data_expectation_with(&self.model, batch, data_act.view()).scaled(-gamma);
        grad.add_scaled(&model_expectation(&self.model, fantasy, None)?, gamma);
        let model_act = if self.config.uses_critic() {
            Some(self.model.hidden_mean_activations(fantasy.v.view())?)
        } else {
            None
        };
        if gamma < 1.0 {
            let model_act = model_act.as_ref().expect("critic enabled");
            let t = self.critic_values(&data_act, model_act)?;
            grad.add_scaled(&adversarial_gradient(&self.model, fantasy, &t)?, -(1.0 - gamma));
        }
        self.adam.update(&mut self.model, &grad, lr)?;
        if let Some(model_act) = model_act {
            self.cache.update(data_act, model_act)?;
        }
        Ok(())
    }

    /// Runs the next epoch and reports divergences on the validation split.
    pub fn run_epoch(&mut self, data: &Dataset) -> Result<EpochReport, TrainError> {
        let cfg = self.config;
        let e = self.epoch;
        if e >= cfg.total_epochs() {
            return Err(TrainError::InvalidConfig(format!("all {} epochs already ran", cfg.total_epochs())));
        }
        if data.dim() != self.model.n_visible() {
            return Err(RbmError::DimensionMismatch {
                what: "dataset",
                expected: self.model.n_visible(),
                got: data.dim(),
            }
            .into());
        }
        if e == cfg.epochs_ml && e > 0 {
            self.adam.reset();
        }
        let gamma = cfg.gamma_at(e);
        let lr = cfg.lr_at(e);
        let batches = data.minibatches(cfg.batch_size, &mut self.shuffle_rng)?;
        for (b, idx) in batches.iter().enumerate() {
            let batch = data.select(idx);
            match self.train_step(batch.view(), gamma, lr) {
                Err(TrainError::NonFiniteGradient) => return Err(TrainError::NonFinite { epoch: e + 1, batch: b }),
                other => other?,
            }
            if !self.model.is_finite() {
                return Err(TrainError::NonFinite { epoch: e + 1, batch: b });
            }
        }
        self.epoch += 1;
        let validation = data.validation_rows();
        let divergence = divergences::monitor(validation.view(), &self.population, cfg.monitor_minibatch, self.epoch)?;
        Ok(EpochReport {
            epoch: self.epoch,
            phase: cfg.phase(e),
            divergence,
            mean_beta: self.population.mean_beta(),
            learning_rate: lr,
        })
    }
}

/// Trains from scratch, calling `on_epoch` after every epoch.
pub fn train(
    model: RbmModel,
    data: &Dataset,
    config: TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochReport, &Trainer),
) -> Result<Trainer, TrainError> {
    let mut t = Trainer::new(model, config, seed)?;
    while !t.is_finished() {
        let r = t.run_epoch(data)?;
        on_epoch(&r, &t);
    }
    Ok(t)
}
