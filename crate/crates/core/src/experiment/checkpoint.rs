//! JSON checkpoints holding the complete trainer state.
//!
//! Floats are written in shortest round-trip decimal form, so save → load is
//! bit-exact. The header (`format`, `version`) is checked before anything else
//! is parsed.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critic::{CriticCache, CriticKind};
use crate::rbm::{GradientBundle, LayerKind, RbmModel, StateBatch};
use crate::rng::RngState;
use crate::tds::{ParticlePopulation, TdsConfig};
use crate::training::{Adam, CriticConfig, TrainConfig, Trainer};

pub const FORMAT: &str = "beam-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("not a checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint format `{format}` version {version} is not supported (expected `{FORMAT}` version {VERSION})")]
    Version { format: String, version: u64 },
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl Matrix {
    fn from_array(a: &Array2<f64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            values: a.iter().copied().collect(),
        }
    }

    fn to_array(&self, what: &str) -> Result<Array2<f64>, CheckpointError> {
        Array2::from_shape_vec((self.rows, self.cols), self.values.clone())
            .map_err(|e| CheckpointError::Inconsistent(format!("{what}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub visible_loc: Vec<f64>,
    pub visible_log_scale: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub weights: Matrix,
}

impl Params {
    fn from_bundle(g: &GradientBundle) -> Self {
        Self {
            visible_loc: g.visible_loc.to_vec(),
            visible_log_scale: g.visible_log_scale.to_vec(),
            hidden_bias: g.hidden_bias.to_vec(),
            weights: Matrix::from_array(&g.weights),
        }
    }

    fn to_bundle(&self, what: &str) -> Result<GradientBundle, CheckpointError> {
        Ok(GradientBundle {
            visible_loc: Array1::from(self.visible_loc.clone()),
            visible_log_scale: Array1::from(self.visible_log_scale.clone()),
            hidden_bias: Array1::from(self.hidden_bias.clone()),
            weights: self.weights.to_array(what)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub visible: LayerKind,
    pub hidden: String,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub params: Params,
}

impl ModelSection {
    pub fn from_model(m: &RbmModel) -> Self {
        Self {
            visible: m.visible_kind,
            hidden: "bernoulli".into(),
            n_visible: m.n_visible(),
            n_hidden: m.n_hidden(),
            params: Params::from_bundle(&GradientBundle {
                visible_loc: m.visible_loc.clone(),
                visible_log_scale: m.visible_log_scale.clone(),
                hidden_bias: m.hidden_bias.clone(),
                weights: m.weights.clone(),
            }),
        }
    }

    pub fn to_model(&self) -> Result<RbmModel, CheckpointError> {
        if self.hidden != "bernoulli" {
            return Err(CheckpointError::Inconsistent(format!("hidden layer kind `{}`", self.hidden)));
        }
        let b = self.params.to_bundle("weights")?;
        let model = RbmModel {
            visible_kind: self.visible,
            visible_loc: b.visible_loc,
            visible_log_scale: b.visible_log_scale,
            hidden_bias: b.hidden_bias,
            weights: b.weights,
        };
        if model.visible_log_scale.len() != self.n_visible
            || model.visible_loc.len() != self.n_visible
            || model.hidden_bias.len() != self.n_hidden
            || model.weights.dim() != (self.n_visible, self.n_hidden)
        {
            return Err(CheckpointError::Inconsistent("model shapes disagree".into()));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub gamma: f64,
    pub lr: f64,
    pub lr_adv: f64,
    pub decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs_ml: usize,
    pub epochs_adv: usize,
    pub batch_size: usize,
    pub monitor_minibatch: usize,
    pub tds_particles: usize,
    pub tds_phi: f64,
    pub tds_var_beta: f64,
    pub tds_steps: usize,
    pub critic_k: usize,
    pub critic_epsilon: f64,
    pub critic_weighted: bool,
}

impl TrainSection {
    pub fn from_config(c: &TrainConfig) -> Self {
        Self {
            gamma: c.gamma,
            lr: c.lr,
            lr_adv: c.lr_adv,
            decay: c.decay,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            adam_eps: c.adam_eps,
            epochs_ml: c.epochs_ml,
            epochs_adv: c.epochs_adv,
            batch_size: c.batch_size,
            monitor_minibatch: c.monitor_minibatch,
            tds_particles: c.tds.particles,
            tds_phi: c.tds.phi,
            tds_var_beta: c.tds.var_beta,
            tds_steps: c.tds.steps_per_grad,
            critic_k: c.critic.k,
            critic_epsilon: c.critic.epsilon,
            critic_weighted: c.critic.kind == CriticKind::DistanceWeighted,
        }
    }

    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma,
            lr: self.lr,
            lr_adv: self.lr_adv,
            decay: self.decay,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            epochs_ml: self.epochs_ml,
            epochs_adv: self.epochs_adv,
            batch_size: self.batch_size,
            monitor_minibatch: self.monitor_minibatch,
            tds: TdsConfig {
                particles: self.tds_particles,
                phi: self.tds_phi,
                var_beta: self.tds_var_beta,
                steps_per_grad: self.tds_steps,
            },
            critic: CriticConfig {
                k: self.critic_k,
                epsilon: self.critic_epsilon,
                kind: if self.critic_weighted {
                    CriticKind::DistanceWeighted
                } else {
                    CriticKind::Nearest
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamSection {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Params,
    pub v: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSection {
    pub v: Matrix,
    pub h: Matrix,
    pub betas: Vec<f64>,
    pub rngs: Vec<RngState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSection {
    pub k: usize,
    pub epsilon: f64,
    pub data: Matrix,
    pub model: Matrix,
}

/// Everything in a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    /// Completed epochs.
    pub epoch: usize,
    pub train: TrainSection,
    pub model: ModelSection,
    pub adam: AdamSection,
    pub population: PopulationSection,
    pub cache: CacheSection,
    pub shuffle_rng: RngState,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer, seed: u64) -> Self {
        let pop = &t.population;
        Self {
            format: FORMAT.into(),
            version: VERSION,
            seed,
            epoch: t.epoch,
            train: TrainSection::from_config(&t.config),
            model: ModelSection::from_model(&t.model),
            adam: AdamSection {
                beta1: t.adam.beta1,
                beta2: t.adam.beta2,
                eps: t.adam.eps,
                step: t.adam.step,
                m: Params::from_bundle(&t.adam.m),
                v: Params::from_bundle(&t.adam.v),
            },
            population: PopulationSection {
                v: Matrix::from_array(&pop.states.v),
                h: Matrix::from_array(&pop.states.h),
                betas: pop.betas.clone(),
                rngs: pop.rngs().iter().map(RngState::capture).collect(),
            },
            cache: CacheSection {
                k: t.cache.k(),
                epsilon: t.cache.epsilon(),
                data: Matrix::from_array(&t.cache.data_points().to_owned()),
                model: Matrix::from_array(&t.cache.model_points().to_owned()),
            },
            shuffle_rng: RngState::capture(&t.shuffle_rng),
        }
    }

    /// Rebuilds the trainer. `config` replaces the stored training config when
    /// given (e.g. to extend the epoch budget); shapes must still agree.
    pub fn to_trainer(&self, config: Option<TrainConfig>) -> Result<Trainer, CheckpointError> {
        let inconsistent = |e: String| CheckpointError::Inconsistent(e);
        let config = config.unwrap_or_else(|| self.train.to_config());
        config.validate().map_err(|e| inconsistent(e.to_string()))?;
        let model = self.model.to_model()?;
        let adam = Adam {
            beta1: self.adam.beta1,
            beta2: self.adam.beta2,
            eps: self.adam.eps,
            step: self.adam.step,
            m: self.adam.m.to_bundle("adam.m")?,
            v: self.adam.v.to_bundle("adam.v")?,
        };
        if !adam.m.shape_matches(&model) || !adam.v.shape_matches(&model) {
            return Err(inconsistent("adam moments do not match the model".into()));
        }
        let rngs = self
            .population
            .rngs
            .iter()
            .map(RngState::restore)
            .collect::<Result<Vec<_>, _>>()
            .map_err(inconsistent)?;
        let states = StateBatch::new(
            self.population.v.to_array("population.v")?,
            self.population.h.to_array("population.h")?,
        );
        if states.v.ncols() != model.n_visible() || states.h.ncols() != model.n_hidden() || states.h.nrows() != states.v.nrows() {
            return Err(inconsistent("particle shapes do not match the model".into()));
        }
        if states.len() != config.tds.particles {
            return Err(inconsistent(format!(
                "checkpoint holds {} particles, config asks for {}",
                states.len(),
                config.tds.particles
            )));
        }
        let population =
            ParticlePopulation::from_parts(states, self.population.betas.clone(), rngs).map_err(|e| inconsistent(e.to_string()))?;
        let mut cache = CriticCache::new(self.cache.k, self.cache.epsilon).map_err(|e| inconsistent(e.to_string()))?;
        if self.cache.data.rows > 0 {
            cache
                .update(self.cache.data.to_array("cache.data")?, self.cache.model.to_array("cache.model")?)
                .map_err(|e| inconsistent(e.to_string()))?;
        }
        Ok(Trainer {
            config,
            model,
            adam,
            population,
            cache,
            shuffle_rng: self.shuffle_rng.restore().map_err(inconsistent)?,
            epoch: self.epoch,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    /// Parses checkpoint text, refusing other formats and versions.
    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let format = value.get("format").and_then(|f| f.as_str()).unwrap_or("").to_string();
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if format != FORMAT || version != u64::from(VERSION) {
            return Err(CheckpointError::Version { format, version });
        }
        serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}
