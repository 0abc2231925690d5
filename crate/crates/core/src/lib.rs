//! Restricted Boltzmann machines trained against a nearest-neighbor adversary
//! acting on the hidden layer (BEAM).
//!
//! The crate is organised bottom-up:
//!
//! - [`rbm`]: energy, conditionals, block Gibbs sampling and energy derivatives
//!   for Bernoulli/Gaussian visible layers with a Bernoulli hidden layer.
//! - [`tds`]: temperature-driven sampling, a population of persistent fantasy
//!   particles whose inverse temperatures follow an autoregressive Gamma process.
//! - [`critic`]: k-nearest-neighbor critics on hidden activations.
//! - [`training`]: likelihood and adversarial gradients, Adam, and the two-phase
//!   training loop.
//! - [`divergences`]: k-NN KL estimators used for monitoring, plus quadrature
//!   divergences for 1-D analytic densities.
//! - [`datasets`]: Gaussian mixture benchmarks, MNIST IDX ingestion, splitting and
//!   minibatching.
//! - [`experiment`]: config files, checkpoints, CSV outputs and the `run` /
//!   `resume` / `eval` / `validate` entry points used by the CLI.

pub mod critic;
pub mod datasets;
pub mod divergences;
pub mod experiment;
pub mod rbm;
pub mod rng;
pub mod tds;
pub mod training;

pub use critic::{CriticCache, CriticKind};
pub use datasets::{Dataset, DatasetKind, MogSpec};
pub use divergences::DivergenceReport;
pub use rbm::{GradientBundle, LayerKind, RbmModel, State, StateBatch};
pub use tds::{ParticlePopulation, TdsConfig};
pub use training::{Adam, TrainConfig, Trainer};
