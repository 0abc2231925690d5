//! Flat `key = value` experiment configs.
//!
//! ```text
//! # comment
//! seed = 7
//! dataset.kind = mog_bimodal
//! model.hidden = 10
//! ```
//!
//! Keys are dotted, unknown or repeated keys are errors, and every error names
//! the key it concerns.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::critic::CriticKind;
use crate::datasets::{DatasetKind, MogMode, MogSpec};
use crate::rbm::LayerKind;
use crate::tds::TdsConfig;
use crate::training::{CriticConfig, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` is given more than once")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "output.dir",
    "output.sample_every",
    "output.checkpoint_every",
    "dataset.kind",
    "dataset.samples",
    "dataset.path",
    "dataset.variant",
    "dataset.means",
    "dataset.std",
    "dataset.weights",
    "dataset.limit",
    "dataset.validation_fraction",
    "model.visible",
    "model.hidden",
    "model.weight_init_std",
    "model.min_std",
    "tds.phi",
    "tds.beta_std",
    "tds.var_beta",
    "tds.steps",
    "tds.particles",
    "train.gamma",
    "train.lr",
    "train.lr_adv",
    "train.decay",
    "train.adam_beta1",
    "train.adam_beta2",
    "train.adam_eps",
    "train.epochs_ml",
    "train.epochs_adv",
    "train.batch_size",
    "critic.k",
    "critic.epsilon",
    "critic.weighted",
    "monitor.minibatch",
];

/// Where training rows come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// Builtin (`mog_bimodal`, `mog_ring`, `mog_grid`) or custom (`mog`)
    /// mixture with this many draws.
    Mog { spec: MogSpec, samples: usize },
    /// IDX image file, resolved against the config's directory.
    Mnist { path: PathBuf, variant: DatasetKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub limit: Option<usize>,
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub visible: LayerKind,
    pub hidden: usize,
    pub weight_init_std: f64,
    /// Floor on the fitted Gaussian scales.
    pub min_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// As written; relative paths are resolved by the runner.
    pub output_dir: PathBuf,
    pub sample_every: usize,
    pub checkpoint_every: usize,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// The parsed key/value pairs, echoed into run manifests.
    pub entries: BTreeMap<String, String>,
}

/// Splits config text into key/value pairs.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: n + 1,
                text: raw.trim().to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                text: raw.trim().to_string(),
            });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(k.to_string()));
        }
    }
    Ok(out)
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|s| s.parse::<T>().map_err(|e| ConfigError::invalid(key, format!("`{s}`: {e}"))))
            .transpose()
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        let x = match default {
            Some(d) => self.or(key, d)?,
            None => self.required(key)?,
        };
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(ConfigError::invalid(key, format!("must be positive, got {x}")))
        }
    }

    fn at_least_one(&self, key: &str, default: Option<usize>) -> Result<usize, ConfigError> {
        let x = match default {
            Some(d) => self.or(key, d)?,
            None => self.required(key)?,
        };
        if x >= 1 {
            Ok(x)
        } else {
            Err(ConfigError::invalid(key, "must be at least 1"))
        }
    }

    fn unit_interval(&self, key: &str, default: f64, closed: bool) -> Result<f64, ConfigError> {
        let x: f64 = self.or(key, default)?;
        let ok = if closed { (0.0..=1.0).contains(&x) } else { (0.0..1.0).contains(&x) };
        if ok {
            Ok(x)
        } else {
            let hi = if closed { "]" } else { ")" };
            Err(ConfigError::invalid(key, format!("must lie in [0, 1{hi}, got {x}")))
        }
    }
}

fn numbers(key: &str, text: &str, sep: char) -> Result<Vec<f64>, ConfigError> {
    text.split(sep)
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| ConfigError::invalid(key, format!("`{}`: {e}", t.trim())))
        })
        .collect()
}

/// `dataset.means = x, y; x, y`, a shared `dataset.std` and optional
/// `dataset.weights` (equal by default).
fn custom_mixture(r: &Reader) -> Result<MogSpec, ConfigError> {
    let means: String = r.required("dataset.means")?;
    let std = r.positive("dataset.std", None)?;
    let modes: Vec<MogMode> = means
        .split(';')
        .map(|m| numbers("dataset.means", m, ',').map(|mean| MogMode { mean, std }))
        .collect::<Result<_, _>>()?;
    let weights = match r.raw("dataset.weights") {
        Some(w) => numbers("dataset.weights", w, ',')?,
        None => vec![1.0 / modes.len() as f64; modes.len()],
    };
    MogSpec::new(modes, weights).map_err(|e| ConfigError::invalid("dataset.means", e.to_string()))
}

impl ExperimentConfig {
    /// Reads and validates a config file. `dataset.path` is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let default_dir = PathBuf::from("runs").join(path.file_stem().unwrap_or_default());
        Self::parse(&text, &base, &default_dir)
    }

    pub fn parse(text: &str, base_dir: &Path, default_output: &Path) -> Result<Self, ConfigError> {
        let entries = parse_entries(text)?;
        let r = Reader { entries: &entries };

        let seed: u64 = r.required("seed")?;
        let output_dir = r.raw("output.dir").map_or_else(|| default_output.to_path_buf(), PathBuf::from);
        let sample_every = r.or("output.sample_every", 0usize)?;
        let checkpoint_every = r.or("output.checkpoint_every", 0usize)?;

        let kind: String = r.required("dataset.kind")?;
        let source = match kind.as_str() {
            "mog_bimodal" | "mog_ring" | "mog_grid" | "mog" => {
                let mut unused = vec!["dataset.path", "dataset.variant"];
                let spec = match MogSpec::builtin(&kind) {
                    Some(spec) => {
                        unused.extend(["dataset.means", "dataset.std", "dataset.weights"]);
                        spec
                    }
                    None => custom_mixture(&r)?,
                };
                if let Some(k) = unused.into_iter().find(|k| r.raw(k).is_some()) {
                    return Err(ConfigError::invalid(k, format!("not used by dataset.kind = {kind}")));
                }
                DatasetSource::Mog {
                    spec,
                    samples: r.at_least_one("dataset.samples", None)?,
                }
            }
            "mnist" => {
                let unused = ["dataset.samples", "dataset.means", "dataset.std", "dataset.weights"];
                if let Some(k) = unused.into_iter().find(|k| r.raw(k).is_some()) {
                    return Err(ConfigError::invalid(k, "not used by dataset.kind = mnist"));
                }
                let rel: String = r.required("dataset.path")?;
                let path = base_dir.join(&rel);
                if !path.is_file() {
                    return Err(ConfigError::invalid(
                        "dataset.path",
                        format!("{} does not exist", path.display()),
                    ));
                }
                let v: String = r.required("dataset.variant")?;
                let variant = DatasetKind::parse(&v)
                    .ok_or_else(|| ConfigError::invalid("dataset.variant", format!("expected continuous or binary, got `{v}`")))?;
                DatasetSource::Mnist { path, variant }
            }
            other => {
                return Err(ConfigError::invalid(
                    "dataset.kind",
                    format!("expected mog_bimodal, mog_ring, mog_grid, mog or mnist, got `{other}`"),
                ))
            }
        };
        let limit = r.get::<usize>("dataset.limit")?;
        if limit == Some(0) {
            return Err(ConfigError::invalid("dataset.limit", "must be at least 1"));
        }
        let validation_fraction: f64 = r.or("dataset.validation_fraction", 0.1)?;
        if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
            return Err(ConfigError::invalid(
                "dataset.validation_fraction",
                format!("must lie in (0, 1), got {validation_fraction}"),
            ));
        }

        let default_visible = match &source {
            DatasetSource::Mnist {
                variant: DatasetKind::Binary,
                ..
            } => LayerKind::Bernoulli,
            _ => LayerKind::Gaussian,
        };
        let visible = match r.raw("model.visible") {
            None => default_visible,
            Some(s) => LayerKind::parse(s)
                .ok_or_else(|| ConfigError::invalid("model.visible", format!("expected gaussian or bernoulli, got `{s}`")))?,
        };
        if visible == LayerKind::Bernoulli && !matches!(source, DatasetSource::Mnist { variant: DatasetKind::Binary, .. }) {
            return Err(ConfigError::invalid("model.visible", "bernoulli visible units need binary data"));
        }
        let model = ModelConfig {
            visible,
            hidden: r.at_least_one("model.hidden", None)?,
            weight_init_std: {
                let x: f64 = r.or("model.weight_init_std", 0.01)?;
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(ConfigError::invalid("model.weight_init_std", "must be non-negative"));
                }
                x
            },
            min_std: r.positive("model.min_std", Some(0.1))?,
        };

        let batch_size = r.at_least_one("train.batch_size", None)?;
        let var_beta = match (r.raw("tds.beta_std"), r.raw("tds.var_beta")) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::invalid("tds.var_beta", "give tds.beta_std or tds.var_beta, not both"))
            }
            (Some(_), None) => {
                let s: f64 = r.required("tds.beta_std")?;
                if !(0.0..1.0).contains(&s) {
                    return Err(ConfigError::invalid("tds.beta_std", format!("must lie in [0, 1), got {s}")));
                }
                s * s
            }
            _ => r.unit_interval("tds.var_beta", 0.0, false)?,
        };
        let tds = TdsConfig {
            particles: r.at_least_one("tds.particles", Some(batch_size))?,
            phi: r.unit_interval("tds.phi", 0.9, false)?,
            var_beta,
            steps_per_grad: r.at_least_one("tds.steps", None)?,
        };
        if tds.particles < 2 {
            return Err(ConfigError::invalid("tds.particles", "at least 2 particles are needed"));
        }

        let lr = r.positive("train.lr", None)?;
        let critic = CriticConfig {
            k: r.at_least_one("critic.k", Some(5))?,
            epsilon: r.positive("critic.epsilon", Some(1e-3))?,
            kind: if r.or("critic.weighted", false)? {
                CriticKind::DistanceWeighted
            } else {
                CriticKind::Nearest
            },
        };
        let train = TrainConfig {
            gamma: r.unit_interval("train.gamma", 1.0, true)?,
            lr,
            lr_adv: r.positive("train.lr_adv", Some(lr))?,
            decay: {
                let d: f64 = r.or("train.decay", 0.0)?;
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(ConfigError::invalid("train.decay", "must be non-negative"));
                }
                d
            },
            adam_beta1: r.unit_interval("train.adam_beta1", 0.9, false)?,
            adam_beta2: r.unit_interval("train.adam_beta2", 0.999, false)?,
            adam_eps: r.positive("train.adam_eps", Some(1e-8))?,
            epochs_ml: r.or("train.epochs_ml", 0usize)?,
            epochs_adv: r.or("train.epochs_adv", 0usize)?,
            batch_size,
            monitor_minibatch: r.at_least_one("monitor.minibatch", Some(1000))?,
            tds,
            critic,
        };
        if train.total_epochs() == 0 {
            return Err(ConfigError::invalid("train.epochs_ml", "train.epochs_ml + train.epochs_adv must be positive"));
        }
        if train.uses_critic() && train.critic.k > train.batch_size + train.tds.particles - 1 {
            return Err(ConfigError::invalid(
                "critic.k",
                format!("must be at most {}", train.batch_size + train.tds.particles - 1),
            ));
        }
        train
            .validate()
            .map_err(|e| ConfigError::invalid("train", e.to_string()))?;

        Ok(Self {
            seed,
            output_dir,
            sample_every,
            checkpoint_every,
            dataset: DatasetConfig {
                source,
                limit,
                validation_fraction,
            },
            model,
            train,
            entries,
        })
    }

    /// Applies `N` (single-phase configs) or `M+A` to the epoch counts.
    pub fn override_epochs(&mut self, spec: &str) -> Result<(), ConfigError> {
        let key = "--epochs-override";
        let num = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| ConfigError::invalid(key, format!("`{s}`: {e}")))
        };
        let (ml, adv) = match spec.split_once('+') {
            Some((m, a)) => (num(m)?, num(a)?),
            None => {
                let n = num(spec)?;
                match (self.train.epochs_ml > 0, self.train.epochs_adv > 0) {
                    (true, true) => {
                        return Err(ConfigError::invalid(key, "config has two phases; use M+A"));
                    }
                    (true, false) => (n, 0),
                    _ => (0, n),
                }
            }
        };
        if ml + adv == 0 {
            return Err(ConfigError::invalid(key, "total epochs must be positive"));
        }
        self.train.epochs_ml = ml;
        self.train.epochs_adv = adv;
        self.train
            .validate()
            .map_err(|e| ConfigError::invalid(key, e.to_string()))
    }
}
