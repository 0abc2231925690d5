//! Batch experiment runner behind the `beam` binary.
//!
//! A run writes into its output directory:
//!
//! - `run_manifest.json`: the parsed config, seed and output schema versions
//! - `metrics.csv`: `epoch,phase,forward_kl,reverse_kl,mean_beta,learning_rate`
//! - `samples_epochNNN.csv`: one row per fantasy particle
//! - `checkpoint_epochNNN.json` at the phase boundary and every
//!   `output.checkpoint_every` epochs, and `checkpoint_final.json`
//!
//! Nothing time- or host-dependent is written, so a (config, seed) pair fixes
//! every output byte.

pub mod checkpoint;
pub mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::Serialize;
use thiserror::Error;

use crate::datasets::{self, Dataset, DatasetError, DatasetKind, MogSpec};
use crate::divergences::{self, DivergenceError, DivergenceReport};
use crate::rbm::{LayerKind, RbmModel};
use crate::rng;
use crate::tds::{ParticlePopulation, TdsConfig, TdsError};
use crate::training::{EpochReport, TrainError, Trainer};

pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::{ConfigError, DatasetSource, ExperimentConfig};

pub const METRICS_HEADER: &str = "epoch,phase,forward_kl,reverse_kl,mean_beta,learning_rate";
pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const SAMPLES_SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_FINITE: i32 = 3;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tds(#[from] TdsError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl ExperimentError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => EXIT_CONFIG,
            Self::Train(TrainError::NonFinite { .. } | TrainError::NonFiniteGradient) => EXIT_NON_FINITE,
            _ => EXIT_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Command-line overrides shared by `run` and `resume`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub epochs_override: Option<String>,
    /// Base for relative output directories; the working directory if unset.
    pub output_root: Option<PathBuf>,
}

impl RunOptions {
    fn resolve(&self, dir: &Path) -> PathBuf {
        if dir.is_absolute() {
            dir.to_path_buf()
        } else {
            self.output_root.clone().unwrap_or_default().join(dir)
        }
    }
}

/// Loads a config and applies seed/epoch overrides.
pub fn load_config(path: &Path, opts: &RunOptions) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(spec) = &opts.epochs_override {
        cfg.override_epochs(spec)?;
    }
    Ok(cfg)
}

/// Training data with its validation split, fully determined by the config and seed.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset, ExperimentError> {
    let data = match &cfg.dataset.source {
        DatasetSource::Mog { spec, samples } => {
            datasets::mog_sample(spec, *samples, &mut rng::stream(cfg.seed, rng::STREAM_DATA))?
        }
        DatasetSource::Mnist { path, variant } => datasets::mnist_load(path, *variant)?,
    };
    let data = match cfg.dataset.limit {
        Some(n) => data.truncate(n)?,
        None => data,
    };
    let data = data
        .split_validation(cfg.dataset.validation_fraction, &mut rng::stream(cfg.seed, rng::STREAM_SPLIT))
        .map_err(|e| ConfigError::Invalid {
            key: "dataset.validation_fraction".into(),
            reason: e.to_string(),
        })?;
    if cfg.train.batch_size > data.train_indices().len() {
        return Err(ConfigError::Invalid {
            key: "train.batch_size".into(),
            reason: format!(
                "{} exceeds the {} training rows",
                cfg.train.batch_size,
                data.train_indices().len()
            ),
        }
        .into());
    }
    Ok(data)
}

/// Random weights, visible parameters fitted to the training rows.
pub fn initial_model(cfg: &ExperimentConfig, data: &Dataset) -> RbmModel {
    let m = &cfg.model;
    let mut model = RbmModel::random(
        m.visible,
        data.dim(),
        m.hidden,
        m.weight_init_std,
        &mut rng::stream(cfg.seed, rng::STREAM_INIT),
    );
    model.fit_visible_to(data.train_rows().view(), m.min_std);
    model
}

/// Summary printed by `validate`.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub rows: usize,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub visible: usize,
    pub hidden: usize,
    pub visible_kind: LayerKind,
    pub epochs_ml: usize,
    pub epochs_adv: usize,
    pub batches_per_epoch: usize,
}

/// Checks a config (and its data source) without training.
pub fn validate(path: &Path, opts: &RunOptions) -> Result<ValidationReport, ExperimentError> {
    let cfg = load_config(path, opts)?;
    let data = build_dataset(&cfg)?;
    if cfg.model.visible == LayerKind::Bernoulli && data.kind() != DatasetKind::Binary {
        return Err(ConfigError::Invalid {
            key: "model.visible".into(),
            reason: "bernoulli visible units need binary data".into(),
        }
        .into());
    }
    Ok(ValidationReport {
        seed: cfg.seed,
        rows: data.len(),
        train_rows: data.train_indices().len(),
        validation_rows: data.validation_indices().len(),
        visible: data.dim(),
        hidden: cfg.model.hidden,
        visible_kind: cfg.model.visible,
        epochs_ml: cfg.train.epochs_ml,
        epochs_adv: cfg.train.epochs_adv,
        batches_per_epoch: data.train_indices().len() / cfg.train.batch_size,
    })
}

/// Outcome of a finished `run` or `resume`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub epochs: usize,
    pub last: Option<EpochReport>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    metrics_schema: u32,
    samples_schema: u32,
    checkpoint_format: &'static str,
    checkpoint_version: u32,
    config: &'a std::collections::BTreeMap<String, String>,
    epochs_ml: usize,
    epochs_adv: usize,
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let m = Manifest {
        seed: cfg.seed,
        metrics_schema: METRICS_SCHEMA_VERSION,
        samples_schema: SAMPLES_SCHEMA_VERSION,
        checkpoint_format: checkpoint::FORMAT,
        checkpoint_version: checkpoint::VERSION,
        config: &cfg.entries,
        epochs_ml: cfg.train.epochs_ml,
        epochs_adv: cfg.train.epochs_adv,
    };
    let path = dir.join("run_manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n").map_err(io_err(&path))
}

/// One metrics row, without trailing newline.
pub fn metrics_row(r: &EpochReport) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.epoch,
        r.phase.name(),
        r.divergence.forward_kl,
        r.divergence.reverse_kl,
        r.mean_beta,
        r.learning_rate
    )
}

/// Visible values to dump for each particle: conditional means given `h` for
/// Gaussian units, the sampled state for Bernoulli units.
pub fn sample_dump(model: &RbmModel, pop: &ParticlePopulation) -> Array2<f64> {
    match model.visible_kind {
        LayerKind::Gaussian => model.visible_means(pop.states.h.view()),
        LayerKind::Bernoulli => pop.states.v.clone(),
    }
}

pub fn write_samples(path: &Path, rows: ArrayView2<f64>) -> Result<(), ExperimentError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let header: Vec<String> = (0..rows.ncols()).map(|i| format!("v{i}")).collect();
    let mut text = header.join(",");
    text.push('\n');
    for row in rows.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).and_then(|()| w.flush()).map_err(io_err(path))
}

/// Rewrites `metrics.csv` keeping only the header and rows up to `epoch`.
fn truncate_metrics(path: &Path, epoch: usize) -> Result<(), ExperimentError> {
    let kept = match fs::read_to_string(path) {
        Ok(text) => {
            let mut out = format!("{METRICS_HEADER}\n");
            for line in text.lines().skip(1) {
                let e = line.split(',').next().and_then(|s| s.parse::<usize>().ok());
                if matches!(e, Some(e) if e <= epoch) {
                    out.push_str(line);
                    out.push('\n');
                }
            }
            out
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => format!("{METRICS_HEADER}\n"),
        Err(e) => return Err(io_err(path)(e)),
    };
    fs::write(path, kept).map_err(io_err(path))
}

fn drive(mut trainer: Trainer, data: &Dataset, cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary, ExperimentError> {
    let metrics_path = dir.join("metrics.csv");
    let mut metrics = OpenOptions::new().append(true).open(&metrics_path).map_err(io_err(&metrics_path))?;
    let total = trainer.config.total_epochs();
    let boundary = trainer.config.epochs_ml;
    let mut last = None;
    while !trainer.is_finished() {
        let report = trainer.run_epoch(data)?;
        writeln!(metrics, "{}", metrics_row(&report))
            .and_then(|()| metrics.flush())
            .map_err(io_err(&metrics_path))?;
        let e = report.epoch;
        if e == total || (cfg.sample_every > 0 && e % cfg.sample_every == 0) {
            let path = dir.join(format!("samples_epoch{e:03}.csv"));
            write_samples(&path, sample_dump(&trainer.model, &trainer.population).view())?;
        }
        let at_boundary = e == boundary && e < total;
        if at_boundary || (cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0 && e < total) {
            Checkpoint::from_trainer(&trainer, cfg.seed).save(&dir.join(format!("checkpoint_epoch{e:03}.json")))?;
        }
        last = Some(report);
    }
    Checkpoint::from_trainer(&trainer, cfg.seed).save(&dir.join("checkpoint_final.json"))?;
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        epochs: trainer.epoch,
        last,
    })
}

/// Trains from scratch as described by the config at `path`.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunSummary, ExperimentError> {
    let cfg = load_config(path, opts)?;
    let dir = opts.resolve(opts.out_dir.as_deref().unwrap_or(&cfg.output_dir));
    let data = build_dataset(&cfg)?;
    let model = initial_model(&cfg, &data);
    let trainer = Trainer::new(model, cfg.train, cfg.seed)?;
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_manifest(&dir, &cfg)?;
    let metrics_path = dir.join("metrics.csv");
    fs::write(&metrics_path, format!("{METRICS_HEADER}\n")).map_err(io_err(&metrics_path))?;
    drive(trainer, &data, &cfg, &dir)
}

/// Continues a run from a checkpoint. Outputs go next to the checkpoint unless
/// `out_dir` is given; metric rows after the checkpoint's epoch are replaced.
pub fn resume(checkpoint_path: &Path, config_path: &Path, opts: &RunOptions) -> Result<RunSummary, ExperimentError> {
    let ckpt = Checkpoint::load(checkpoint_path)?;
    if let Some(seed) = opts.seed {
        if seed != ckpt.seed {
            return Err(ExperimentError::Usage(format!(
                "--seed {seed} differs from the checkpoint's seed {}",
                ckpt.seed
            )));
        }
    }
    let mut cfg = load_config(config_path, opts)?;
    cfg.seed = ckpt.seed;
    let trainer = ckpt.to_trainer(Some(cfg.train))?;
    if trainer.epoch > cfg.train.total_epochs() {
        return Err(ExperimentError::Usage(format!(
            "checkpoint is at epoch {} but the config only has {} epochs",
            trainer.epoch,
            cfg.train.total_epochs()
        )));
    }
    let data = build_dataset(&cfg)?;
    if data.dim() != trainer.model.n_visible() || cfg.model.hidden != trainer.model.n_hidden() {
        return Err(ExperimentError::Usage("checkpoint model does not match the config's dimensions".into()));
    }
    let dir = match &opts.out_dir {
        Some(d) => opts.resolve(d),
        None => checkpoint_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_manifest(&dir, &cfg)?;
    truncate_metrics(&dir.join("metrics.csv"), trainer.epoch)?;
    drive(trainer, &data, &cfg, &dir)
}

/// Settings for `eval`.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub particles: usize,
    pub sweeps: usize,
    /// Draws for builtin mixtures, or a cap on IDX rows.
    pub samples: usize,
    /// Defaults to the checkpoint's seed.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            particles: 1000,
            sweeps: 100,
            samples: 10_000,
            seed: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub forward_kl: f64,
    pub reverse_kl: f64,
    pub reference_rows: usize,
    pub particles: usize,
    pub sweeps: usize,
    pub mean_beta: f64,
    #[serde(skip)]
    pub samples: Array2<f64>,
}

/// Reference rows for `eval`: a builtin mixture name, a config file (its
/// validation split) or an IDX image file.
pub fn eval_reference(dataset: &str, model: &RbmModel, samples: usize, seed: u64) -> Result<Array2<f64>, ExperimentError> {
    if let Some(spec) = MogSpec::builtin(dataset) {
        return Ok(datasets::mog_sample(&spec, samples, &mut rng::stream(seed, rng::STREAM_DATA))?
            .rows()
            .clone());
    }
    let path = Path::new(dataset);
    if path.extension().is_some_and(|e| e == "cfg") {
        let cfg = load_config(path, &RunOptions::default())?;
        return Ok(build_dataset(&cfg)?.validation_rows());
    }
    if !path.is_file() {
        return Err(ExperimentError::Usage(format!(
            "`{dataset}` is not a builtin mixture, a .cfg file or an IDX file"
        )));
    }
    let variant = match model.visible_kind {
        LayerKind::Bernoulli => DatasetKind::Binary,
        LayerKind::Gaussian => DatasetKind::Continuous,
    };
    let data = datasets::mnist_load(path, variant)?;
    Ok(data.truncate(samples.max(1))?.rows().clone())
}

/// Samples a frozen model with a fresh population and compares it with the
/// reference data.
pub fn eval_model(
    model: &RbmModel,
    tds: &TdsConfig,
    reference: ArrayView2<f64>,
    opts: &EvalOptions,
    seed: u64,
) -> Result<EvalResult, ExperimentError> {
    if reference.ncols() != model.n_visible() {
        return Err(ExperimentError::Usage(format!(
            "reference data has {} columns, the model {} visible units",
            reference.ncols(),
            model.n_visible()
        )));
    }
    if opts.particles < 2 {
        return Err(ExperimentError::Usage("eval needs at least 2 particles".into()));
    }
    let cfg = TdsConfig {
        particles: opts.particles,
        ..*tds
    };
    let mut pop = ParticlePopulation::init(model, &cfg, seed, rng::STREAM_EVAL_PARTICLES)?;
    pop.advance(model, &cfg, opts.sweeps)?;
    let report: DivergenceReport = divergences::monitor(reference, &pop, reference.nrows(), 0)?;
    Ok(EvalResult {
        forward_kl: report.forward_kl,
        reverse_kl: report.reverse_kl,
        reference_rows: reference.nrows(),
        particles: opts.particles,
        sweeps: opts.sweeps,
        mean_beta: pop.mean_beta(),
        samples: sample_dump(model, &pop),
    })
}

/// `eval <checkpoint> <dataset>`; writes `eval.json` and `samples_eval.csv`
/// when an output directory is given.
pub fn eval(checkpoint_path: &Path, dataset: &str, opts: &EvalOptions) -> Result<EvalResult, ExperimentError> {
    let ckpt = Checkpoint::load(checkpoint_path)?;
    let model = ckpt.model.to_model()?;
    let seed = opts.seed.unwrap_or(ckpt.seed);
    let reference = eval_reference(dataset, &model, opts.samples, seed)?;
    let tds = ckpt.train.to_config().tds;
    let result = eval_model(&model, &tds, reference.view(), opts, seed)?;
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("eval.json");
        fs::write(&path, serde_json::to_string_pretty(&result).expect("serializes") + "\n").map_err(io_err(&path))?;
        write_samples(&dir.join("samples_eval.csv"), result.samples.view())?;
    }
    Ok(result)
}
