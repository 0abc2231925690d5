//! Training data: Gaussian mixture benchmarks, MNIST from IDX files, splitting
//! and minibatching.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::{Compression, GzBuilder};
use ndarray::{Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed IDX file {path}: {reason}")]
    MalformedIdx { path: String, reason: String },
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("batch size {batch_size} is invalid for {available} training rows")]
    InvalidBatchSize { batch_size: usize, available: usize },
}

/// Whether rows are real-valued or binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Continuous,
    Binary,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Continuous => "continuous",
            Self::Binary => "binary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "continuous" => Some(Self::Continuous),
            "binary" => Some(Self::Binary),
            _ => None,
        }
    }
}

/// Rows plus a train/validation partition of their indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Array2<f64>,
    kind: DatasetKind,
    train: Vec<usize>,
    validation: Vec<usize>,
}

impl Dataset {
    /// All rows start in the training split.
    pub fn new(rows: Array2<f64>, kind: DatasetKind) -> Result<Self, DatasetError> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(DatasetError::Invalid(format!("empty dataset {:?}", rows.dim())));
        }
        if let Some(x) = rows.iter().find(|x| !x.is_finite()) {
            return Err(DatasetError::Invalid(format!("non-finite value {x}")));
        }
        if kind == DatasetKind::Binary {
            if let Some(x) = rows.iter().find(|&&x| x != 0.0 && x != 1.0) {
                return Err(DatasetError::Invalid(format!("binary dataset contains {x}")));
            }
        }
        let train = (0..rows.nrows()).collect();
        Ok(Self {
            rows,
            kind,
            train,
            validation: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn validation_indices(&self) -> &[usize] {
        &self.validation
    }

    /// Copies the given rows, in order.
    pub fn select(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.dim()));
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).assign(&self.rows.row(i));
        }
        out
    }

    pub fn train_rows(&self) -> Array2<f64> {
        self.select(&self.train)
    }

    pub fn validation_rows(&self) -> Array2<f64> {
        self.select(&self.validation)
    }

    /// Keeps only the first `n` rows and resets the split.
    pub fn truncate(mut self, n: usize) -> Result<Self, DatasetError> {
        if n == 0 {
            return Err(DatasetError::Invalid("limit must be positive".into()));
        }
        if n < self.len() {
            self.rows = self.rows.slice(ndarray::s![..n, ..]).to_owned();
        }
        self.train = (0..self.len()).collect();
        self.validation.clear();
        Ok(self)
    }

    /// Random held-out split. `round(fraction · N)` rows go to validation;
    /// both index lists are kept sorted.
    pub fn split_validation<R: Rng + ?Sized>(mut self, fraction: f64, rng: &mut R) -> Result<Self, DatasetError> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(DatasetError::InvalidSplit(format!(
                "validation fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let n = self.len();
        let n_val = (fraction * n as f64).round() as usize;
        if n_val == 0 || n_val >= n {
            return Err(DatasetError::InvalidSplit(format!(
                "fraction {fraction} of {n} rows leaves an empty split"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let mut validation = idx[..n_val].to_vec();
        let mut train = idx[n_val..].to_vec();
        validation.sort_unstable();
        train.sort_unstable();
        self.train = train;
        self.validation = validation;
        Ok(self)
    }

    /// One epoch of shuffled training indices in batches of exactly
    /// `batch_size`; the ragged remainder is dropped.
    pub fn minibatches<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Vec<usize>>, DatasetError> {
        if batch_size == 0 || batch_size > self.train.len() {
            return Err(DatasetError::InvalidBatchSize {
                batch_size,
                available: self.train.len(),
            });
        }
        let mut idx = self.train.clone();
        idx.shuffle(rng);
        Ok(idx.chunks_exact(batch_size).map(<[usize]>::to_vec).collect())
    }
}

/// One isotropic Gaussian component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MogMode {
    pub mean: Vec<f64>,
    pub std: f64,
}

/// Mixture of isotropic Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MogSpec {
    pub modes: Vec<MogMode>,
    pub weights: Vec<f64>,
}

impl MogSpec {
    pub fn new(modes: Vec<MogMode>, weights: Vec<f64>) -> Result<Self, DatasetError> {
        let spec = Self { modes, weights };
        spec.validate()?;
        Ok(spec)
    }

    pub fn equal(modes: Vec<MogMode>) -> Result<Self, DatasetError> {
        let w = vec![1.0 / modes.len().max(1) as f64; modes.len()];
        Self::new(modes, w)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidMixture(m));
        if self.modes.is_empty() {
            return bad("no modes".into());
        }
        if self.weights.len() != self.modes.len() {
            return bad(format!("{} weights for {} modes", self.weights.len(), self.modes.len()));
        }
        let d = self.modes[0].mean.len();
        if d == 0 {
            return bad("zero-dimensional mode".into());
        }
        for m in &self.modes {
            if m.mean.len() != d {
                return bad("modes have different dimensions".into());
            }
            if !(m.std > 0.0 && m.std.is_finite()) || m.mean.iter().any(|x| !x.is_finite()) {
                return bad(format!("bad mode {m:?}"));
            }
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("weights must be non-negative".into());
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("weights must sum to 1".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.modes[0].mean.len()
    }

    /// Two modes at ±1 on the line, std 0.1.
    pub fn bimodal() -> Self {
        Self::equal(vec![
            MogMode { mean: vec![-1.0], std: 0.1 },
            MogMode { mean: vec![1.0], std: 0.1 },
        ])
        .expect("builtin mixture")
    }

    /// Eight modes evenly spaced on a circle of radius 2, std 0.02.
    pub fn ring() -> Self {
        let modes = (0..8)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 8.0;
                MogMode {
                    mean: vec![2.0 * a.cos(), 2.0 * a.sin()],
                    std: 0.02,
                }
            })
            .collect();
        Self::equal(modes).expect("builtin mixture")
    }

    /// 5×5 grid on {-4, -2, 0, 2, 4}², std 0.05.
    pub fn grid() -> Self {
        let mut modes = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                modes.push(MogMode {
                    mean: vec![-4.0 + 2.0 * i as f64, -4.0 + 2.0 * j as f64],
                    std: 0.05,
                });
            }
        }
        Self::equal(modes).expect("builtin mixture")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "mog_bimodal" | "bimodal" => Some(Self::bimodal()),
            "mog_ring" | "ring" => Some(Self::ring()),
            "mog_grid" | "grid" => Some(Self::grid()),
            _ => None,
        }
    }

    /// Index of the mode whose mean is closest to `x`.
    pub fn nearest_mode(&self, x: ArrayView1<f64>) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, m) in self.modes.iter().enumerate() {
            let d: f64 = m.mean.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    /// Mixture density at `x`.
    pub fn density(&self, x: ArrayView1<f64>) -> f64 {
        let d = self.dim() as f64;
        self.modes
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| {
                let sq: f64 = m.mean.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                let norm = (std::f64::consts::TAU * m.std * m.std).powf(d / 2.0);
                w * (-sq / (2.0 * m.std * m.std)).exp() / norm
            })
            .sum()
    }
}

/// `n` i.i.d. draws from the mixture, all in the training split.
pub fn mog_sample<R: Rng + ?Sized>(spec: &MogSpec, n: usize, rng: &mut R) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let pick = WeightedIndex::new(&spec.weights).map_err(|e| DatasetError::InvalidMixture(e.to_string()))?;
    let mut rows = Array2::zeros((n, spec.dim()));
    for mut row in rows.rows_mut() {
        let m = &spec.modes[pick.sample(rng)];
        for (x, mu) in row.iter_mut().zip(&m.mean) {
            let z: f64 = StandardNormal.sample(rng);
            *x = mu + m.std * z;
        }
    }
    Dataset::new(rows, DatasetKind::Continuous)
}

/// Images from an IDX3 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut raw = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut raw)).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Reads a (possibly gzip-compressed) IDX3 image file.
pub fn read_idx_images(path: &Path) -> Result<IdxImages, DatasetError> {
    let bytes = read_maybe_gz(path)?;
    let bad = |reason: String| DatasetError::MalformedIdx {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() < 16 {
        return Err(bad(format!("header is {} bytes", bytes.len())));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(bad(format!("magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    let expected = count * rows * cols;
    if bytes.len() - 16 != expected {
        return Err(bad(format!("{} pixel bytes, header implies {expected}", bytes.len() - 16)));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

/// Reads a (possibly gzip-compressed) IDX1 label file.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>, DatasetError> {
    let bytes = read_maybe_gz(path)?;
    let bad = |reason: String| DatasetError::MalformedIdx {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() < 8 {
        return Err(bad(format!("header is {} bytes", bytes.len())));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(bad(format!("magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let count = be_u32(&bytes, 4) as usize;
    if bytes.len() - 8 != count {
        return Err(bad(format!("{} labels, header says {count}", bytes.len() - 8)));
    }
    Ok(bytes[8..].to_vec())
}

fn write_bytes(path: &Path, bytes: &[u8], gzip: bool) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = BufWriter::new(File::create(path).map_err(io)?);
    if gzip {
        let mut enc: GzEncoder<_> = GzBuilder::new().mtime(0).write(f, Compression::default());
        enc.write_all(bytes).map_err(io)?;
        enc.finish().map_err(io)?.flush().map_err(io)
    } else {
        let mut f = f;
        f.write_all(bytes).map_err(io)?;
        f.flush().map_err(io)
    }
}

/// Writes an IDX3 image file, gzip-compressed when `gzip` is set.
pub fn write_idx_images(path: &Path, images: &IdxImages, gzip: bool) -> Result<(), DatasetError> {
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(DatasetError::Invalid("pixel count disagrees with header".into()));
    }
    let mut bytes = Vec::with_capacity(16 + images.pixels.len());
    for x in [IDX_IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        bytes.extend_from_slice(&x.to_be_bytes());
    }
    bytes.extend_from_slice(&images.pixels);
    write_bytes(path, &bytes, gzip)
}

pub fn write_idx_labels(path: &Path, labels: &[u8], gzip: bool) -> Result<(), DatasetError> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    write_bytes(path, &bytes, gzip)
}

/// Loads 28×28 MNIST images as 784-dimensional rows.
///
/// `Continuous` scales pixels to `[0, 1]`; `Binary` thresholds the scaled value
/// at 0.5.
pub fn mnist_load(path: &Path, variant: DatasetKind) -> Result<Dataset, DatasetError> {
    let images = read_idx_images(path)?;
    if images.rows != 28 || images.cols != 28 {
        return Err(DatasetError::MalformedIdx {
            path: path.display().to_string(),
            reason: format!("images are {}x{}, expected 28x28", images.rows, images.cols),
        });
    }
    if images.count == 0 {
        return Err(DatasetError::Invalid(format!("{} holds no images", path.display())));
    }
    let rows = Array2::from_shape_fn((images.count, 784), |(n, p)| {
        let x = f64::from(images.pixels[n * 784 + p]) / 255.0;
        match variant {
            DatasetKind::Continuous => x,
            DatasetKind::Binary => f64::from(u8::from(x >= 0.5)),
        }
    });
    Dataset::new(rows, variant)
}
