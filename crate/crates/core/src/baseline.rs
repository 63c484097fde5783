//! Intensity regression baseline: hashed character n-gram features and RBF
//! kernel ridge regression, with mix- and cross-hashtag evaluation.
//!
//! Features are term counts (or presence flags) of character n-grams hashed
//! with 64-bit FNV-1a over the gram's UTF-8 bytes and masked to `hash_dim`
//! buckets, then L2-normalized. The model solves `(K + lambda I) alpha = y`
//! with `K_ij = exp(-gamma * |x_i - x_j|^2)` by Cholesky factorization.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricsError};

pub const DEFAULT_HASH_DIM: usize = 1 << 18;
pub const LAMBDA_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const GAMMA_GRID: [f64; 3] = [0.01, 0.1, 1.0];

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const MODEL_MAGIC: &str = "bws-krr";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid feature config: {0}")]
    Config(String),
    #[error("need at least 2 training examples, got {0}")]
    TooFewExamples(usize),
    #[error("{features} feature vectors but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("target {value} at index {index} outside [-1, 1]")]
    TargetOutOfRange { index: usize, value: f64 },
    #[error("lambda and gamma must be positive and finite (lambda > 0, gamma >= 0)")]
    Hyperparameters,
    #[error("kernel system is singular or not positive definite; increase lambda")]
    Singular,
    #[error("unknown hashtag {0:?}")]
    UnknownHashtag(String),
    #[error("split {0} is empty")]
    EmptySplit(&'static str),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub ngram_orders: BTreeSet<usize>,
    pub hash_dim: usize,
    /// Presence flags instead of term counts.
    pub binary_counts: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            ngram_orders: [2, 3, 4].into_iter().collect(),
            hash_dim: DEFAULT_HASH_DIM,
            binary_counts: false,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(BaselineError::Config(
                "n-gram orders must be non-empty and >= 1".into(),
            ));
        }
        if !self.hash_dim.is_power_of_two() || self.hash_dim < 1 << 10 {
            return Err(BaselineError::Config(format!(
                "hash_dim {} must be a power of two >= 1024",
                self.hash_dim
            )));
        }
        if self.hash_dim > 1 << 32 {
            return Err(BaselineError::Config("hash_dim must fit in 32 bits".into()));
        }
        Ok(())
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.indices
            .binary_search(&index)
            .map(|i| self.values[i])
            .unwrap_or(0.0)
    }

    /// `|a - b|^2`, accumulated over the merged support.
    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.nnz() && j < other.nnz() {
            let (a, b) = (self.indices[i], other.indices[j]);
            if a == b {
                let d = self.values[i] - other.values[j];
                acc += d * d;
                i += 1;
                j += 1;
            } else if a < b {
                acc += self.values[i] * self.values[i];
                i += 1;
            } else {
                acc += other.values[j] * other.values[j];
                j += 1;
            }
        }
        acc += self.values[i..].iter().map(|v| v * v).sum::<f64>();
        acc += other.values[j..].iter().map(|v| v * v).sum::<f64>();
        acc
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Raw (unhashed) character n-grams of every configured order.
pub fn char_ngrams<'t>(text: &'t str, orders: &BTreeSet<usize>) -> Vec<&'t str> {
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let mut grams = Vec::new();
    for &order in orders {
        if order > n_chars {
            continue;
        }
        for start in 0..=n_chars - order {
            grams.push(&text[bounds[start]..bounds[start + order]]);
        }
    }
    grams
}

/// Hashed, L2-normalized n-gram vector. Empty input gives the zero vector.
pub fn extract_features(text: &str, config: &FeatureConfig) -> SparseVector {
    let mask = (config.hash_dim - 1) as u64;
    let mut buckets: BTreeMap<u32, f64> = BTreeMap::new();
    for gram in char_ngrams(text, &config.ngram_orders) {
        let bucket = (fnv1a64(gram.as_bytes()) & mask) as u32;
        let v = buckets.entry(bucket).or_insert(0.0);
        if config.binary_counts {
            *v = 1.0;
        } else {
            *v += 1.0;
        }
    }
    let norm = buckets.values().map(|v| v * v).sum::<f64>().sqrt();
    let (indices, values) = if norm > 0.0 {
        buckets.into_iter().map(|(i, v)| (i, v / norm)).unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    SparseVector { indices, values }
}

pub fn extract_all(texts: &[&str], config: &FeatureConfig) -> Vec<SparseVector> {
    texts
        .par_iter()
        .map(|t| extract_features(t, config))
        .collect()
}

/// `1 / (hash_dim * Var(x))` over every entry of the dense feature matrix;
/// close to 1 for L2-normalized sparse rows.
pub fn scale_gamma(features: &[SparseVector], hash_dim: usize) -> f64 {
    let cells = features.len() as f64 * hash_dim as f64;
    if cells == 0.0 {
        return 1.0;
    }
    let sum: f64 = features.iter().flat_map(|f| &f.values).sum();
    let sum_sq: f64 = features.iter().flat_map(|f| &f.values).map(|v| v * v).sum();
    let mean = sum / cells;
    let var = sum_sq / cells - mean * mean;
    if var > 0.0 {
        1.0 / (hash_dim as f64 * var)
    } else {
        1.0
    }
}

pub fn rbf(a: &SparseVector, b: &SparseVector, gamma: f64) -> f64 {
    (-gamma * a.squared_distance(b)).exp()
}

pub fn kernel_matrix(features: &[SparseVector], gamma: f64) -> DMatrix<f64> {
    let n = features.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else if j < i {
                        0.0
                    } else {
                        rbf(&features[i], &features[j], gamma)
                    }
                })
                .collect()
        })
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            k[(i, j)] = rows[i][j];
            k[(j, i)] = rows[i][j];
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    pub config: FeatureConfig,
    pub lambda: f64,
    pub gamma: f64,
    pub training: Vec<SparseVector>,
    pub dual: Vec<f64>,
}

pub fn train(
    config: &FeatureConfig,
    features: Vec<SparseVector>,
    targets: &[f64],
    lambda: f64,
    gamma: f64,
) -> Result<KrrModel, BaselineError> {
    if features.len() != targets.len() {
        return Err(BaselineError::LengthMismatch {
            features: features.len(),
            targets: targets.len(),
        });
    }
    if features.len() < 2 {
        return Err(BaselineError::TooFewExamples(features.len()));
    }
    if let Some((index, &value)) = targets
        .iter()
        .enumerate()
        .find(|(_, v)| !(-1.0..=1.0).contains(*v))
    {
        return Err(BaselineError::TargetOutOfRange { index, value });
    }
    if !(lambda > 0.0 && lambda.is_finite() && gamma >= 0.0 && gamma.is_finite()) {
        return Err(BaselineError::Hyperparameters);
    }
    let n = features.len();
    let mut system = kernel_matrix(&features, gamma);
    for i in 0..n {
        system[(i, i)] += lambda;
    }
    let chol = system.cholesky().ok_or(BaselineError::Singular)?;
    let alpha = chol.solve(&DVector::from_column_slice(targets));
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(BaselineError::Singular);
    }
    Ok(KrrModel {
        config: config.clone(),
        lambda,
        gamma,
        training: features,
        dual: alpha.iter().copied().collect(),
    })
}

impl KrrModel {
    /// Unclipped kernel expansion.
    pub fn decision(&self, x: &SparseVector) -> f64 {
        self.training
            .iter()
            .zip(&self.dual)
            .map(|(t, a)| a * rbf(t, x, self.gamma))
            .sum()
    }

    /// Predictions clipped to `[-1, 1]`.
    pub fn predict(&self, features: &[SparseVector]) -> Vec<f64> {
        features
            .par_iter()
            .map(|x| self.decision(x).clamp(-1.0, 1.0))
            .collect()
    }

    pub fn predict_texts(&self, texts: &[&str]) -> Vec<f64> {
        self.predict(&extract_all(texts, &self.config))
    }

    /// Writes the model: one JSON header line, then a little-endian binary
    /// block with every training vector (`u32` nnz, then `u32` index and
    /// `f64` value pairs) followed by the dual coefficients as `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), BaselineError> {
        let header = ModelHeader {
            format: MODEL_MAGIC.to_string(),
            version: MODEL_VERSION,
            feature_config: self.config.clone(),
            lambda: self.lambda,
            gamma: self.gamma,
            n_coefficients: self.dual.len(),
        };
        serde_json::to_writer(&mut w, &header)
            .map_err(|e| BaselineError::ModelFormat(e.to_string()))?;
        w.write_all(b"\n")?;
        for v in &self.training {
            w.write_all(&(v.nnz() as u32).to_le_bytes())?;
            for (i, x) in v.indices.iter().zip(&v.values) {
                w.write_all(&i.to_le_bytes())?;
                w.write_all(&x.to_le_bytes())?;
            }
        }
        for a in &self.dual {
            w.write_all(&a.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, BaselineError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| BaselineError::ModelFormat("missing header line".into()))?;
        let header: ModelHeader = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| BaselineError::ModelFormat(e.to_string()))?;
        if header.format != MODEL_MAGIC || header.version != MODEL_VERSION {
            return Err(BaselineError::ModelFormat(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let mut cursor = Cursor::new(&bytes[newline + 1..]);
        let mut training = Vec::with_capacity(header.n_coefficients);
        for _ in 0..header.n_coefficients {
            let nnz = cursor.u32()? as usize;
            let mut v = SparseVector {
                indices: Vec::with_capacity(nnz),
                values: Vec::with_capacity(nnz),
            };
            for _ in 0..nnz {
                v.indices.push(cursor.u32()?);
                v.values.push(cursor.f64()?);
            }
            training.push(v);
        }
        let dual = (0..header.n_coefficients)
            .map(|_| cursor.f64())
            .collect::<Result<Vec<_>, _>>()?;
        if !cursor.is_empty() {
            return Err(BaselineError::ModelFormat("trailing bytes".into()));
        }
        Ok(Self {
            config: header.feature_config,
            lambda: header.lambda,
            gamma: header.gamma,
            training,
            dual,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    feature_config: FeatureConfig,
    lambda: f64,
    gamma: f64,
    n_coefficients: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], BaselineError> {
        if self.bytes.len() < N {
            return Err(BaselineError::ModelFormat(
                "truncated coefficient block".into(),
            ));
        }
        let (head, tail) = self.bytes.split_at(N);
        self.bytes = tail;
        Ok(head.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, BaselineError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, BaselineError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub pearson: f64,
    pub mse: f64,
}

/// Pearson and MSE of predictions; a constant predictor surfaces the
/// zero-variance error.
pub fn score_predictions(
    predictions: &[f64],
    truth: &[f64],
) -> Result<RegressionMetrics, BaselineError> {
    let s = metrics::PairedSeries::new(predictions, truth)?;
    Ok(RegressionMetrics {
        pearson: s.pearson()?,
        mse: s.mse(),
    })
}

/// One labelled post.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub text: String,
    pub hashtag: String,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    /// All hashtags pooled and split at random.
    MixHashtag,
    /// One hashtag held out for test; `None` rotates through every hashtag.
    CrossHashtag { held_out: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub mode: ProtocolMode,
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub seed: u64,
}

impl EvalProtocol {
    pub fn mix(seed: u64) -> Self {
        Self {
            mode: ProtocolMode::MixHashtag,
            train_fraction: 0.8,
            dev_fraction: 0.1,
            seed,
        }
    }

    pub fn cross(held_out: Option<String>, seed: u64) -> Self {
        Self {
            mode: ProtocolMode::CrossHashtag { held_out },
            ..Self::mix(seed)
        }
    }

    pub fn test_fraction(&self) -> f64 {
        1.0 - self.train_fraction - self.dev_fraction
    }
}

/// Hyperparameter choice: fixed, or grid search on the dev split by MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Hyperparameters {
    Fixed { lambda: f64, gamma: f64 },
    Grid { lambdas: Vec<f64>, gammas: Vec<f64> },
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters::Grid {
            lambdas: LAMBDA_GRID.to_vec(),
            gammas: GAMMA_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub held_out: Option<String>,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub pearson: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: ProtocolMode,
    pub splits: Vec<SplitResult>,
    pub mean_pearson: f64,
    pub mean_mse: f64,
}

struct Split {
    held_out: Option<String>,
    train: Vec<usize>,
    dev: Vec<usize>,
    test: Vec<usize>,
}

fn split_indices(
    examples: &[Example],
    protocol: &EvalProtocol,
) -> Result<Vec<Split>, BaselineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let cut = |mut idx: Vec<usize>, dev_share: f64, rng: &mut ChaCha8Rng| {
        idx.shuffle(rng);
        let n_dev = (idx.len() as f64 * dev_share).round() as usize;
        let dev = idx.split_off(idx.len() - n_dev.min(idx.len()));
        (idx, dev)
    };
    match &protocol.mode {
        ProtocolMode::MixHashtag => {
            let mut idx: Vec<usize> = (0..examples.len()).collect();
            idx.shuffle(&mut rng);
            let n = idx.len() as f64;
            let n_train = (n * protocol.train_fraction).round() as usize;
            let n_dev = (n * protocol.dev_fraction).round() as usize;
            let test = idx.split_off((n_train + n_dev).min(idx.len()));
            let dev = idx.split_off(n_train.min(idx.len()));
            Ok(vec![Split {
                held_out: None,
                train: idx,
                dev,
                test,
            }])
        }
        ProtocolMode::CrossHashtag { held_out } => {
            let hashtags: BTreeSet<&str> = examples.iter().map(|e| e.hashtag.as_str()).collect();
            let targets: Vec<&str> = match held_out {
                Some(h) if hashtags.contains(h.as_str()) => vec![h.as_str()],
                Some(h) => return Err(BaselineError::UnknownHashtag(h.clone())),
                None => hashtags.into_iter().collect(),
            };
            let dev_share =
                protocol.dev_fraction / (protocol.train_fraction + protocol.dev_fraction);
            Ok(targets
                .into_iter()
                .map(|h| {
                    let (test, rest): (Vec<usize>, Vec<usize>) =
                        (0..examples.len()).partition(|&i| examples[i].hashtag == h);
                    let (train, dev) = cut(rest, dev_share, &mut rng);
                    Split {
                        held_out: Some(h.to_string()),
                        train,
                        dev,
                        test,
                    }
                })
                .collect())
        }
    }
}

/// Trains on each split (tuning on dev when a grid is given, then refitting
/// on train only) and reports test metrics.
pub fn evaluate(
    examples: &[Example],
    protocol: &EvalProtocol,
    config: &FeatureConfig,
    hyper: &Hyperparameters,
) -> Result<EvalReport, BaselineError> {
    config.validate()?;
    let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
    let features = extract_all(&texts, config);
    let targets: Vec<f64> = examples.iter().map(|e| e.target).collect();
    let pick = |idx: &[usize]| -> (Vec<SparseVector>, Vec<f64>) {
        (
            idx.iter().map(|&i| features[i].clone()).collect(),
            idx.iter().map(|&i| targets[i]).collect(),
        )
    };

    let mut results = Vec::new();
    for split in split_indices(examples, protocol)? {
        if split.train.len() < 2 {
            return Err(BaselineError::TooFewExamples(split.train.len()));
        }
        if split.test.is_empty() {
            return Err(BaselineError::EmptySplit("test"));
        }
        let (train_x, train_y) = pick(&split.train);
        let (dev_x, dev_y) = pick(&split.dev);
        let (test_x, test_y) = pick(&split.test);
        let (lambda, gamma) = match hyper {
            Hyperparameters::Fixed { lambda, gamma } => (*lambda, *gamma),
            Hyperparameters::Grid { lambdas, gammas } => {
                if dev_x.is_empty() {
                    return Err(BaselineError::EmptySplit("dev"));
                }
                tune(config, &train_x, &train_y, &dev_x, &dev_y, lambdas, gammas)?
            }
        };
        let model = train(config, train_x, &train_y, lambda, gamma)?;
        let m = score_predictions(&model.predict(&test_x), &test_y)?;
        results.push(SplitResult {
            held_out: split.held_out,
            n_train: split.train.len(),
            n_dev: split.dev.len(),
            n_test: split.test.len(),
            lambda,
            gamma,
            pearson: m.pearson,
            mse: m.mse,
        });
    }
    let k = results.len() as f64;
    Ok(EvalReport {
        mode: protocol.mode.clone(),
        mean_pearson: results.iter().map(|r| r.pearson).sum::<f64>() / k,
        mean_mse: results.iter().map(|r| r.mse).sum::<f64>() / k,
        splits: results,
    })
}

/// Grid point with the lowest dev MSE; ties keep the earlier point.
/// Grid points whose system is singular are skipped.
pub fn tune(
    config: &FeatureConfig,
    train_x: &[SparseVector],
    train_y: &[f64],
    dev_x: &[SparseVector],
    dev_y: &[f64],
    lambdas: &[f64],
    gammas: &[f64],
) -> Result<(f64, f64), BaselineError> {
    let mut best: Option<(f64, f64, f64)> = None;
    for &gamma in gammas {
        for &lambda in lambdas {
            let model = match train(config, train_x.to_vec(), train_y, lambda, gamma) {
                Ok(m) => m,
                Err(BaselineError::Singular) => continue,
                Err(e) => return Err(e),
            };
            let mse = metrics::mse(&model.predict(dev_x), dev_y)?;
            if best.is_none_or(|(_, _, b)| mse < b) {
                best = Some((lambda, gamma, mse));
            }
        }
    }
    best.map(|(l, g, _)| (l, g)).ok_or(BaselineError::Singular)
}
