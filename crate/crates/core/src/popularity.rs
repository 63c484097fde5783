//! Hashtag popularity series and one-step log-linear forecasting.
//!
//! Popularity at bucket `i` is the number of posts in that bucket; models
//! work on the level `ln(count + 1)`. The baseline regresses the level on the
//! previous level; the density variant adds the previous bucket's complaint
//! density (mean intensity of its posts, 0 for empty buckets).

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Post;
use crate::metrics;
use crate::PostId;

pub const DEFAULT_BUCKET_HOURS: u32 = 2;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PopularityError {
    #[error("no posts to build a series from")]
    EmptySeries,
    #[error("posts span several hashtags ({0:?} and {1:?})")]
    MixedHashtag(String, String),
    #[error("no intensity for post {0}")]
    MissingIntensity(PostId),
    #[error("intensity {value} for post {post_id} is not finite")]
    NonFiniteIntensity { post_id: PostId, value: f64 },
    #[error("bucket_hours must be positive")]
    ZeroBucketHours,
    #[error("{variant} model needs at least {needed} bucket pairs, got {got}")]
    TooFewPairs {
        variant: Variant,
        needed: usize,
        got: usize,
    },
    #[error("design matrix is rank deficient for the {0} model")]
    RankDeficient(Variant),
    #[error("need at least 2 test buckets, got {0}")]
    TooFewTestBuckets(usize),
    #[error("levels and densities differ in length ({levels} vs {densities})")]
    LengthMismatch { levels: usize, densities: usize },
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Density,
}

impl Variant {
    pub fn arity(self) -> usize {
        match self {
            Variant::Baseline => 2,
            Variant::Density => 3,
        }
    }

    pub fn min_pairs(self) -> usize {
        self.arity() + 1
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::Density => "density",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "density" => Ok(Variant::Density),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopularityBucket {
    pub t_index: usize,
    pub post_count: u64,
    pub density: f64,
}

impl PopularityBucket {
    pub fn level(&self) -> f64 {
        (self.post_count as f64 + 1.0).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularitySeries {
    pub hashtag: String,
    pub bucket_hours: u32,
    pub start_timestamp: i64,
    pub buckets: Vec<PopularityBucket>,
}

impl PopularitySeries {
    pub fn levels(&self) -> Vec<f64> {
        self.buckets.iter().map(PopularityBucket::level).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.buckets.iter().map(|b| b.density).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PopularityError> {
        let mut out = csv::Writer::from_writer(w);
        for b in &self.buckets {
            out.serialize(b)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads buckets written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(
        r: R,
        hashtag: impl Into<String>,
        bucket_hours: u32,
        start_timestamp: i64,
    ) -> Result<Self, PopularityError> {
        let buckets = csv::Reader::from_reader(r)
            .deserialize()
            .collect::<Result<Vec<PopularityBucket>, _>>()?;
        Ok(Self {
            hashtag: hashtag.into(),
            bucket_hours,
            start_timestamp,
            buckets,
        })
    }
}

/// Buckets one hashtag's posts by `bucket_hours` from the earliest post.
pub fn build_series(
    posts: &[Post],
    intensities: &HashMap<PostId, f64>,
    bucket_hours: u32,
) -> Result<PopularitySeries, PopularityError> {
    if bucket_hours == 0 {
        return Err(PopularityError::ZeroBucketHours);
    }
    let first = posts.first().ok_or(PopularityError::EmptySeries)?;
    if let Some(other) = posts.iter().find(|p| p.hashtag != first.hashtag) {
        return Err(PopularityError::MixedHashtag(
            first.hashtag.clone(),
            other.hashtag.clone(),
        ));
    }
    let start = posts.iter().map(|p| p.timestamp).min().expect("non-empty");
    let width = bucket_hours as i64 * 3600;

    let mut sums: BTreeMap<usize, (u64, f64)> = BTreeMap::new();
    for p in posts {
        let value = *intensities
            .get(&p.id)
            .ok_or(PopularityError::MissingIntensity(p.id))?;
        if !value.is_finite() {
            return Err(PopularityError::NonFiniteIntensity {
                post_id: p.id,
                value,
            });
        }
        let slot = sums
            .entry(((p.timestamp - start) / width) as usize)
            .or_default();
        slot.0 += 1;
        slot.1 += value;
    }
    let last = *sums.keys().next_back().expect("non-empty");
    let buckets = (0..=last)
        .map(|t| {
            let (count, sum) = sums.get(&t).copied().unwrap_or((0, 0.0));
            PopularityBucket {
                t_index: t,
                post_count: count,
                density: if count > 0 { sum / count as f64 } else { 0.0 },
            }
        })
        .collect();
    Ok(PopularitySeries {
        hashtag: first.hashtag.clone(),
        bucket_hours,
        start_timestamp: start,
        buckets,
    })
}

/// One series per hashtag, keyed by hashtag.
pub fn build_all_series(
    posts: &[Post],
    intensities: &HashMap<PostId, f64>,
    bucket_hours: u32,
) -> Result<BTreeMap<String, PopularitySeries>, PopularityError> {
    let mut groups: BTreeMap<&str, Vec<Post>> = BTreeMap::new();
    for p in posts {
        groups.entry(&p.hashtag).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(h, ps)| Ok((h.to_string(), build_series(&ps, intensities, bucket_hours)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityModel {
    pub variant: Variant,
    /// `(alpha1, alpha2)` for the baseline, `(beta1, beta2, beta3)` for density.
    pub coefficients: Vec<f64>,
    /// Set when a density fit was requested but the density column was not
    /// identifiable, so the baseline was fitted instead.
    pub rank_fallback: bool,
}

impl PopularityModel {
    pub fn baseline(alpha1: f64, alpha2: f64) -> Self {
        Self {
            variant: Variant::Baseline,
            coefficients: vec![alpha1, alpha2],
            rank_fallback: false,
        }
    }

    pub fn density(beta1: f64, beta2: f64, beta3: f64) -> Self {
        Self {
            variant: Variant::Density,
            coefficients: vec![beta1, beta2, beta3],
            rank_fallback: false,
        }
    }

    /// Predicted level from the previous bucket's level and density.
    pub fn predict_next(&self, prev_level: f64, prev_density: f64) -> f64 {
        let c = &self.coefficients;
        match self.variant {
            Variant::Baseline => c[0] * prev_level + c[1],
            Variant::Density => c[0] * prev_level + c[1] * prev_density + c[2],
        }
    }
}

fn design_row(variant: Variant, level: f64, density: f64) -> Vec<f64> {
    match variant {
        Variant::Baseline => vec![level, 1.0],
        Variant::Density => vec![level, density, 1.0],
    }
}

fn ols(variant: Variant, levels: &[f64], densities: &[f64]) -> Result<Vec<f64>, PopularityError> {
    let pairs = levels.len().saturating_sub(1);
    if pairs < variant.min_pairs() {
        return Err(PopularityError::TooFewPairs {
            variant,
            needed: variant.min_pairs(),
            got: pairs,
        });
    }
    let p = variant.arity();
    let rows: Vec<f64> = (1..levels.len())
        .flat_map(|i| design_row(variant, levels[i - 1], densities[i - 1]))
        .collect();
    let x = DMatrix::from_row_slice(pairs, p, &rows);
    let y = DVector::from_column_slice(&levels[1..]);
    let svd = x.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = RANK_TOLERANCE * max_sv.max(f64::MIN_POSITIVE) * pairs as f64;
    if svd.rank(tol) < p {
        return Err(PopularityError::RankDeficient(variant));
    }
    let beta = svd
        .solve(&y, tol)
        .map_err(|_| PopularityError::RankDeficient(variant))?;
    Ok(beta.iter().copied().collect())
}

/// Ordinary least squares on `(level[i-1], density[i-1]) -> level[i]`.
/// A density fit whose design is rank deficient falls back to the baseline
/// and sets `rank_fallback`.
pub fn fit_levels(
    levels: &[f64],
    densities: &[f64],
    variant: Variant,
) -> Result<PopularityModel, PopularityError> {
    if levels.len() != densities.len() {
        return Err(PopularityError::LengthMismatch {
            levels: levels.len(),
            densities: densities.len(),
        });
    }
    match ols(variant, levels, densities) {
        Ok(coefficients) => Ok(PopularityModel {
            variant,
            coefficients,
            rank_fallback: false,
        }),
        Err(PopularityError::RankDeficient(Variant::Density)) => {
            let coefficients = ols(Variant::Baseline, levels, densities)?;
            Ok(PopularityModel {
                variant: Variant::Baseline,
                coefficients,
                rank_fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}

pub fn fit(
    series: &PopularitySeries,
    variant: Variant,
) -> Result<PopularityModel, PopularityError> {
    fit_levels(&series.levels(), &series.densities(), variant)
}

/// Teacher-forced one-step predictions for buckets `1..n`.
pub fn forecast_levels(model: &PopularityModel, levels: &[f64], densities: &[f64]) -> Vec<f64> {
    (1..levels.len())
        .map(|i| model.predict_next(levels[i - 1], densities[i - 1]))
        .collect()
}

pub fn forecast(model: &PopularityModel, series: &PopularitySeries) -> Vec<f64> {
    forecast_levels(model, &series.levels(), &series.densities())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketPrediction {
    pub t_index: usize,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub model: PopularityModel,
    pub n_train_buckets: usize,
    pub rmse: f64,
    pub mae: f64,
    pub test: Vec<BucketPrediction>,
}

/// Fits on the first `round(n * train_fraction)` buckets and scores
/// one-step predictions for the remaining buckets on the level scale.
pub fn evaluate_levels(
    levels: &[f64],
    densities: &[f64],
    variant: Variant,
    train_fraction: f64,
) -> Result<Evaluation, PopularityError> {
    if levels.len() != densities.len() {
        return Err(PopularityError::LengthMismatch {
            levels: levels.len(),
            densities: densities.len(),
        });
    }
    let n = levels.len();
    let n_train = ((n as f64 * train_fraction).round() as usize).min(n);
    let n_test = n - n_train;
    if n_test < 2 {
        return Err(PopularityError::TooFewTestBuckets(n_test));
    }
    let model = fit_levels(&levels[..n_train], &densities[..n_train], variant)?;
    let test: Vec<BucketPrediction> = (n_train..n)
        .map(|i| BucketPrediction {
            t_index: i,
            actual: levels[i],
            predicted: model.predict_next(levels[i - 1], densities[i - 1]),
        })
        .collect();
    let actual: Vec<f64> = test.iter().map(|b| b.actual).collect();
    let predicted: Vec<f64> = test.iter().map(|b| b.predicted).collect();
    let pair = metrics::PairedSeries::new(&predicted, &actual)?;
    Ok(Evaluation {
        model,
        n_train_buckets: n_train,
        rmse: pair.rmse(),
        mae: pair.mae(),
        test,
    })
}

pub fn evaluate(
    series: &PopularitySeries,
    variant: Variant,
    train_fraction: f64,
) -> Result<Evaluation, PopularityError> {
    let mut eval = evaluate_levels(
        &series.levels(),
        &series.densities(),
        variant,
        train_fraction,
    )?;
    for b in &mut eval.test {
        b.t_index = series.buckets[b.t_index].t_index;
    }
    Ok(eval)
}

/// Evaluates every hashtag's series in parallel.
pub fn evaluate_all(
    series: &BTreeMap<String, PopularitySeries>,
    variant: Variant,
    train_fraction: f64,
) -> BTreeMap<String, Result<Evaluation, PopularityError>> {
    series
        .par_iter()
        .map(|(h, s)| (h.clone(), evaluate(s, variant, train_fraction)))
        .collect()
}
