//! Split-half reliability of best-worst judgments, plus a judgment simulator
//! used to check the whole pipeline against known latent scores.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::Tuple4;
use crate::metrics;
use crate::scoring::{aggregate_scores, CountingMode, Judgment, ScoringError};
use crate::{PostId, TupleId};

pub const DEFAULT_REPEATS: usize = 100;
const MIN_SHARED_POSTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("all {repeats} splits were degenerate (fewer than {MIN_SHARED_POSTS} posts scored in both halves)")]
    DegenerateSplits { repeats: usize },
    #[error("no latent score for post {0}")]
    MissingLatent(PostId),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Tuples are shuffled and cut into two halves.
    #[default]
    Random,
    /// Both halves receive every tuple; the correlation is exactly 1. Used as
    /// a sanity check of the correlation path.
    DuplicatedIdentical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShrConfig {
    pub repeats: usize,
    pub seed: u64,
    pub split: SplitMode,
    pub counting: CountingMode,
}

impl ShrConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            repeats: DEFAULT_REPEATS,
            seed,
            split: SplitMode::Random,
            counting: CountingMode::PerJudgment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrResult {
    pub mean_r: f64,
    /// Mean of the Spearman-Brown stepped-up correlations `2r / (1 + r)`,
    /// the reliability projected to the full judgment set.
    pub mean_r_corrected: f64,
    /// Sample standard deviation over the non-degenerate repeats.
    pub std_r: f64,
    /// Non-degenerate repeats that contributed to the mean.
    pub repeats: usize,
    /// Smallest number of posts shared by both halves in a contributing repeat.
    pub n_posts_used: usize,
    pub degenerate_repeats: usize,
}

/// Mean Pearson correlation between scores computed from two random halves
/// of the tuples. Judgments travel with their tuple. Tuples without judgments
/// are ignored. Each repeat draws from its own ChaCha stream of `seed`, so the
/// result does not depend on scheduling.
pub fn split_half_reliability(
    tuples: &[Tuple4],
    judgments: &[Judgment],
    config: &ShrConfig,
) -> Result<ShrResult, ReliabilityError> {
    if config.repeats == 0 {
        return Err(ReliabilityError::NoRepeats);
    }
    aggregate_scores(tuples, judgments, config.counting)?;

    let mut by_tuple: BTreeMap<TupleId, Vec<Judgment>> = BTreeMap::new();
    for j in judgments {
        by_tuple.entry(j.tuple_id).or_default().push(j.clone());
    }
    let judged: Vec<TupleId> = by_tuple.keys().copied().collect();

    let outcomes: Vec<Option<(f64, usize)>> = (0..config.repeats)
        .into_par_iter()
        .map(|repeat| {
            let (half_a, half_b) = match config.split {
                SplitMode::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(repeat as u64);
                    let mut order = judged.clone();
                    order.shuffle(&mut rng);
                    let mid = order.len() / 2;
                    let collect = |ids: &[TupleId]| -> Vec<Judgment> {
                        ids.iter()
                            .flat_map(|t| by_tuple[t].iter().cloned())
                            .collect()
                    };
                    (collect(&order[..mid]), collect(&order[mid..]))
                }
                SplitMode::DuplicatedIdentical => (judgments.to_vec(), judgments.to_vec()),
            };
            half_correlation(tuples, &half_a, &half_b, config.counting)
        })
        .collect();

    let used: Vec<(f64, usize)> = outcomes.iter().flatten().copied().collect();
    let degenerate_repeats = config.repeats - used.len();
    let rs: Vec<f64> = used.iter().map(|(r, _)| *r).collect();
    let (mean_r, std_r) = metrics::mean_and_std(&rs).ok_or(ReliabilityError::DegenerateSplits {
        repeats: config.repeats,
    })?;
    let mean_r_corrected = rs.iter().map(|&r| spearman_brown(r)).sum::<f64>() / rs.len() as f64;
    Ok(ShrResult {
        mean_r,
        mean_r_corrected,
        std_r,
        repeats: used.len(),
        n_posts_used: used.iter().map(|(_, n)| *n).min().unwrap_or(0),
        degenerate_repeats,
    })
}

/// Spearman-Brown prophecy for a test of double length.
pub fn spearman_brown(r: f64) -> f64 {
    if r <= -1.0 {
        -1.0
    } else {
        2.0 * r / (1.0 + r)
    }
}

fn half_correlation(
    tuples: &[Tuple4],
    half_a: &[Judgment],
    half_b: &[Judgment],
    counting: CountingMode,
) -> Option<(f64, usize)> {
    let a = aggregate_scores(tuples, half_a, counting).ok()?;
    let b = aggregate_scores(tuples, half_b, counting).ok()?;
    let b_scores: HashMap<PostId, f64> = b.scores.iter().map(|s| (s.post_id, s.score)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .scores
        .iter()
        .filter_map(|s| b_scores.get(&s.post_id).map(|&y| (s.score, y)))
        .unzip();
    if xs.len() < MIN_SHARED_POSTS {
        return None;
    }
    metrics::pearson(&xs, &ys).ok().map(|r| (r, xs.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub annotators_per_tuple: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Simulated annotators: each perceives `latent + N(0, sigma)` for every post
/// of a tuple and picks the maximum as best and the minimum as worst. Ties go
/// to the lower post id. Annotator `k` of every tuple is named `sim-k`.
pub fn simulate_judgments(
    latent: &[f64],
    tuples: &[Tuple4],
    config: &SimulationConfig,
) -> Result<Vec<Judgment>, ReliabilityError> {
    if !config.noise_sigma.is_finite() || config.noise_sigma < 0.0 {
        return Err(ReliabilityError::InvalidNoise(config.noise_sigma));
    }
    let noise = Normal::new(0.0, config.noise_sigma)
        .map_err(|_| ReliabilityError::InvalidNoise(config.noise_sigma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(tuples.len() * config.annotators_per_tuple);
    for t in tuples {
        for &p in &t.post_ids {
            if p >= latent.len() {
                return Err(ReliabilityError::MissingLatent(p));
            }
        }
        let mut ids = t.post_ids;
        ids.sort_unstable();
        for k in 0..config.annotators_per_tuple {
            let perceived: Vec<f64> = ids
                .iter()
                .map(|&p| latent[p] + noise.sample(&mut rng))
                .collect();
            let (mut best, mut worst) = (0, 0);
            for i in 1..4 {
                if perceived[i] > perceived[best] {
                    best = i;
                }
                if perceived[i] < perceived[worst] {
                    worst = i;
                }
            }
            if best == worst {
                // All four perceived values are equal.
                worst = if best == 0 { 1 } else { 0 };
            }
            out.push(Judgment {
                tuple_id: t.id,
                annotator_id: format!("sim-{k}"),
                best_post_id: ids[best],
                worst_post_id: ids[worst],
                timestamp: 0,
            });
        }
    }
    Ok(out)
}
