//! Valence/arousal lexicon correlations and score distribution reports.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Post, Tokenizer, WordList};
use crate::metrics;
use crate::scoring::{bin_score, IntensityScore};
use crate::PostId;

pub const VALENCE_RANGE: (f64, f64) = (-3.0, 3.0);
pub const AROUSAL_RANGE: (f64, f64) = (0.0, 4.0);
pub const HIGH_VALENCE_ABOVE: f64 = 2.0;
pub const LOW_VALENCE_BELOW: f64 = -2.0;
pub const HIGH_AROUSAL_ABOVE: f64 = 3.0;
pub const LOW_AROUSAL_BELOW: f64 = 2.0;

const MIN_POSTS_PER_DIMENSION: usize = 3;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {field} {value} outside [{min}, {max}]")]
    Range {
        line: usize,
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("line {line}: duplicate word {word:?}")]
    Duplicate { line: usize, word: String },
    #[error(
        "{dimension}: only {available} posts have lexicon matches, need {MIN_POSTS_PER_DIMENSION}"
    )]
    InsufficientData {
        dimension: Dimension,
        available: usize,
    },
    #[error("{dimension}: {source}")]
    Metrics {
        dimension: Dimension,
        #[source]
        source: metrics::MetricsError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub valence: f64,
    pub arousal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    HighValence,
    LowValence,
    HighArousal,
    LowArousal,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::HighValence,
        Dimension::LowValence,
        Dimension::HighArousal,
        Dimension::LowArousal,
    ];

    /// Membership test; thresholds are strict.
    pub fn contains(self, entry: &LexiconEntry) -> bool {
        match self {
            Dimension::HighValence => entry.valence > HIGH_VALENCE_ABOVE,
            Dimension::LowValence => entry.valence < LOW_VALENCE_BELOW,
            Dimension::HighArousal => entry.arousal > HIGH_AROUSAL_ABOVE,
            Dimension::LowArousal => entry.arousal < LOW_AROUSAL_BELOW,
        }
    }

    /// The rating averaged for this set: valence for valence sets, arousal
    /// for arousal sets.
    pub fn rating(self, entry: &LexiconEntry) -> f64 {
        match self {
            Dimension::HighValence | Dimension::LowValence => entry.valence,
            Dimension::HighArousal | Dimension::LowArousal => entry.arousal,
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dimension::HighValence => "high valence",
            Dimension::LowValence => "low valence",
            Dimension::HighArousal => "high arousal",
            Dimension::LowArousal => "low arousal",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionSets {
    pub high_valence: HashSet<String>,
    pub low_valence: HashSet<String>,
    pub high_arousal: HashSet<String>,
    pub low_arousal: HashSet<String>,
}

impl DimensionSets {
    pub fn get(&self, dimension: Dimension) -> &HashSet<String> {
        match dimension {
            Dimension::HighValence => &self.high_valence,
            Dimension::LowValence => &self.low_valence,
            Dimension::HighArousal => &self.high_arousal,
            Dimension::LowArousal => &self.low_arousal,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
    words: WordList,
}

impl Lexicon {
    /// Builds a lexicon, validating ranges and uniqueness. Line numbers in
    /// errors are 1-based positions in `entries` offset by one for a header.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let line = i + 2;
            check_range(line, "valence", e.valence, VALENCE_RANGE)?;
            check_range(line, "arousal", e.arousal, AROUSAL_RANGE)?;
            if index.insert(e.word.clone(), i).is_some() {
                return Err(LexiconError::Duplicate {
                    line,
                    word: e.word.clone(),
                });
            }
        }
        let words = WordList::new(entries.iter().map(|e| e.word.clone()));
        Ok(Self {
            entries,
            index,
            words,
        })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.index.get(word).map(|&i| &self.entries[i])
    }

    pub fn words(&self) -> &WordList {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimension_sets(&self) -> DimensionSets {
        let mut sets = DimensionSets::default();
        for e in &self.entries {
            for d in Dimension::ALL {
                if d.contains(e) {
                    let set = match d {
                        Dimension::HighValence => &mut sets.high_valence,
                        Dimension::LowValence => &mut sets.low_valence,
                        Dimension::HighArousal => &mut sets.high_arousal,
                        Dimension::LowArousal => &mut sets.low_arousal,
                    };
                    set.insert(e.word.clone());
                }
            }
        }
        sets
    }
}

fn check_range(
    line: usize,
    field: &'static str,
    value: f64,
    (min, max): (f64, f64),
) -> Result<(), LexiconError> {
    if !(min..=max).contains(&value) {
        return Err(LexiconError::Range {
            line,
            field,
            value,
            min,
            max,
        });
    }
    Ok(())
}

/// Reads a `word,valence,arousal` CSV.
pub fn read_lexicon<R: Read>(reader: R) -> Result<Lexicon, LexiconError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| LexiconError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["word", "valence", "arousal"];
    if headers.len() < 3 || headers.iter().take(3).ne(expected) {
        return Err(LexiconError::Parse {
            line: 1,
            message: format!("expected header word,valence,arousal, got {headers:?}"),
        });
    }
    let mut entries = Vec::new();
    for (i, record) in r.deserialize::<LexiconEntry>().enumerate() {
        let line = i + 2;
        let entry = record.map_err(|e| LexiconError::Parse {
            line,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Lexicon::new(entries)
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    read_lexicon(std::fs::File::open(path)?)
}

/// Mean rating of the post's tokens that belong to `dimension`, or `None`
/// when no token matches. Tokens come from longest-match segmentation.
pub fn post_dimension_mean(text: &str, dimension: Dimension, lexicon: &Lexicon) -> Option<f64> {
    let tokens = tokenize(text, Tokenizer::LongestMatch(lexicon.words()));
    tokens_dimension_mean(&tokens, dimension, lexicon)
}

pub fn tokens_dimension_mean(
    tokens: &[&str],
    dimension: Dimension,
    lexicon: &Lexicon,
) -> Option<f64> {
    let (sum, count) = tokens
        .iter()
        .filter_map(|t| lexicon.get(t))
        .filter(|e| dimension.contains(e))
        .fold((0.0, 0usize), |(s, c), e| (s + dimension.rating(e), c + 1));
    (count > 0).then(|| sum / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionCorrelation {
    pub dimension: Dimension,
    pub pearson: f64,
    pub n_used: usize,
    /// Posts skipped because no token matched the dimension.
    pub n_excluded: usize,
}

/// Pearson correlation between per-post dimension means and intensity, per
/// dimension. Posts without a score or without matching tokens are left out
/// of that dimension.
pub fn correlate_dimensions(
    posts: &[Post],
    scores: &[IntensityScore],
    lexicon: &Lexicon,
) -> Vec<(Dimension, Result<DimensionCorrelation, LexiconError>)> {
    let score_of: HashMap<PostId, f64> = scores.iter().map(|s| (s.post_id, s.score)).collect();
    let scored: Vec<(Vec<&str>, f64)> = posts
        .iter()
        .filter_map(|p| {
            score_of.get(&p.id).map(|&s| {
                (
                    tokenize(&p.text, Tokenizer::LongestMatch(lexicon.words())),
                    s,
                )
            })
        })
        .collect();

    Dimension::ALL
        .into_iter()
        .map(|dimension| {
            let (means, intensity): (Vec<f64>, Vec<f64>) = scored
                .iter()
                .filter_map(|(tokens, s)| {
                    tokens_dimension_mean(tokens, dimension, lexicon).map(|m| (m, *s))
                })
                .unzip();
            let result = if means.len() < MIN_POSTS_PER_DIMENSION {
                Err(LexiconError::InsufficientData {
                    dimension,
                    available: means.len(),
                })
            } else {
                metrics::pearson(&means, &intensity)
                    .map(|pearson| DimensionCorrelation {
                        dimension,
                        pearson,
                        n_used: means.len(),
                        n_excluded: scored.len() - means.len(),
                    })
                    .map_err(|source| LexiconError::Metrics { dimension, source })
            };
            (dimension, result)
        })
        .collect()
}

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    /// Posts per score bin 1..=5 (index 0 is bin 1).
    pub bin_counts: [usize; 5],
    /// Mean token count per bin; `None` for empty bins.
    pub bin_mean_length: [Option<f64>; 5],
    pub mean_length_positive: Option<f64>,
    pub mean_length_negative: Option<f64>,
    /// Fine histogram over `[-1, 1]` with width 0.1 for plotting.
    pub histogram: Vec<HistogramBin>,
    /// Posts skipped because they have no score.
    pub n_unscored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl DistributionReport {
    /// Bin (1..=5) with the most posts; ties go to the lower bin.
    pub fn modal_bin(&self) -> u8 {
        let mut best = 0;
        for i in 1..5 {
            if self.bin_counts[i] > self.bin_counts[best] {
                best = i;
            }
        }
        best as u8 + 1
    }
}

pub fn distribution_report(posts: &[Post], scores: &[IntensityScore]) -> DistributionReport {
    let score_of: HashMap<PostId, f64> = scores.iter().map(|s| (s.post_id, s.score)).collect();
    let mut bin_counts = [0usize; 5];
    let mut bin_lengths = [0usize; 5];
    let (mut pos_sum, mut pos_n, mut neg_sum, mut neg_n) = (0usize, 0usize, 0usize, 0usize);
    let mut hist = vec![0usize; HISTOGRAM_BINS];
    let mut n_unscored = 0;
    for p in posts {
        let Some(&s) = score_of.get(&p.id) else {
            n_unscored += 1;
            continue;
        };
        let Ok(bin) = bin_score(s) else {
            n_unscored += 1;
            continue;
        };
        let b = bin as usize - 1;
        bin_counts[b] += 1;
        bin_lengths[b] += p.token_count;
        if s > 0.0 {
            pos_sum += p.token_count;
            pos_n += 1;
        } else if s < 0.0 {
            neg_sum += p.token_count;
            neg_n += 1;
        }
        let h =
            (((s + 1.0) / 2.0 * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1);
        hist[h] += 1;
    }
    let mean = |sum: usize, n: usize| (n > 0).then(|| sum as f64 / n as f64);
    let width = 2.0 / HISTOGRAM_BINS as f64;
    DistributionReport {
        bin_counts,
        bin_mean_length: std::array::from_fn(|i| mean(bin_lengths[i], bin_counts[i])),
        mean_length_positive: mean(pos_sum, pos_n),
        mean_length_negative: mean(neg_sum, neg_n),
        histogram: hist
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                lower: -1.0 + i as f64 * width,
                upper: -1.0 + (i + 1) as f64 * width,
                count,
            })
            .collect(),
        n_unscored,
    }
}
