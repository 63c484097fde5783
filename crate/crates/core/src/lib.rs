//! Best-worst scaling toolkit for complaint-intensity annotation.
//!
//! The crate covers the offline half of the pipeline:
//!
//! - [`corpus`]: cleaning raw social-media posts and applying length filters.
//! - [`design`]: generating balanced, distinct 4-tuples for annotation.
//! - [`scoring`]: turning best/worst judgments into scores on `[-1, 1]`,
//!   screening annotators against gold answers and binning scores.
//! - [`reliability`]: split-half reliability and a judgment simulator.
//! - [`metrics`]: Pearson correlation and error metrics shared by the rest.
//! - [`lexicon`]: valence/arousal lexicon correlations and score distributions.
//! - [`baseline`]: hashed character n-gram features with RBF kernel ridge regression.
//! - [`popularity`]: complaint-density popularity series and log-linear forecasting.
//!
//! The online annotation service lives in the `bws-service` crate.

pub mod baseline;
pub mod corpus;
pub mod design;
pub mod io;
pub mod lexicon;
pub mod metrics;
pub mod popularity;
pub mod reliability;
pub mod scoring;

pub use corpus::{CleaningReport, Post, RawPost};
pub use design::{DesignConfig, DesignStats, Tuple4};
pub use scoring::{IntensityScore, Judgment};

/// Dense post identifier assigned at ingest (`0..n`).
pub type PostId = usize;

/// Tuple identifier.
pub type TupleId = usize;
