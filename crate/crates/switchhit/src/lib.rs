//! Probabilistic, complementarity-based switching between image matching
//! techniques for visual place recognition.
//!
//! No single matching technique handles every kind of appearance change,
//! but different techniques tend to fail on different queries. This crate
//! predicts, per query, whether the currently running technique will
//! answer correctly and switches to the most complementary alternative
//! when it probably will not:
//!
//! 1. Each technique's matching scores are binned into ten ranges of 0.1.
//!    Training ([`stats`]) records its overall match/mismatch priors and
//!    smoothed within-bin correct/incorrect rates.
//! 2. At query time ([`switch`]) the current technique's score bin yields
//!    a posterior probability of a correct match. At or above the
//!    threshold (default 0.5) the answer is accepted; below it, untried
//!    techniques are ranked by complementarity with the failing technique
//!    at that bin and the best candidate runs next. If every allowed
//!    attempt fails, the attempt with the maximum posterior wins.
//! 3. Evaluation ([`eval`]) compares the switching system against each
//!    technique run alone: correct-match counts, precision-recall curves,
//!    AUC, and the per-query switching pattern.
//!
//! Three self-contained matchers ([`matchers`]) are bundled behind a
//! common interface: tiny-image correlation, fixed-geometry HOG, and
//! luminance-histogram intersection. The [`dataset`] module loads
//! manifest-described image sets and generates synthetic datasets with
//! controllable complementary failure regimes; [`cli`] wires everything
//! into a config-driven `train` / `run` / `eval` / `report` pipeline.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod matchers;
pub mod stats;
pub mod switch;

pub use dataset::{DatasetManifest, GrayImage, SplitSpec, SyntheticSpec};
pub use error::{Error, Result};
pub use eval::{EvalReport, PRPoint};
pub use matchers::{MatchCandidate, MatcherConfig, MatcherIndex, TechniqueId};
pub use stats::{BinIndex, TechniqueProfile};
pub use switch::{SwitchConfig, SwitchTrace};
