//! Pluggable matching techniques.
//!
//! A technique turns a reference set into a [`MatcherIndex`] of descriptors
//! and answers each query with a [`MatchCandidate`]: the best reference
//! index plus a similarity score normalized into `[0,1]`, the shared score
//! domain the probability machinery bins over. Three self-contained
//! variants are bundled: tiny-image, HOG, and luminance histogram.

mod hist;
mod hog;
mod resample;
mod tiny;

use serde::{Deserialize, Serialize};

use crate::dataset::GrayImage;
use crate::error::{Error, Result};

/// Two similarities within this distance count as a tie; the lower
/// reference index wins.
pub const TIE_EPS: f64 = 1e-12;

/// Descriptor norms below this count as zero for the zero-variance and
/// zero-norm scoring conventions.
pub(crate) const ZERO_NORM_EPS: f64 = 1e-12;

/// Name identifying one technique within a combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TechniqueId(String);

impl TechniqueId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for TechniqueId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TechniqueId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// A technique's answer for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    /// Index into the reference list (argmax similarity, ties to lowest).
    pub reference_index: usize,
    /// Matching score, clamped into `[0,1]` at emission.
    pub score: f64,
}

/// Matcher variant plus its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatcherConfig {
    /// Downsample to `side`x`side`, mean-subtract, score by
    /// `(1 + Pearson)/2`.
    TinyImage { side: usize },
    /// Fixed-geometry HOG (resample 64x64, 8px cells, 9 unsigned bins,
    /// 2x2-cell blocks, stride 1, L2 normalization), cosine score.
    Hog,
    /// `bins`-bin luminance histogram, histogram-intersection score.
    Histogram { bins: usize },
}

impl MatcherConfig {
    pub const DEFAULT_TINY_SIDE: usize = 8;
    pub const DEFAULT_HISTOGRAM_BINS: usize = 32;

    pub fn tiny_image() -> Self {
        Self::TinyImage {
            side: Self::DEFAULT_TINY_SIDE,
        }
    }

    pub fn hog() -> Self {
        Self::Hog
    }

    pub fn histogram() -> Self {
        Self::Histogram {
            bins: Self::DEFAULT_HISTOGRAM_BINS,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::TinyImage { .. } => "tiny-image",
            Self::Hog => "hog",
            Self::Histogram { .. } => "histogram",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::TinyImage { side } if side < 2 => Err(Error::MatcherParams(format!(
                "tiny-image side must be at least 2, got {side}"
            ))),
            Self::Histogram { bins } if bins < 2 => Err(Error::MatcherParams(format!(
                "histogram bins must be at least 2, got {bins}"
            ))),
            _ => Ok(()),
        }
    }

    fn descriptor(&self) -> Box<dyn Descriptor> {
        match *self {
            Self::TinyImage { side } => Box::new(tiny::TinyImage { side }),
            Self::Hog => Box::new(hog::Hog),
            Self::Histogram { bins } => Box::new(hist::Histogram { bins }),
        }
    }
}

/// Descriptor extraction and scoring for one matcher variant.
pub(crate) trait Descriptor: Send + Sync {
    fn describe(&self, image: &GrayImage) -> Vec<f64>;
    /// Similarity of two descriptors, already normalized into `[0,1]`.
    fn similarity(&self, a: &[f64], b: &[f64]) -> f64;
    fn min_side(&self) -> usize;
}

pub(crate) fn dot_and_norms(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    (dot, na.sqrt(), nb.sqrt())
}

/// Immutable per-reference descriptors for one technique.
///
/// Safe to share across threads; [`MatcherIndex::best_match`] is pure.
pub struct MatcherIndex {
    config: MatcherConfig,
    descriptor: Box<dyn Descriptor>,
    references: Vec<Vec<f64>>,
}

impl std::fmt::Debug for MatcherIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatcherIndex")
            .field("config", &self.config)
            .field("references", &self.references.len())
            .finish()
    }
}

/// Precomputes one descriptor per reference image, in order.
pub fn index_references(config: &MatcherConfig, references: &[GrayImage]) -> Result<MatcherIndex> {
    config.validate()?;
    if references.is_empty() {
        return Err(Error::EmptyReferenceList);
    }
    let descriptor = config.descriptor();
    let min_side = descriptor.min_side();
    for img in references {
        if img.width() < min_side || img.height() < min_side {
            return Err(Error::ImageTooSmall {
                variant: config.variant_name(),
                width: img.width(),
                height: img.height(),
                min_side,
            });
        }
    }
    let refs = references.iter().map(|r| descriptor.describe(r)).collect();
    Ok(MatcherIndex {
        config: config.clone(),
        descriptor,
        references: refs,
    })
}

impl MatcherIndex {
    pub fn config(&self) -> &MatcherConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn descriptor_len(&self) -> usize {
        self.references[0].len()
    }

    /// Scores the query against every reference and returns the argmax.
    /// Similarities within [`TIE_EPS`] of the running best keep the lower
    /// index.
    pub fn best_match(&self, query: &GrayImage) -> MatchCandidate {
        let q = self.descriptor.describe(query);
        let mut best_index = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, r) in self.references.iter().enumerate() {
            let s = self.descriptor.similarity(&q, r);
            if s > best_score + TIE_EPS {
                best_score = s;
                best_index = i;
            }
        }
        MatchCandidate {
            reference_index: best_index,
            score: best_score.clamp(0.0, 1.0),
        }
    }
}
