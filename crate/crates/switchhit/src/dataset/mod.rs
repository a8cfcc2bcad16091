//! Dataset loading, train/test splitting, and synthetic generation.
//!
//! A dataset is described by a JSON manifest listing reference images,
//! query images with their ground-truth reference indices, and an integer
//! tolerance window: a retrieval counts as correct when the retrieved
//! index is within `tolerance` of the ground truth.

mod gray;
mod synthetic;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gray::{decode_gray_image, load_gray_image, write_pgm, GrayImage};
pub use synthetic::{
    generate_synthetic, Perturbation, PerturbationKind, SyntheticRegime, SyntheticSpec,
};

use crate::error::{Error, Result};

/// One query image and its ground-truth reference index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryEntry {
    pub image: PathBuf,
    pub gt: usize,
}

/// Validated dataset description with image paths resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub queries: Vec<QueryEntry>,
    pub references: Vec<PathBuf>,
    /// Frame window within which a retrieved index counts as correct.
    pub tolerance: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ManifestDoc {
    pub references: Vec<String>,
    pub queries: Vec<QueryDoc>,
    pub tolerance: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct QueryDoc {
    pub image: String,
    pub gt: usize,
}

/// Parses and structurally validates a manifest document. Paths stay as
/// written; [`load_manifest`] resolves them against the manifest's
/// directory. This is the untrusted-input entry point the `manifest_json`
/// fuzz target drives.
pub fn parse_manifest_str(json: &str) -> Result<DatasetManifest> {
    let doc: ManifestDoc =
        serde_json::from_str(json).map_err(|e| Error::ManifestParse(e.to_string()))?;
    if doc.queries.is_empty() {
        return Err(Error::EmptyDataset("no queries"));
    }
    if doc.references.is_empty() {
        return Err(Error::EmptyDataset("no references"));
    }
    for (i, q) in doc.queries.iter().enumerate() {
        if q.gt >= doc.references.len() {
            return Err(Error::GroundTruthOutOfRange {
                query: i,
                gt: q.gt,
                n_refs: doc.references.len(),
            });
        }
    }
    Ok(DatasetManifest {
        queries: doc
            .queries
            .into_iter()
            .map(|q| QueryEntry {
                image: PathBuf::from(q.image),
                gt: q.gt,
            })
            .collect(),
        references: doc.references.into_iter().map(PathBuf::from).collect(),
        tolerance: doc.tolerance,
    })
}

/// Loads a manifest file, resolves image paths against its directory, and
/// verifies that every referenced image exists and decodes.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = parse_manifest_str(&json)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    for r in &mut manifest.references {
        *r = base.join(&*r);
    }
    for q in &mut manifest.queries {
        q.image = base.join(&q.image);
    }
    for r in &manifest.references {
        load_gray_image(r)?;
    }
    for q in &manifest.queries {
        load_gray_image(&q.image)?;
    }
    Ok(manifest)
}

impl DatasetManifest {
    pub fn load_references(&self) -> Result<Vec<GrayImage>> {
        self.references.iter().map(|p| load_gray_image(p)).collect()
    }

    pub fn load_queries(&self) -> Result<Vec<GrayImage>> {
        self.queries
            .iter()
            .map(|q| load_gray_image(&q.image))
            .collect()
    }

    pub fn gt_indices(&self) -> Vec<usize> {
        self.queries.iter().map(|q| q.gt).collect()
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Fraction of queries assigned to the train side, in `(0,1)`.
    pub train_fraction: f64,
    pub seed: u64,
}

/// Splits the queries into disjoint train and test manifests.
///
/// Deterministic for a fixed seed. The reference set and tolerance are
/// shared by both sides; query order within each side follows the original
/// manifest. Rounding is clamped so both sides are non-empty for any
/// manifest with at least two queries.
pub fn split(
    manifest: &DatasetManifest,
    spec: &SplitSpec,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let n = manifest.queries.len();
    if n < 2 {
        return Err(Error::TooFewQueries(n));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidTrainFraction(spec.train_fraction));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let n_train = ((n as f64 * spec.train_fraction).round() as usize).clamp(1, n - 1);
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| DatasetManifest {
        queries: idx.iter().map(|&i| manifest.queries[i].clone()).collect(),
        references: manifest.references.clone(),
        tolerance: manifest.tolerance,
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}
