//! Procedural dataset generator with controllable failure regimes.
//!
//! References are blocky tile patterns: every 8x8-pixel block carries a
//! random base luminance plus a shallow linear ramp in a random direction.
//! The three descriptor families therefore separate references on
//! different cues: block means (tiny-image), the luminance distribution
//! (histogram), and per-block ramp orientations (HOG).
//!
//! Each query is its ground-truth reference plus mild pixel noise, and a
//! regime may additionally perturb a contiguous range of queries to
//! degrade one matcher family while leaving others intact:
//!
//! - brightness shift moves the whole histogram away from every
//!   reference's palette while (below clipping) leaving Pearson
//!   correlation and gradient orientations unchanged — it defeats the
//!   histogram matcher; at full severity the shift saturates the whole
//!   image to white, flattening it and degrading every matcher;
//! - occlusion overwrites a fraction of blocks with copies of other
//!   blocks of the same image, destroying block layout (tiny-image, HOG)
//!   while approximately preserving the pixel-value distribution
//!   (histogram);
//! - blur pulls luminance toward the local mean, collapsing the
//!   histogram and weakening gradient structure (HOG); block means
//!   survive, so tiny-image does too.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gray::{write_pgm, GrayImage};
use super::{DatasetManifest, ManifestDoc, QueryDoc, QueryEntry};
use crate::error::{Error, Result};

const BLOCK_PX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    Blur,
    BrightnessShift,
    Occlusion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    /// Strength in `[0,1]`: the luminance shift itself (1.0 saturates the
    /// whole image), blur radius of up to 8 px, or occluded block
    /// fraction.
    pub severity: f64,
}

/// A contiguous query range `[start, end)` perturbed to degrade one
/// matcher family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRegime {
    pub start: usize,
    pub end: usize,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_queries: usize,
    pub n_refs: usize,
    /// Square image side in pixels; must be a multiple of 8.
    pub image_size: usize,
    pub seed: u64,
    pub regimes: Vec<SyntheticRegime>,
}

impl SyntheticSpec {
    pub fn new(n_queries: usize, n_refs: usize, seed: u64) -> Self {
        Self {
            n_queries,
            n_refs,
            image_size: 64,
            seed,
            regimes: Vec::new(),
        }
    }

    pub fn with_regime(mut self, regime: SyntheticRegime) -> Self {
        self.regimes.push(regime);
        self
    }

    /// Two-regime construction where each half of the query range defeats
    /// exactly one matcher: a moderate brightness shift (no clipping)
    /// defeats the histogram matcher on the first half, and block
    /// occlusion defeats the tiny-image matcher on the second half.
    pub fn complementary_pair(n_queries: usize, n_refs: usize, seed: u64) -> Self {
        let half = n_queries / 2;
        Self::new(n_queries, n_refs, seed)
            .with_regime(SyntheticRegime {
                start: 0,
                end: half,
                perturbation: Perturbation {
                    kind: PerturbationKind::BrightnessShift,
                    severity: 0.4,
                },
            })
            .with_regime(SyntheticRegime {
                start: half,
                end: n_queries,
                perturbation: Perturbation {
                    kind: PerturbationKind::Occlusion,
                    severity: 0.85,
                },
            })
    }

    fn validate(&self) -> Result<()> {
        if self.n_queries < 2 || self.n_refs < 2 {
            return Err(Error::SyntheticParams(format!(
                "need at least 2 queries and 2 references, got {} and {}",
                self.n_queries, self.n_refs
            )));
        }
        if self.image_size < 2 * BLOCK_PX || !self.image_size.is_multiple_of(BLOCK_PX) {
            return Err(Error::SyntheticParams(format!(
                "image_size must be a multiple of {BLOCK_PX} and at least {}, got {}",
                2 * BLOCK_PX,
                self.image_size
            )));
        }
        for r in &self.regimes {
            if r.start >= r.end || r.end > self.n_queries {
                return Err(Error::SyntheticParams(format!(
                    "regime range {}..{} invalid for {} queries",
                    r.start, r.end, self.n_queries
                )));
            }
            if !(0.0..=1.0).contains(&r.perturbation.severity) {
                return Err(Error::SyntheticParams(format!(
                    "severity {} outside [0,1]",
                    r.perturbation.severity
                )));
            }
        }
        Ok(())
    }
}

fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 over a stream/index-tagged state
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0xA0761D6478BD642F))
        .wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-block ramp parameters keep all pixel values in roughly
/// `[0.01, 0.58]`, leaving headroom for a 0.4 brightness shift before
/// clipping.
fn reference_pattern(size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let blocks = size / BLOCK_PX;
    let mut pixels = vec![0.0f64; size * size];
    for by in 0..blocks {
        for bx in 0..blocks {
            let base: f64 = rng.random_range(0.08..0.50);
            let amp: f64 = rng.random_range(0.02..0.05);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (sin_t, cos_t) = theta.sin_cos();
            let half = (BLOCK_PX - 1) as f64 / 2.0;
            for v in 0..BLOCK_PX {
                for u in 0..BLOCK_PX {
                    let du = (u as f64 - half) / half;
                    let dv = (v as f64 - half) / half;
                    let val = base + amp * (du * cos_t + dv * sin_t);
                    pixels[(by * BLOCK_PX + v) * size + bx * BLOCK_PX + u] = val.clamp(0.0, 1.0);
                }
            }
        }
    }
    pixels
}

fn apply_brightness(pixels: &mut [f64], severity: f64) {
    for p in pixels.iter_mut() {
        *p = (*p + severity).clamp(0.0, 1.0);
    }
}

fn apply_blur(pixels: &mut [f64], size: usize, severity: f64) {
    let radius = ((severity * 8.0).round() as usize).max(1);
    for _ in 0..2 {
        // horizontal then vertical box pass with clamped borders
        let mut tmp = vec![0.0f64; pixels.len()];
        for y in 0..size {
            for x in 0..size {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius).min(size - 1);
                let sum: f64 = (lo..=hi).map(|i| pixels[y * size + i]).sum();
                tmp[y * size + x] = sum / (hi - lo + 1) as f64;
            }
        }
        for y in 0..size {
            for x in 0..size {
                let lo = y.saturating_sub(radius);
                let hi = (y + radius).min(size - 1);
                let sum: f64 = (lo..=hi).map(|i| tmp[i * size + x]).sum();
                pixels[y * size + x] = sum / (hi - lo + 1) as f64;
            }
        }
    }
}

fn apply_occlusion(pixels: &mut [f64], size: usize, severity: f64, rng: &mut ChaCha8Rng) {
    let blocks = size / BLOCK_PX;
    let n_blocks = blocks * blocks;
    let n_occluded = ((n_blocks as f64 * severity).round() as usize).min(n_blocks);
    if n_occluded == 0 {
        return;
    }
    let mut targets: Vec<usize> = (0..n_blocks).collect();
    use rand::seq::SliceRandom;
    targets.shuffle(rng);
    let original = pixels.to_vec();
    for &target in targets.iter().take(n_occluded) {
        let source = rng.random_range(0..n_blocks);
        let (tx, ty) = (target % blocks, target / blocks);
        let (sx, sy) = (source % blocks, source / blocks);
        for v in 0..BLOCK_PX {
            for u in 0..BLOCK_PX {
                pixels[(ty * BLOCK_PX + v) * size + tx * BLOCK_PX + u] =
                    original[(sy * BLOCK_PX + v) * size + sx * BLOCK_PX + u];
            }
        }
    }
}

/// Generates a dataset under `out_dir`: `refs/` and `queries/` image
/// directories plus a `manifest.json`, all deterministic per seed.
/// Query `j` has ground truth `j % n_refs` and tolerance 0.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let refs_dir = out_dir.join("refs");
    let queries_dir = out_dir.join("queries");
    std::fs::create_dir_all(&refs_dir).map_err(|e| Error::io(&refs_dir, e))?;
    std::fs::create_dir_all(&queries_dir).map_err(|e| Error::io(&queries_dir, e))?;

    let size = spec.image_size;
    let mut references = Vec::with_capacity(spec.n_refs);
    let mut ref_names = Vec::with_capacity(spec.n_refs);
    for i in 0..spec.n_refs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1, i as u64));
        let pixels = reference_pattern(size, &mut rng);
        let img = GrayImage::new(size, size, pixels)?;
        let name = format!("refs/ref_{i:04}.pgm");
        write_pgm(&img, &out_dir.join(&name))?;
        references.push(img);
        ref_names.push(name);
    }

    let mut query_docs = Vec::with_capacity(spec.n_queries);
    let mut query_entries = Vec::with_capacity(spec.n_queries);
    for j in 0..spec.n_queries {
        let gt = j % spec.n_refs;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2, j as u64));
        let mut pixels: Vec<f64> = references[gt]
            .pixels()
            .iter()
            .map(|&p| (p + rng.random_range(-0.01..0.01)).clamp(0.0, 1.0))
            .collect();
        for regime in &spec.regimes {
            if j < regime.start || j >= regime.end {
                continue;
            }
            match regime.perturbation.kind {
                PerturbationKind::BrightnessShift => {
                    apply_brightness(&mut pixels, regime.perturbation.severity)
                }
                PerturbationKind::Blur => {
                    apply_blur(&mut pixels, size, regime.perturbation.severity)
                }
                PerturbationKind::Occlusion => {
                    apply_occlusion(&mut pixels, size, regime.perturbation.severity, &mut rng)
                }
            }
        }
        let img = GrayImage::new(size, size, pixels)?;
        let name = format!("queries/query_{j:04}.pgm");
        write_pgm(&img, &out_dir.join(&name))?;
        query_docs.push(QueryDoc {
            image: name.clone(),
            gt,
        });
        query_entries.push(QueryEntry {
            image: out_dir.join(&name),
            gt,
        });
    }

    let doc = ManifestDoc {
        references: ref_names.clone(),
        queries: query_docs,
        tolerance: 0,
    };
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&doc).expect("manifest serialization cannot fail");
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(DatasetManifest {
        queries: query_entries,
        references: ref_names.iter().map(|n| out_dir.join(n)).collect(),
        tolerance: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_manifest;

    #[test]
    fn rejects_degenerate_parameters() {
        let bad_counts = SyntheticSpec::new(1, 2, 0);
        assert!(matches!(
            generate_synthetic(&bad_counts, Path::new("/nonexistent")),
            Err(Error::SyntheticParams(_))
        ));
        let mut bad_size = SyntheticSpec::new(4, 2, 0);
        bad_size.image_size = 20;
        assert!(matches!(
            generate_synthetic(&bad_size, Path::new("/nonexistent")),
            Err(Error::SyntheticParams(_))
        ));
        let bad_regime = SyntheticSpec::new(4, 2, 0).with_regime(SyntheticRegime {
            start: 2,
            end: 9,
            perturbation: Perturbation {
                kind: PerturbationKind::Blur,
                severity: 0.5,
            },
        });
        assert!(matches!(
            generate_synthetic(&bad_regime, Path::new("/nonexistent")),
            Err(Error::SyntheticParams(_))
        ));
    }

    #[test]
    fn generation_is_byte_identical_per_seed() {
        let spec = SyntheticSpec::complementary_pair(6, 3, 42);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_synthetic(&spec, dir_a.path()).unwrap();
        generate_synthetic(&spec, dir_b.path()).unwrap();

        let mut names = vec!["manifest.json".to_owned()];
        for i in 0..3 {
            names.push(format!("refs/ref_{i:04}.pgm"));
        }
        for j in 0..6 {
            names.push(format!("queries/query_{j:04}.pgm"));
        }
        for name in names {
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "file {name} differs between runs");
        }
    }

    #[test]
    fn different_seeds_differ() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_synthetic(&SyntheticSpec::new(2, 2, 1), dir_a.path()).unwrap();
        generate_synthetic(&SyntheticSpec::new(2, 2, 2), dir_b.path()).unwrap();
        let a = std::fs::read(dir_a.path().join("refs/ref_0000.pgm")).unwrap();
        let b = std::fs::read(dir_b.path().join("refs/ref_0000.pgm")).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn generated_manifest_round_trips_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec::new(5, 3, 11);
        let generated = generate_synthetic(&spec, dir.path()).unwrap();
        let loaded = load_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(generated, loaded);
        assert_eq!(loaded.queries.len(), 5);
        assert_eq!(loaded.references.len(), 3);
        // Exactly one ground-truth reference per query, always in range.
        for (j, q) in loaded.queries.iter().enumerate() {
            assert_eq!(q.gt, j % 3);
        }
    }

    #[test]
    fn brightness_shift_moves_all_pixels() {
        let mut pixels = vec![0.1, 0.3, 0.5];
        apply_brightness(&mut pixels, 0.4);
        for (p, orig) in pixels.iter().zip([0.1, 0.3, 0.5]) {
            assert!((p - (orig + 0.4)).abs() < 1e-12);
        }
        // Full severity saturates everything: the image goes flat.
        let mut clipped = vec![0.0, 0.5, 0.9];
        apply_brightness(&mut clipped, 1.0);
        assert_eq!(clipped, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn occlusion_preserves_pixel_multiset_approximately() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let size = 32;
        let original = reference_pattern(size, &mut rng);
        let mut occluded = original.clone();
        let mut prng = ChaCha8Rng::seed_from_u64(4);
        apply_occlusion(&mut occluded, size, 0.85, &mut prng);
        assert_ne!(original, occluded);
        // Every occluded value is copied from somewhere in the original.
        let mut sorted = original.clone();
        sorted.sort_by(f64::total_cmp);
        for v in &occluded {
            assert!(sorted.binary_search_by(|x| x.total_cmp(v)).is_ok());
        }
    }

    #[test]
    fn blur_smooths_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let size = 32;
        let original = reference_pattern(size, &mut rng);
        let mut blurred = original.clone();
        apply_blur(&mut blurred, size, 0.8);
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        assert!(var(&blurred) < var(&original) * 0.5);
    }
}
