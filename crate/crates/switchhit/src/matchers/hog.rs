//! Histogram-of-oriented-gradients matcher with fixed geometry.
//!
//! Images are resampled to 64x64 so descriptor length never depends on the
//! input size: 8x8-pixel cells with 9 unsigned orientation bins, grouped
//! into 2x2-cell blocks at stride 1 with L2 block normalization.

use crate::dataset::GrayImage;

use super::resample::area_resample;
use super::Descriptor;

const SIDE: usize = 64;
const CELL: usize = 8;
const ORIENT_BINS: usize = 9;
const BLOCK: usize = 2;
const CELLS: usize = SIDE / CELL;
const BLOCKS: usize = CELLS - BLOCK + 1;

/// 7x7 blocks of 2x2 cells with 9 bins each.
pub(crate) const HOG_LEN: usize = BLOCKS * BLOCKS * BLOCK * BLOCK * ORIENT_BINS;

pub(crate) struct Hog;

impl Descriptor for Hog {
    fn describe(&self, image: &GrayImage) -> Vec<f64> {
        let p = area_resample(image, SIDE, SIDE);
        let at = |x: usize, y: usize| p[y * SIDE + x];

        // Per-cell orientation histograms, magnitude-weighted. Central
        // differences with replicated borders.
        let mut cells = vec![[0.0f64; ORIENT_BINS]; CELLS * CELLS];
        for y in 0..SIDE {
            for x in 0..SIDE {
                let gx = at((x + 1).min(SIDE - 1), y) - at(x.saturating_sub(1), y);
                let gy = at(x, (y + 1).min(SIDE - 1)) - at(x, y.saturating_sub(1));
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let mut angle = gy.atan2(gx).to_degrees();
                if angle < 0.0 {
                    angle += 180.0;
                }
                if angle >= 180.0 {
                    angle -= 180.0;
                }
                let bin = ((angle / (180.0 / ORIENT_BINS as f64)) as usize).min(ORIENT_BINS - 1);
                cells[(y / CELL) * CELLS + x / CELL][bin] += mag;
            }
        }

        // Concatenate 2x2-cell blocks, L2-normalizing each block.
        let mut out = Vec::with_capacity(HOG_LEN);
        for by in 0..BLOCKS {
            for bx in 0..BLOCKS {
                let start = out.len();
                for cy in 0..BLOCK {
                    for cx in 0..BLOCK {
                        out.extend_from_slice(&cells[(by + cy) * CELLS + (bx + cx)]);
                    }
                }
                let norm = out[start..].iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for v in &mut out[start..] {
                        *v /= norm;
                    }
                }
            }
        }
        out
    }

    /// Cosine similarity. Descriptors are non-negative so the value lies in
    /// `[0,1]`; a zero-norm operand scores 0 by convention.
    fn similarity(&self, a: &[f64], b: &[f64]) -> f64 {
        let (dot, norm_a, norm_b) = super::dot_and_norms(a, b);
        if norm_a < super::ZERO_NORM_EPS || norm_b < super::ZERO_NORM_EPS {
            return 0.0;
        }
        (dot / (norm_a * norm_b)).clamp(0.0, 1.0)
    }

    fn min_side(&self) -> usize {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_length_from_geometry() {
        // 64/8 = 8 cells per side, (8-2+1)^2 = 49 blocks, 2*2*9 = 36 values
        // per block.
        assert_eq!(HOG_LEN, 49 * 36);
        assert_eq!(HOG_LEN, 1764);
        let img = GrayImage::from_fn(64, 64, |x, y| ((x ^ y) % 16) as f64 / 16.0);
        assert_eq!(Hog.describe(&img).len(), HOG_LEN);
    }

    #[test]
    fn descriptor_length_is_input_size_independent() {
        let small = GrayImage::from_fn(20, 30, |x, y| ((x + y) % 5) as f64 / 5.0);
        let large = GrayImage::from_fn(200, 100, |x, y| ((x + y) % 5) as f64 / 5.0);
        assert_eq!(Hog.describe(&small).len(), HOG_LEN);
        assert_eq!(Hog.describe(&large).len(), HOG_LEN);
    }

    #[test]
    fn flat_image_has_zero_descriptor_and_zero_similarity() {
        let flat = GrayImage::from_fn(64, 64, |_, _| 0.5);
        let d = Hog.describe(&flat);
        assert!(d.iter().all(|&v| v == 0.0));
        let textured = GrayImage::from_fn(64, 64, |x, _| (x % 2) as f64);
        let t = Hog.describe(&textured);
        assert_eq!(Hog.similarity(&d, &t), 0.0);
        assert_eq!(Hog.similarity(&d, &d), 0.0);
    }

    #[test]
    fn self_similarity_is_one_for_textured_image() {
        let img = GrayImage::from_fn(64, 64, |x, y| ((3 * x + 7 * y) % 11) as f64 / 11.0);
        let d = Hog.describe(&img);
        assert!((Hog.similarity(&d, &d) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_gratings_are_less_similar_than_identical_ones() {
        let horiz = GrayImage::from_fn(64, 64, |_, y| (y % 8) as f64 / 8.0);
        let vert = GrayImage::from_fn(64, 64, |x, _| (x % 8) as f64 / 8.0);
        let dh = Hog.describe(&horiz);
        let dv = Hog.describe(&vert);
        let cross = Hog.similarity(&dh, &dv);
        let same = Hog.similarity(&dh, &dh);
        assert!(cross < same - 0.1, "cross={cross} same={same}");
    }
}
