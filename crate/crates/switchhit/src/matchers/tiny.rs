//! Tiny-image matcher: downsample, mean-subtract, Pearson correlation.

use crate::dataset::GrayImage;

use super::resample::area_resample;
use super::Descriptor;

pub(crate) struct TinyImage {
    pub side: usize,
}

impl Descriptor for TinyImage {
    fn describe(&self, image: &GrayImage) -> Vec<f64> {
        let mut v = area_resample(image, self.side, self.side);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for p in &mut v {
            *p -= mean;
        }
        v
    }

    /// `(1 + Pearson correlation) / 2`. The descriptors are mean-centered,
    /// so Pearson reduces to the cosine of the centered vectors. A
    /// zero-variance operand makes the correlation 0 by convention, giving
    /// the uninformative midpoint score 0.5. Mean subtraction leaves
    /// rounding residue on constant images, so "zero" is norm below
    /// [`super::ZERO_NORM_EPS`].
    fn similarity(&self, a: &[f64], b: &[f64]) -> f64 {
        let (dot, norm_a, norm_b) = super::dot_and_norms(a, b);
        let corr = if norm_a < super::ZERO_NORM_EPS || norm_b < super::ZERO_NORM_EPS {
            0.0
        } else {
            dot / (norm_a * norm_b)
        };
        ((1.0 + corr) / 2.0).clamp(0.0, 1.0)
    }

    fn min_side(&self) -> usize {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc() -> TinyImage {
        TinyImage { side: 8 }
    }

    #[test]
    fn descriptor_length_is_side_squared() {
        let img = GrayImage::from_fn(32, 20, |x, y| ((x + y) % 7) as f64 / 7.0);
        assert_eq!(desc().describe(&img).len(), 64);
    }

    #[test]
    fn self_similarity_is_one() {
        let img = GrayImage::from_fn(16, 16, |x, y| ((x * 13 + y * 5) % 9) as f64 / 9.0);
        let d = desc().describe(&img);
        assert!((desc().similarity(&d, &d) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_scores_midpoint() {
        let flat = GrayImage::from_fn(8, 8, |_, _| 0.3);
        let other = GrayImage::from_fn(8, 8, |x, _| x as f64 / 8.0);
        let a = desc().describe(&flat);
        let b = desc().describe(&other);
        assert_eq!(desc().similarity(&a, &b), 0.5);
        assert_eq!(desc().similarity(&a, &a), 0.5);
    }

    #[test]
    fn anticorrelated_scores_zero() {
        let img = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 1.0 } else { 0.0 });
        let inv = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 1.0 });
        let a = desc().describe(&img);
        let b = desc().describe(&inv);
        assert!(desc().similarity(&a, &b) < 1e-9);
    }
}
