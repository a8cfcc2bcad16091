//! Luminance-histogram matcher: normalized histogram, intersection kernel.

use crate::dataset::GrayImage;

use super::Descriptor;

pub(crate) struct Histogram {
    pub bins: usize,
}

impl Descriptor for Histogram {
    fn describe(&self, image: &GrayImage) -> Vec<f64> {
        let mut hist = vec![0.0f64; self.bins];
        for &v in image.pixels() {
            let b = ((v * self.bins as f64) as usize).min(self.bins - 1);
            hist[b] += 1.0;
        }
        let total = image.pixels().len() as f64;
        for h in &mut hist {
            *h /= total;
        }
        hist
    }

    /// Histogram intersection: sum of per-bin minima. Both histograms sum
    /// to 1, so the result is already in `[0,1]`.
    fn similarity(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.min(*y))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    fn min_side(&self) -> usize {
        1
    }
}
