//! Area-average image resampling.

use crate::dataset::GrayImage;

/// Resamples to `out_w`x`out_h` by exact area averaging.
///
/// Each output cell averages the source rectangle it covers, weighting
/// partial pixels by overlap. Works for both down- and up-scaling, so
/// matchers accept input images of any size.
pub(crate) fn area_resample(img: &GrayImage, out_w: usize, out_h: usize) -> Vec<f64> {
    assert!(out_w > 0 && out_h > 0);
    let sx = img.width() as f64 / out_w as f64;
    let sy = img.height() as f64 / out_h as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let y0 = oy as f64 * sy;
        let y1 = (oy + 1) as f64 * sy;
        for ox in 0..out_w {
            let x0 = ox as f64 * sx;
            let x1 = (ox + 1) as f64 * sx;
            out.push(box_mean(img, x0, x1, y0, y1));
        }
    }
    out
}

fn box_mean(img: &GrayImage, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let yi0 = y0.floor().max(0.0) as usize;
    let yi1 = (y1.ceil() as usize).min(img.height());
    let xi0 = x0.floor().max(0.0) as usize;
    let xi1 = (x1.ceil() as usize).min(img.width());
    let mut acc = 0.0;
    let mut area = 0.0;
    for y in yi0..yi1 {
        let wy = (y1.min((y + 1) as f64) - y0.max(y as f64)).max(0.0);
        if wy == 0.0 {
            continue;
        }
        for x in xi0..xi1 {
            let wx = (x1.min((x + 1) as f64) - x0.max(x as f64)).max(0.0);
            if wx == 0.0 {
                continue;
            }
            acc += wx * wy * img.get(x, y);
            area += wx * wy;
        }
    }
    if area > 0.0 {
        acc / area
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_sizes_match() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x * 3 + y) as f64 / 12.0);
        let out = area_resample(&img, 4, 3);
        assert_eq!(out, img.pixels());
    }

    #[test]
    fn integer_downscale_averages_blocks() {
        // 4x4 image downsampled 2x: each output is the mean of a 2x2 block.
        let img = GrayImage::from_fn(4, 4, |x, y| if x < 2 && y < 2 { 1.0 } else { 0.0 });
        let out = area_resample(&img, 2, 2);
        assert_eq!(out, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fractional_scale_preserves_mean() {
        let img = GrayImage::from_fn(10, 7, |x, y| ((x * 7 + y * 3) % 11) as f64 / 11.0);
        let src_mean = img.pixels().iter().sum::<f64>() / img.pixels().len() as f64;
        let out = area_resample(&img, 3, 5);
        // The area integral is conserved up to weighting of equal-size cells.
        let out_mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!((src_mean - out_mean).abs() < 1e-12);
    }

    #[test]
    fn upscale_replicates_single_pixel() {
        let img = GrayImage::from_fn(1, 1, |_, _| 0.75);
        let out = area_resample(&img, 4, 4);
        assert!(out.iter().all(|&v| (v - 0.75).abs() < 1e-15));
    }
}
