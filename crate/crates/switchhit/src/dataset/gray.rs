//! Single-channel luminance images in `[0,1]`.
//!
//! All matchers operate on this representation; color inputs are converted
//! at decode time.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with luminance values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Builds an image, checking the dimension and value invariants.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ImageDimensions(format!("{width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::ImageDimensions(format!(
                "{width}x{height} with {} pixels",
                pixels.len()
            )));
        }
        if let Some(&bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::PixelOutOfRange(bad));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from a generator, clamping each value into `[0,1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    /// Quantizes to 8-bit luminance, the representation used on disk.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect()
    }
}

/// Decodes PNG or PGM bytes into a luminance image.
///
/// Color inputs are converted; this is the untrusted-input entry point the
/// `image_decode` fuzz target drives.
pub fn decode_gray_image(bytes: &[u8]) -> Result<GrayImage> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::ImageDecode {
        path: "<memory>".into(),
        reason: e.to_string(),
    })?;
    let luma = decoded.to_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ImageDimensions(format!("{w}x{h}")));
    }
    let pixels = luma.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    GrayImage::new(w, h, pixels)
}

/// Loads and decodes an image file (PNG or PGM).
pub fn load_gray_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray_image(&bytes).map_err(|e| match e {
        Error::ImageDecode { reason, .. } => Error::ImageDecode {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

/// Writes an image as a binary PGM (P5) file.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(img.width() * img.height() + 32);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    out.extend_from_slice(&img.to_u8());
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
