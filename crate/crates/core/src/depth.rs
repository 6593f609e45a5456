//! Depth images: per-pixel range in millimetres, 0 = no return / background.
//!
//! On disk a depth image is a 16-bit grayscale PNG holding integer
//! millimetres (the Kinect convention); in memory depth is f32 mm.

use std::path::Path;

use image::{ImageBuffer, Luma};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("image dimensions {width}x{height} are invalid")]
    BadDimensions { width: u32, height: u32 },
    #[error("depth png decode: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32) -> Self {
        DepthImage {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, depth_mm: f32) {
        self.data[(y * self.width + x) as usize] = depth_mm.max(0.0);
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.get(x, y) > 0.0
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }

    /// Optional per-pixel affine pre-correction `d' = scale * d + offset`,
    /// applied to valid pixels only. Disabled by default everywhere; hook
    /// for sensor-specific depth calibration.
    pub fn apply_affine_correction(&mut self, scale: f64, offset_mm: f64) {
        for d in &mut self.data {
            if *d > 0.0 {
                *d = ((*d as f64) * scale + offset_mm).max(0.0) as f32;
            }
        }
    }

    /// Writes a 16-bit grayscale PNG, values rounded to integer mm.
    pub fn save_png16(&self, path: &Path) -> Result<(), DepthError> {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_fn(self.width, self.height, |x, y| {
                Luma([self.get(x, y).round().clamp(0.0, 65535.0) as u16])
            });
        buf.save(path).map_err(|e| DepthError::Decode(e.to_string()))
    }

    pub fn load_png16(path: &Path) -> Result<Self, DepthError> {
        let img = image::open(path).map_err(|e| DepthError::Decode(e.to_string()))?;
        let buf = img.to_luma16();
        let (width, height) = buf.dimensions();
        if width == 0 || height == 0 {
            return Err(DepthError::BadDimensions { width, height });
        }
        let mut out = DepthImage::new(width, height);
        for (x, y, Luma([v])) in buf.enumerate_pixels() {
            out.set(x, y, *v as f32);
        }
        Ok(out)
    }
}

/// Binary image, same layout as [`DepthImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            data: vec![false; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[(y * self.width + x) as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}
