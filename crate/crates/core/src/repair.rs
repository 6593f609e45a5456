//! Removal of retro-reflective marker artifacts from depth frames.
//!
//! Each known marker is reprojected into the frame; if the observed median
//! depth in the 10x10 window around the reprojection is within 10 mm of the
//! marker's true depth the marker is unoccluded, and the window's object
//! pixels are replaced by rendered model depth plus Gaussian noise.
//! Background pixels (no rendered depth) are left untouched.

use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Intrinsics;
use crate::depth::{DepthImage, Mask};
use crate::mesh::Mesh;
use crate::render::render_depth;
use crate::rng::seeded_rng;
use crate::se3::Pose;

/// Patch / median window side length in pixels.
pub const WINDOW: i64 = 10;
/// Occlusion test threshold: |median - true depth| below this means visible.
pub const VISIBILITY_THRESHOLD_MM: f64 = 10.0;
/// Default sigma of the added Gaussian noise (Kinect-V2-like axial noise).
pub const DEFAULT_NOISE_SIGMA_MM: f64 = 2.0;
/// Minimum fraction of the rendered mask that must overlap observed valid
/// depth; below this the pose is considered wrong for the frame.
const MIN_RENDER_OVERLAP: f64 = 0.10;

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("rendered mask overlaps only {overlap:.1}% of observed depth; wrong pose or mesh")]
    PoseMeshMismatch { overlap: f64 },
    #[error("marker set is empty")]
    EmptyMarkerSet,
    #[error("marker diameter must be positive, got {0}")]
    BadDiameter(f64),
}

/// Marker positions in the object frame (mm).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerSet {
    positions: Vec<Vector3<f64>>,
    diameter_mm: f64,
}

impl MarkerSet {
    pub fn new(positions: Vec<Vector3<f64>>, diameter_mm: f64) -> Result<Self, RepairError> {
        if positions.is_empty() {
            return Err(RepairError::EmptyMarkerSet);
        }
        if diameter_mm <= 0.0 {
            return Err(RepairError::BadDiameter(diameter_mm));
        }
        Ok(MarkerSet {
            positions,
            diameter_mm,
        })
    }

    /// 3 mm retroreflective spheres.
    pub fn with_default_diameter(positions: Vec<Vector3<f64>>) -> Result<Self, RepairError> {
        Self::new(positions, 3.0)
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn diameter_mm(&self) -> f64 {
        self.diameter_mm
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RepairReport {
    pub markers_total: usize,
    /// Markers passing the occlusion (median depth) test.
    pub markers_visible: usize,
    /// Visible markers with at least one replaced pixel.
    pub markers_patched: usize,
    pub pixels_patched: usize,
    /// Patched pixels over rendered object pixels.
    pub fraction_object_pixels_patched: f64,
    /// Only populated when a clean reference frame is supplied.
    pub rmse_before_mm: Option<f64>,
    pub rmse_after_mm: Option<f64>,
}

/// Repairs one frame. `pose` must be the ground-truth object pose;
/// `reference` is an optional artifact-free frame of the same scene used to
/// report before/after RMSE over the patched windows.
#[allow(clippy::too_many_arguments)]
pub fn repair_frame(
    depth: &DepthImage,
    pose: &Pose,
    mesh: &Mesh,
    markers: &MarkerSet,
    k: &Intrinsics,
    noise_sigma_mm: f64,
    seed: u64,
    reference: Option<&DepthImage>,
) -> Result<(DepthImage, RepairReport), RepairError> {
    let rendered = render_depth(mesh, pose, k);
    let render_px = rendered.valid_count();
    let overlap_px = (0..k.height)
        .flat_map(|y| (0..k.width).map(move |x| (x, y)))
        .filter(|&(x, y)| rendered.is_valid(x, y) && depth.is_valid(x, y))
        .count();
    let overlap = if render_px == 0 {
        0.0
    } else {
        overlap_px as f64 / render_px as f64
    };
    if overlap < MIN_RENDER_OVERLAP {
        return Err(RepairError::PoseMeshMismatch {
            overlap: overlap * 100.0,
        });
    }

    let mut out = depth.clone();
    let mut patched = Mask::new(k.width, k.height);
    let mut rng = seeded_rng(seed);
    let noise = if noise_sigma_mm > 0.0 {
        Some(Normal::new(0.0, noise_sigma_mm).unwrap())
    } else {
        None
    };

    let mut report = RepairReport {
        markers_total: markers.positions.len(),
        ..Default::default()
    };

    for marker in &markers.positions {
        let cam = pose.apply(marker);
        if cam.z <= 0.0 {
            continue; // behind camera: not visible
        }
        let u = k.fx * cam.x / cam.z + k.cx;
        let v = k.fy * cam.y / cam.z + k.cy;
        if !k.contains(u, v) {
            continue; // out of frame: skipped, counted not-visible
        }
        // Window anchored at the rounded reprojection pixel, clipped at borders.
        let cx = u.round() as i64;
        let cy = v.round() as i64;
        let x0 = (cx - WINDOW / 2).clamp(0, k.width as i64 - 1);
        let x1 = (cx + WINDOW / 2 - 1).clamp(0, k.width as i64 - 1);
        let y0 = (cy - WINDOW / 2).clamp(0, k.height as i64 - 1);
        let y1 = (cy + WINDOW / 2 - 1).clamp(0, k.height as i64 - 1);

        let mut window_depths = Vec::with_capacity((WINDOW * WINDOW) as usize);
        let mut window_px = 0usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                window_px += 1;
                let d = depth.get(x as u32, y as u32);
                if d > 0.0 {
                    window_depths.push(d as f64);
                }
            }
        }
        // More than half the window invalid: treat as not visible.
        if window_depths.len() * 2 <= window_px {
            continue;
        }
        let median = median_inplace(&mut window_depths);
        if (median - cam.z).abs() >= VISIBILITY_THRESHOLD_MM {
            continue; // occluded marker: window untouched
        }
        report.markers_visible += 1;

        let mut replaced_here = 0usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let r = rendered.get(x as u32, y as u32);
                if r <= 0.0 {
                    continue; // background pixel: ignored
                }
                let value = match &noise {
                    Some(n) => (r as f64 + n.sample(&mut rng)).max(0.0) as f32,
                    None => r,
                };
                out.set(x as u32, y as u32, value);
                if !patched.get(x as u32, y as u32) {
                    patched.set(x as u32, y as u32, true);
                    report.pixels_patched += 1;
                }
                replaced_here += 1;
            }
        }
        if replaced_here > 0 {
            report.markers_patched += 1;
        }
    }

    report.fraction_object_pixels_patched = if render_px == 0 {
        0.0
    } else {
        report.pixels_patched as f64 / render_px as f64
    };

    if let Some(clean) = reference {
        report.rmse_before_mm = Some(rmse_over(&patched, depth, clean));
        report.rmse_after_mm = Some(rmse_over(&patched, &out, clean));
    }

    Ok((out, report))
}

fn rmse_over(mask: &Mask, image: &DepthImage, reference: &DepthImage) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let e = image.get(x, y) as f64 - reference.get(x, y) as f64;
                sum += e * e;
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn median_inplace(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    *m
}
