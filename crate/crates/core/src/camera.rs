//! Pinhole camera model.
//!
//! Pixel coordinates are continuous with the origin at the top-left image
//! corner; the centre of pixel `(0, 0)` is at `(0.5, 0.5)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("point is behind the camera (z = {z} mm)")]
    BehindCamera { z: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Pinhole intrinsics; focal lengths and principal point in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if !(0.0 <= cx && cx < width as f64) || !(0.0 <= cy && cy < height as f64) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// A 640x480 camera with Kinect-V2-like focal length, handy for tests
    /// and synthetic sequences.
    pub fn vga_default() -> Self {
        Intrinsics {
            fx: 525.0,
            fy: 525.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

/// Projects a camera-frame point (mm) to pixel coordinates plus depth (mm).
pub fn project(point: &Vector3<f64>, k: &Intrinsics) -> Result<(f64, f64, f64), CameraError> {
    let z = point.z;
    if z <= 0.0 {
        return Err(CameraError::BehindCamera { z });
    }
    let u = k.fx * point.x / z + k.cx;
    let v = k.fy * point.y / z + k.cy;
    Ok((u, v, z))
}

/// Inverse of [`project`]: pixel plus depth (mm) back to a camera-frame point.
pub fn back_project(u: f64, v: f64, depth_mm: f64, k: &Intrinsics) -> Vector3<f64> {
    Vector3::new(
        (u - k.cx) / k.fx * depth_mm,
        (v - k.cy) / k.fy * depth_mm,
        depth_mm,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn k500() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let (u, v, d) = project(&Vector3::new(0.0, 0.0, 1000.0), &k500()).unwrap();
        assert_eq!((u, v, d), (320.0, 240.0, 1000.0));
    }

    #[test]
    fn offset_point_projects_by_similar_triangles() {
        let (u, v, _) = project(&Vector3::new(100.0, 0.0, 1000.0), &k500()).unwrap();
        assert_eq!((u, v), (370.0, 240.0));
    }

    #[test]
    fn behind_camera_rejected() {
        assert_eq!(
            project(&Vector3::new(0.0, 0.0, -1.0), &k500()),
            Err(CameraError::BehindCamera { z: -1.0 })
        );
        assert!(project(&Vector3::new(0.0, 0.0, 0.0), &k500()).is_err());
    }

    #[test]
    fn project_back_project_roundtrip() {
        let k = k500();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let p = Vector3::new(
                rng.random_range(-500.0..500.0),
                rng.random_range(-500.0..500.0),
                rng.random_range(100.0..3000.0),
            );
            let (u, v, d) = project(&p, &k).unwrap();
            let q = back_project(u, v, d, &k);
            assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn intrinsics_invariants_enforced() {
        assert!(Intrinsics::new(-1.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(Intrinsics::new(500.0, 500.0, 700.0, 240.0, 640, 480).is_err());
    }
}
