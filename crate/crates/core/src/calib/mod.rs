//! Ground-truth acquisition math: rig transform chaining, probe sphere
//! fitting, PnP extrinsics and mocap/camera temporal synchronization.

mod pnp;
mod sphere;
mod sync;

use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::{compose, invert, Pose};

pub use pnp::{solve_pnp, Correspondence2D3D, PnpSolution};
pub use sphere::{fit_sphere, SphereFit};
pub use sync::{estimate_time_offset, SyncConfig, SyncResult, TimedDetection, TimedMarker};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { got: usize, need: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:.3})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("time ranges do not overlap across the search window")]
    NoOverlap,
    #[error("objective is flat: offset unobservable (static motion?)")]
    FlatObjective,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four rig transforms of the capture setup. `kntm_to_knt` is the
/// calibrated markers-to-camera transform, i.e. the inverse of the
/// camera-to-markers transform the calibration procedure estimates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RigTransforms {
    pub objm_to_vcn: Pose,
    pub kntm_to_vcn: Pose,
    pub kntm_to_knt: Pose,
    pub obj_to_objm: Pose,
}

impl RigTransforms {
    pub fn identity() -> Self {
        RigTransforms {
            objm_to_vcn: Pose::identity(),
            kntm_to_vcn: Pose::identity(),
            kntm_to_knt: Pose::identity(),
            obj_to_objm: Pose::identity(),
        }
    }
}

/// Object pose in the camera frame:
/// `T_obj->knt = T_kntm->knt * (T_kntm->vcn)^-1 * T_objm->vcn * T_obj->objm`.
pub fn chain_object_pose(rig: &RigTransforms) -> Pose {
    let objm_to_kntm = compose(&invert(&rig.kntm_to_vcn), &rig.objm_to_vcn);
    compose(
        &rig.kntm_to_knt,
        &compose(&objm_to_kntm, &rig.obj_to_objm),
    )
}

/// `timestamp_ms,x_mm,y_mm,z_mm` rows.
pub fn read_track_csv(path: &Path) -> Result<Vec<TimedMarker>, CalibError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CalibError::Csv(e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.deserialize() {
        let (timestamp_ms, x, y, z): (f64, f64, f64, f64) =
            record.map_err(|e| CalibError::Csv(e.to_string()))?;
        out.push(TimedMarker {
            timestamp_ms,
            position: Vector3::new(x, y, z),
        });
    }
    Ok(out)
}

/// `timestamp_ms,u_px,v_px` rows.
pub fn read_detections_csv(path: &Path) -> Result<Vec<TimedDetection>, CalibError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CalibError::Csv(e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.deserialize() {
        let (timestamp_ms, u, v): (f64, f64, f64) =
            record.map_err(|e| CalibError::Csv(e.to_string()))?;
        out.push(TimedDetection {
            timestamp_ms,
            image_point: Vector2::new(u, v),
        });
    }
    Ok(out)
}

/// `u_px,v_px,x_mm,y_mm,z_mm` rows.
pub fn read_correspondences_csv(path: &Path) -> Result<Vec<Correspondence2D3D>, CalibError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CalibError::Csv(e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.deserialize() {
        let (u, v, x, y, z): (f64, f64, f64, f64, f64) =
            record.map_err(|e| CalibError::Csv(e.to_string()))?;
        out.push(Correspondence2D3D {
            image_point: Vector2::new(u, v),
            world_point: Vector3::new(x, y, z),
        });
    }
    Ok(out)
}
