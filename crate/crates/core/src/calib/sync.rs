//! Temporal alignment of a mocap track with camera detections: grid search
//! over a constant offset, parabolic sub-step refinement.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::CalibError;
use crate::camera::Intrinsics;
use crate::se3::Pose;

/// 3D marker sample from the motion capture stream (mm).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimedMarker {
    pub timestamp_ms: f64,
    pub position: Vector3<f64>,
}

/// 2D detection of the same marker in the camera image (px).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimedDetection {
    pub timestamp_ms: f64,
    pub image_point: Vector2<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SyncConfig {
    /// Search window: offsets in [-window_ms, window_ms].
    pub window_ms: f64,
    pub step_ms: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            window_ms: 500.0,
            step_ms: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyncResult {
    /// Estimated camera-to-mocap clock offset: mocap evaluated at
    /// `detection_time + delta_t_ms` matches the detection.
    pub delta_t_ms: f64,
    /// RMS pixel reprojection error at the returned offset.
    pub residual_px: f64,
}

/// Cost is evaluated only on detections whose shifted timestamp stays inside
/// the mocap range for *every* candidate offset, so the sample set is fixed
/// and a static track yields an exactly flat objective.
pub fn estimate_time_offset(
    mocap: &[TimedMarker],
    detections: &[TimedDetection],
    k: &Intrinsics,
    extrinsics: &Pose,
    config: &SyncConfig,
) -> Result<SyncResult, CalibError> {
    if mocap.len() < 2 || detections.is_empty() {
        return Err(CalibError::NoOverlap);
    }
    let mut track: Vec<TimedMarker> = mocap.to_vec();
    track.sort_by(|a, b| a.timestamp_ms.partial_cmp(&b.timestamp_ms).unwrap());
    let t_min = track[0].timestamp_ms;
    let t_max = track[track.len() - 1].timestamp_ms;

    let usable: Vec<&TimedDetection> = detections
        .iter()
        .filter(|d| {
            d.timestamp_ms - config.window_ms >= t_min && d.timestamp_ms + config.window_ms <= t_max
        })
        .collect();
    if usable.len() < 4 {
        return Err(CalibError::NoOverlap);
    }

    let cost_at = |offset_ms: f64| -> f64 {
        let mut sum = 0.0;
        for d in &usable {
            let p = interpolate(&track, d.timestamp_ms + offset_ms);
            let cam = extrinsics.apply(&p);
            let z = cam.z.max(1e-9);
            let du = k.fx * cam.x / z + k.cx - d.image_point.x;
            let dv = k.fy * cam.y / z + k.cy - d.image_point.y;
            sum += du * du + dv * dv;
        }
        sum / usable.len() as f64
    };

    let steps = (config.window_ms / config.step_ms).round() as i64;
    let mut costs = Vec::with_capacity((2 * steps + 1) as usize);
    for i in -steps..=steps {
        costs.push(cost_at(i as f64 * config.step_ms));
    }
    let (best_idx, &best_cost) = costs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .unwrap();
    let worst_cost = costs.iter().cloned().fold(f64::MIN, f64::max);

    if worst_cost - best_cost <= 1e-9 * (1.0 + best_cost) {
        return Err(CalibError::FlatObjective);
    }

    let grid_offset = (best_idx as i64 - steps) as f64 * config.step_ms;
    let mut offset = grid_offset;
    let mut final_cost = best_cost;
    if best_idx > 0 && best_idx + 1 < costs.len() {
        let (c_prev, c_mid, c_next) = (costs[best_idx - 1], costs[best_idx], costs[best_idx + 1]);
        let denom = c_prev - 2.0 * c_mid + c_next;
        if denom > 0.0 {
            let refined = grid_offset + 0.5 * config.step_ms * (c_prev - c_next) / denom;
            let refined_cost = cost_at(refined);
            // The refined offset must beat every grid point, else keep the grid.
            if refined_cost <= best_cost {
                offset = refined;
                final_cost = refined_cost;
            }
        }
    }

    Ok(SyncResult {
        delta_t_ms: offset,
        residual_px: final_cost.sqrt(),
    })
}

fn interpolate(track: &[TimedMarker], t_ms: f64) -> Vector3<f64> {
    let idx = track.partition_point(|m| m.timestamp_ms < t_ms);
    if idx == 0 {
        return track[0].position;
    }
    if idx >= track.len() {
        return track[track.len() - 1].position;
    }
    let a = &track[idx - 1];
    let b = &track[idx];
    let span = b.timestamp_ms - a.timestamp_ms;
    if span <= 0.0 {
        return a.position;
    }
    let w = (t_ms - a.timestamp_ms) / span;
    a.position * (1.0 - w) + b.position * w
}
