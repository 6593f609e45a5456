//! Synthetic sequence generation with exact ground truth: static, turntable
//! and smooth-random trajectories, optional occluder, optional depth noise.

use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::dataset::{Frame, Sequence};
use crate::depth::DepthImage;
use crate::harness::{InteractionVariant, OccluderOrientation, ScenarioKind, StabilityPlacement};
use crate::mesh::Mesh;
use crate::render::render_depth;
use crate::rng::{derive_stream_seed, seeded_rng};
use crate::sampler::sample_direction;
use crate::se3::{Pose, Rotation};

/// Frame period of a 30 Hz camera.
const FRAME_PERIOD_MS: f64 = 1000.0 / 30.0;
/// The occluder plane sits this far in front of the object's nearest point.
const OCCLUDER_STANDOFF_MM: f32 = 100.0;
/// Observed depth counts as occluded when it is this much nearer than the
/// clean render (or invalid).
pub const OCCLUSION_BAND_MM: f32 = 20.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Static,
    Turntable {
        deg_per_frame: f64,
    },
    SmoothRandom {
        speed_t_mm_per_frame: f64,
        speed_r_deg_per_frame: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub length: usize,
    pub camera_distance_mm: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OccluderSpec {
    /// Fraction of the projected object extent hidden along the occluder's
    /// clipping axis; one of {0, 0.15, 0.30, 0.45, 0.60, 0.75}.
    pub fraction: f64,
    pub orientation: OccluderOrientation,
}

pub const OCCLUSION_FRACTIONS: [f64; 6] = [0.0, 0.15, 0.30, 0.45, 0.60, 0.75];

impl OccluderSpec {
    pub fn validate(&self) -> Result<(), String> {
        if OCCLUSION_FRACTIONS.iter().any(|f| (f - self.fraction).abs() < 1e-9) {
            Ok(())
        } else {
            Err(format!(
                "occluder fraction {} not in {:?}",
                self.fraction, OCCLUSION_FRACTIONS
            ))
        }
    }
}

/// Exact ground-truth pose track for `spec`. Static tracks repeat one pose;
/// turntable rotates about the object's vertical axis by the stated angle
/// per frame; smooth-random integrates a velocity with smoothly wandering
/// direction and magnitude clamped to [0.75, 1.25] x the target speed.
pub fn generate_gt_poses(spec: &TrajectorySpec, seed: u64) -> Vec<Pose> {
    let base_rotation = Rotation::rot_x(20f64.to_radians());
    let centre = Vector3::new(0.0, 0.0, spec.camera_distance_mm);
    match spec.kind {
        TrajectoryKind::Static => {
            let pose = Pose::new(base_rotation, centre);
            vec![pose; spec.length]
        }
        TrajectoryKind::Turntable { deg_per_frame } => (0..spec.length)
            .map(|i| {
                let spin = Rotation::rot_y((deg_per_frame * i as f64).to_radians());
                Pose::new(base_rotation.compose(&spin), centre)
            })
            .collect(),
        TrajectoryKind::SmoothRandom {
            speed_t_mm_per_frame,
            speed_r_deg_per_frame,
        } => {
            let mut rng = seeded_rng(derive_stream_seed(seed, 0xA11CE));
            let mut poses = Vec::with_capacity(spec.length);
            let mut position = centre;
            let mut rotation = base_rotation;
            let mut velocity = sample_direction(&mut rng) * speed_t_mm_per_frame;
            let mut spin_axis = sample_direction(&mut rng);
            poses.push(Pose::new(rotation, position));
            let correlation: f64 = 0.9;
            for _ in 1..spec.length {
                if speed_t_mm_per_frame > 0.0 {
                    let kick = sample_direction(&mut rng)
                        * speed_t_mm_per_frame
                        * (1.0 - correlation * correlation).sqrt();
                    velocity = velocity * correlation + kick;
                    velocity = clamp_norm(
                        velocity,
                        0.75 * speed_t_mm_per_frame,
                        1.25 * speed_t_mm_per_frame,
                    );
                    // Stay within 150 mm of the nominal centre: reflect the
                    // velocity off the bounding sphere.
                    if (position + velocity - centre).norm() > 150.0 {
                        let normal = (position - centre).normalize();
                        velocity -= normal * 2.0 * velocity.dot(&normal);
                    }
                    position += velocity;
                }
                if speed_r_deg_per_frame > 0.0 {
                    let kick = sample_direction(&mut rng) * 0.435; // sqrt(1 - 0.9^2)
                    spin_axis = (spin_axis * correlation + kick).normalize();
                    let step =
                        Rotation::from_axis_angle(spin_axis, speed_r_deg_per_frame.to_radians());
                    rotation = rotation.compose(&step);
                }
                poses.push(Pose::new(rotation, position));
            }
            poses
        }
    }
}

/// Renders the full sequence. Ground-truth poses are exact; depth frames are
/// rendered, optionally clipped by an occluder plane, and per-pixel Gaussian
/// noise is added with per-frame derived seeds.
pub fn generate_sequence(
    mesh: &Mesh,
    object_id: &str,
    spec: &TrajectorySpec,
    occluder: Option<OccluderSpec>,
    noise_sigma_mm: f64,
    k: &Intrinsics,
    seed: u64,
) -> Sequence {
    let poses = generate_gt_poses(spec, seed);
    let scenario = scenario_for(spec, occluder.as_ref());
    let frames: Vec<Frame> = poses
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut depth = render_depth(mesh, pose, k);
            if let Some(occ) = &occluder {
                apply_occluder(&mut depth, occ);
            }
            if noise_sigma_mm > 0.0 {
                let mut rng = seeded_rng(derive_stream_seed(seed, i as u64));
                let normal = Normal::new(0.0, noise_sigma_mm).unwrap();
                for d in depth.data_mut() {
                    if *d > 0.0 {
                        *d = (*d as f64 + normal.sample(&mut rng)).max(0.1) as f32;
                    }
                }
            }
            Frame {
                depth,
                rgb: None,
                timestamp_ms: i as f64 * FRAME_PERIOD_MS,
                gt_pose: *pose,
            }
        })
        .collect();
    Sequence::new(object_id.to_string(), scenario, *k, frames, None)
        .expect("generated sequence is structurally valid")
}

fn scenario_for(spec: &TrajectorySpec, occluder: Option<&OccluderSpec>) -> ScenarioKind {
    match (&spec.kind, occluder) {
        (TrajectoryKind::Turntable { .. }, Some(occ)) => ScenarioKind::Occlusion {
            percent: (occ.fraction * 100.0).round() as u8,
            occluder: occ.orientation,
        },
        (TrajectoryKind::Turntable { .. }, None) => ScenarioKind::Occlusion {
            percent: 0,
            occluder: OccluderOrientation::Horizontal,
        },
        (TrajectoryKind::Static, _) => ScenarioKind::Stability {
            placement: if spec.camera_distance_mm > 1100.0 {
                StabilityPlacement::Far
            } else {
                StabilityPlacement::Near
            },
        },
        (TrajectoryKind::SmoothRandom {
            speed_r_deg_per_frame,
            speed_t_mm_per_frame,
        }, _) => ScenarioKind::Interaction {
            variant: match (*speed_t_mm_per_frame > 0.0, *speed_r_deg_per_frame > 0.0) {
                (true, false) => InteractionVariant::TranslationOnly,
                (false, true) => InteractionVariant::RotationOnly,
                _ => InteractionVariant::FreeSlow,
            },
        },
    }
}

fn clamp_norm(v: Vector3<f64>, lo: f64, hi: f64) -> Vector3<f64> {
    let n = v.norm();
    if n < 1e-12 {
        return Vector3::new(lo, 0.0, 0.0);
    }
    v * (n.clamp(lo, hi) / n)
}

/// Replaces a band of the image with an opaque plane in front of the object,
/// hiding `fraction` of the object's projected extent along the clipping
/// axis (columns for a vertical occluder, rows for a horizontal one).
fn apply_occluder(depth: &mut DepthImage, occ: &OccluderSpec) {
    if occ.fraction <= 0.0 {
        return;
    }
    let (width, height) = (depth.width(), depth.height());
    let mut min_x = u32::MAX;
    let mut max_x = 0u32;
    let mut min_y = u32::MAX;
    let mut max_y = 0u32;
    let mut nearest = f32::MAX;
    for y in 0..height {
        for x in 0..width {
            let d = depth.get(x, y);
            if d > 0.0 {
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
                nearest = nearest.min(d);
            }
        }
    }
    if min_x > max_x {
        return; // nothing rendered
    }
    let plane_depth = (nearest - OCCLUDER_STANDOFF_MM).max(1.0);
    match occ.orientation {
        // Vertical panel: covers columns from the right edge of the object.
        OccluderOrientation::Vertical => {
            let extent = (max_x - min_x + 1) as f64;
            let covered = (extent * occ.fraction).round() as u32;
            let x_start = (max_x + 1).saturating_sub(covered);
            for y in 0..height {
                for x in x_start..=max_x {
                    depth.set(x, y, plane_depth);
                }
            }
        }
        // Horizontal panel: covers rows from the bottom of the object.
        OccluderOrientation::Horizontal => {
            let extent = (max_y - min_y + 1) as f64;
            let covered = (extent * occ.fraction).round() as u32;
            let y_start = (max_y + 1).saturating_sub(covered);
            for y in y_start..=max_y {
                for x in 0..width {
                    depth.set(x, y, plane_depth);
                }
            }
        }
    }
}

/// Fraction of the clean-render object pixels that are missing or blocked in
/// the observed frame (invalid, or nearer than the render by more than
/// [`OCCLUSION_BAND_MM`]).
pub fn measure_occlusion(frame: &DepthImage, mesh: &Mesh, pose: &Pose, k: &Intrinsics) -> f64 {
    let clean = render_depth(mesh, pose, k);
    let mut total = 0usize;
    let mut occluded = 0usize;
    for y in 0..k.height {
        for x in 0..k.width {
            let c = clean.get(x, y);
            if c <= 0.0 {
                continue;
            }
            total += 1;
            let d = frame.get(x, y);
            if d <= 0.0 || c - d > OCCLUSION_BAND_MM {
                occluded += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        occluded as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{delta_r, delta_t};

    fn k() -> Intrinsics {
        Intrinsics::new(525.0, 525.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn cuboid() -> Mesh {
        Mesh::cuboid(180.0, 120.0, 70.0)
    }

    #[test]
    fn static_sequence_frames_identical() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::Static,
            length: 5,
            camera_distance_mm: 800.0,
        };
        let seq = generate_sequence(&cuboid(), "cube", &spec, None, 0.0, &k(), 3);
        for f in &seq.frames[1..] {
            assert_eq!(f.depth, seq.frames[0].depth);
            assert_eq!(f.gt_pose, seq.frames[0].gt_pose);
        }
    }

    #[test]
    fn turntable_gt_delta_is_exact() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::Turntable { deg_per_frame: 2.0 },
            length: 90,
            camera_distance_mm: 1200.0,
        };
        let poses = generate_gt_poses(&spec, 1);
        for pair in poses.windows(2) {
            let dr = delta_r(&pair[0].rotation, &pair[1].rotation);
            assert!((dr - 2.0).abs() < 1e-9, "step {dr}");
            assert_eq!(delta_t(&pair[0].translation, &pair[1].translation), 0.0);
        }
    }

    #[test]
    fn smooth_random_speeds_stay_in_band() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::SmoothRandom {
                speed_t_mm_per_frame: 15.0,
                speed_r_deg_per_frame: 6.0,
            },
            length: 200,
            camera_distance_mm: 1000.0,
        };
        let poses = generate_gt_poses(&spec, 7);
        for pair in poses.windows(2) {
            let dt = delta_t(&pair[0].translation, &pair[1].translation);
            let dr = delta_r(&pair[0].rotation, &pair[1].rotation);
            assert!((11.0..=19.0).contains(&dt), "dt {dt}");
            assert!((5.9..=6.1).contains(&dr), "dr {dr}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::SmoothRandom {
                speed_t_mm_per_frame: 10.0,
                speed_r_deg_per_frame: 4.0,
            },
            length: 10,
            camera_distance_mm: 900.0,
        };
        let a = generate_sequence(&cuboid(), "c", &spec, None, 1.5, &k(), 11);
        let b = generate_sequence(&cuboid(), "c", &spec, None, 1.5, &k(), 11);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.depth, fb.depth);
        }
    }

    #[test]
    fn occluded_mask_area_matches_fraction() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::Turntable { deg_per_frame: 0.0 },
            length: 1,
            camera_distance_mm: 1200.0,
        };
        for orientation in [OccluderOrientation::Horizontal, OccluderOrientation::Vertical] {
            let occ = OccluderSpec {
                fraction: 0.30,
                orientation,
            };
            let clean = generate_sequence(&cuboid(), "c", &spec, None, 0.0, &k(), 2);
            let occluded = generate_sequence(&cuboid(), "c", &spec, Some(occ), 0.0, &k(), 2);
            let clean_px = clean.frames[0].depth.valid_count() as f64;
            // Count pixels still at object depth (the occluder plane pixels
            // are nearer).
            let measured = measure_occlusion(
                &occluded.frames[0].depth,
                &cuboid(),
                &occluded.frames[0].gt_pose,
                &k(),
            );
            assert!(
                (measured - 0.30).abs() < 0.05,
                "{orientation:?}: measured {measured}, clean {clean_px}"
            );
        }
    }

    #[test]
    fn measure_occlusion_trivial_cases() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::Static,
            length: 1,
            camera_distance_mm: 1000.0,
        };
        let mesh = cuboid();
        let seq = generate_sequence(&mesh, "c", &spec, None, 2.0, &k(), 5);
        let f = &seq.frames[0];
        let unoccluded = measure_occlusion(&f.depth, &mesh, &f.gt_pose, &k());
        assert!(unoccluded.abs() < 0.02, "unoccluded {unoccluded}");

        let empty = DepthImage::new(640, 480);
        let fully = measure_occlusion(&empty, &mesh, &f.gt_pose, &k());
        assert_eq!(fully, 1.0);
    }
}
