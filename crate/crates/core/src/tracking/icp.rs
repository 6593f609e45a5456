//! Point-to-plane ICP against the observed depth, using a static kd-tree
//! over surface samples of the model.
//!
//! Per update: observed depth is cropped to a sphere around the predicted
//! object centre, back-projected to 3D with normals from +/-3 px central
//! differences, and registered to the model with a linearized small-angle
//! solve per iteration. Everything is deterministic given the init seed.

use nalgebra::{Matrix6, Vector3, Vector6};

use super::kdtree::KdTree3;
use super::{TrackError, Tracker, UpdateReport};
use crate::camera::back_project;
use crate::dataset::ObservedFrame;
use crate::mesh::Mesh;
use crate::rng::seeded_rng;
use crate::se3::{invert, Pose, Rotation};

#[derive(Debug, Clone, Copy)]
pub struct IcpConfig {
    /// Surface samples taken from the mesh at init.
    pub model_samples: usize,
    pub max_iterations: usize,
    /// Stop when the relative change of the mean squared residual drops
    /// below this.
    pub relative_residual_tol: f64,
    /// Correspondences farther than this are discarded (mm).
    pub max_correspondence_mm: f64,
    /// Correspondences whose normals disagree by more than this are
    /// discarded (degrees).
    pub max_normal_angle_deg: f64,
    /// Below this inlier fraction the update is rejected as LowOverlap.
    pub min_inlier_fraction: f64,
    /// Crop sphere diameter as a multiple of the object's largest dimension.
    pub crop_scale: f64,
    /// Upper bound on scene points taken from the crop (stride-subsampled).
    pub scene_samples: usize,
    /// Seed for the model surface sampling.
    pub seed: u64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            model_samples: 5000,
            max_iterations: 30,
            relative_residual_tol: 1e-4,
            max_correspondence_mm: 20.0,
            max_normal_angle_deg: 60.0,
            min_inlier_fraction: 0.10,
            crop_scale: 1.3,
            scene_samples: 4000,
            seed: 0,
        }
    }
}

struct ModelIndex {
    positions: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
    tree: KdTree3,
    centroid: Vector3<f64>,
    max_dimension: f64,
}

pub struct IcpTracker {
    config: IcpConfig,
    model: Option<ModelIndex>,
    pose: Pose,
}

impl IcpTracker {
    pub fn new(config: IcpConfig) -> Self {
        IcpTracker {
            config,
            model: None,
            pose: Pose::identity(),
        }
    }
}

impl Tracker for IcpTracker {
    fn name(&self) -> &'static str {
        "icp"
    }

    fn init(&mut self, mesh: &Mesh, pose0: Pose) -> Result<(), TrackError> {
        if mesh.triangles.is_empty() {
            return Err(TrackError::EmptyMesh);
        }
        let mut rng = seeded_rng(self.config.seed);
        let samples = mesh.sample_surface(self.config.model_samples, &mut rng);
        let positions: Vec<Vector3<f64>> = samples.iter().map(|s| s.position).collect();
        let normals: Vec<Vector3<f64>> = samples.iter().map(|s| s.normal).collect();
        let tree = KdTree3::build(&positions);
        self.model = Some(ModelIndex {
            positions,
            normals,
            tree,
            centroid: mesh.vertex_centroid(),
            max_dimension: mesh.max_dimension(),
        });
        self.pose = pose0;
        Ok(())
    }

    fn update(&mut self, frame: &ObservedFrame) -> UpdateReport {
        let model = self.model.as_ref().expect("tracker not initialized");
        let previous = self.pose;

        let scene = crop_scene_points(frame, &previous, model, &self.config);
        if scene.len() < 20 {
            return UpdateReport {
                pose: previous,
                low_overlap: true,
                iterations: 0,
                mean_residual_mm: f64::NAN,
            };
        }

        let max_d2 = self.config.max_correspondence_mm * self.config.max_correspondence_mm;
        let cos_limit = self.config.max_normal_angle_deg.to_radians().cos();

        let mut pose = previous;
        let mut prev_mean_sq = f64::INFINITY;
        let mut iterations = 0;
        let mut low_overlap = false;

        for iter in 0..self.config.max_iterations {
            iterations = iter + 1;
            let to_object = invert(&pose);
            let rot = pose.rotation;

            let mut jtj = Matrix6::<f64>::zeros();
            let mut jtr = Vector6::<f64>::zeros();
            let mut sum_sq = 0.0;
            let mut inliers = 0usize;

            for (q, scene_normal) in &scene {
                let q_obj = to_object.apply(q);
                let Some((idx, d2)) = model.tree.nearest(&q_obj) else {
                    continue;
                };
                if d2 > max_d2 {
                    continue;
                }
                let m_cam = pose.apply(&model.positions[idx]);
                let n_cam = rot.apply(&model.normals[idx]);
                if n_cam.dot(scene_normal) < cos_limit {
                    continue;
                }
                inliers += 1;
                let r = n_cam.dot(&(q - m_cam));
                sum_sq += r * r;
                let cross = m_cam.cross(&n_cam);
                let mut j = Vector6::zeros();
                for a in 0..3 {
                    j[a] = cross[a];
                    j[3 + a] = n_cam[a];
                }
                jtj += j * j.transpose();
                jtr += j * r;
            }

            let inlier_fraction = inliers as f64 / scene.len() as f64;
            if inlier_fraction < self.config.min_inlier_fraction {
                if iter == 0 {
                    // Nothing usable: keep the previous pose entirely.
                    return UpdateReport {
                        pose: previous,
                        low_overlap: true,
                        iterations,
                        mean_residual_mm: f64::NAN,
                    };
                }
                low_overlap = true;
                break;
            }

            let mean_sq = sum_sq / inliers as f64;
            if mean_sq > prev_mean_sq {
                // Residual went up: discard the candidate, keep the last
                // accepted pose.
                break;
            }
            // Accept the pose that produced this residual.
            self.pose = pose;
            let relative_change = (prev_mean_sq - mean_sq) / prev_mean_sq.max(1e-300);
            prev_mean_sq = mean_sq;
            if relative_change < self.config.relative_residual_tol && iter > 0 {
                break;
            }

            for i in 0..6 {
                jtj[(i, i)] += 1e-9;
            }
            let Some(ch) = jtj.cholesky() else {
                break;
            };
            let delta = ch.solve(&jtr);
            let omega = Vector3::new(delta[0], delta[1], delta[2]);
            let dt = Vector3::new(delta[3], delta[4], delta[5]);
            let dr = Rotation::from_scaled_axis(omega);
            pose = Pose::new(dr.compose(&pose.rotation), dr.apply(&pose.translation) + dt);
        }

        UpdateReport {
            pose: self.pose,
            low_overlap,
            iterations,
            mean_residual_mm: if prev_mean_sq.is_finite() {
                prev_mean_sq.sqrt()
            } else {
                f64::NAN
            },
        }
    }

    fn reset(&mut self, pose: Pose) {
        self.pose = pose;
    }

    fn current_pose(&self) -> Pose {
        self.pose
    }
}

/// Back-projected scene points with normals, restricted to the crop sphere
/// around the predicted object centre and stride-subsampled to the budget.
fn crop_scene_points(
    frame: &ObservedFrame,
    pose: &Pose,
    model: &ModelIndex,
    config: &IcpConfig,
) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let k = frame.intrinsics;
    let centre = pose.apply(&model.centroid);
    if centre.z <= 0.0 {
        return Vec::new();
    }
    let radius = config.crop_scale * model.max_dimension / 2.0;
    let radius_sq = radius * radius;

    // Project the crop sphere to a pixel bounding box.
    let cu = k.fx * centre.x / centre.z + k.cx;
    let cv = k.fy * centre.y / centre.z + k.cy;
    let margin_z = (centre.z - radius).max(1.0);
    let ru = k.fx * radius / margin_z;
    let rv = k.fy * radius / margin_z;
    let x0 = ((cu - ru).floor().max(0.0)) as u32;
    let x1 = ((cu + ru).ceil().min(k.width as f64 - 1.0)) as u32;
    let y0 = ((cv - rv).floor().max(0.0)) as u32;
    let y1 = ((cv + rv).ceil().min(k.height as f64 - 1.0)) as u32;
    if x0 >= x1 || y0 >= y1 {
        return Vec::new();
    }

    let bbox_px = ((x1 - x0 + 1) * (y1 - y0 + 1)) as usize;
    let stride = (((bbox_px as f64) / config.scene_samples as f64).sqrt().floor() as u32).max(1);

    let mut out = Vec::new();
    let mut y = y0;
    while y <= y1 {
        let mut x = x0;
        while x <= x1 {
            if let Some(pn) = point_with_normal(frame, x, y) {
                if (pn.0 - centre).norm_squared() <= radius_sq {
                    out.push(pn);
                }
            }
            x += stride;
        }
        y += stride;
    }
    out
}

/// Back-projects pixel (x, y) and estimates its surface normal from +/-3 px
/// central differences; the wide stencil keeps per-pixel depth noise from
/// swamping the slope. Returns None at invalid or boundary pixels.
fn point_with_normal(
    frame: &ObservedFrame,
    x: u32,
    y: u32,
) -> Option<(Vector3<f64>, Vector3<f64>)> {
    const H: u32 = 3;
    let k = frame.intrinsics;
    let depth = frame.depth;
    if x < H || y < H || x + H >= k.width || y + H >= k.height {
        return None;
    }
    let d = depth.get(x, y);
    if d <= 0.0 {
        return None;
    }
    let (dxm, dxp) = (depth.get(x - H, y), depth.get(x + H, y));
    let (dym, dyp) = (depth.get(x, y - H), depth.get(x, y + H));
    if dxm <= 0.0 || dxp <= 0.0 || dym <= 0.0 || dyp <= 0.0 {
        return None;
    }
    let px = x as f64 + 0.5;
    let py = y as f64 + 0.5;
    let p = back_project(px, py, d as f64, k);
    let tx = back_project(px + H as f64, py, dxp as f64, k)
        - back_project(px - H as f64, py, dxm as f64, k);
    let ty = back_project(px, py + H as f64, dyp as f64, k)
        - back_project(px, py - H as f64, dym as f64, k);
    let mut n = tx.cross(&ty);
    let len = n.norm();
    if len < 1e-12 {
        return None;
    }
    n /= len;
    // Orient toward the camera.
    if n.dot(&p) > 0.0 {
        n = -n;
    }
    Some((p, n))
}
