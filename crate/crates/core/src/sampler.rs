//! Random pose perturbations for synthetic training-pair generation.
//!
//! Two samplers: the spherical-coordinate scheme (uniform direction on the
//! sphere, Gaussian magnitude) and the older per-component uniform scheme it
//! replaces, kept for comparison runs.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::depth::DepthImage;
use crate::mesh::Mesh;
use crate::render::render_depth;
use crate::rng::{derive_stream_seed, seeded_rng};
use crate::se3::{compose, euler_to_rotation, invert, rotation_to_euler, EulerAngles, Pose, Rotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Direction uniform on the sphere, magnitude ~ N(0, delta^2).
    Spherical,
    /// Each translation / Euler component ~ U(-delta, delta).
    UniformComponent,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Translation scale Delta-t (mm): Gaussian sigma in spherical mode,
    /// half-range in uniform-component mode.
    pub delta_t_mm: f64,
    /// Rotation scale Delta-r (degrees), same roles.
    pub delta_r_deg: f64,
    pub mode: PerturbationMode,
}

/// One training pair: the ground-truth pose, the perturbed "predicted" pose,
/// and the 6-DOF label mapping predicted back to ground truth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PosePair {
    pub pose_gt: Pose,
    pub pose_pred: Pose,
    pub label: PoseLabel,
}

/// Pose delta from `pose_pred` to `pose_gt`, composed on the right:
/// `pose_gt = pose_pred * delta`. Translation in mm, rotation as intrinsic
/// X-Y-Z Euler angles in degrees.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseLabel {
    pub translation_mm: [f64; 3],
    pub rotation_deg: [f64; 3],
}

impl PoseLabel {
    pub fn from_delta(delta: &Pose) -> Self {
        let euler = rotation_to_euler(&delta.rotation).angles;
        PoseLabel {
            translation_mm: [delta.translation.x, delta.translation.y, delta.translation.z],
            rotation_deg: [euler.alpha_deg, euler.beta_deg, euler.gamma_deg],
        }
    }

    pub fn to_delta(&self) -> Pose {
        Pose::new(
            euler_to_rotation(&EulerAngles::new(
                self.rotation_deg[0],
                self.rotation_deg[1],
                self.rotation_deg[2],
            )),
            Vector3::new(
                self.translation_mm[0],
                self.translation_mm[1],
                self.translation_mm[2],
            ),
        )
    }
}

/// Direction for spherical coordinates (theta, phi) with phi = acos(cos_phi).
pub fn direction_from_spherical(theta_rad: f64, cos_phi: f64) -> Vector3<f64> {
    let phi = cos_phi.clamp(-1.0, 1.0).acos();
    Vector3::new(
        phi.sin() * theta_rad.cos(),
        phi.sin() * theta_rad.sin(),
        phi.cos(),
    )
}

/// Uniform direction on the unit sphere, sampled in spherical coordinates:
/// theta ~ U(-pi, pi), phi = acos(x) with x ~ U(-1, 1).
pub fn sample_direction(rng: &mut impl Rng) -> Vector3<f64> {
    let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let x: f64 = rng.random_range(-1.0..1.0f64);
    direction_from_spherical(theta, x)
}

/// One random pose delta according to `cfg`.
pub fn sample_perturbation(cfg: &PerturbationConfig, rng: &mut impl Rng) -> Pose {
    match cfg.mode {
        PerturbationMode::Spherical => {
            let translation = if cfg.delta_t_mm > 0.0 {
                let dir = sample_direction(rng);
                let magnitude = Normal::new(0.0, cfg.delta_t_mm).unwrap().sample(rng);
                dir * magnitude
            } else {
                Vector3::zeros()
            };
            let rotation = if cfg.delta_r_deg > 0.0 {
                let axis = sample_direction(rng);
                let angle = Normal::new(0.0, cfg.delta_r_deg).unwrap().sample(rng);
                Rotation::from_axis_angle(axis, angle.to_radians())
            } else {
                Rotation::identity()
            };
            Pose::new(rotation, translation)
        }
        PerturbationMode::UniformComponent => {
            let translation = Vector3::new(
                uniform_sym(rng, cfg.delta_t_mm),
                uniform_sym(rng, cfg.delta_t_mm),
                uniform_sym(rng, cfg.delta_t_mm),
            );
            let rotation = euler_to_rotation(&EulerAngles::new(
                uniform_sym(rng, cfg.delta_r_deg),
                uniform_sym(rng, cfg.delta_r_deg),
                uniform_sym(rng, cfg.delta_r_deg),
            ));
            Pose::new(rotation, translation)
        }
    }
}

fn uniform_sym(rng: &mut impl Rng, half_range: f64) -> f64 {
    if half_range > 0.0 {
        rng.random_range(-half_range..half_range)
    } else {
        0.0
    }
}

/// Streaming pair generator: O(1) memory in the pair count, deterministic
/// under `seed`. Base poses are cycled in order.
pub fn generate_pairs<'a>(
    base_poses: &'a [Pose],
    cfg: &'a PerturbationConfig,
    count: usize,
    seed: u64,
) -> impl Iterator<Item = PosePair> + 'a {
    let mut rng = seeded_rng(seed);
    (0..count).map(move |i| {
        let pose_gt = base_poses[i % base_poses.len()];
        let delta = sample_perturbation(cfg, &mut rng);
        // pose_gt = pose_pred * delta, so pose_pred = pose_gt * delta^-1.
        let pose_pred = compose(&pose_gt, &invert(&delta));
        PosePair {
            pose_gt,
            pose_pred,
            label: PoseLabel::from_delta(&delta),
        }
    })
}

/// Crop rendering defaults; both are plain parameters of [`render_pair_crops`].
pub const DEFAULT_CROP_PX: u32 = 150;
pub const DEFAULT_CROP_SCALE: f64 = 1.3;

/// Renders the predicted-view / observed-view depth crops of a pair.
///
/// The crop camera looks at the predicted object centre and its frustum
/// spans `crop_scale` times the object's largest dimension, so both crops
/// share one frame.
pub fn render_pair_crops(
    mesh: &Mesh,
    pair: &PosePair,
    crop_px: u32,
    crop_scale: f64,
) -> (DepthImage, DepthImage) {
    let centre = pair.pose_pred.apply(&mesh.vertex_centroid());
    let dist = centre.norm().max(1.0);
    let extent = (crop_scale * mesh.max_dimension()).max(1.0);
    let f = crop_px as f64 * dist / extent;
    let k = Intrinsics {
        fx: f,
        fy: f,
        cx: crop_px as f64 / 2.0,
        cy: crop_px as f64 / 2.0,
        width: crop_px,
        height: crop_px,
    };
    // Rotate the camera so the predicted centre sits on the optical axis.
    let dir = centre / centre.norm();
    let look = look_at_z(&dir);
    let view = Pose::new(look, Vector3::zeros());
    let pred = render_depth(mesh, &compose(&view, &pair.pose_pred), &k);
    let obs = render_depth(mesh, &compose(&view, &pair.pose_gt), &k);
    (pred, obs)
}

/// Rotation taking `dir` (unit) to +z.
fn look_at_z(dir: &Vector3<f64>) -> Rotation {
    let z = Vector3::z();
    let dot = dir.dot(&z).clamp(-1.0, 1.0);
    if dot > 1.0 - 1e-12 {
        return Rotation::identity();
    }
    if dot < -1.0 + 1e-12 {
        return Rotation::rot_x(std::f64::consts::PI);
    }
    let axis = dir.cross(&z);
    Rotation::from_axis_angle(axis, dot.acos())
}

/// Seed for shard `index` of a sharded generation run.
pub fn shard_seed(master: u64, index: u64) -> u64 {
    derive_stream_seed(master, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::delta_r;

    fn spherical(dt: f64, dr: f64) -> PerturbationConfig {
        PerturbationConfig {
            delta_t_mm: dt,
            delta_r_deg: dr,
            mode: PerturbationMode::Spherical,
        }
    }

    #[test]
    fn direction_is_unit_norm() {
        let mut rng = seeded_rng(1);
        for _ in 0..10_000 {
            let d = sample_direction(&mut rng);
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_pole_cases() {
        // Forced x = 1 gives the +z pole regardless of theta; x = -1 the
        // opposite pole.
        for theta in [-2.0, 0.0, 1.3] {
            assert!((direction_from_spherical(theta, 1.0) - Vector3::z()).norm() < 1e-12);
            assert!((direction_from_spherical(theta, -1.0) + Vector3::z()).norm() < 1e-9);
        }
    }

    #[test]
    fn direction_octants_are_uniform() {
        let mut rng = seeded_rng(2);
        let n = 200_000usize;
        let mut octants = [0usize; 8];
        let mut mean = Vector3::zeros();
        for _ in 0..n {
            let d = sample_direction(&mut rng);
            let idx = ((d.x > 0.0) as usize) | (((d.y > 0.0) as usize) << 1) | (((d.z > 0.0) as usize) << 2);
            octants[idx] += 1;
            mean += d;
        }
        for count in octants {
            let f = count as f64 / n as f64;
            assert!((f - 0.125).abs() < 0.005, "octant fraction {f}");
        }
        assert!((mean / n as f64).norm() < 0.01);
    }

    #[test]
    fn zero_scales_give_identity() {
        let mut rng = seeded_rng(3);
        let delta = sample_perturbation(&spherical(0.0, 0.0), &mut rng);
        assert_eq!(delta, Pose::identity());
        let cfg = PerturbationConfig {
            delta_t_mm: 0.0,
            delta_r_deg: 0.0,
            mode: PerturbationMode::UniformComponent,
        };
        assert_eq!(sample_perturbation(&cfg, &mut rng), Pose::identity());
    }

    #[test]
    fn spherical_translation_magnitude_distribution() {
        // Sample std along a fixed axis matches the projection of an
        // isotropic Gaussian: Var(dir_x * m) = E[dir_x^2] * dt^2 = dt^2 / 3.
        let mut rng = seeded_rng(4);
        let dt = 30.0;
        let n = 100_000;
        let mut sum_sq_x = 0.0;
        for _ in 0..n {
            let d = sample_perturbation(&spherical(dt, 0.0), &mut rng);
            sum_sq_x += d.translation.x * d.translation.x;
        }
        let std_x = (sum_sq_x / n as f64).sqrt();
        let expected = dt / 3f64.sqrt();
        assert!((std_x - expected).abs() / expected < 0.03, "std {std_x} vs {expected}");
    }

    #[test]
    fn uniform_component_bounds_and_flatness() {
        let mut rng = seeded_rng(5);
        let dt = 20.0;
        let cfg = PerturbationConfig {
            delta_t_mm: dt,
            delta_r_deg: 0.0,
            mode: PerturbationMode::UniformComponent,
        };
        let n = 60_000usize;
        let bins = 10usize;
        let mut hist = vec![0usize; bins];
        for _ in 0..n {
            let d = sample_perturbation(&cfg, &mut rng);
            for c in [d.translation.x, d.translation.y, d.translation.z] {
                assert!((-dt..dt).contains(&c));
            }
            let b = (((d.translation.x + dt) / (2.0 * dt)) * bins as f64) as usize;
            hist[b.min(bins - 1)] += 1;
        }
        // Chi-squared against flat; 18 dof... 9 dof critical at alpha=0.001 is 27.88.
        let expected = n as f64 / bins as f64;
        let chi2: f64 = hist.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }

    /// Quaternion evaluation of the geodesic angle; resolves rotations far
    /// below the ~1e-6 deg floor of the trace-based form.
    fn precise_angle_deg(a: &Rotation, b: &Rotation) -> f64 {
        use nalgebra::UnitQuaternion;
        let to_q = |r: &Rotation| {
            UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
                *r.matrix(),
            ))
        };
        to_q(a).angle_to(&to_q(b)).to_degrees()
    }

    #[test]
    fn label_roundtrip_reconstructs_gt() {
        let base = vec![Pose::from_translation(0.0, 0.0, 1000.0)];
        let cfg = spherical(30.0, 15.0);
        for pair in generate_pairs(&base, &cfg, 2_000, 99) {
            let rebuilt = compose(&pair.pose_pred, &pair.label.to_delta());
            let dt = crate::se3::delta_t(&rebuilt.translation, &pair.pose_gt.translation);
            let dr = precise_angle_deg(&rebuilt.rotation, &pair.pose_gt.rotation);
            assert!(dt < 1e-6 && dr < 1e-6, "dt {dt} dr {dr}");
            assert!(delta_r(&rebuilt.rotation, &pair.pose_gt.rotation) < 1e-5);
        }
    }

    #[test]
    fn zero_perturbation_pair_has_zero_label() {
        let base = vec![Pose::from_translation(10.0, 20.0, 800.0)];
        let pair = generate_pairs(&base, &spherical(0.0, 0.0), 1, 1).next().unwrap();
        assert_eq!(pair.pose_pred, pair.pose_gt);
        assert_eq!(pair.label.translation_mm, [0.0; 3]);
        assert_eq!(pair.label.rotation_deg, [0.0; 3]);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let base = vec![Pose::from_translation(0.0, 0.0, 900.0)];
        let cfg = spherical(25.0, 10.0);
        let a: Vec<PosePair> = generate_pairs(&base, &cfg, 50, 7).collect();
        let b: Vec<PosePair> = generate_pairs(&base, &cfg, 50, 7).collect();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pose_pred, y.pose_pred);
        }
        let c: Vec<PosePair> = generate_pairs(&base, &cfg, 50, 8).collect();
        assert!(a.iter().zip(&c).any(|(x, y)| x.pose_pred != y.pose_pred));
    }

    #[test]
    fn rotation_invariance_of_directions() {
        // Rotating all samples by a fixed Q leaves octant counts statistically flat.
        let q = Rotation::from_axis_angle(Vector3::new(1.0, 0.7, -0.3), 1.234);
        let mut rng = seeded_rng(8);
        let n = 80_000usize;
        let mut octants = [0usize; 8];
        for _ in 0..n {
            let d = q.apply(&sample_direction(&mut rng));
            let idx = ((d.x > 0.0) as usize) | (((d.y > 0.0) as usize) << 1) | (((d.z > 0.0) as usize) << 2);
            octants[idx] += 1;
        }
        let expected = n as f64 / 8.0;
        let chi2: f64 = octants.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
        // 7 dof, alpha = 0.01 critical value.
        assert!(chi2 < 18.475, "chi2 {chi2}");
    }

    #[test]
    fn pair_crops_render_and_differ() {
        let mesh = Mesh::cuboid(120.0, 90.0, 60.0);
        let base = vec![Pose::from_translation(50.0, -30.0, 1000.0)];
        let cfg = spherical(30.0, 15.0);
        let pair = generate_pairs(&base, &cfg, 1, 13).next().unwrap();
        let (pred, obs) = render_pair_crops(&mesh, &pair, DEFAULT_CROP_PX, DEFAULT_CROP_SCALE);
        assert_eq!(pred.width(), DEFAULT_CROP_PX);
        assert!(pred.valid_count() > 100, "predicted crop mostly empty");
        assert!(obs.valid_count() > 100);
        assert_ne!(pred, obs);
    }
}
