//! Perspective-n-points: DLT initialization, Levenberg-Marquardt
//! reprojection refinement.

use nalgebra::{DMatrix, Matrix3, Matrix6, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::CalibError;
use crate::camera::Intrinsics;
use crate::se3::{Pose, Rotation};

const MIN_POINTS: usize = 6;
const LM_MAX_ITERS: usize = 100;
const LM_LAMBDA_INIT: f64 = 1e-3;
/// Mean pixel residual above which hitting the iteration cap is reported
/// as NoConvergence rather than a merely noisy fit.
const NO_CONVERGENCE_RESIDUAL_PX: f64 = 10.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Correspondence2D3D {
    /// Detected pixel position.
    pub image_point: Vector2<f64>,
    /// Matching 3D point in the world frame (mm).
    pub world_point: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PnpSolution {
    /// World-to-camera pose.
    pub pose: Pose,
    /// Mean Euclidean pixel reprojection error at the solution.
    pub mean_reprojection_px: f64,
    pub iterations: usize,
}

/// Recovers the world-to-camera pose from 2D-3D correspondences.
pub fn solve_pnp(
    correspondences: &[Correspondence2D3D],
    k: &Intrinsics,
) -> Result<PnpSolution, CalibError> {
    if correspondences.len() < MIN_POINTS {
        return Err(CalibError::InsufficientPoints {
            got: correspondences.len(),
            need: MIN_POINTS,
        });
    }
    let initial = dlt_init(correspondences, k)?;
    refine_lm(initial, correspondences, k)
}

/// DLT on K-normalized image coordinates with Hartley-style conditioning of
/// the 3D points.
fn dlt_init(correspondences: &[Correspondence2D3D], k: &Intrinsics) -> Result<Pose, CalibError> {
    let n = correspondences.len();

    let centroid: Vector3<f64> = correspondences
        .iter()
        .map(|c| c.world_point)
        .sum::<Vector3<f64>>()
        / n as f64;
    let mean_dist = correspondences
        .iter()
        .map(|c| (c.world_point - centroid).norm())
        .sum::<f64>()
        / n as f64;
    if mean_dist < 1e-12 {
        return Err(CalibError::DegenerateInput(
            "all world points coincide".into(),
        ));
    }
    let scale = 3f64.sqrt() / mean_dist;

    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, c) in correspondences.iter().enumerate() {
        let xn = (c.image_point.x - k.cx) / k.fx;
        let yn = (c.image_point.y - k.cy) / k.fy;
        let p = (c.world_point - centroid) * scale;
        let xh = [p.x, p.y, p.z, 1.0];
        for j in 0..4 {
            a[(2 * i, j)] = xh[j];
            a[(2 * i, 8 + j)] = -xn * xh[j];
            a[(2 * i + 1, 4 + j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -yn * xh[j];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| {
        CalibError::DegenerateInput("SVD failed on DLT design matrix".into())
    })?;
    // Guard against a rank-deficient configuration (e.g. all points and the
    // camera centre on a critical surface).
    let smin = svd.singular_values[svd.singular_values.len() - 2];
    if smin < 1e-12 {
        return Err(CalibError::DegenerateInput(
            "DLT system is rank deficient".into(),
        ));
    }
    let m = v_t.row(v_t.nrows() - 1);

    let mut a3 = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            a3[(r, c)] = m[4 * r + c];
        }
        b[r] = m[4 * r + 3];
    }
    // Undo the 3D conditioning: P_orig = P_cond * [sI, -s*centroid; 0, 1].
    b -= a3 * centroid * scale;
    a3 *= scale;

    // Majority of the points must be in front of the camera.
    let in_front = correspondences
        .iter()
        .filter(|c| (a3 * c.world_point + b).z > 0.0)
        .count();
    let (a3, b) = if in_front * 2 < n { (-a3, -b) } else { (a3, b) };

    // Nearest rotation and consistent scale.
    let svd3 = a3.svd(true, true);
    let u = svd3.u.unwrap();
    let vt = svd3.v_t.unwrap();
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * vt;
    let s = svd3.singular_values.sum() / 3.0;
    if s < 1e-15 {
        return Err(CalibError::DegenerateInput("DLT scale collapsed".into()));
    }
    let rotation = Rotation::from_matrix_renormalized(r)
        .map_err(|e| CalibError::DegenerateInput(e.to_string()))?;
    Ok(Pose::new(rotation, b / s))
}

fn reprojection_cost(pose: &Pose, correspondences: &[Correspondence2D3D], k: &Intrinsics) -> f64 {
    let mut sum = 0.0;
    for c in correspondences {
        let p = pose.apply(&c.world_point);
        let z = p.z.max(1e-9);
        let du = k.fx * p.x / z + k.cx - c.image_point.x;
        let dv = k.fy * p.y / z + k.cy - c.image_point.y;
        sum += du * du + dv * dv;
    }
    sum / correspondences.len() as f64
}

fn mean_pixel_error(pose: &Pose, correspondences: &[Correspondence2D3D], k: &Intrinsics) -> f64 {
    let mut sum = 0.0;
    for c in correspondences {
        let p = pose.apply(&c.world_point);
        let z = p.z.max(1e-9);
        let du = k.fx * p.x / z + k.cx - c.image_point.x;
        let dv = k.fy * p.y / z + k.cy - c.image_point.y;
        sum += (du * du + dv * dv).sqrt();
    }
    sum / correspondences.len() as f64
}

/// LM over a left-multiplied increment (omega, dt): accepted steps never
/// increase the mean squared pixel cost.
fn refine_lm(
    mut pose: Pose,
    correspondences: &[Correspondence2D3D],
    k: &Intrinsics,
) -> Result<PnpSolution, CalibError> {
    let mut lambda = LM_LAMBDA_INIT;
    let mut cost = reprojection_cost(&pose, correspondences, k);
    let mut iterations = 0;

    while iterations < LM_MAX_ITERS {
        iterations += 1;

        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for c in correspondences {
            let p = pose.apply(&c.world_point);
            let z = p.z.max(1e-9);
            let ru = k.fx * p.x / z + k.cx - c.image_point.x;
            let rv = k.fy * p.y / z + k.cy - c.image_point.y;
            // d(u)/d(p) and d(v)/d(p)
            let du_dp = Vector3::new(k.fx / z, 0.0, -k.fx * p.x / (z * z));
            let dv_dp = Vector3::new(0.0, k.fy / z, -k.fy * p.y / (z * z));
            // dp/d(omega) = -[p]_x, dp/d(dt) = I
            let mut ju = Vector6::zeros();
            let mut jv = Vector6::zeros();
            let cross_u = p.cross(&du_dp); // row du_dp * (-[p]_x) = (p x du_dp)^T
            let cross_v = p.cross(&dv_dp);
            for i in 0..3 {
                ju[i] = cross_u[i];
                ju[3 + i] = du_dp[i];
                jv[i] = cross_v[i];
                jv[3 + i] = dv_dp[i];
            }
            jtj += ju * ju.transpose() + jv * jv.transpose();
            jtr += ju * ru + jv * rv;
        }

        let mut stepped = false;
        for _ in 0..10 {
            let mut damped = jtj;
            for i in 0..6 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(ch) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = ch.solve(&(-jtr));
            let omega = Vector3::new(delta[0], delta[1], delta[2]);
            let dt = Vector3::new(delta[3], delta[4], delta[5]);
            let dr = Rotation::from_scaled_axis(omega);
            let candidate = Pose::new(
                dr.compose(&pose.rotation),
                dr.apply(&pose.translation) + dt,
            );
            let candidate_cost = reprojection_cost(&candidate, correspondences, k);
            if candidate_cost <= cost {
                let relative_drop = (cost - candidate_cost) / cost.max(1e-300);
                pose = candidate;
                cost = candidate_cost;
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                if relative_drop < 1e-12 || delta.norm() < 1e-14 {
                    return Ok(PnpSolution {
                        pose,
                        mean_reprojection_px: mean_pixel_error(&pose, correspondences, k),
                        iterations,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // Damping saturated: converged to a local minimum.
            break;
        }
    }

    let mean_px = mean_pixel_error(&pose, correspondences, k);
    if iterations >= LM_MAX_ITERS && mean_px > NO_CONVERGENCE_RESIDUAL_PX {
        return Err(CalibError::NoConvergence {
            iterations,
            residual: mean_px,
        });
    }
    Ok(PnpSolution {
        pose,
        mean_reprojection_px: mean_px,
        iterations,
    })
}
