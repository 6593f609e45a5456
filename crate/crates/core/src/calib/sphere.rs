//! Least-squares sphere fit: algebraic initialization, Gauss-Newton
//! geometric refinement.

use nalgebra::{DMatrix, DVector, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::CalibError;

/// Design-matrix condition number above which the point set is treated as
/// coplanar (probe motion did not sweep a sphere).
const DEGENERACY_CONDITION: f64 = 1e8;

const GAUSS_NEWTON_ITERS: usize = 25;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphereFit {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub rms_residual: f64,
}

/// Fits a sphere to `points` (mm). Algebraic linear least squares gives the
/// initial centre/radius, Gauss-Newton on the geometric distance refines it.
pub fn fit_sphere(points: &[Vector3<f64>]) -> Result<SphereFit, CalibError> {
    if points.len() < 4 {
        return Err(CalibError::InsufficientPoints {
            got: points.len(),
            need: 4,
        });
    }

    // Algebraic form: |x|^2 = 2 c.x + (r^2 - |c|^2), linear in (c, k).
    let n = points.len();
    let mut a = DMatrix::zeros(n, 4);
    let mut b = DVector::zeros(n);
    // Centering the data keeps the condition number meaningful for spheres
    // far from the origin.
    let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n as f64;
    for (i, p) in points.iter().enumerate() {
        let q = p - centroid;
        a[(i, 0)] = 2.0 * q.x;
        a[(i, 1)] = 2.0 * q.y;
        a[(i, 2)] = 2.0 * q.z;
        a[(i, 3)] = 1.0;
        b[i] = q.norm_squared();
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > DEGENERACY_CONDITION {
        return Err(CalibError::DegenerateInput(format!(
            "points are coplanar within tolerance (condition number {:.3e})",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let w = svd
        .solve(&b, 0.0)
        .map_err(|e| CalibError::DegenerateInput(e.to_string()))?;
    let mut center = Vector3::new(w[0], w[1], w[2]);
    let r_sq = w[3] + center.norm_squared();
    if r_sq <= 0.0 {
        return Err(CalibError::DegenerateInput(
            "algebraic solution has non-positive radius".into(),
        ));
    }
    let mut radius = r_sq.sqrt();
    center += centroid;

    // Gauss-Newton on r_i = |p_i - c| - r.
    for _ in 0..GAUSS_NEWTON_ITERS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for p in points {
            let d = p - center;
            let dist = d.norm();
            if dist < 1e-12 {
                continue;
            }
            let r = dist - radius;
            let j = Vector4::new(-d.x / dist, -d.y / dist, -d.z / dist, -1.0);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let step = match jtj.cholesky() {
            Some(ch) => ch.solve(&(-jtr)),
            None => break,
        };
        center += Vector3::new(step[0], step[1], step[2]);
        radius += step[3];
        if step.norm() < 1e-12 {
            break;
        }
    }

    let rms = (points
        .iter()
        .map(|p| {
            let e = (p - center).norm() - radius;
            e * e
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();

    Ok(SphereFit {
        center,
        radius,
        rms_residual: rms,
    })
}
