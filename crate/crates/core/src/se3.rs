//! Rigid transforms and pose-distance metrics.
//!
//! # Conventions
//!
//! A [`Pose`] maps column vectors: `p_out = R * p_in + t`, translations in
//! millimetres. `compose(a, b)` is the matrix product `A * B`, i.e. the result
//! applies `b` first, then `a`. These conventions are fixed here once and
//! fixture-tested; every other module relies on them.
//!
//! Angles are radians internally and degrees at the API surface (metrics and
//! Euler angles report degrees).

use nalgebra::{Matrix3, Matrix4, Unit, UnitQuaternion, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance for the orthonormality / determinant checks on [`Rotation`].
pub const ROTATION_TOL: f64 = 1e-9;

/// `|beta|` this close to 90 degrees is flagged as gimbal lock.
pub const GIMBAL_LOCK_TOL_DEG: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum Se3Error {
    #[error("matrix is not orthonormal (max |M^T M - I| = {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("matrix determinant is {det}, expected +1")]
    NotProperRotation { det: f64 },
    #[error("non-finite component in transform")]
    NonFinite,
}

/// A 3x3 proper rotation matrix (orthonormal, det = +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and determinant within [`ROTATION_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, Se3Error> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Se3Error::NonFinite);
        }
        let gram = m.transpose() * m;
        let deviation = (gram - Matrix3::identity()).abs().max();
        if deviation > ROTATION_TOL {
            return Err(Se3Error::NotOrthonormal { deviation });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Se3Error::NotProperRotation { det });
        }
        Ok(Rotation(m))
    }

    /// Re-orthonormalizes `m` (nearest rotation in Frobenius norm via SVD)
    /// before validating. For matrices that are rotations up to roundoff.
    pub fn from_matrix_renormalized(m: Matrix3<f64>) -> Result<Self, Se3Error> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Se3Error::NonFinite);
        }
        let svd = m.svd(true, true);
        let u = svd.u.ok_or(Se3Error::NonFinite)?;
        let vt = svd.v_t.ok_or(Se3Error::NonFinite)?;
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut flip = Matrix3::identity();
            flip[(2, 2)] = -1.0;
            r = u * flip * vt;
        }
        Self::from_matrix(r)
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle_rad: f64) -> Self {
        let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle_rad);
        Rotation(q.to_rotation_matrix().into_inner())
    }

    /// Exponential map: axis-angle vector whose norm is the angle in radians.
    pub fn from_scaled_axis(v: Vector3<f64>) -> Self {
        Rotation(UnitQuaternion::from_scaled_axis(v).to_rotation_matrix().into_inner())
    }

    pub fn rot_x(angle_rad: f64) -> Self {
        Self::from_axis_angle(Vector3::x(), angle_rad)
    }

    pub fn rot_y(angle_rad: f64) -> Self {
        Self::from_axis_angle(Vector3::y(), angle_rad)
    }

    pub fn rot_z(angle_rad: f64) -> Self {
        Self::from_axis_angle(Vector3::z(), angle_rad)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }
}

/// Rigid transform: rotation plus translation in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Builds from a 4x4 homogeneous matrix; bottom row must be `[0 0 0 1]`
    /// within [`ROTATION_TOL`].
    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self, Se3Error> {
        let bottom_ok = (m[(3, 0)].abs() <= ROTATION_TOL)
            && (m[(3, 1)].abs() <= ROTATION_TOL)
            && (m[(3, 2)].abs() <= ROTATION_TOL)
            && ((m[(3, 3)] - 1.0).abs() <= ROTATION_TOL);
        if !bottom_ok {
            return Err(Se3Error::NonFinite);
        }
        let rotation = Rotation::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Se3Error::NonFinite);
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(p) + self.translation
    }
}

/// `compose(a, b)` maps a point through `b` then `a` (matrix product `A * B`).
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: a.rotation.compose(&b.rotation),
        translation: a.rotation.apply(&b.translation) + a.translation,
    }
}

/// Inverse transform: `compose(invert(p), p) = identity`.
pub fn invert(p: &Pose) -> Pose {
    let rt = p.rotation.transpose();
    Pose {
        translation: -rt.apply(&p.translation),
        rotation: rt,
    }
}

/// Translation error: L2 norm of the difference, in mm.
pub fn delta_t(t1: &Vector3<f64>, t2: &Vector3<f64>) -> f64 {
    (t1 - t2).norm()
}

/// Geodesic rotation distance `arccos((Tr(R1^T R2) - 1) / 2)`, in degrees.
///
/// The arccos argument is clamped to [-1, 1] to absorb roundoff. Identical
/// matrices short-circuit to exactly zero; the trace of R^T R rounds to just
/// under 3 for a general rotation and arccos would amplify that to ~1e-6 deg.
pub fn delta_r(r1: &Rotation, r2: &Rotation) -> f64 {
    if r1.matrix() == r2.matrix() {
        return 0.0;
    }
    let trace = (r1.matrix().transpose() * r2.matrix()).trace();
    let arg = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0);
    arg.acos().to_degrees()
}

/// Intrinsic X-Y-Z Euler angles in degrees: `R = Rx(alpha) * Ry(beta) * Rz(gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub gamma_deg: f64,
}

impl EulerAngles {
    pub fn new(alpha_deg: f64, beta_deg: f64, gamma_deg: f64) -> Self {
        EulerAngles {
            alpha_deg,
            beta_deg,
            gamma_deg,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// Result of [`rotation_to_euler`]; `gimbal_lock` is set when `|beta|` is
/// within [`GIMBAL_LOCK_TOL_DEG`] of 90 degrees and alpha/gamma are no longer
/// separable (alpha is then conventionally zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDecomposition {
    pub angles: EulerAngles,
    pub gimbal_lock: bool,
}

pub fn euler_to_rotation(e: &EulerAngles) -> Rotation {
    let rx = Rotation::rot_x(e.alpha_deg.to_radians());
    let ry = Rotation::rot_y(e.beta_deg.to_radians());
    let rz = Rotation::rot_z(e.gamma_deg.to_radians());
    rx.compose(&ry).compose(&rz)
}

pub fn rotation_to_euler(r: &Rotation) -> EulerDecomposition {
    let m = r.matrix();
    // R = Rx(a) Ry(b) Rz(g) gives m02 = sin(b), m01 = -cos(b) sin(g),
    // m00 = cos(b) cos(g), m12 = -sin(a) cos(b), m22 = cos(a) cos(b).
    let sb = m[(0, 2)].clamp(-1.0, 1.0);
    let beta = sb.asin();
    let gimbal_lock = (beta.to_degrees().abs() - 90.0).abs() <= GIMBAL_LOCK_TOL_DEG;
    if gimbal_lock {
        // Only alpha +/- gamma is observable; put everything in gamma.
        let gamma = m[(1, 0)].atan2(m[(1, 1)]) * sb.signum();
        return EulerDecomposition {
            angles: EulerAngles::new(0.0, beta.to_degrees(), gamma.to_degrees()),
            gimbal_lock: true,
        };
    }
    let alpha = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let gamma = (-m[(0, 1)]).atan2(m[(0, 0)]);
    EulerDecomposition {
        angles: EulerAngles::new(alpha.to_degrees(), beta.to_degrees(), gamma.to_degrees()),
        gimbal_lock: false,
    }
}

// On-disk form: 4x4 row-major homogeneous matrix as a flat array of 16
// numbers, translation in mm. Shared by poses.jsonl and all JSON reports.
impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let m = self.to_homogeneous();
        let mut flat = [0.0f64; 16];
        for row in 0..4 {
            for col in 0..4 {
                flat[row * 4 + col] = m[(row, col)];
            }
        }
        flat.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let flat = <[f64; 16]>::deserialize(deserializer)?;
        let mut m = Matrix4::zeros();
        for row in 0..4 {
            for col in 0..4 {
                m[(row, col)] = flat[row * 4 + col];
            }
        }
        // JSON f64 round-trips losslessly, so a matrix we wrote validates
        // bit-exact; renormalize only hand-written input with roundoff.
        let block = m.fixed_view::<3, 3>(0, 0).into_owned();
        let rot = Rotation::from_matrix(block)
            .or_else(|_| Rotation::from_matrix_renormalized(block))
            .map_err(|e| D::Error::custom(format!("invalid pose matrix: {e}")))?;
        Ok(Pose {
            rotation: rot,
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    pub(crate) fn random_rotation(rng: &mut impl Rng) -> Rotation {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let axis = if axis.norm() < 1e-6 { Vector3::x() } else { axis };
        Rotation::from_axis_angle(axis, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
    }

    pub(crate) fn random_pose(rng: &mut impl Rng) -> Pose {
        Pose {
            rotation: random_rotation(rng),
            translation: Vector3::new(
                rng.random_range(-1000.0..1000.0),
                rng.random_range(-1000.0..1000.0),
                rng.random_range(-1000.0..1000.0),
            ),
        }
    }

    /// Quaternion geodesic oracle for delta_r: 2 * acos(|q1 . q2|).
    fn quat_angle_deg(r1: &Rotation, r2: &Rotation) -> f64 {
        let q1 = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            *r1.matrix(),
        ));
        let q2 = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            *r2.matrix(),
        ));
        let dot = q1.coords.dot(&q2.coords).abs().clamp(0.0, 1.0);
        (2.0 * dot.acos()).to_degrees()
    }

    #[test]
    fn compose_identity() {
        let i = Pose::identity();
        assert_eq!(compose(&i, &i), i);
    }

    #[test]
    fn compose_pure_translations() {
        let a = Pose::from_translation(1.0, 0.0, 0.0);
        let b = Pose::from_translation(0.0, 2.0, 0.0);
        let c = compose(&a, &b);
        assert_eq!(c.translation, Vector3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn compose_matches_homogeneous_product_oracle() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..200 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let got = compose(&a, &b).to_homogeneous();
            let want = a.to_homogeneous() * b.to_homogeneous();
            assert!((got - want).abs().max() < 1e-9);
        }
    }

    #[test]
    fn compose_convention_applies_b_first() {
        // a = Rz(90 deg), b = T(1,0,0): compose(a,b) sends origin to a(b(0)) = (0,1,0).
        let a = Pose::new(Rotation::rot_z(90f64.to_radians()), Vector3::zeros());
        let b = Pose::from_translation(1.0, 0.0, 0.0);
        let p = compose(&a, &b).apply(&Vector3::zeros());
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invert_identity_and_translation() {
        assert_eq!(invert(&Pose::identity()), Pose::identity());
        let t = invert(&Pose::from_translation(1.0, 2.0, 3.0));
        assert_eq!(t.translation, Vector3::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn invert_composes_to_identity() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..200 {
            let p = random_pose(&mut rng);
            let id = compose(&p, &invert(&p));
            assert!((id.to_homogeneous() - Matrix4::identity()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn delta_t_345_triangle() {
        let a = Vector3::zeros();
        let b = Vector3::new(3.0, 4.0, 0.0);
        assert_eq!(delta_t(&a, &b), 5.0);
        assert_eq!(delta_t(&b, &b), 0.0);
    }

    #[test]
    fn delta_r_trivial_cases() {
        let i = Rotation::identity();
        assert_eq!(delta_r(&i, &i), 0.0);
        let rz90 = Rotation::rot_z(90f64.to_radians());
        assert_abs_diff_eq!(delta_r(&i, &rz90), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn delta_r_matches_quaternion_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..500 {
            let r1 = random_rotation(&mut rng);
            let r2 = random_rotation(&mut rng);
            assert_abs_diff_eq!(delta_r(&r1, &r2), quat_angle_deg(&r1, &r2), epsilon = 1e-6);
        }
    }

    #[test]
    fn delta_r_near_180_is_clamped() {
        let i = Rotation::identity();
        let r = Rotation::rot_x(std::f64::consts::PI);
        let d = delta_r(&i, &r);
        assert!(d <= 180.0 && d > 179.999999);
    }

    #[test]
    fn euler_fixture_cases() {
        assert_eq!(euler_to_rotation(&EulerAngles::zero()), Rotation::identity());
        let rz = euler_to_rotation(&EulerAngles::new(0.0, 0.0, 90.0));
        assert!((rz.matrix() - Rotation::rot_z(90f64.to_radians()).matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn euler_gimbal_lock_flagged() {
        let r = euler_to_rotation(&EulerAngles::new(10.0, 90.0, 5.0));
        let dec = rotation_to_euler(&r);
        assert!(dec.gimbal_lock);
        // The decomposition still reproduces the rotation.
        let back = euler_to_rotation(&dec.angles);
        assert!(delta_r(&r, &back) < 1e-6);
    }

    #[test]
    fn pose_json_roundtrip_is_exact() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..20 {
            let p = random_pose(&mut rng);
            let json = serde_json::to_string(&p).unwrap();
            let back: Pose = serde_json::from_str(&json).unwrap();
            assert!((p.to_homogeneous() - back.to_homogeneous()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn rotation_validation_rejects_bad_matrices() {
        let scaled = Matrix3::identity() * 1.1;
        assert!(matches!(
            Rotation::from_matrix(scaled),
            Err(Se3Error::NotOrthonormal { .. })
        ));
        let mut reflect = Matrix3::identity();
        reflect[(2, 2)] = -1.0;
        assert!(matches!(
            Rotation::from_matrix(reflect),
            Err(Se3Error::NotProperRotation { .. })
        ));
    }

    proptest! {
        #[test]
        fn euler_roundtrip_away_from_lock(
            a in -89.0f64..89.0,
            b in -89.0f64..89.0,
            g in -89.0f64..89.0,
        ) {
            let e = EulerAngles::new(a, b, g);
            let dec = rotation_to_euler(&euler_to_rotation(&e));
            prop_assert!(!dec.gimbal_lock);
            prop_assert!((dec.angles.alpha_deg - a).abs() < 1e-6);
            prop_assert!((dec.angles.beta_deg - b).abs() < 1e-6);
            prop_assert!((dec.angles.gamma_deg - g).abs() < 1e-6);
        }

        #[test]
        fn delta_r_triangle_inequality(seed in 0u64..10_000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let c = random_rotation(&mut rng);
            prop_assert!(delta_r(&a, &b) <= delta_r(&a, &c) + delta_r(&c, &b) + 1e-6);
        }

        #[test]
        fn delta_r_bi_invariance(seed in 0u64..10_000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let q = random_rotation(&mut rng);
            let d = delta_r(&a, &b);
            prop_assert!((delta_r(&q.compose(&a), &q.compose(&b)) - d).abs() < 1e-6);
            prop_assert!((delta_r(&a.compose(&q), &b.compose(&q)) - d).abs() < 1e-6);
        }

        #[test]
        fn compose_associative(seed in 0u64..10_000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let c = random_pose(&mut rng);
            let lhs = compose(&compose(&a, &b), &c).to_homogeneous();
            let rhs = compose(&a, &compose(&b, &c)).to_homogeneous();
            prop_assert!((lhs - rhs).abs().max() < 1e-9);
        }

        #[test]
        fn sampled_axis_angle_is_valid_rotation(seed in 0u64..10_000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let r = random_rotation(&mut rng);
            prop_assert!(Rotation::from_matrix(*r.matrix()).is_ok());
        }
    }
}
