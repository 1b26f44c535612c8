//! SO(3) and so(3) primitives: hat/vee, exponential and logarithm maps,
//! bi-invariant distance, re-orthonormalization.
//!
//! Numerical notes: both exponential and logarithm switch to truncated
//! series below [`SMALL_ANGLE`] to avoid cancellation in sin(t)/t and
//! (1-cos(t))/t^2; the logarithm recovers the angle with atan2 rather than
//! acos, which stays well conditioned near 0 and pi. Rotations within
//! [`PI_TRACE_TOL`] of a half-turn have no usable logarithm here and are
//! rejected; callers that need them switch exp-atlas charts instead
//! (see [`crate::charts`]).

use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Below this vector/angle norm, exp/log use 4th-order series branches.
pub const SMALL_ANGLE: f64 = 1e-4;
/// Orthonormality and determinant tolerance for the `Rotation` invariant.
pub const ORTHO_TOL: f64 = 1e-9;
/// `vee` rejects matrices whose symmetric part exceeds this Frobenius norm.
pub const SKEW_TOL: f64 = 1e-9;
/// `log_so3` rejects rotations with trace <= -1 + PI_TRACE_TOL.
pub const PI_TRACE_TOL: f64 = 1e-9;
/// Maximum Frobenius distance from SO(3) that `reorthonormalize` repairs.
pub const REORTHO_MAX_DIST: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum So3Error {
    #[error("matrix is not skew-symmetric (symmetric part {defect:.3e} exceeds {SKEW_TOL:.1e})")]
    NotSkew { defect: f64 },
    #[error("rotation angle is within tolerance of pi (trace {trace:.6}); log is undefined there")]
    AngleAtPi { trace: f64 },
    #[error("matrix is {distance:.3e} from SO(3), beyond the repairable {REORTHO_MAX_DIST}")]
    TooFarFromGroup { distance: f64 },
}

/// A rotation matrix: orthonormal to [`ORTHO_TOL`], determinant 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates the group invariants before wrapping.
    pub fn from_matrix(m: Mat3) -> Result<Self, So3Error> {
        let defect = orthonormality_defect(&m);
        let det = m.determinant();
        if defect > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(So3Error::TooFarFromGroup {
                distance: defect.max((det - 1.0).abs()),
            });
        }
        Ok(Rotation(m))
    }

    /// For matrices already known to satisfy the invariant (products of
    /// valid rotations, closed-form exponentials).
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        debug_assert!(orthonormality_defect(&m) <= 10.0 * ORTHO_TOL);
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// Relative rotation self^T * other.
    pub fn between(&self, other: &Rotation) -> Rotation {
        Rotation(self.0.tr_mul(&other.0))
    }
}

impl std::ops::Mul for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Rotation> for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

pub(crate) fn orthonormality_defect(m: &Mat3) -> f64 {
    (m.tr_mul(m) - Mat3::identity()).norm()
}

/// so(3) isomorphism: hat(v) w = v x w.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] on skew-symmetric matrices.
pub fn vee(m: &Mat3) -> Result<Vec3, So3Error> {
    let defect = (m + m.transpose()).norm();
    if defect > SKEW_TOL {
        return Err(So3Error::NotSkew { defect });
    }
    Ok(skew_part_vee(m))
}

/// vee of the skew part (m - m^T)/2, no skewness check.
fn skew_part_vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues exponential e^hat(v).
pub fn exp_so3(v: &Vec3) -> Rotation {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        // sin t / t and (1 - cos t)/t^2, 4th order
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(v);
    Rotation::from_matrix_unchecked(Mat3::identity() + a * k + b * (k * k))
}

/// Principal logarithm; the returned vector has norm < pi.
pub fn log_so3(r: &Rotation) -> Result<Vec3, So3Error> {
    let m = r.matrix();
    let trace = m.trace();
    if trace <= -1.0 + PI_TRACE_TOL {
        return Err(So3Error::AngleAtPi { trace });
    }
    // sv = vee((R - R^T)/2), |sv| = sin(theta)
    let sv = skew_part_vee(m);
    let s = sv.norm();
    let c = ((trace - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = s.atan2(c);
    let factor = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        // theta / sin theta, 4th order
        1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    } else {
        theta / s
    };
    Ok(factor * sv)
}

/// d(R1, R2) = |log(R1^T R2)|, saturating at pi for half-turn relatives.
pub fn bi_invariant_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    let rel = r1.matrix().tr_mul(r2.matrix());
    let s = skew_part_vee(&rel).norm();
    let c = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    s.atan2(c)
}

/// Drift repair for products of valid rotations: up to three Newton-Schulz
/// steps, no invariant checks. Integrator hot loops use this; everything
/// else goes through [`reorthonormalize`].
pub(crate) fn polish(r: &Rotation) -> Rotation {
    let mut x = r.0;
    for _ in 0..3 {
        let e = x.tr_mul(&x) - Mat3::identity();
        if e.norm() <= 1e-15 {
            break;
        }
        x -= x * (0.5 * e);
    }
    Rotation(x)
}

/// Projects a near-rotation onto SO(3) (polar factor, computed by
/// Newton-Schulz iteration; quadratically convergent for inputs within
/// [`REORTHO_MAX_DIST`] of the group).
pub fn reorthonormalize(m: &Mat3) -> Result<Rotation, So3Error> {
    let mut x = *m;
    let mut converged = false;
    for _ in 0..40 {
        let e = x.tr_mul(&x) - Mat3::identity();
        if e.norm() <= 1e-13 {
            converged = true;
            break;
        }
        if !e.norm().is_finite() {
            break;
        }
        // X <- X (I - E/2), one Newton-Schulz step toward the polar factor
        x -= x * (0.5 * e);
    }
    let distance = (x - m).norm();
    if !converged || x.determinant() < 0.0 || distance > REORTHO_MAX_DIST {
        return Err(So3Error::TooFarFromGroup {
            distance: if converged { distance } else { f64::INFINITY },
        });
    }
    Ok(Rotation(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hat_standard_basis() {
        let m = hat(&Vec3::new(1.0, 0.0, 0.0));
        let expected = Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(m, expected);
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn vee_inverts_hat() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        assert!(matches!(
            vee(&Mat3::identity()),
            Err(So3Error::NotSkew { .. })
        ));
    }

    #[test]
    fn exp_zero_is_identity() {
        assert_eq!(exp_so3(&Vec3::zeros()), Rotation::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let r = exp_so3(&Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn log_identity_is_zero() {
        assert_eq!(log_so3(&Rotation::identity()).unwrap(), Vec3::zeros());
    }

    #[test]
    fn log_rejects_half_turn() {
        let r = exp_so3(&Vec3::new(0.0, 0.0, std::f64::consts::PI));
        assert!(matches!(log_so3(&r), Err(So3Error::AngleAtPi { .. })));
    }

    #[test]
    fn round_trip_small_vector() {
        let v = Vec3::new(0.1, 0.2, 0.3);
        let back = log_so3(&exp_so3(&v)).unwrap();
        assert!((back - v).norm() < 1e-12);
    }

    #[test]
    fn distance_axis_angle() {
        let i = Rotation::identity();
        let r = exp_so3(&Vec3::new(0.0, 0.0, 0.7));
        assert!((bi_invariant_distance(&i, &r) - 0.7).abs() < 1e-12);
        assert_eq!(bi_invariant_distance(&r, &r), 0.0);
    }

    #[test]
    fn distance_saturates_at_pi() {
        let r = exp_so3(&Vec3::new(0.0, 0.0, std::f64::consts::PI));
        let d = bi_invariant_distance(&Rotation::identity(), &r);
        assert!((d - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn reorthonormalize_fixed_point() {
        let r = exp_so3(&Vec3::new(0.4, -0.2, 0.9));
        let repaired = reorthonormalize(r.matrix()).unwrap();
        assert!((repaired.matrix() - r.matrix()).norm() < 1e-14);
    }

    #[test]
    fn reorthonormalize_repairs_perturbation() {
        let r = exp_so3(&Vec3::new(0.4, -0.2, 0.9));
        let mut m = *r.matrix();
        m[(0, 1)] += 1e-6;
        m[(2, 0)] -= 1e-6;
        let repaired = reorthonormalize(&m).unwrap();
        assert!(orthonormality_defect(repaired.matrix()) <= ORTHO_TOL);
        assert!((repaired.matrix().determinant() - 1.0).abs() <= ORTHO_TOL);
    }

    #[test]
    fn reorthonormalize_rejects_reflections() {
        let m = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            reorthonormalize(&m),
            Err(So3Error::TooFarFromGroup { .. })
        ));
    }
}
