//! SO(3): rotation matrices, the hat/vee maps, Rodrigues exponential and the
//! logarithm, plus the left Jacobian family used by SE_K(3).

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle (rad) every trigonometric coefficient switches to its
/// Taylor series. The third- and fourth-order coefficients (`(θ - sin θ)/θ³`
/// and friends) lose all precision well before 1e-6, so the switch happens
/// at 1e-3 where the truncated series is exact to machine precision.
pub const SMALL_ANGLE: f64 = 1e-3;

/// Rotations whose angle is within this distance of π are logged through the
/// symmetric-part (diagonal dominant) branch instead of dividing by sin θ.
pub const NEAR_PI: f64 = 1e-2;

/// Orthogonality drift ‖RᵀR - I‖_F above which a rotation is re-projected.
pub const ORTHO_TOLERANCE: f64 = 1e-9;

/// Skew-symmetric matrix with `hat(v) * u == v.cross(&u)`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] on the skew part of `m`.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// `sin θ / θ`
pub(crate) fn coeff_a(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}

/// `(1 - cos θ) / θ²`
pub(crate) fn coeff_b(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        let s = (0.5 * theta).sin();
        2.0 * s * s / (theta * theta)
    }
}

/// `(θ - sin θ) / θ³`
pub(crate) fn coeff_c(theta: f64) -> f64 {
    // Cancellation costs ~ε/θ² here, more than elsewhere; widen the series.
    if theta < 0.1 {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0 * (1.0 - t2 / 110.0)))
    } else {
        (theta - theta.sin()) / (theta * theta * theta)
    }
}

/// `(θ²/2 - (1 - cos θ)) / θ⁴`
pub(crate) fn coeff_d(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0
    } else {
        let s = (0.5 * theta).sin();
        let t2 = theta * theta;
        (0.5 * t2 - 2.0 * s * s) / (t2 * t2)
    }
}

/// `(1 - θ sin θ / (2 (1 - cos θ))) / θ²`, the quadratic coefficient of J_l⁻¹.
fn coeff_e(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half / half.tan()) / (theta * theta)
    }
}

/// Left Jacobian of SO(3), `J_l(φ) = Σ hat(φ)ⁿ / (n+1)!`. Also the Γ₁ term of
/// strapdown integration.
pub fn left_jacobian(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    Mat3::identity() + coeff_b(theta) * k + coeff_c(theta) * k * k
}

/// Inverse of [`left_jacobian`]; valid for |φ| < 2π.
pub fn left_jacobian_inv(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    Mat3::identity() - 0.5 * k + coeff_e(theta) * k * k
}

/// Γ₂(φ) = Σ hat(φ)ⁿ / (n+2)!, the double-integral term of strapdown
/// position integration.
pub fn gamma2(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    0.5 * Mat3::identity() + coeff_c(theta) * k + coeff_d(theta) * k * k
}

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix that is already known to be a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Validates orthogonality and determinant to 1e-9 (Frobenius).
    pub fn from_matrix(m: Mat3) -> Result<Self, Error> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let ortho = (m.transpose() * m - Mat3::identity()).norm();
        if ortho > ORTHO_TOLERANCE {
            return Err(Error::InvalidRotation(format!(
                "orthogonality error {ortho:.3e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHO_TOLERANCE {
            return Err(Error::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Rotation(m))
    }

    /// Nearest rotation in the Frobenius sense (polar factor via SVD).
    pub fn project(m: &Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let vt = svd.v_t.expect("svd v_t");
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * vt;
        }
        Rotation(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// ‖RᵀR - I‖_F
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    /// Re-projects onto SO(3) if drift exceeds [`ORTHO_TOLERANCE`].
    pub fn renormalized(self) -> Self {
        if self.orthogonality_error() > ORTHO_TOLERANCE {
            Rotation::project(&self.0)
        } else {
            self
        }
    }

    pub fn exp(v: &Vec3) -> Self {
        so3_exp(v)
    }

    pub fn log(&self) -> Vec3 {
        so3_log(self)
    }

    pub fn rot_x(angle: f64) -> Self {
        so3_exp(&Vec3::new(angle, 0.0, 0.0))
    }

    pub fn rot_y(angle: f64) -> Self {
        so3_exp(&Vec3::new(0.0, angle, 0.0))
    }

    pub fn rot_z(angle: f64) -> Self {
        so3_exp(&Vec3::new(0.0, 0.0, angle))
    }

    /// `Rz(yaw) · Ry(pitch) · Rx(roll)`
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        Rotation::rot_z(yaw) * Rotation::rot_y(pitch) * Rotation::rot_x(roll)
    }

    /// Inverse of [`Rotation::from_euler_zyx`], returning `(roll, pitch, yaw)`.
    pub fn to_euler_zyx(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }

    pub fn row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(a: [f64; 9]) -> Result<Self, Error> {
        Rotation::from_matrix(Mat3::from_row_slice(&a))
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl TryFrom<[f64; 9]> for Rotation {
    type Error = Error;
    fn try_from(a: [f64; 9]) -> Result<Self, Error> {
        // Serialized rotations carry ~17 significant digits; re-project so the
        // stored value is orthogonal to machine precision.
        let m = Mat3::from_row_slice(&a);
        Rotation::from_matrix(m).map(|r| r.renormalized())
    }
}

impl From<Rotation> for [f64; 9] {
    fn from(r: Rotation) -> [f64; 9] {
        r.row_major()
    }
}

/// Rodrigues formula: `I + (sin θ/θ) K + ((1 - cos θ)/θ²) K²` with `K = hat(v)`.
pub fn so3_exp(v: &Vec3) -> Rotation {
    let theta = v.norm();
    let k = hat(v);
    Rotation(Mat3::identity() + coeff_a(theta) * k + coeff_b(theta) * k * k)
}

/// Rotation vector with angle in `[0, π]`.
///
/// Near π the axis is read from the symmetric part
/// `(R + Rᵀ)/2 - cos θ·I = (1 - cos θ)·aaᵀ` using its largest diagonal entry,
/// with the sign fixed by the skew part. Elsewhere the skew part is scaled by
/// `θ / sin θ`.
pub fn so3_log(r: &Rotation) -> Vec3 {
    let m = &r.0;
    let skew = vee(m); // sin θ · a
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_theta = skew.norm();
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        // θ / sin θ = 1 + θ²/6 + 7θ⁴/360
        let t2 = theta * theta;
        return skew * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
    }
    if theta < PI - NEAR_PI {
        return skew * (theta / sin_theta);
    }

    let sym = 0.5 * (m + m.transpose()) - cos_theta * Mat3::identity();
    let k = (0..3)
        .max_by(|&i, &j| sym[(i, i)].total_cmp(&sym[(j, j)]))
        .unwrap_or(0);
    let scale = (sym[(k, k)] * (1.0 - cos_theta)).sqrt();
    let mut axis: Vec3 = sym.column(k) / scale;
    axis.normalize_mut();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    axis * theta
}
