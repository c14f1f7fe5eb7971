//! SE_3(3): a rotation extended by three vector columns (velocity, base
//! position, support-foot position).
//!
//! The embedded 6×6 matrix is
//!
//! ```text
//! [ R  v  p  d ]
//! [ 0  1  0  0 ]
//! [ 0  0  1  0 ]
//! [ 0  0  0  1 ]
//! ```
//!
//! Tangent vectors are ordered `(ξ_R, ξ_v, ξ_p, ξ_d)` everywhere in this
//! crate: in the error Jacobian, the measurement Jacobians and the covariance.

use std::ops::{Index, Mul};

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::so3::{hat, left_jacobian, left_jacobian_inv, so3_exp, so3_log, Mat3, Rotation, Vec3};

/// Number of vector columns carried next to the rotation.
pub const K: usize = 3;
/// Tangent-space dimension, `3 + 3K`.
pub const DIM: usize = 3 + 3 * K;

pub type Vec12 = SVector<f64, DIM>;
pub type Mat12 = SMatrix<f64, DIM, DIM>;
/// Embedded `(3+K)×(3+K)` matrix.
pub type Mat6 = SMatrix<f64, 6, 6>;

/// Index of each vector column and tangent block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Rot = 0,
    Vel = 1,
    Pos = 2,
    Foot = 3,
}

impl Block {
    /// First row of this block inside a 12-vector.
    pub const fn offset(self) -> usize {
        3 * self as usize
    }
}

/// A Lie-algebra vector of SE_3(3).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TangentVec(pub Vec12);

impl TangentVec {
    pub fn zeros() -> Self {
        TangentVec(Vec12::zeros())
    }

    pub fn from_blocks(rot: Vec3, vel: Vec3, pos: Vec3, foot: Vec3) -> Self {
        let mut v = Vec12::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&rot);
        v.fixed_rows_mut::<3>(3).copy_from(&vel);
        v.fixed_rows_mut::<3>(6).copy_from(&pos);
        v.fixed_rows_mut::<3>(9).copy_from(&foot);
        TangentVec(v)
    }

    pub fn block(&self, b: Block) -> Vec3 {
        self.0.fixed_rows::<3>(b.offset()).into_owned()
    }

    pub fn rot(&self) -> Vec3 {
        self.block(Block::Rot)
    }

    /// The translation-like block of column `i` (0 = v, 1 = p, 2 = d).
    pub fn col(&self, i: usize) -> Vec3 {
        self.0.fixed_rows::<3>(3 + 3 * i).into_owned()
    }

    pub fn as_vector(&self) -> &Vec12 {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// The `∧` map into the embedded Lie algebra.
    pub fn hat(&self) -> Mat6 {
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.rot()));
        for i in 0..K {
            m.fixed_view_mut::<3, 1>(0, 3 + i).copy_from(&self.col(i));
        }
        m
    }

    /// Inverse of [`TangentVec::hat`], reading only the top block rows.
    pub fn vee(m: &Mat6) -> Self {
        let r: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        let cols: [Vec3; K] = std::array::from_fn(|i| m.fixed_view::<3, 1>(0, 3 + i).into_owned());
        TangentVec::from_blocks(super::so3::vee(&r), cols[0], cols[1], cols[2])
    }
}

impl From<Vec12> for TangentVec {
    fn from(v: Vec12) -> Self {
        TangentVec(v)
    }
}

impl Index<usize> for TangentVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A point of SE_3(3): `(R, v, p, d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub rot: Rotation,
    pub cols: [Vec3; K],
}

impl Default for GroupElement {
    fn default() -> Self {
        GroupElement::identity()
    }
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement {
            rot: Rotation::identity(),
            cols: [Vec3::zeros(); K],
        }
    }

    pub fn new(rot: Rotation, vel: Vec3, pos: Vec3, foot: Vec3) -> Self {
        GroupElement {
            rot,
            cols: [vel, pos, foot],
        }
    }

    pub fn from_rotation(rot: Rotation) -> Self {
        GroupElement {
            rot,
            cols: [Vec3::zeros(); K],
        }
    }

    pub fn vel(&self) -> &Vec3 {
        &self.cols[0]
    }

    pub fn pos(&self) -> &Vec3 {
        &self.cols[1]
    }

    pub fn foot(&self) -> &Vec3 {
        &self.cols[2]
    }

    pub fn is_finite(&self) -> bool {
        self.rot.matrix().iter().all(|x| x.is_finite())
            && self.cols.iter().all(|c| c.iter().all(|x| x.is_finite()))
    }

    pub fn to_matrix(&self) -> Mat6 {
        let mut m = Mat6::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        for (i, c) in self.cols.iter().enumerate() {
            m.fixed_view_mut::<3, 1>(0, 3 + i).copy_from(c);
        }
        m
    }

    /// Reads the top block rows of an embedded matrix. The rotation block is
    /// taken as-is.
    pub fn from_matrix_unchecked(m: &Mat6) -> Self {
        GroupElement {
            rot: Rotation::from_matrix_unchecked(m.fixed_view::<3, 3>(0, 0).into_owned()),
            cols: std::array::from_fn(|i| m.fixed_view::<3, 1>(0, 3 + i).into_owned()),
        }
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let r = self.rot.matrix();
        GroupElement {
            rot: self.rot * other.rot,
            cols: std::array::from_fn(|i| r * other.cols[i] + self.cols[i]),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        let rt = self.rot.transpose();
        GroupElement {
            rot: rt,
            cols: std::array::from_fn(|i| -(rt.matrix() * self.cols[i])),
        }
    }

    /// `X ↦ (R, v, p, d)` acting on the augmented vector `[x; a₁; a₂; a₃]`:
    /// returns the top three rows of `X·[x; a]`.
    pub fn act(&self, x: &Vec3, aug: [f64; K]) -> Vec3 {
        let mut out = self.rot.matrix() * x;
        for (c, a) in self.cols.iter().zip(aug) {
            out += c * a;
        }
        out
    }

    /// 12×12 adjoint with `X·ξ^∧·X⁻¹ = (Ad_X ξ)^∧`.
    pub fn adjoint(&self) -> Mat12 {
        let r = self.rot.matrix();
        let mut ad = Mat12::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        for (i, c) in self.cols.iter().enumerate() {
            let o = 3 + 3 * i;
            ad.fixed_view_mut::<3, 3>(o, o).copy_from(r);
            ad.fixed_view_mut::<3, 3>(o, 0).copy_from(&(hat(c) * r));
        }
        ad
    }

    pub fn exp(xi: &TangentVec) -> Self {
        sek3_exp(xi)
    }

    pub fn log(&self) -> TangentVec {
        sek3_log(self)
    }

    /// Re-projects the rotation block if it has drifted off SO(3).
    pub fn renormalized(self) -> Self {
        GroupElement {
            rot: self.rot.renormalized(),
            cols: self.cols,
        }
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        self.compose(&rhs)
    }
}

impl Mul<&GroupElement> for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        self.compose(rhs)
    }
}

/// Closed-form exponential: `R = exp(ξ_R)`, `col_i = J_l(ξ_R)·ξ_i`.
pub fn sek3_exp(xi: &TangentVec) -> GroupElement {
    let phi = xi.rot();
    let jl = left_jacobian(&phi);
    GroupElement {
        rot: so3_exp(&phi),
        cols: std::array::from_fn(|i| jl * xi.col(i)),
    }
}

/// Inverse of [`sek3_exp`] for rotation angles below π.
pub fn sek3_log(x: &GroupElement) -> TangentVec {
    let phi = so3_log(&x.rot);
    let jinv = left_jacobian_inv(&phi);
    let cols: [Vec3; K] = std::array::from_fn(|i| jinv * x.cols[i]);
    TangentVec::from_blocks(phi, cols[0], cols[1], cols[2])
}
