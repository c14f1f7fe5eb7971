//! Matrix Lie groups: SO(3) and SE_3(3).

mod sek3;
mod so3;

pub use sek3::{
    sek3_exp, sek3_log, Block, GroupElement, Mat12, Mat6, TangentVec, Vec12, DIM, K,
};
pub use so3::{
    gamma2, hat, left_jacobian, left_jacobian_inv, so3_exp, so3_log, vee, Mat3, Rotation, Vec3,
    NEAR_PI, ORTHO_TOLERANCE, SMALL_ANGLE,
};
