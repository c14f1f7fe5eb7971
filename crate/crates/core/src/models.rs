//! Process model on SE_3(3) and the right-invariant measurement models.
//!
//! Error convention used throughout: `η = X̂·X⁻¹ ≈ exp(ξ)`. A measurement in
//! right-invariant form `Y = X⁻¹·b + V` yields the innovation
//! `z = (X̂·Y - b)₁:₃ ≈ (ξ^∧ b)₁:₃ = H ξ`, with `H` independent of the estimate.

use nalgebra::{DMatrix, SMatrix, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{hat, Block, GroupElement, Mat12, Mat3, Mat6, Rotation, Vec3, DIM, K};

/// Gravity in the world frame (z up), m/s².
pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

/// Measurement Jacobian, 3×12.
pub type Mat3x12 = SMatrix<f64, 3, DIM>;

/// One IMU interval with zero-order-hold inputs over `[t, t + dt]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuStep {
    pub t: f64,
    pub dt: f64,
    /// Body-frame angular rate, rad/s.
    pub gyro: Vec3,
    /// Body-frame specific force, m/s².
    pub accel: Vec3,
    /// World-frame velocity of the support-foot contact, m/s.
    pub contact_vel: Vec3,
}

impl ImuStep {
    pub fn validate(&self) -> Result<()> {
        let finite = self.t.is_finite()
            && self.dt.is_finite()
            && self.gyro.iter().chain(&self.accel).chain(&self.contact_vel).all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("imu step"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::InvalidTimeStep(self.dt));
        }
        Ok(())
    }
}

/// Noise levels for process, measurement and jump models.
///
/// `gyro`, `accel` and `contact_vel` are continuous-time densities, (unit)²/Hz,
/// of the body-frame white noise `w` entering as `X·w^∧`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub gyro_cov: Mat3,
    pub accel_cov: Mat3,
    pub contact_vel_cov: Mat3,
    /// Leg-kinematics foot position, base frame, m².
    pub fk_pos_cov: Mat3,
    /// Support-foot normal direction, rad².
    pub surface_orient_cov: Mat3,
    /// Jump-map noise `w^Δ`, tangent coordinates.
    pub jump_cov: Mat12,
}

impl Default for NoiseParams {
    fn default() -> Self {
        let mut jump_cov = Mat12::zeros();
        jump_cov
            .fixed_view_mut::<3, 3>(Block::Foot.offset(), Block::Foot.offset())
            .copy_from(&(Mat3::identity() * 1e-6));
        NoiseParams {
            gyro_cov: Mat3::identity() * 1e-5,
            accel_cov: Mat3::identity() * 1e-4,
            contact_vel_cov: Mat3::identity() * 1e-4,
            fk_pos_cov: Mat3::identity() * 1e-4,
            surface_orient_cov: Mat3::identity() * 1e-4,
            jump_cov,
        }
    }
}

impl NoiseParams {
    /// All densities and covariances zero.
    pub fn zero() -> Self {
        NoiseParams {
            gyro_cov: Mat3::zeros(),
            accel_cov: Mat3::zeros(),
            contact_vel_cov: Mat3::zeros(),
            fk_pos_cov: Mat3::zeros(),
            surface_orient_cov: Mat3::zeros(),
            jump_cov: Mat12::zeros(),
        }
    }

    /// Block-diagonal covariance density of the process noise in tangent
    /// coordinates `(w_g, w_a, 0, w_d)`.
    pub fn process_density(&self) -> Mat12 {
        let mut q = Mat12::zeros();
        q.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.gyro_cov);
        q.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.accel_cov);
        q.fixed_view_mut::<3, 3>(9, 9).copy_from(&self.contact_vel_cov);
        q
    }

    pub fn validate(&self) -> Result<()> {
        let mats: [(&str, &Mat3); 5] = [
            ("gyro_cov", &self.gyro_cov),
            ("accel_cov", &self.accel_cov),
            ("contact_vel_cov", &self.contact_vel_cov),
            ("fk_pos_cov", &self.fk_pos_cov),
            ("surface_orient_cov", &self.surface_orient_cov),
        ];
        for (name, m) in mats {
            check_psd(name, DMatrix::from_column_slice(3, 3, m.as_slice()))?;
        }
        check_psd("jump_cov", DMatrix::from_column_slice(DIM, DIM, self.jump_cov.as_slice()))
    }
}

fn check_psd(name: &str, m: DMatrix<f64>) -> Result<()> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::config(name, "non-finite entry"));
    }
    let scale = m.amax().max(1.0);
    if (&m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::config(name, "not symmetric"));
    }
    let min = m.symmetric_eigenvalues().min();
    if min < -1e-12 * scale {
        return Err(Error::config(name, format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Right-invariant observation `Y = X⁻¹·b + V` ready for the update step.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantMeasurement {
    pub y: Vector6<f64>,
    pub b: Vector6<f64>,
    /// Linearization `z ≈ H ξ`.
    pub h: Mat3x12,
    /// Covariance of the top three rows of `X̂·V`, world frame.
    pub n: Mat3,
}

impl InvariantMeasurement {
    /// `z = (X̂·Y - b)₁:₃`
    pub fn innovation(&self, est: &GroupElement) -> Vec3 {
        let x = Vec3::new(self.y[0], self.y[1], self.y[2]);
        let aug = [self.y[3], self.y[4], self.y[5]];
        est.act(&x, aug) - Vec3::new(self.b[0], self.b[1], self.b[2])
    }
}

/// Deterministic part `f_u(X)` of the process model, as an embedded 6×6
/// matrix: top rows `[R·hat(ω̃), R·ã + g, v, ṽ_d]`, bottom rows zero.
pub fn process_dynamics(x: &GroupElement, u: &ImuStep) -> Mat6 {
    let r = x.rot.matrix();
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(r * hat(&u.gyro)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(r * u.accel + GRAVITY));
    m.fixed_view_mut::<3, 1>(0, 4).copy_from(x.vel());
    m.fixed_view_mut::<3, 1>(0, 5).copy_from(&u.contact_vel);
    m
}

/// Frobenius norm of `f(X₁X₂) - f(X₁)X₂ - X₁f(X₂) + X₁f(Id)X₂` for arbitrary
/// dynamics `f`. Zero for every pair iff `f` is group-affine.
pub fn group_affine_residual_of<F>(f: F, x1: &GroupElement, x2: &GroupElement) -> f64
where
    F: Fn(&GroupElement) -> Mat6,
{
    let m1 = x1.to_matrix();
    let m2 = x2.to_matrix();
    let lhs = f(&x1.compose(x2));
    let rhs = f(x1) * m2 + m1 * f(x2) - m1 * f(&GroupElement::identity()) * m2;
    (lhs - rhs).norm()
}

/// Group-affine residual of [`process_dynamics`] under input `u`.
pub fn group_affine_residual(x1: &GroupElement, x2: &GroupElement, u: &ImuStep) -> f64 {
    group_affine_residual_of(|x| process_dynamics(x, u), x1, x2)
}

/// Linearized right-invariant error dynamics `ξ̇ = A ξ`.
///
/// Independent of the state estimate. Gravity couples `ξ_R` into `ξ_v`, `ξ_v`
/// feeds `ξ_p`, and a world-frame contact velocity couples `ξ_R` into `ξ_d`
/// through `hat(ṽ_d)` (that block vanishes for a stationary foot).
pub fn error_jacobian(u: &ImuStep) -> Mat12 {
    let mut a = Mat12::zeros();
    let (r, v, p, d) = (
        Block::Rot.offset(),
        Block::Vel.offset(),
        Block::Pos.offset(),
        Block::Foot.offset(),
    );
    a.fixed_view_mut::<3, 3>(v, r).copy_from(&hat(&GRAVITY));
    a.fixed_view_mut::<3, 3>(p, v).copy_from(&Mat3::identity());
    a.fixed_view_mut::<3, 3>(d, r).copy_from(&hat(&u.contact_vel));
    a
}

/// Foot-normal alignment measurement.
///
/// With the foot flat on the surface, the surface normal `R_s·e₃` seen from the
/// base equals the foot normal `ᵇR_f·e₃`, giving `Y = [ᵇR_f e₃; 0₃]`,
/// `b = [R_s e₃; 0₃]` and `H = [-hat(R_s e₃), 0, 0, 0]`.
pub fn orientation_measurement(
    surface: &Rotation,
    foot_in_base: &Rotation,
    est: &GroupElement,
    noise: &NoiseParams,
) -> InvariantMeasurement {
    let normal_body = foot_in_base.matrix().column(2).into_owned();
    let normal_world = surface.matrix().column(2).into_owned();
    let mut y = Vector6::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&normal_body);
    let mut b = Vector6::zeros();
    b.fixed_rows_mut::<3>(0).copy_from(&normal_world);
    let mut h = Mat3x12::zeros();
    h.fixed_view_mut::<3, 3>(0, Block::Rot.offset())
        .copy_from(&(-hat(&normal_world)));
    let r = est.rot.matrix();
    InvariantMeasurement {
        y,
        b,
        h,
        n: r * noise.surface_orient_cov * r.transpose(),
    }
}

/// Augmentation pattern `(0, 1, -1)` over the `(v, p, d)` columns: picks
/// `p - d` out of the state.
pub const POSITION_AUG: [f64; K] = [0.0, 1.0, -1.0];

/// Leg-kinematics position measurement `hp = Rᵀ(d - p)` in right-invariant
/// form: `Y = [hp; 0, 1, -1]`, `b = [0₃; 0, 1, -1]`, so
/// `z = R̂·hp + p̂ - d̂` and `H = [0, 0, I, -I]`.
pub fn position_measurement(
    foot_in_base: &Vec3,
    est: &GroupElement,
    noise: &NoiseParams,
) -> InvariantMeasurement {
    let mut y = Vector6::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(foot_in_base);
    let mut b = Vector6::zeros();
    for (i, a) in POSITION_AUG.iter().enumerate() {
        y[3 + i] = *a;
        b[3 + i] = *a;
    }
    let mut h = Mat3x12::zeros();
    h.fixed_view_mut::<3, 3>(0, Block::Pos.offset())
        .copy_from(&Mat3::identity());
    h.fixed_view_mut::<3, 3>(0, Block::Foot.offset())
        .copy_from(&(-Mat3::identity()));
    let r = est.rot.matrix();
    InvariantMeasurement {
        y,
        b,
        h,
        n: r * noise.fk_pos_cov * r.transpose(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{sek3_exp, so3_exp, TangentVec, Vec12};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut impl Rng, s: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-s..s),
            rng.random_range(-s..s),
            rng.random_range(-s..s),
        )
    }

    fn rand_element(rng: &mut impl Rng) -> GroupElement {
        GroupElement::new(so3_exp(&rv(rng, 3.0)), rv(rng, 2.0), rv(rng, 5.0), rv(rng, 5.0))
    }

    fn rand_imu(rng: &mut impl Rng) -> ImuStep {
        ImuStep {
            t: 0.0,
            dt: 0.0025,
            gyro: rv(rng, 2.0),
            accel: rv(rng, 15.0),
            contact_vel: rv(rng, 1.0),
        }
    }

    // Independent construction of f_u(X): each entry written out from the
    // component formulas, without nalgebra block views.
    fn dynamics_oracle(x: &GroupElement, u: &ImuStep) -> Mat6 {
        let r = x.rot.matrix();
        let w = u.gyro;
        let mut m = Mat6::zeros();
        for i in 0..3 {
            // (R ω×)_{ij} = Σ_k R_ik (ω×)_kj ; (ω×) columns: e_j ↦ ω × e_j
            for j in 0..3 {
                let mut ej = Vec3::zeros();
                ej[j] = 1.0;
                let col = w.cross(&ej);
                m[(i, j)] = (0..3).map(|k| r[(i, k)] * col[k]).sum();
            }
            m[(i, 3)] = (0..3).map(|k| r[(i, k)] * u.accel[k]).sum::<f64>() + GRAVITY[i];
            m[(i, 4)] = x.cols[0][i];
            m[(i, 5)] = u.contact_vel[i];
        }
        m
    }

    #[test]
    fn static_equilibrium_has_zero_derivative() {
        let u = ImuStep {
            t: 0.0,
            dt: 0.01,
            gyro: Vec3::zeros(),
            accel: Vec3::new(0.0, 0.0, 9.81),
            contact_vel: Vec3::zeros(),
        };
        let f = process_dynamics(&GroupElement::identity(), &u);
        assert_eq!(f, Mat6::zeros());
    }

    #[test]
    fn free_fall_derivative() {
        let x = GroupElement::new(Rotation::identity(), Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), Vec3::zeros());
        let u = ImuStep { t: 0.0, dt: 0.01, gyro: Vec3::zeros(), accel: Vec3::zeros(), contact_vel: Vec3::zeros() };
        let f = process_dynamics(&x, &u);
        assert_eq!(f.fixed_view::<3, 1>(0, 3).into_owned(), GRAVITY);
        assert_eq!(f.fixed_view::<3, 1>(0, 4).into_owned(), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn dynamics_match_independent_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let x = rand_element(&mut rng);
            let u = rand_imu(&mut rng);
            let diff = (process_dynamics(&x, &u) - dynamics_oracle(&x, &u)).amax();
            assert!(diff <= 1e-14, "{diff}");
        }
    }

    #[test]
    fn group_affine_at_identity_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let id = GroupElement::identity();
        let u = rand_imu(&mut rng);
        assert_eq!(group_affine_residual(&id, &id, &u), 0.0);
    }

    #[test]
    fn group_affine_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let (x1, x2, u) = (rand_element(&mut rng), rand_element(&mut rng), rand_imu(&mut rng));
            assert!(group_affine_residual(&x1, &x2, &u) <= 1e-9);
        }
    }

    #[test]
    fn group_affine_check_rejects_mutated_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut worst: f64 = f64::INFINITY;
        for _ in 0..100 {
            let (x1, x2, u) = (rand_element(&mut rng), rand_element(&mut rng), rand_imu(&mut rng));
            let mutated = |x: &GroupElement| {
                let mut m = process_dynamics(x, &u);
                let vdot = x.rot.matrix() * u.accel * x.vel().norm();
                m.fixed_view_mut::<3, 1>(0, 3).copy_from(&vdot);
                m
            };
            worst = worst.min(group_affine_residual_of(mutated, &x1, &x2));
        }
        assert!(worst > 1e-3, "{worst}");
    }

    // Exact right-invariant error rate at η = exp(ξ) around estimate X̂:
    // true state X = η⁻¹X̂, η̇ = f(X̂)X⁻¹ - η f(X) X⁻¹, returned as vee(η̇ η⁻¹).
    fn error_rate(est: &GroupElement, xi: &TangentVec, u: &ImuStep) -> Vec12 {
        let eta = sek3_exp(xi);
        let truth = eta.inverse() * *est;
        let tinv = truth.inverse().to_matrix();
        let eta_dot = process_dynamics(est, u) * tinv
            - eta.to_matrix() * process_dynamics(&truth, u) * tinv;
        TangentVec::vee(&(eta_dot * eta.inverse().to_matrix())).0
    }

    #[test]
    fn error_jacobian_matches_finite_differences_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let h = 1e-5;
        for _ in 0..100 {
            let est = rand_element(&mut rng);
            let u = rand_imu(&mut rng);
            let a = error_jacobian(&u);
            for j in 0..DIM {
                let mut e = Vec12::zeros();
                e[j] = h;
                let col = (error_rate(&est, &TangentVec(e), &u) - error_rate(&est, &TangentVec(-e), &u))
                    / (2.0 * h);
                let diff = (col - a.column(j)).amax();
                assert!(diff <= 1e-6, "column {j}: {diff}");
            }
        }
    }

    #[test]
    fn error_jacobian_structure_for_stationary_foot() {
        let u = ImuStep { t: 0.0, dt: 0.01, gyro: Vec3::new(1.0, 2.0, 3.0), accel: Vec3::new(4.0, 5.0, 6.0), contact_vel: Vec3::zeros() };
        let a = error_jacobian(&u);
        let mut nonzero = vec![];
        for i in 0..4 {
            for j in 0..4 {
                if a.fixed_view::<3, 3>(3 * i, 3 * j).amax() != 0.0 {
                    nonzero.push((i, j));
                }
            }
        }
        assert_eq!(nonzero, vec![(1, 0), (2, 1)]);
        assert_eq!(a.fixed_view::<3, 3>(3, 0).into_owned(), hat(&GRAVITY));
        assert_eq!(a * Vec12::zeros(), Vec12::zeros());
    }

    fn orient_z(est: &GroupElement, rs: &Rotation, truth_rot: &Rotation) -> Vec3 {
        let brf = truth_rot.transpose() * *rs;
        orientation_measurement(rs, &brf, est, &NoiseParams::default()).innovation(est)
    }

    #[test]
    fn orientation_consistent_measurement_has_zero_innovation() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let x = rand_element(&mut rng);
        let rs = so3_exp(&rv(&mut rng, 0.3));
        let z = orient_z(&x, &rs, &x.rot);
        assert!(z.amax() < 1e-15);
    }

    #[test]
    fn orientation_yaw_unobservable_on_level_surface() {
        let truth = Rotation::from_euler_zyx(0.1, -0.05, 0.4);
        for deg in [10.0f64, 45.0, 90.0, 137.0] {
            let est = GroupElement::from_rotation(Rotation::rot_z(deg.to_radians()) * truth);
            let z = orient_z(&est, &Rotation::identity(), &truth);
            assert!(z.amax() < 1e-15, "{deg}: {z}");
            let tilted = orient_z(&est, &Rotation::rot_y(3f64.to_radians()), &truth);
            assert!(tilted.norm() > 1e-4, "{deg}: {tilted}");
        }
    }

    #[test]
    fn orientation_innovation_matches_direct_matrices() {
        let rs = Rotation::rot_y(3f64.to_radians());
        let truth = Rotation::from_euler_zyx(0.02, 0.01, 0.3);
        let est_rot = Rotation::rot_z(10f64.to_radians()) * truth;
        let est = GroupElement::new(est_rot, Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.1, 0.0));
        let z = orient_z(&est, &rs, &truth);
        // Direct evaluation with explicit 6×6 matrices and 6-vectors.
        let brf = truth.transpose() * rs;
        let mut y = nalgebra::Vector6::zeros();
        y.fixed_rows_mut::<3>(0).copy_from(&(brf.matrix() * Vec3::z()));
        let mut b = nalgebra::Vector6::zeros();
        b.fixed_rows_mut::<3>(0).copy_from(&(rs.matrix() * Vec3::z()));
        let direct = est.to_matrix() * y - b;
        assert!(direct.fixed_rows::<3>(3).amax() == 0.0);
        assert!((direct.fixed_rows::<3>(0) - z).amax() < 1e-15);
        // Rotating e_z-tilted normal by 10° yaw: n = (sin 3°, 0, cos 3°).
        let n = rs.matrix() * Vec3::z();
        let expected = Rotation::rot_z(10f64.to_radians()) * n - n;
        assert!((z - expected).amax() < 1e-15);
        assert!(z.norm() > 1e-3);
    }

    #[test]
    fn orientation_vectors_are_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..100 {
            let rs = so3_exp(&rv(&mut rng, 1.0));
            let brf = so3_exp(&rv(&mut rng, 1.0));
            let m = orientation_measurement(&rs, &brf, &GroupElement::identity(), &NoiseParams::default());
            assert!((m.y.fixed_rows::<3>(0).norm() - 1.0).abs() < 1e-15);
            assert!((m.b.fixed_rows::<3>(0).norm() - 1.0).abs() < 1e-15);
            assert_eq!(m.y.fixed_rows::<3>(3).amax(), 0.0);
        }
    }

    #[test]
    fn position_perfect_and_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let x = rand_element(&mut rng);
        let hp = x.rot.transpose() * (x.foot() - x.pos());
        let m = position_measurement(&hp, &x, &NoiseParams::default());
        assert!(m.innovation(&x).amax() < 1e-14);

        let mut off = x;
        off.cols[1] += Vec3::new(0.1, 0.0, 0.0);
        let z = m.innovation(&off);
        assert!((z - Vec3::new(0.1, 0.0, 0.0)).amax() < 1e-14);
    }

    // z(ξ) with estimate exp(ξ)·X for a measurement generated at the truth X.
    fn fd_jacobian(meas: &InvariantMeasurement, truth: &GroupElement) -> Mat3x12 {
        let h = 1e-6;
        let mut jac = Mat3x12::zeros();
        for j in 0..DIM {
            let mut e = Vec12::zeros();
            e[j] = h;
            let plus = meas.innovation(&(sek3_exp(&TangentVec(e)) * *truth));
            let minus = meas.innovation(&(sek3_exp(&TangentVec(-e)) * *truth));
            jac.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        jac
    }

    #[test]
    fn measurement_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let noise = NoiseParams::default();
        for _ in 0..100 {
            let x = rand_element(&mut rng);
            let rs = so3_exp(&rv(&mut rng, 0.5));
            let om = orientation_measurement(&rs, &(x.rot.transpose() * rs), &x, &noise);
            assert!((fd_jacobian(&om, &x) - om.h).amax() <= 1e-6);
            let hp = x.rot.transpose() * (x.foot() - x.pos());
            let pm = position_measurement(&hp, &x, &noise);
            assert!((fd_jacobian(&pm, &x) - pm.h).amax() <= 1e-6);
        }
    }

    #[test]
    fn measurement_noise_is_rotated_to_world() {
        let mut noise = NoiseParams::default();
        noise.fk_pos_cov = Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0));
        let x = GroupElement::from_rotation(Rotation::rot_z(std::f64::consts::FRAC_PI_2));
        let m = position_measurement(&Vec3::zeros(), &x, &noise);
        assert!((m.n - Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 3.0))).amax() < 1e-15);
    }

    #[test]
    fn imu_step_validation() {
        let mut u = ImuStep { t: 0.0, dt: 0.0025, gyro: Vec3::zeros(), accel: Vec3::zeros(), contact_vel: Vec3::zeros() };
        assert!(u.validate().is_ok());
        u.dt = 0.0;
        assert!(matches!(u.validate(), Err(Error::InvalidTimeStep(_))));
        u.dt = 0.2;
        assert!(u.validate().is_err());
        u.dt = 0.01;
        u.gyro.x = f64::NAN;
        assert!(matches!(u.validate(), Err(Error::NonFinite(_))));
    }

    #[test]
    fn noise_validation_rejects_asymmetric() {
        let mut n = NoiseParams::default();
        assert!(n.validate().is_ok());
        n.accel_cov[(0, 1)] = 1.0;
        assert!(n.validate().is_err());
        let mut n = NoiseParams::default();
        n.gyro_cov[(2, 2)] = -1.0;
        assert!(n.validate().is_err());
    }
}
