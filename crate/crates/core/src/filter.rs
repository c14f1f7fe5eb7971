//! The invariant EKF: strapdown propagation, right-invariant update and the
//! foot-swap jump, plus an [`Estimator`] that dispatches a hybrid event stream.

use std::f64::consts::PI;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{
    gamma2, left_jacobian, sek3_exp, sek3_log, so3_exp, GroupElement, Mat12, Mat3, Rotation,
    TangentVec, Vec3, DIM,
};
use crate::models::{
    error_jacobian, orientation_measurement, position_measurement, ImuStep, InvariantMeasurement,
    NoiseParams, GRAVITY,
};
use crate::stream::Record;

/// Slack allowed when comparing event and filter timestamps, s.
pub const TIME_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceFoot {
    Left,
    Right,
}

impl StanceFoot {
    pub fn other(self) -> Self {
        match self {
            StanceFoot::Left => StanceFoot::Right,
            StanceFoot::Right => StanceFoot::Left,
        }
    }
}

/// Filter estimate: mean on SE_3(3) and covariance of the right-invariant
/// error `ξ = log(X̂·X⁻¹)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub mean: GroupElement,
    pub cov: Mat12,
    pub t: f64,
    pub stance_foot: StanceFoot,
}

impl State {
    pub fn new(mean: GroupElement, cov: Mat12, t: f64) -> Self {
        State {
            mean,
            cov,
            t,
            stance_foot: StanceFoot::Left,
        }
    }
}

/// Which measurement models a filter uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Leg-kinematics position plus foot/surface orientation alignment.
    Proposed,
    /// Leg-kinematics position only.
    PositionOnly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::PositionOnly => "position-only",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Variant::Proposed),
            "position-only" => Ok(Variant::PositionOnly),
            other => Err(Error::config(
                "variant",
                format!("unknown variant `{other}` (expected proposed or position-only)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateSchedule {
    /// Every kinematic sample during stance.
    EveryStep,
    /// Only the kinematic samples taken at a foot-swap instant.
    OnContactOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub noise: NoiseParams,
    pub variant: Variant,
    pub update_schedule: UpdateSchedule,
    /// Added to the innovation covariance before inversion.
    pub epsilon: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            noise: NoiseParams::default(),
            variant: Variant::Proposed,
            update_schedule: UpdateSchedule::EveryStep,
            epsilon: 1e-9,
        }
    }
}

impl FilterConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon", "must be positive"));
        }
        self.noise.validate().map_err(|e| e.in_section("noise"))
    }
}

/// New support-foot position relative to the old one, base frame, m.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpInput {
    pub h_d: Vec3,
}

fn symmetrize(m: &Mat12) -> Mat12 {
    (m + m.transpose()) * 0.5
}

/// State-transition matrix of the error dynamics over `dt`.
///
/// `A` only has blocks in the rotation and velocity columns, so `A³ = 0` and
/// the matrix exponential is exactly `I + A dt + A² dt²/2`.
pub fn transition_matrix(u: &ImuStep) -> Mat12 {
    let a = error_jacobian(u) * u.dt;
    Mat12::identity() + a + a * a * 0.5
}

/// Discrete process noise `Φ·Ad·Q·Adᵀ·Φᵀ·dt` mapped into right-invariant
/// error coordinates at `mean`.
pub fn discrete_noise(mean: &GroupElement, phi: &Mat12, noise: &NoiseParams, dt: f64) -> Mat12 {
    let ad = mean.adjoint();
    phi * ad * noise.process_density() * ad.transpose() * phi.transpose() * dt
}

/// Closed-form zero-order-hold integration of the mean over one IMU interval.
pub fn integrate_mean(x: &GroupElement, u: &ImuStep) -> GroupElement {
    let dt = u.dt;
    let phi = u.gyro * dt;
    let r = x.rot.matrix();
    let v = x.vel();
    let p = x.pos();
    let rot = (x.rot * so3_exp(&phi)).renormalized();
    let vel = v + r * left_jacobian(&phi) * u.accel * dt + GRAVITY * dt;
    let pos = p + v * dt + r * gamma2(&phi) * u.accel * (dt * dt) + GRAVITY * (0.5 * dt * dt);
    let foot = x.foot() + u.contact_vel * dt;
    GroupElement::new(rot, vel, pos, foot)
}

/// Advances the estimate over one IMU interval.
pub fn propagate(s: &State, u: &ImuStep, noise: &NoiseParams) -> Result<State> {
    u.validate()?;
    let phi = transition_matrix(u);
    let q = discrete_noise(&s.mean, &phi, noise, u.dt);
    let cov = symmetrize(&(phi * s.cov * phi.transpose() + q));
    Ok(State {
        mean: integrate_mean(&s.mean, u),
        cov,
        t: s.t + u.dt,
        stance_foot: s.stance_foot,
    })
}

/// Right-invariant update.
///
/// `z ≈ Hξ` with `ξ = log(X̂X⁻¹)`, so the estimated error is `Kz` and the
/// corrected mean is `exp(-Kz)·X̂`. The regularization `εI` is treated as extra
/// measurement noise, in both the gain and the Joseph-form covariance.
pub fn update(s: &State, m: &InvariantMeasurement, epsilon: f64) -> Result<State> {
    let z = m.innovation(&s.mean);
    if !z.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("innovation"));
    }
    let n = m.n + Mat3::identity() * epsilon;
    let ph_t = s.cov * m.h.transpose();
    let innov_cov = m.h * ph_t + n;
    let chol = Cholesky::new(innov_cov).ok_or(Error::SingularInnovation)?;
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ.
    let gain = chol.solve(&ph_t.transpose()).transpose();
    if !gain.iter().all(|x| x.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let correction = TangentVec(gain * z);
    let mean = sek3_exp(&TangentVec(-correction.0)) * s.mean;
    let ikh = Mat12::identity() - gain * m.h;
    let cov = symmetrize(&(ikh * s.cov * ikh.transpose() + gain * n * gain.transpose()));
    Ok(State {
        mean: mean.renormalized(),
        cov,
        t: s.t,
        stance_foot: s.stance_foot,
    })
}

/// Foot-swap jump: `d̂ ← d̂ + R̂·h_d`, everything else unchanged.
///
/// The jump map leaves the right-invariant error untouched, so its Jacobian
/// is the identity. With a zero `q_jump` the covariance is returned as-is;
/// otherwise `Ad·q_jump·Adᵀ` is added.
pub fn apply_jump(s: &State, j: &JumpInput, q_jump: &Mat12) -> State {
    let mut mean = s.mean;
    mean.cols[2] += s.mean.rot.matrix() * j.h_d;
    let cov = if q_jump.iter().all(|&x| x == 0.0) {
        s.cov
    } else {
        let ad = mean.adjoint();
        symmetrize(&(s.cov + ad * q_jump * ad.transpose()))
    };
    State {
        mean,
        cov,
        t: s.t,
        stance_foot: s.stance_foot.other(),
    }
}

/// Runs one filter variant over a time-ordered record stream.
#[derive(Clone, Debug)]
pub struct Estimator {
    pub state: State,
    pub config: FilterConfig,
    surface: Option<Rotation>,
    last_swap: Option<f64>,
}

impl Estimator {
    pub fn new(state: State, config: FilterConfig) -> Self {
        Estimator {
            state,
            config,
            surface: None,
            last_swap: None,
        }
    }

    /// Latest surface orientation seen on the stream.
    pub fn surface(&self) -> Option<&Rotation> {
        self.surface.as_ref()
    }

    fn updates_enabled(&self, t: f64) -> bool {
        match self.config.update_schedule {
            UpdateSchedule::EveryStep => true,
            UpdateSchedule::OnContactOnly => self
                .last_swap
                .is_some_and(|ts| (ts - t).abs() <= TIME_TOLERANCE),
        }
    }

    /// Routes one record: IMU → propagate, kinematics → update, swap → jump.
    /// Surface poses are remembered for later orientation updates; truth
    /// records are ignored.
    pub fn step(&mut self, record: &Record) -> Result<()> {
        let t = record.t();
        if t < self.state.t - TIME_TOLERANCE {
            return Err(Error::OutOfOrder {
                event: t,
                state: self.state.t,
            });
        }
        let noise = &self.config.noise;
        match record {
            Record::Imu(u) => {
                self.state = propagate(&self.state, u, noise)?;
            }
            Record::Surface(s) => self.surface = Some(s.rot),
            Record::Swap(sw) => {
                self.state = apply_jump(&self.state, &JumpInput { h_d: sw.h_d }, &noise.jump_cov);
                self.last_swap = Some(sw.t);
            }
            Record::FkPos(fk) => {
                if self.updates_enabled(t) {
                    let m = position_measurement(&fk.hp, &self.state.mean, noise);
                    self.state = update(&self.state, &m, self.config.epsilon)?;
                }
            }
            Record::FkRot(fk) => {
                if self.config.variant == Variant::Proposed && self.updates_enabled(t) {
                    let surface = self.surface.ok_or(Error::MissingSurfacePose)?;
                    let m = orientation_measurement(&surface, &fk.rot, &self.state.mean, noise);
                    self.state = update(&self.state, &m, self.config.epsilon)?;
                }
            }
            Record::Truth(_) => {}
        }
        Ok(())
    }

    pub fn run<'a>(&mut self, records: impl IntoIterator<Item = &'a Record>) -> Result<()> {
        records.into_iter().try_for_each(|r| self.step(r))
    }
}

/// Estimate-versus-truth error at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics {
    pub t: f64,
    /// `log(X̂·X⁻¹)`
    pub xi: TangentVec,
    /// ‖p̂ - p‖, m
    pub pos_err: f64,
    /// ‖v̂ - v‖, m/s
    pub vel_err: f64,
    /// ZYX Euler angles of `R̂·Rᵀ`, degrees.
    pub roll_err: f64,
    pub pitch_err: f64,
    pub yaw_err: f64,
}

pub fn error_vs_truth(s: &State, truth: &GroupElement) -> ErrorMetrics {
    let eta = s.mean * truth.inverse();
    let (roll, pitch, yaw) = eta.rot.to_euler_zyx();
    let deg = 180.0 / PI;
    ErrorMetrics {
        t: s.t,
        xi: sek3_log(&eta),
        pos_err: (s.mean.pos() - truth.pos()).norm(),
        vel_err: (s.mean.vel() - truth.vel()).norm(),
        roll_err: roll * deg,
        pitch_err: pitch * deg,
        yaw_err: yaw * deg,
    }
}

/// Largest |asymmetry| and smallest eigenvalue of a covariance.
pub fn covariance_health(cov: &Mat12) -> (f64, f64) {
    let asym = (cov - cov.transpose()).amax();
    let min_eig = symmetrize(cov).symmetric_eigenvalues().min();
    (asym, min_eig)
}

/// Dimension of the error state.
pub const ERROR_DIM: usize = DIM;
