//! Synthetic bipedal walking on a rocking treadmill.
//!
//! Ground truth is analytic: the base follows a sinusoidal sway/bob pattern,
//! feet alternate every step period, and each stance foot is a material
//! point of the surface, so it moves rigidly with the surface's pitch
//! oscillation about the pivot (plus belt travel). Sensors are synthesized
//! from that truth on a fixed IMU grid.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{gamma2, left_jacobian_inv, so3_exp, so3_log, GroupElement, Mat3, Rotation, Vec3};
use crate::models::{ImuStep, NoiseParams, GRAVITY};
use crate::seed;
use crate::stream::{
    FkOrientation, FkPosition, Record, SensorStream, SurfacePose, SwapEvent, TruthSample,
};

/// Rocking treadmill: pitch `θ(t) = amplitude · sin(freq · t)` about the world
/// y axis through `pivot`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    /// rad
    pub pitch_amplitude: f64,
    /// rad/s
    pub pitch_angular_freq: f64,
    /// A point on the rocking axis, m. The belt plane passes through it.
    pub pivot: Vec3,
    /// Belt speed along the surface x axis, m/s.
    pub belt_speed: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            pitch_amplitude: 3f64.to_radians(),
            pitch_angular_freq: 1.5 * PI,
            pivot: Vec3::zeros(),
            belt_speed: 0.0,
        }
    }
}

impl SurfaceConfig {
    /// A level surface that never moves.
    pub fn level() -> Self {
        SurfaceConfig {
            pitch_amplitude: 0.0,
            ..SurfaceConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.3).contains(&self.pitch_amplitude) {
            return Err(Error::config(
                "surface.pitch_amplitude",
                format!("{} rad outside [0, 0.3]", self.pitch_amplitude),
            ));
        }
        if !self.pitch_angular_freq.is_finite() || self.pitch_angular_freq < 0.0 {
            return Err(Error::config("surface.pitch_angular_freq", "must be finite and non-negative"));
        }
        if !self.pivot.iter().all(|x| x.is_finite()) || !self.belt_speed.is_finite() {
            return Err(Error::config("surface", "non-finite pivot or belt speed"));
        }
        Ok(())
    }

    pub fn pitch(&self, t: f64) -> (f64, f64) {
        let w = self.pitch_angular_freq;
        let a = self.pitch_amplitude;
        (a * (w * t).sin(), a * w * (w * t).cos())
    }

    /// World position and velocity of the surface material point with
    /// surface coordinates `q` (relative to the pivot, at `t = 0`).
    pub fn material_point(&self, q: &Vec3, t: f64) -> (Vec3, Vec3) {
        let (rot, omega) = surface_state(t, self);
        let m = q + Vec3::x() * (self.belt_speed * t);
        let rel = rot * m;
        let vel = omega.cross(&rel) + rot * (Vec3::x() * self.belt_speed);
        (self.pivot + rel, vel)
    }

    /// Surface coordinates of the material point found at horizontal world
    /// position `(x, y)` at time `t`.
    fn material_coords_at(&self, x: f64, y: f64, t: f64) -> Vec3 {
        let (theta, _) = self.pitch(t);
        let mz = -self.pivot.z;
        let mx = (x - self.pivot.x - mz * theta.sin()) / theta.cos();
        let my = y - self.pivot.y;
        Vec3::new(mx - self.belt_speed * t, my, mz)
    }
}

/// Surface orientation `R_s = exp((0, θ, 0))` and world angular velocity
/// `(0, θ̇, 0)`.
pub fn surface_state(t: f64, cfg: &SurfaceConfig) -> (Rotation, Vec3) {
    let (theta, rate) = cfg.pitch(t);
    (so3_exp(&Vec3::new(0.0, theta, 0.0)), Vec3::new(0.0, rate, 0.0))
}

/// Shape of the synthetic gait. Stepping in place on a stationary belt by
/// default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitConfig {
    /// s
    pub step_period: f64,
    /// Forward advance per step relative to the belt, m.
    pub step_length: f64,
    /// Lateral distance between the feet, m.
    pub step_width: f64,
    /// Nominal base height above the level surface, m.
    pub base_height: f64,
    /// Lateral sway amplitude (period of two steps), m.
    pub sway_amplitude: f64,
    /// Vertical bob amplitude (period of one step), m.
    pub bob_amplitude: f64,
    /// Base roll wobble amplitude, rad.
    pub roll_amplitude: f64,
    /// Base pitch wobble amplitude, rad.
    pub pitch_amplitude: f64,
    /// Fixed base heading, rad.
    pub heading: f64,
    /// s
    pub duration: f64,
    /// Touchdown times are perturbed uniformly within ±this, s.
    pub contact_jitter: f64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        GaitConfig {
            step_period: 0.6,
            step_length: 0.0,
            step_width: 0.2,
            base_height: 0.9,
            sway_amplitude: 0.03,
            bob_amplitude: 0.01,
            roll_amplitude: 0.02,
            pitch_amplitude: 0.02,
            heading: 0.3,
            duration: 30.0,
            contact_jitter: 0.005,
        }
    }
}

impl GaitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_period > 0.0 && self.step_period.is_finite()) {
            return Err(Error::config("gait.step_period", "must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("gait.duration", "must be positive"));
        }
        if !(0.0..0.25 * self.step_period).contains(&self.contact_jitter) {
            return Err(Error::config(
                "gait.contact_jitter",
                "must be in [0, step_period / 4)",
            ));
        }
        let fields = [
            self.step_length,
            self.step_width,
            self.base_height,
            self.sway_amplitude,
            self.bob_amplitude,
            self.roll_amplitude,
            self.pitch_amplitude,
            self.heading,
        ];
        if !fields.iter().all(|x| x.is_finite()) {
            return Err(Error::config("gait", "non-finite field"));
        }
        Ok(())
    }
}

/// Sampling rates, Hz. The kinematics and surface rates must divide the IMU
/// rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub imu: f64,
    pub kinematics: f64,
    pub surface: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            imu: 400.0,
            kinematics: 100.0,
            surface: 100.0,
        }
    }
}

impl Rates {
    pub fn validate(&self) -> Result<()> {
        if !(self.imu >= 10.0 && self.imu.is_finite()) {
            return Err(Error::config("rates.imu", "must be at least 10 Hz"));
        }
        for (name, r) in [("rates.kinematics", self.kinematics), ("rates.surface", self.surface)] {
            let ratio = self.imu / r;
            if !(r > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
                return Err(Error::config(name, "must divide the IMU rate"));
            }
        }
        Ok(())
    }

    fn decimation(&self, r: f64) -> u64 {
        (self.imu / r).round() as u64
    }
}

/// Base pose and derivatives at one instant.
#[derive(Clone, Copy, Debug)]
pub struct BaseKinematics {
    pub rot: Rotation,
    /// World-frame angular velocity.
    pub omega: Vec3,
    pub pos: Vec3,
    pub vel: Vec3,
    pub acc: Vec3,
}

/// Analytic ground truth of one walking run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub gait: GaitConfig,
    pub surface: SurfaceConfig,
    /// IMU period; every swap happens on a multiple of it.
    pub grid: f64,
    /// Swap ticks (multiples of `grid`), strictly increasing. Foot `n + 1`
    /// takes over from foot `n` at `swap_ticks[n]`.
    pub swap_ticks: Vec<u64>,
    /// Surface coordinates of each foot's contact point.
    pub footholds: Vec<Vec3>,
    /// Number of IMU intervals covering the duration.
    pub n_ticks: u64,
}

impl Trajectory {
    pub fn tick_time(&self, k: u64) -> f64 {
        k as f64 * self.grid
    }

    pub fn swap_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.swap_ticks.iter().map(|&k| self.tick_time(k))
    }

    pub fn duration(&self) -> f64 {
        self.tick_time(self.n_ticks)
    }

    pub fn base(&self, t: f64) -> BaseKinematics {
        base_kinematics(&self.gait, &self.surface, t)
    }

    /// Stance foot index at time `t`; a swap at exactly `t` has happened.
    pub fn stance_index(&self, t: f64) -> usize {
        let tol = 1e-9 * self.grid;
        self.swap_ticks
            .iter()
            .take_while(|&&k| self.tick_time(k) <= t + tol)
            .count()
    }

    fn stance_index_at_tick(&self, k: u64) -> usize {
        self.swap_ticks.partition_point(|&s| s <= k)
    }

    /// World position and velocity of foot `n`'s contact point.
    pub fn foot(&self, n: usize, t: f64) -> (Vec3, Vec3) {
        self.surface.material_point(&self.footholds[n], t)
    }

    /// `(R, v, p, d)` at time `t`.
    pub fn state(&self, t: f64) -> GroupElement {
        let b = self.base(t);
        let (d, _) = self.foot(self.stance_index(t), t);
        GroupElement::new(b.rot, b.vel, b.pos, d)
    }

    fn state_at_tick(&self, k: u64) -> GroupElement {
        let t = self.tick_time(k);
        let b = self.base(t);
        let (d, _) = self.foot(self.stance_index_at_tick(k), t);
        GroupElement::new(b.rot, b.vel, b.pos, d)
    }

    /// Orientation of foot `n` in the world: flat on the surface, pointing
    /// along the base heading.
    pub fn foot_rotation(&self, t: f64) -> Rotation {
        let (rs, _) = surface_state(t, &self.surface);
        rs * Rotation::rot_z(self.gait.heading)
    }
}

fn base_kinematics(g: &GaitConfig, s: &SurfaceConfig, t: f64) -> BaseKinematics {
    let period = g.step_period;
    let w1 = PI / period;
    let w2 = 2.0 * PI / period;
    let speed = g.step_length / period;
    let heading = Rotation::rot_z(g.heading);

    // Heading frame: forward x, lateral y.
    let (s1, c1) = (w1 * t).sin_cos();
    let (s2, c2) = (w2 * t).sin_cos();
    let fwd = Vec3::new(speed * t, g.sway_amplitude * s1, 0.0);
    let fwd_v = Vec3::new(speed, g.sway_amplitude * w1 * c1, 0.0);
    let fwd_a = Vec3::new(0.0, -g.sway_amplitude * w1 * w1 * s1, 0.0);
    let belt = Vec3::x() * s.belt_speed;

    let pos = heading * fwd + belt * t + Vec3::new(0.0, 0.0, g.base_height + g.bob_amplitude * c2);
    let vel = heading * fwd_v + belt + Vec3::new(0.0, 0.0, -g.bob_amplitude * w2 * s2);
    let acc = heading * fwd_a + Vec3::new(0.0, 0.0, -g.bob_amplitude * w2 * w2 * c2);

    let roll = g.roll_amplitude * s1;
    let roll_rate = g.roll_amplitude * w1 * c1;
    let pitch = g.pitch_amplitude * s2;
    let pitch_rate = g.pitch_amplitude * w2 * c2;
    let ry = Rotation::rot_y(pitch);
    let rot = heading * ry * Rotation::rot_x(roll);
    let omega = heading * (Vec3::y() * pitch_rate + ry * (Vec3::x() * roll_rate));
    BaseKinematics {
        rot,
        omega,
        pos,
        vel,
        acc,
    }
}

/// Builds the truth trajectory. Touchdowns happen every step period, jittered
/// and snapped to the IMU grid; foot 0 (left) is in stance at `t = 0`.
pub fn generate_truth(
    gait: &GaitConfig,
    surface: &SurfaceConfig,
    rates: &Rates,
    seed: u64,
) -> Result<Trajectory> {
    gait.validate()?;
    surface.validate()?;
    rates.validate()?;
    let grid = 1.0 / rates.imu;
    let n_ticks = (gait.duration * rates.imu).round().max(1.0) as u64;
    let mut rng = seed::rng(seed::derive(seed, "gait", 0));

    let mut swap_ticks = Vec::new();
    for n in 1.. {
        let jitter = if gait.contact_jitter > 0.0 {
            rng.random_range(-gait.contact_jitter..gait.contact_jitter)
        } else {
            0.0
        };
        let tick = ((n as f64 * gait.step_period + jitter) / grid).round() as u64;
        if tick >= n_ticks {
            break;
        }
        swap_ticks.push(tick);
    }

    let heading = Rotation::rot_z(gait.heading);
    let speed = gait.step_length / gait.step_period;
    let touchdowns = std::iter::once(0).chain(swap_ticks.iter().copied());
    let footholds = touchdowns
        .enumerate()
        .map(|(n, tick)| {
            let t = tick as f64 * grid;
            let side = if n % 2 == 0 { 1.0 } else { -1.0 };
            let target = heading
                * Vec3::new(speed * t + 0.5 * gait.step_length, 0.5 * side * gait.step_width, 0.0)
                + Vec3::x() * (surface.belt_speed * t);
            surface.material_coords_at(target.x, target.y, t)
        })
        .collect();

    Ok(Trajectory {
        gait: gait.clone(),
        surface: surface.clone(),
        grid,
        swap_ticks,
        footholds,
        n_ticks,
    })
}

/// Precomputed square root of a covariance for Gaussian sampling.
struct GaussianSampler(Mat3);

impl GaussianSampler {
    fn new(cov: &Mat3) -> Self {
        let eig = SymmetricEigen::new(*cov);
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        GaussianSampler(eig.eigenvectors * Mat3::from_diagonal(&sqrt))
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        let n = Vec3::from_fn(|_, _| StandardNormal.sample(rng));
        self.0 * n
    }
}

/// Synthesizes the sensor stream for a truth trajectory.
///
/// IMU and contact-velocity samples are the zero-order-hold inputs that carry
/// rotation, velocity and foot position exactly from one IMU tick to the next.
/// Held inputs cannot also match the analytic base position, so the emitted
/// truth position is the exact solution of the kinematics under those inputs;
/// it stays within O(dt²) of the analytic gait. A noiseless stream and the
/// filter's propagation are therefore exact inverses. Noise is
/// added with discrete covariance `density / dt` for the IMU and contact
/// velocity, and the given covariance for kinematics.
///
/// Records sharing a timestamp are ordered: surface, swap, fk_pos, fk_rot,
/// truth, imu.
pub fn synthesize_sensors(
    truth: &Trajectory,
    noise: &NoiseParams,
    rates: &Rates,
    seed: u64,
) -> Result<SensorStream> {
    rates.validate()?;
    noise.validate()?;
    if (1.0 / rates.imu - truth.grid).abs() > 1e-15 {
        return Err(Error::config("rates.imu", "differs from the truth trajectory's grid"));
    }
    let mut rng = seed::rng(seed::derive(seed, "sensors", 0));
    let dt = truth.grid;
    let gyro = GaussianSampler::new(&(noise.gyro_cov / dt));
    let accel = GaussianSampler::new(&(noise.accel_cov / dt));
    let contact = GaussianSampler::new(&(noise.contact_vel_cov / dt));
    let fk_pos = GaussianSampler::new(&noise.fk_pos_cov);
    let fk_rot = GaussianSampler::new(&noise.surface_orient_cov);
    let foot_block = noise.jump_cov.fixed_view::<3, 3>(9, 9).into_owned();
    let jump = GaussianSampler::new(&foot_block);

    let kin_every = rates.decimation(rates.kinematics);
    let surf_every = rates.decimation(rates.surface);
    let mut records = Vec::with_capacity(truth.n_ticks as usize * 2);
    let mut next_swap = 0usize;
    let mut current = truth.state_at_tick(0);

    for k in 0..=truth.n_ticks {
        let t = truth.tick_time(k);
        let is_swap = truth.swap_ticks.get(next_swap) == Some(&k);
        let is_kin = k % kin_every == 0 || is_swap;
        let (rs, _) = surface_state(t, &truth.surface);

        if k % surf_every == 0 || is_swap {
            records.push(Record::Surface(SurfacePose { t, rot: rs }));
        }
        if is_swap {
            let old = truth.foot(next_swap, t).0;
            let new = truth.foot(next_swap + 1, t).0;
            let h_d = current.rot.transpose() * (new - old) + jump.sample(&mut rng);
            records.push(Record::Swap(SwapEvent { t, h_d }));
            next_swap += 1;
            current.cols[2] = new;
        }
        if is_kin {
            let rt = current.rot.transpose();
            let hp = rt * (current.foot() - current.pos()) + fk_pos.sample(&mut rng);
            records.push(Record::FkPos(FkPosition { t, hp }));
            let foot_in_base = rt * truth.foot_rotation(t);
            let rot = so3_exp(&fk_rot.sample(&mut rng)) * foot_in_base;
            records.push(Record::FkRot(FkOrientation { t, rot }));
            records.push(Record::Truth(TruthSample::from_state(t, &current)));
        }
        if k == truth.n_ticks {
            break;
        }

        let next = truth.state_at_tick(k + 1);
        let next_t = truth.tick_time(k + 1);
        let phi = so3_log(&(current.rot.transpose() * next.rot));
        let gyro_true = phi / dt;
        let dv = next.vel() - current.vel() - GRAVITY * dt;
        let accel_true = left_jacobian_inv(&phi) * (current.rot.transpose() * dv) / dt;
        let foot_next = truth.foot(next_swap, next_t).0;
        let contact_true = (foot_next - current.foot()) / dt;
        let r = current.rot.matrix();
        let pos_next = current.pos()
            + current.vel() * dt
            + r * gamma2(&phi) * accel_true * (dt * dt)
            + GRAVITY * (0.5 * dt * dt);
        records.push(Record::Imu(ImuStep {
            t,
            dt,
            gyro: gyro_true + gyro.sample(&mut rng),
            accel: accel_true + accel.sample(&mut rng),
            contact_vel: contact_true + contact.sample(&mut rng),
        }));
        current = GroupElement::new(next.rot, *next.vel(), pos_next, *next.foot());
    }
    Ok(SensorStream::new(records))
}
