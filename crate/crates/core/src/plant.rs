//! Planar wheeled inverted pendulum with a lagged, saturated axle motor and
//! a pitch-axis IMU plus wheel encoders.
//!
//! Generalized coordinates are the body tilt `θ` (0 = upright, positive when
//! the body leans toward +x) and the absolute wheel angle `φ`, so the axle
//! travels `r·φ`. The motor torque acts on the wheel and reacts on the body;
//! viscous friction acts on the relative angle `φ − θ`.

use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::linalg;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Internal RK4 substep.
pub const SUBSTEP: f64 = 0.5e-3;
/// Largest `dt` accepted by [`step_dynamics`].
pub const MAX_STEP: f64 = 2e-3;
pub const DEFAULT_FALL_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    pub body_mass: f64,
    pub wheel_mass_total: f64,
    /// Axle to body center of mass.
    pub com_distance: f64,
    pub wheel_radius: f64,
    /// About the body center of mass.
    pub body_inertia: f64,
    /// Both wheels about the axle.
    pub wheel_inertia: f64,
    pub gravity: f64,
    /// Total axle torque at full command.
    pub motor_max_torque: f64,
    pub motor_time_constant: f64,
    pub viscous_friction: f64,
    pub encoder_counts_per_rev: u32,
}

impl Default for PlantParams {
    fn default() -> Self {
        let body_mass = 0.3;
        let wheel_mass_total = 0.04;
        let com_distance = 0.05;
        let wheel_radius = 0.04;
        PlantParams {
            body_mass,
            wheel_mass_total,
            com_distance,
            wheel_radius,
            // slender body of height 2·com_distance
            body_inertia: body_mass * (2.0 * com_distance) * (2.0 * com_distance) / 12.0,
            // solid discs
            wheel_inertia: 0.5 * wheel_mass_total * wheel_radius * wheel_radius,
            gravity: 9.81,
            motor_max_torque: 0.1,
            motor_time_constant: 0.01,
            viscous_friction: 2e-4,
            encoder_counts_per_rev: 1320,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_mass", self.body_mass),
            ("wheel_mass_total", self.wheel_mass_total),
            ("com_distance", self.com_distance),
            ("wheel_radius", self.wheel_radius),
            ("body_inertia", self.body_inertia),
            ("wheel_inertia", self.wheel_inertia),
            ("gravity", self.gravity),
            ("motor_max_torque", self.motor_max_torque),
            ("motor_time_constant", self.motor_time_constant),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid_config(alloc::format!("plant.{name} must be positive, got {v}")));
            }
        }
        if !(self.viscous_friction.is_finite() && self.viscous_friction >= 0.0) {
            return Err(Error::invalid_config("plant.viscous_friction must be >= 0"));
        }
        if self.encoder_counts_per_rev == 0 {
            return Err(Error::invalid_config("plant.encoder_counts_per_rev must be >= 1"));
        }
        Ok(())
    }

    // Mass-matrix entries: [[c, b cosθ], [b cosθ, a]] over (θ, φ).
    fn mass_terms(&self) -> (f64, f64, f64) {
        let a = (self.body_mass + self.wheel_mass_total) * self.wheel_radius * self.wheel_radius + self.wheel_inertia;
        let b = self.body_mass * self.wheel_radius * self.com_distance;
        let c = self.body_mass * self.com_distance * self.com_distance + self.body_inertia;
        (a, b, c)
    }

    /// Linearization about upright over `(θ, θ', φ, φ', τ)`, with the torque
    /// command as input.
    pub fn linearized(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (a, b, c) = self.mass_terms();
        let det = a * c - b * b;
        let mgl = self.body_mass * self.gravity * self.com_distance;
        let f = self.viscous_friction;
        // θ'' = (a R1 − b R2)/det, φ'' = (c R2 − b R1)/det with
        // R1 = mgl θ − τ + f(φ' − θ'), R2 = τ − f(φ' − θ').
        let mut m = DMatrix::<f64>::zeros(5, 5);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = a * mgl / det;
        m[(1, 1)] = -(a + b) * f / det;
        m[(1, 3)] = (a + b) * f / det;
        m[(1, 4)] = -(a + b) / det;
        m[(2, 3)] = 1.0;
        m[(3, 0)] = -b * mgl / det;
        m[(3, 1)] = (c + b) * f / det;
        m[(3, 3)] = -(c + b) * f / det;
        m[(3, 4)] = (c + b) / det;
        m[(4, 4)] = -1.0 / self.motor_time_constant;
        let mut input = DVector::<f64>::zeros(5);
        input[4] = 1.0 / self.motor_time_constant;
        (m, input)
    }

    /// Zero-order-hold discretization of [`Self::linearized`].
    pub fn discretized(&self, period: f64) -> (DMatrix<f64>, DVector<f64>) {
        let (a, b) = self.linearized();
        linalg::discretize(&a, &b, period)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub tilt: f64,
    pub tilt_rate: f64,
    pub wheel_angle: f64,
    pub wheel_rate: f64,
    pub motor_torque_actual: f64,
    pub sim_time: f64,
}

impl PlantState {
    pub fn tilted(tilt: f64) -> Self {
        PlantState { tilt, ..Default::default() }
    }

    pub fn is_finite(&self) -> bool {
        self.tilt.is_finite()
            && self.tilt_rate.is_finite()
            && self.wheel_angle.is_finite()
            && self.wheel_rate.is_finite()
            && self.motor_torque_actual.is_finite()
            && self.sim_time.is_finite()
    }

    fn as_array(&self) -> [f64; 5] {
        [self.tilt, self.tilt_rate, self.wheel_angle, self.wheel_rate, self.motor_torque_actual]
    }
}

fn derivative(y: &[f64; 5], p: &PlantParams, target_torque: f64) -> [f64; 5] {
    let (a, b, c) = p.mass_terms();
    let [theta, theta_rate, _, phi_rate, torque] = *y;
    let (s, co) = (libm::sin(theta), libm::cos(theta));
    let friction = p.viscous_friction * (phi_rate - theta_rate);
    let r1 = p.body_mass * p.gravity * p.com_distance * s - torque + friction;
    let r2 = b * s * theta_rate * theta_rate + torque - friction;
    let bc = b * co;
    let det = a * c - bc * bc;
    [
        theta_rate,
        (a * r1 - bc * r2) / det,
        phi_rate,
        (c * r2 - bc * r1) / det,
        (target_torque - torque) / p.motor_time_constant,
    ]
}

fn rk4(y: [f64; 5], p: &PlantParams, target: f64, h: f64) -> [f64; 5] {
    let add = |y: &[f64; 5], k: &[f64; 5], s: f64| -> [f64; 5] {
        let mut out = *y;
        for (o, d) in out.iter_mut().zip(k) {
            *o += s * d;
        }
        out
    };
    let k1 = derivative(&y, p, target);
    let k2 = derivative(&add(&y, &k1, h / 2.0), p, target);
    let k3 = derivative(&add(&y, &k2, h / 2.0), p, target);
    let k4 = derivative(&add(&y, &k3, h), p, target);
    let mut out = y;
    for i in 0..5 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Advances the plant by `dt` seconds (at most [`MAX_STEP`]) using RK4
/// substeps no longer than [`SUBSTEP`].
pub fn step_dynamics(state: &PlantState, params: &PlantParams, torque_command: f64, dt: f64) -> Result<PlantState> {
    if !state.is_finite() {
        return Err(Error::invalid_argument("non-finite plant state"));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::invalid_argument(alloc::format!("dt must be in (0, {MAX_STEP}] s, got {dt}")));
    }
    if !torque_command.is_finite() {
        return Err(Error::invalid_argument("non-finite torque command"));
    }
    let target = torque_command.clamp(-params.motor_max_torque, params.motor_max_torque);
    let substeps = libm::ceil(dt / SUBSTEP - 1e-9).max(1.0) as usize;
    let h = dt / substeps as f64;
    let mut y = state.as_array();
    for _ in 0..substeps {
        y = rk4(y, params, target, h);
    }
    Ok(PlantState {
        tilt: y[0],
        tilt_rate: y[1],
        wheel_angle: y[2],
        wheel_rate: y[3],
        motor_torque_actual: y[4],
        sim_time: state.sim_time + dt,
    })
}

/// Kinetic plus gravitational energy, with the potential zero at the axle height.
pub fn mechanical_energy(state: &PlantState, params: &PlantParams) -> f64 {
    let (a, b, c) = params.mass_terms();
    let co = libm::cos(state.tilt);
    0.5 * a * state.wheel_rate * state.wheel_rate
        + b * co * state.wheel_rate * state.tilt_rate
        + 0.5 * c * state.tilt_rate * state.tilt_rate
        + params.body_mass * params.gravity * params.com_distance * co
}

pub fn is_fallen(state: &PlantState, threshold: f64) -> bool {
    state.tilt.abs() > threshold
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    pub gyro_noise_std: f64,
    pub gyro_bias: f64,
    pub accel_noise_std: f64,
}

impl SensorNoise {
    pub const NONE: SensorNoise = SensorNoise { gyro_noise_std: 0.0, gyro_bias: 0.0, accel_noise_std: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.gyro_noise_std >= 0.0 && self.accel_noise_std >= 0.0) {
            return Err(Error::invalid_config("sensor noise standard deviations must be >= 0"));
        }
        if !self.gyro_bias.is_finite() {
            return Err(Error::invalid_config("gyro bias must be finite"));
        }
        Ok(())
    }
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise { gyro_noise_std: 0.002, gyro_bias: 0.0, accel_noise_std: 0.005 }
    }
}

/// Forward-link payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    pub gyro_pitch_rate: f64,
    pub accel_tilt: f64,
    pub encoder_left: i64,
    pub encoder_right: i64,
    pub sample_time: f64,
    pub seq: u64,
}

/// Quantized encoder reading for a wheel angle.
pub fn encoder_counts(wheel_angle: f64, counts_per_rev: u32) -> i64 {
    libm::floor(wheel_angle / (2.0 * PI) * counts_per_rev as f64) as i64
}

fn gaussian<R: Rng + ?Sized>(std_dev: f64, rng: &mut R) -> f64 {
    // always draw so the stream position does not depend on the noise setting
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    z * std_dev
}

/// Reads the IMU and encoders. Sequence numbers come from the caller's
/// counter, which is bumped on every call.
pub fn sample_sensors<R: Rng + ?Sized>(
    state: &PlantState,
    noise: &SensorNoise,
    params: &PlantParams,
    seq: &mut u64,
    rng: &mut R,
) -> Result<SensorFrame> {
    if !state.is_finite() {
        return Err(Error::invalid_argument("non-finite plant state"));
    }
    let gyro = state.tilt_rate + noise.gyro_bias + gaussian(noise.gyro_noise_std, rng);
    let accel = state.tilt + gaussian(noise.accel_noise_std, rng);
    let counts = encoder_counts(state.wheel_angle, params.encoder_counts_per_rev);
    *seq += 1;
    Ok(SensorFrame {
        gyro_pitch_rate: gyro,
        accel_tilt: accel,
        encoder_left: counts,
        encoder_right: counts,
        sample_time: state.sim_time,
        seq: *seq,
    })
}
