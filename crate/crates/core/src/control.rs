//! Remote balancing controller.
//!
//! Tilt is estimated with a complementary filter over the gyro pitch rate and
//! the accelerometer tilt, and the command is a PD law on tilt plus an
//! anti-windup integral and a PD station-keeping term on wheel angle. The
//! controller runs once per received [`SensorFrame`]; `dt` is the spacing
//! between arrivals.

use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::linalg::spectral_radius;
use crate::plant::{PlantParams, SensorFrame};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.98;

/// Time constant of the low-pass filter on the encoder-difference wheel rate.
/// Without it every encoder tick kicks the command.
pub const WHEEL_RATE_TIME_CONSTANT: f64 = 0.02;

fn wheel_rate_smoothing(dt: f64) -> f64 {
    libm::exp(-dt / WHEEL_RATE_TIME_CONSTANT)
}

/// Gains map sensor quantities to a normalized motor command in `[-1, 1]`,
/// which the plant scales by `motor_max_torque`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub kp_tilt: f64,
    pub kd_tilt: f64,
    pub ki_tilt: f64,
    pub kp_position: f64,
    pub kd_position: f64,
    pub integral_limit: f64,
    pub command_limit: f64,
}

impl ControllerGains {
    /// Tuned for the default plant at a 5 ms cycle; closed-loop spectral
    /// radius ≈ 0.992 with no network delay. On a 2 ms cycle the robot stays
    /// up with 10 ms of extra round-trip delay and falls with 12 ms.
    pub const SHIPPED: ControllerGains = ControllerGains {
        kp_tilt: 3.0,
        kd_tilt: 0.1,
        ki_tilt: 0.0,
        kp_position: 0.15,
        kd_position: 0.05,
        integral_limit: 0.5,
        command_limit: 1.0,
    };

    pub fn zero() -> Self {
        ControllerGains {
            kp_tilt: 0.0,
            kd_tilt: 0.0,
            ki_tilt: 0.0,
            kp_position: 0.0,
            kd_position: 0.0,
            ..Self::SHIPPED
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ControllerGains {
            kp_tilt: self.kp_tilt * factor,
            kd_tilt: self.kd_tilt * factor,
            ki_tilt: self.ki_tilt * factor,
            kp_position: self.kp_position * factor,
            kd_position: self.kd_position * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gains = [self.kp_tilt, self.kd_tilt, self.ki_tilt, self.kp_position, self.kd_position];
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid_config("controller gains must be finite"));
        }
        if !(self.integral_limit > 0.0 && self.integral_limit.is_finite()) {
            return Err(Error::invalid_config("gains.integral_limit must be positive"));
        }
        if !(self.command_limit > 0.0 && self.command_limit <= 1.0) {
            return Err(Error::invalid_config("gains.command_limit must be in (0, 1]"));
        }
        Ok(())
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::SHIPPED
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub tilt_estimate: f64,
    /// Integral of the tilt estimate, clamped to `±integral_limit`.
    pub integral_accum: f64,
    pub last_frame_seq: Option<u64>,
    pub last_update_time: f64,
    pub last_wheel_angle: Option<f64>,
    pub wheel_rate_estimate: f64,
}

/// Feedback-link payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationFrame {
    pub motor_command_left: f64,
    pub motor_command_right: f64,
    /// Sequence number of the sensor frame this answers.
    pub seq: u64,
    pub issue_time: f64,
}

impl ActuationFrame {
    pub fn mean_command(&self) -> f64 {
        0.5 * (self.motor_command_left + self.motor_command_right)
    }
}

fn check_fresh(cstate: &ControllerState, frame: &SensorFrame) -> Result<()> {
    match cstate.last_frame_seq {
        Some(last) if frame.seq <= last => Err(Error::StaleFrame { seq: frame.seq, last }),
        _ => Ok(()),
    }
}

/// Complementary-filter update. Stale frames are rejected and leave the
/// state untouched.
pub fn estimate_tilt(cstate: &ControllerState, frame: &SensorFrame, dt: f64, alpha: f64) -> Result<ControllerState> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid_argument("alpha must be in [0, 1]"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid_argument("dt must be positive"));
    }
    check_fresh(cstate, frame)?;
    let mut next = *cstate;
    next.tilt_estimate = alpha * (cstate.tilt_estimate + frame.gyro_pitch_rate * dt) + (1.0 - alpha) * frame.accel_tilt;
    next.last_frame_seq = Some(frame.seq);
    Ok(next)
}

pub fn wheel_angle_from_encoders(frame: &SensorFrame, counts_per_rev: u32) -> f64 {
    let mean = 0.5 * (frame.encoder_left as f64 + frame.encoder_right as f64);
    mean / counts_per_rev as f64 * 2.0 * PI
}

/// Feedback law. Must follow [`estimate_tilt`] for the same frame.
pub fn compute_command(
    cstate: &ControllerState,
    gains: &ControllerGains,
    frame: &SensorFrame,
    dt: f64,
    counts_per_rev: u32,
    now: f64,
) -> Result<(ControllerState, ActuationFrame)> {
    if cstate.last_frame_seq != Some(frame.seq) {
        return Err(match cstate.last_frame_seq {
            Some(last) if frame.seq < last => Error::StaleFrame { seq: frame.seq, last },
            _ => Error::invalid_argument("estimate_tilt has not seen this frame"),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid_argument("dt must be positive"));
    }
    let mut next = *cstate;
    let wheel_angle = wheel_angle_from_encoders(frame, counts_per_rev);
    let raw_rate = match cstate.last_wheel_angle {
        Some(prev) => (wheel_angle - prev) / dt,
        None => 0.0,
    };
    let beta = wheel_rate_smoothing(dt);
    next.wheel_rate_estimate = beta * cstate.wheel_rate_estimate + (1.0 - beta) * raw_rate;
    next.last_wheel_angle = Some(wheel_angle);
    next.integral_accum =
        (cstate.integral_accum + next.tilt_estimate * dt).clamp(-gains.integral_limit, gains.integral_limit);
    next.last_update_time = now;

    let u = gains.kp_tilt * next.tilt_estimate
        + gains.kd_tilt * frame.gyro_pitch_rate
        + gains.ki_tilt * next.integral_accum
        + gains.kp_position * wheel_angle
        + gains.kd_position * next.wheel_rate_estimate;
    // NaN from adversarial input collapses to zero command
    let u = if u.is_nan() { 0.0 } else { u.clamp(-gains.command_limit, gains.command_limit) };
    Ok((next, ActuationFrame { motor_command_left: u, motor_command_right: u, seq: frame.seq, issue_time: now }))
}

/// A controller instance: configuration plus its single-owner state.
#[derive(Debug, Clone)]
pub struct Controller {
    pub gains: ControllerGains,
    pub alpha: f64,
    pub counts_per_rev: u32,
    pub state: ControllerState,
    last_arrival: Option<f64>,
    nominal_dt: f64,
}

impl Controller {
    pub fn new(gains: ControllerGains, alpha: f64, counts_per_rev: u32, nominal_dt: f64) -> Self {
        Controller { gains, alpha, counts_per_rev, state: ControllerState::default(), last_arrival: None, nominal_dt }
    }

    /// Handles a frame arriving at `now`. The first frame uses the nominal
    /// cycle as `dt`.
    pub fn on_frame(&mut self, frame: &SensorFrame, now: f64) -> Result<ActuationFrame> {
        let dt = match self.last_arrival {
            Some(prev) if now > prev => now - prev,
            Some(_) => return Err(Error::invalid_argument("frames arrived at the same instant")),
            None => self.nominal_dt,
        };
        let est = estimate_tilt(&self.state, frame, dt, self.alpha)?;
        let (next, out) = compute_command(&est, &self.gains, frame, dt, self.counts_per_rev, now)?;
        self.state = next;
        self.last_arrival = Some(now);
        Ok(out)
    }
}

/// Linearized closed loop sampled every `cycle` seconds with no network
/// delay: plant `(θ, θ', φ, φ', τ)` under zero-order hold, then the tilt
/// estimate, the previous encoder angle, the filtered wheel rate and (when
/// `ki_tilt ≠ 0`) the integral.
///
/// With `ki_tilt = 0` the integral is unobservable and left out; otherwise
/// it is included.
pub fn closed_loop_matrix(params: &PlantParams, gains: &ControllerGains, alpha: f64, cycle: f64) -> DMatrix<f64> {
    let (ad, bd) = params.discretized(cycle);
    let with_integral = gains.ki_tilt != 0.0;
    let n = if with_integral { 9 } else { 8 };
    const EST: usize = 5;
    const PHI_PREV: usize = 6;
    const RATE: usize = 7;
    const INT: usize = 8;
    let beta = wheel_rate_smoothing(cycle);

    // tilt estimate at this sample as a row over the loop state
    let mut est = alloc::vec![0.0; n];
    est[EST] = alpha;
    est[1] = alpha * cycle;
    est[0] = 1.0 - alpha;
    let mut integral = est.iter().map(|v| v * cycle).collect::<alloc::vec::Vec<_>>();
    if with_integral {
        integral[INT] += 1.0;
    }
    let mut u = alloc::vec![0.0; n];
    for i in 0..n {
        u[i] = gains.kp_tilt * est[i] + gains.ki_tilt * integral[i];
    }
    u[1] += gains.kd_tilt;
    // filtered wheel rate after this sample
    let mut rate = alloc::vec![0.0; n];
    rate[RATE] = beta;
    rate[2] = (1.0 - beta) / cycle;
    rate[PHI_PREV] = -(1.0 - beta) / cycle;
    for i in 0..n {
        u[i] += gains.kd_position * rate[i];
    }
    u[2] += gains.kp_position;

    let mut m = DMatrix::<f64>::zeros(n, n);
    for r in 0..5 {
        for c in 0..5 {
            m[(r, c)] = ad[(r, c)];
        }
        for c in 0..n {
            m[(r, c)] += bd[r] * params.motor_max_torque * u[c];
        }
    }
    for c in 0..n {
        m[(EST, c)] = est[c];
        m[(RATE, c)] = rate[c];
        if with_integral {
            m[(INT, c)] = integral[c];
        }
    }
    m[(PHI_PREV, 2)] = 1.0;
    m
}

/// Spectral radius of [`closed_loop_matrix`].
pub fn closed_loop_radius(params: &PlantParams, gains: &ControllerGains, alpha: f64, cycle: f64) -> f64 {
    spectral_radius(&closed_loop_matrix(params, gains, alpha, cycle))
}

const SCALES: [f64; 7] = [1.0, 0.5, 2.0, 0.25, 4.0, 0.125, 8.0];

/// Candidate gain sets in search order, nearest to the shipped gains first.
pub fn tuning_grid() -> alloc::vec::Vec<ControllerGains> {
    let mut out = alloc::vec::Vec::new();
    let rank = |s: f64| SCALES.iter().position(|&x| x == s).unwrap_or(0);
    let mut triples = alloc::vec::Vec::new();
    for &tilt in &SCALES {
        for &pos in &SCALES {
            for &damp in &SCALES[..3] {
                triples.push((tilt, pos, damp));
            }
        }
    }
    triples.sort_by_key(|&(t, p, d)| (rank(t) + rank(p) + rank(d), rank(t), rank(p), rank(d)));
    let base = ControllerGains::SHIPPED;
    for (tilt, pos, damp) in triples {
        out.push(ControllerGains {
            kp_tilt: base.kp_tilt * tilt,
            kd_tilt: base.kd_tilt * tilt * damp,
            kp_position: base.kp_position * pos,
            kd_position: base.kd_position * pos * damp,
            ..base
        });
    }
    out
}

/// First gain set on [`tuning_grid`] whose zero-delay closed loop at `cycle`
/// is strictly stable. For the default plant at 5 ms this is
/// [`ControllerGains::SHIPPED`].
pub fn tune_default_gains(params: &PlantParams, cycle: f64) -> Result<ControllerGains> {
    if !(cycle > 0.0 && cycle.is_finite()) {
        return Err(Error::invalid_argument("cycle must be positive"));
    }
    params.validate()?;
    tuning_grid()
        .into_iter()
        .find(|g| closed_loop_radius(params, g, DEFAULT_ALPHA, cycle) < 1.0)
        .ok_or(Error::TuningFailure { cycle_ms: cycle * 1e3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(seq: u64, gyro: f64, accel: f64) -> SensorFrame {
        SensorFrame {
            gyro_pitch_rate: gyro,
            accel_tilt: accel,
            encoder_left: 0,
            encoder_right: 0,
            sample_time: 0.0,
            seq,
        }
    }

    fn p_only(kp: f64) -> ControllerGains {
        ControllerGains { kp_tilt: kp, ..ControllerGains::zero() }
    }

    #[test]
    fn alpha_zero_tracks_accelerometer() {
        let s = ControllerState { tilt_estimate: 0.3, ..Default::default() };
        let next = estimate_tilt(&s, &frame(1, 5.0, -0.042), 0.005, 0.0).unwrap();
        assert_eq!(next.tilt_estimate, -0.042);
    }

    #[test]
    fn alpha_one_integrates_gyro() {
        let s = ControllerState::default();
        let next = estimate_tilt(&s, &frame(1, 0.2, 9.0), 0.005, 1.0).unwrap();
        assert!((next.tilt_estimate - 0.001).abs() < 1e-15);
    }

    #[test]
    fn stale_frame_is_rejected_without_change() {
        let s = estimate_tilt(&ControllerState::default(), &frame(5, 0.1, 0.1), 0.005, 0.98).unwrap();
        let err = estimate_tilt(&s, &frame(5, 1.0, 1.0), 0.005, 0.98).unwrap_err();
        assert_eq!(err, Error::StaleFrame { seq: 5, last: 5 });
        assert!(estimate_tilt(&s, &frame(3, 1.0, 1.0), 0.005, 0.98).is_err());
        let mut c = Controller::new(ControllerGains::SHIPPED, 0.98, 1320, 0.005);
        c.on_frame(&frame(2, 0.1, 0.05), 0.01).unwrap();
        let before = c.state;
        assert!(c.on_frame(&frame(1, 3.0, 0.5), 0.02).is_err());
        assert_eq!(c.state, before);
    }

    #[test]
    fn zero_input_gives_zero_command() {
        let f = frame(1, 0.0, 0.0);
        let s = estimate_tilt(&ControllerState::default(), &f, 0.005, 0.98).unwrap();
        let (_, out) = compute_command(&s, &ControllerGains::SHIPPED, &f, 0.005, 1320, 0.0).unwrap();
        assert_eq!(out.motor_command_left, 0.0);
        assert_eq!(out.motor_command_right, 0.0);
        assert_eq!(out.seq, 1);
    }

    #[test]
    fn proportional_term_and_clamp() {
        let f = frame(1, 0.0, 0.0);
        let s = ControllerState { tilt_estimate: 0.1, last_frame_seq: Some(1), ..Default::default() };
        let (_, out) = compute_command(&s, &p_only(1.0), &f, 0.005, 1320, 0.0).unwrap();
        assert_eq!(out.motor_command_left, 0.1);
        let (_, out) = compute_command(&s, &p_only(20.0), &f, 0.005, 1320, 0.0).unwrap();
        assert_eq!(out.motor_command_left, 1.0);
        assert_eq!(out.motor_command_right, 1.0);
    }

    #[test]
    fn compute_requires_estimate_first() {
        let f = frame(4, 0.0, 0.0);
        let err = compute_command(&ControllerState::default(), &p_only(1.0), &f, 0.005, 1320, 0.0);
        assert!(err.is_err());
    }

    #[test]
    fn integral_is_clamped() {
        let gains = ControllerGains { ki_tilt: 1.0, integral_limit: 0.05, ..ControllerGains::zero() };
        let mut c = Controller::new(gains, 0.0, 1320, 0.01);
        for i in 1..200 {
            c.on_frame(&frame(i, 0.0, 0.5), i as f64 * 0.01).unwrap();
            assert!(c.state.integral_accum.abs() <= 0.05);
        }
        assert_eq!(c.state.integral_accum, 0.05);
    }

    #[test]
    fn shipped_gains_stabilize_at_5ms() {
        let r = closed_loop_radius(&PlantParams::default(), &ControllerGains::SHIPPED, DEFAULT_ALPHA, 0.005);
        assert!(r < 1.0, "radius {r}");
        let tuned = tune_default_gains(&PlantParams::default(), 0.005).unwrap();
        assert_eq!(tuned, ControllerGains::SHIPPED);
    }

    #[test]
    fn zero_gains_are_unstable() {
        let r = closed_loop_radius(&PlantParams::default(), &ControllerGains::zero(), DEFAULT_ALPHA, 0.005);
        assert!(r >= 1.0);
        let r =
            closed_loop_radius(&PlantParams::default(), &ControllerGains::SHIPPED.scaled(0.0), DEFAULT_ALPHA, 0.005);
        assert!(r >= 1.0);
    }

    #[test]
    fn slow_cycle_cannot_be_tuned() {
        let err = tune_default_gains(&PlantParams::default(), 0.2).unwrap_err();
        assert!(matches!(err, Error::TuningFailure { .. }));
    }
}
