//! Named numeric scenario parameters.
//!
//! Each entry maps a dotted path (`section.key`) to a field of
//! [`ScenarioConfig`]. Sweeps address parameters by path, and the experiment
//! file format uses the same names, so one table defines both.

use alloc::format;
use alloc::string::String;

use crate::sim::ScenarioConfig;
use crate::{Error, Nanos, Result};

/// What unit a value carries. Values are always handled in SI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Seconds.
    Duration,
    /// Radians.
    Angle,
    Scalar,
    /// Non-negative whole number.
    Integer,
}

pub struct ParamDef {
    pub path: &'static str,
    pub kind: ParamKind,
    set: fn(&mut ScenarioConfig, f64),
    get: fn(&ScenarioConfig) -> f64,
}

impl ParamDef {
    pub fn get(&self, cfg: &ScenarioConfig) -> f64 {
        (self.get)(cfg)
    }
}

fn nanos(v: f64) -> Nanos {
    // range checked by `check` before the setter runs
    Nanos::from_secs_f64(v).unwrap_or(Nanos::ZERO)
}

macro_rules! param {
    ($path:literal, Duration, $($field:ident).+) => {
        ParamDef {
            path: $path,
            kind: ParamKind::Duration,
            set: |c, v| c.$($field).+ = nanos(v),
            get: |c| c.$($field).+.as_secs_f64(),
        }
    };
    ($path:literal, Integer, $($field:ident).+) => {
        ParamDef {
            path: $path,
            kind: ParamKind::Integer,
            set: |c, v| c.$($field).+ = v as _,
            get: |c| c.$($field).+ as f64,
        }
    };
    ($path:literal, $kind:ident, $($field:ident).+) => {
        ParamDef {
            path: $path,
            kind: ParamKind::$kind,
            set: |c, v| c.$($field).+ = v,
            get: |c| c.$($field).+,
        }
    };
}

static PARAMS: &[ParamDef] = &[
    param!("scenario.initial_tilt", Angle, initial_tilt),
    param!("scenario.episode_duration", Duration, episode_duration),
    ParamDef {
        path: "scenario.control_cycle",
        kind: ParamKind::Duration,
        set: |c, v| c.control_cycle = Some(nanos(v)),
        get: |c| c.cycle().as_secs_f64(),
    },
    param!("scenario.seed", Integer, seed),
    param!("scenario.fall_threshold", Angle, fall_threshold),
    param!("scenario.added_delay", Duration, added_delay),
    param!("plant.body_mass", Scalar, plant.body_mass),
    param!("plant.wheel_mass_total", Scalar, plant.wheel_mass_total),
    param!("plant.com_distance", Scalar, plant.com_distance),
    param!("plant.wheel_radius", Scalar, plant.wheel_radius),
    param!("plant.body_inertia", Scalar, plant.body_inertia),
    param!("plant.wheel_inertia", Scalar, plant.wheel_inertia),
    param!("plant.gravity", Scalar, plant.gravity),
    param!("plant.motor_max_torque", Scalar, plant.motor_max_torque),
    ParamDef {
        path: "plant.motor_time_constant",
        kind: ParamKind::Duration,
        set: |c, v| c.plant.motor_time_constant = v,
        get: |c| c.plant.motor_time_constant,
    },
    param!("plant.viscous_friction", Scalar, plant.viscous_friction),
    param!("plant.encoder_counts_per_rev", Integer, plant.encoder_counts_per_rev),
    param!("noise.gyro_noise_std", Scalar, noise.gyro_noise_std),
    param!("noise.gyro_bias", Scalar, noise.gyro_bias),
    param!("noise.accel_noise_std", Scalar, noise.accel_noise_std),
    param!("gains.kp_tilt", Scalar, gains.kp_tilt),
    param!("gains.kd_tilt", Scalar, gains.kd_tilt),
    param!("gains.ki_tilt", Scalar, gains.ki_tilt),
    param!("gains.kp_position", Scalar, gains.kp_position),
    param!("gains.kd_position", Scalar, gains.kd_position),
    param!("gains.integral_limit", Scalar, gains.integral_limit),
    param!("gains.command_limit", Scalar, gains.command_limit),
    param!("gains.alpha", Scalar, alpha),
    param!("mac.slot_duration", Duration, mac.slot_duration),
    param!("mac.slots_per_superframe", Integer, mac.slots_per_superframe),
    param!("mac.forward_band", Integer, mac.forward_band),
    param!("mac.feedback_band", Integer, mac.feedback_band),
    param!("mac.channel_count", Integer, mac.channel_count),
    param!("mac.hop_increment", Integer, mac.hop_increment),
    param!("mac.sync_epoch_period", Duration, mac.sync_epoch_period),
    ParamDef {
        path: "mac.sync_error_bound",
        kind: ParamKind::Duration,
        set: |c, v| c.mac.sync_error_bound = v,
        get: |c| c.mac.sync_error_bound,
    },
    param!("mac.clock_drift_ppm", Scalar, mac.clock_drift_ppm),
    param!("mac.ble_connection_interval", Duration, mac.ble_connection_interval),
    param!("mac.ble_jitter_max", Duration, mac.ble_jitter_max),
    param!("channel.loss", Scalar, channel.base_loss),
    param!("channel.ge_p_good_bad", Scalar, channel.burst.p_good_bad),
    param!("channel.ge_p_bad_good", Scalar, channel.burst.p_bad_good),
    param!("channel.ge_loss_good", Scalar, channel.burst.loss_good),
    param!("channel.ge_loss_bad", Scalar, channel.burst.loss_bad),
];

pub fn all() -> &'static [ParamDef] {
    PARAMS
}

pub fn lookup(path: &str) -> Option<&'static ParamDef> {
    PARAMS.iter().find(|p| p.path == path)
}

fn check(def: &ParamDef, value: f64) -> Result<()> {
    let fail = |why: &str| Err(Error::invalid_config(format!("{}: {why}, got {value}", def.path)));
    if !value.is_finite() {
        return fail("value must be finite");
    }
    match def.kind {
        ParamKind::Duration if value < 0.0 => fail("duration must be >= 0"),
        ParamKind::Duration if value > 1e9 => fail("duration out of range"),
        ParamKind::Integer if value < 0.0 || libm::trunc(value) != value => fail("expected a whole number"),
        ParamKind::Integer if value > u32::MAX as f64 && def.path != "scenario.seed" => fail("out of range"),
        _ => Ok(()),
    }
}

/// Sets the parameter at `path` to `value` (SI units). Range checks beyond
/// the parameter's kind happen in [`ScenarioConfig::validate`].
pub fn set_param(cfg: &mut ScenarioConfig, path: &str, value: f64) -> Result<()> {
    let def = lookup(path).ok_or_else(|| Error::UnknownParameter(String::from(path)))?;
    check(def, value)?;
    (def.set)(cfg, value);
    Ok(())
}

pub fn get_param(cfg: &ScenarioConfig, path: &str) -> Result<f64> {
    lookup(path).map(|d| d.get(cfg)).ok_or_else(|| Error::UnknownParameter(String::from(path)))
}
