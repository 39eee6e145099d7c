use alloc::string::String;

use crate::control::{ControllerGains, DEFAULT_ALPHA};
use crate::plant::{PlantParams, SensorNoise, DEFAULT_FALL_THRESHOLD};
use crate::wireless::{build_superframe, ChannelModel, MacConfig, MacVariant};
use crate::{Error, Nanos, Result};

/// Everything one episode needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantParams,
    pub noise: SensorNoise,
    pub gains: ControllerGains,
    /// Complementary-filter weight on the integrated gyro.
    pub alpha: f64,
    pub mac: MacConfig,
    pub channel: ChannelModel,
    /// rad
    pub initial_tilt: f64,
    pub episode_duration: Nanos,
    /// Sensor sampling period; `None` follows the MAC (superframe span,
    /// connection interval).
    pub control_cycle: Option<Nanos>,
    pub seed: u64,
    /// rad
    pub fall_threshold: f64,
    /// Extra fixed delay between feedback delivery and actuation.
    pub added_delay: Nanos,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: String::from("gallop_default"),
            plant: PlantParams::default(),
            noise: SensorNoise::default(),
            gains: ControllerGains::SHIPPED,
            alpha: DEFAULT_ALPHA,
            mac: MacConfig::default(),
            channel: ChannelModel::lossless(),
            initial_tilt: 2f64.to_radians(),
            episode_duration: Nanos::from_secs(60),
            control_cycle: None,
            seed: 1,
            fall_threshold: DEFAULT_FALL_THRESHOLD,
            added_delay: Nanos::ZERO,
        }
    }
}

impl ScenarioConfig {
    pub fn gallop() -> Self {
        Self::default()
    }

    pub fn ble() -> Self {
        ScenarioConfig { name: String::from("ble_default"), mac: MacConfig::ble(), ..Self::default() }
    }

    /// Zero-latency, lossless, noiseless reference.
    pub fn ideal() -> Self {
        ScenarioConfig {
            name: String::from("ideal"),
            mac: MacConfig::ideal(),
            noise: SensorNoise::NONE,
            ..Self::default()
        }
    }

    pub fn cycle(&self) -> Nanos {
        self.control_cycle.unwrap_or_else(|| self.mac.default_cycle())
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.noise.validate()?;
        self.gains.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid_config("gains.alpha must be in [0, 1]"));
        }
        self.mac.validate()?;
        if self.mac.variant == MacVariant::Gallop {
            build_superframe(&self.mac)?;
        }
        self.channel.validate()?;
        if self.episode_duration == Nanos::ZERO {
            return Err(Error::invalid_config("scenario.episode_duration must be positive"));
        }
        if self.cycle() == Nanos::ZERO {
            return Err(Error::invalid_config("scenario.control_cycle must be positive"));
        }
        if !(self.fall_threshold > 0.0 && self.fall_threshold.is_finite()) {
            return Err(Error::invalid_config("scenario.fall_threshold must be positive"));
        }
        if !self.initial_tilt.is_finite() {
            return Err(Error::invalid_config("scenario.initial_tilt must be finite"));
        }
        Ok(())
    }
}
