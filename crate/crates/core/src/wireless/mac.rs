use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Nanos, Result};

pub type ChannelId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MacVariant {
    /// TDMA superframe with FDD bands and frequency hopping.
    Gallop,
    /// Connection-interval quantized latency with jitter.
    BleBaseline,
    /// Pass-through: zero latency, no loss. Test reference only.
    Ideal,
}

impl MacVariant {
    pub fn name(self) -> &'static str {
        match self {
            MacVariant::Gallop => "gallop",
            MacVariant::BleBaseline => "ble_baseline",
            MacVariant::Ideal => "ideal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gallop" => Some(MacVariant::Gallop),
            "ble_baseline" | "ble" => Some(MacVariant::BleBaseline),
            "ideal" => Some(MacVariant::Ideal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Robot to controller: sensor frames.
    Forward,
    /// Controller to robot: actuation frames.
    Feedback,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Feedback => "feedback",
        }
    }
}

/// A slot in a custom layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSpec {
    pub direction: Direction,
    pub start: Nanos,
    pub duration: Nanos,
    pub band: u32,
    /// Only used to retry a frame lost earlier in the same superframe.
    pub retransmission: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    pub variant: MacVariant,
    pub slot_duration: Nanos,
    pub slots_per_superframe: u32,
    pub forward_band: u32,
    pub feedback_band: u32,
    pub channel_count: u32,
    pub hop_increment: u32,
    pub sync_epoch_period: Nanos,
    pub sync_error_bound: f64,
    pub clock_drift_ppm: f64,
    pub ble_connection_interval: Nanos,
    pub ble_jitter_max: Nanos,
    /// Replaces the default alternating layout when set.
    pub custom_slots: Option<Vec<SlotSpec>>,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            variant: MacVariant::Gallop,
            slot_duration: Nanos::from_millis(1),
            slots_per_superframe: 2,
            forward_band: 0,
            feedback_band: 1,
            channel_count: 37,
            hop_increment: 7,
            sync_epoch_period: Nanos::from_secs(1),
            sync_error_bound: 1e-6,
            clock_drift_ppm: 20.0,
            ble_connection_interval: Nanos::from_micros(7_500),
            ble_jitter_max: Nanos::from_millis(2),
            custom_slots: None,
        }
    }
}

pub const BLE_MIN_CONNECTION_INTERVAL: Nanos = Nanos::from_micros(7_500);

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl MacConfig {
    pub fn ble() -> Self {
        MacConfig { variant: MacVariant::BleBaseline, ..Default::default() }
    }

    pub fn ideal() -> Self {
        MacConfig { variant: MacVariant::Ideal, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.forward_band == self.feedback_band {
            return Err(Error::invalid_config(format!(
                "forward_band and feedback_band must differ (both {})",
                self.forward_band
            )));
        }
        if self.channel_count == 0 {
            return Err(Error::invalid_config("channel_count must be >= 1"));
        }
        if gcd(self.hop_increment % self.channel_count, self.channel_count) != 1 {
            return Err(Error::invalid_config(format!(
                "hop_increment {} is not coprime with channel_count {}",
                self.hop_increment, self.channel_count
            )));
        }
        if self.slot_duration == Nanos::ZERO {
            return Err(Error::invalid_config("slot_duration must be positive"));
        }
        if self.slots_per_superframe == 0 {
            return Err(Error::invalid_config("slots_per_superframe must be >= 1"));
        }
        if self.sync_epoch_period == Nanos::ZERO {
            return Err(Error::invalid_config("sync_epoch_period must be positive"));
        }
        if !(self.sync_error_bound >= 0.0 && self.sync_error_bound.is_finite()) {
            return Err(Error::invalid_config("sync_error_bound must be >= 0"));
        }
        if !self.clock_drift_ppm.is_finite() {
            return Err(Error::invalid_config("clock_drift_ppm must be finite"));
        }
        if self.ble_connection_interval < BLE_MIN_CONNECTION_INTERVAL {
            return Err(Error::invalid_config(format!(
                "ble_connection_interval must be >= 7.5 ms, got {}",
                self.ble_connection_interval
            )));
        }
        if let Some(slots) = &self.custom_slots {
            if slots.len() != self.slots_per_superframe as usize {
                return Err(Error::invalid_config(format!(
                    "{} custom slots given but slots_per_superframe is {}",
                    slots.len(),
                    self.slots_per_superframe
                )));
            }
        }
        Ok(())
    }

    /// Length of one superframe.
    pub fn superframe_span(&self) -> Nanos {
        Nanos(self.slot_duration.0 * self.slots_per_superframe as u64)
    }

    /// Nominal sampling period when none is configured.
    pub fn default_cycle(&self) -> Nanos {
        match self.variant {
            MacVariant::Gallop => self.superframe_span(),
            MacVariant::BleBaseline => self.ble_connection_interval,
            MacVariant::Ideal => Nanos::from_millis(5),
        }
    }

    pub fn band_for(&self, direction: Direction) -> u32 {
        match direction {
            Direction::Forward => self.forward_band,
            Direction::Feedback => self.feedback_band,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub start_offset: Nanos,
    pub duration: Nanos,
    pub direction: Direction,
    pub band: u32,
    pub retransmission: bool,
}

impl Slot {
    pub fn end_offset(&self) -> Nanos {
        self.start_offset + self.duration
    }
}

/// One period of the TDMA schedule; slots are sorted by start offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Superframe {
    pub slots: Vec<Slot>,
    pub span: Nanos,
}

impl Superframe {
    pub fn slots_for(&self, direction: Direction) -> impl Iterator<Item = (usize, &Slot)> {
        self.slots.iter().enumerate().filter(move |(_, s)| s.direction == direction)
    }
}

fn default_layout(cfg: &MacConfig) -> Vec<SlotSpec> {
    (0..cfg.slots_per_superframe)
        .map(|i| {
            let direction = if i % 2 == 0 { Direction::Forward } else { Direction::Feedback };
            SlotSpec {
                direction,
                start: Nanos(cfg.slot_duration.0 * i as u64),
                duration: cfg.slot_duration,
                band: cfg.band_for(direction),
                retransmission: i >= 2,
            }
        })
        .collect()
}

/// Lays out the TDMA superframe. The default layout alternates forward and
/// feedback slots; slots after the first pair are retransmission slots.
pub fn build_superframe(cfg: &MacConfig) -> Result<Superframe> {
    cfg.validate()?;
    if cfg.variant != MacVariant::Gallop {
        return Err(Error::invalid_config(format!(
            "superframes exist only for the gallop variant, not {}",
            cfg.variant.name()
        )));
    }
    let specs = cfg.custom_slots.clone().unwrap_or_else(|| default_layout(cfg));
    let span = cfg.superframe_span();
    for (i, s) in specs.iter().enumerate() {
        if s.duration == Nanos::ZERO {
            return Err(Error::invalid_config(format!("slot {i} has zero duration")));
        }
        if s.start + s.duration > span {
            return Err(Error::invalid_config(format!(
                "slot {i} ends at {} beyond the {} superframe",
                s.start + s.duration,
                span
            )));
        }
        if s.band != cfg.band_for(s.direction) {
            return Err(Error::invalid_config(format!(
                "slot {i} ({}) uses band {} but the {} band is {}",
                s.direction.name(),
                s.band,
                s.direction.name(),
                cfg.band_for(s.direction)
            )));
        }
    }
    for i in 0..specs.len() {
        for j in i + 1..specs.len() {
            let (a, b) = (&specs[i], &specs[j]);
            if a.start < b.start + b.duration && b.start < a.start + a.duration {
                return Err(Error::invalid_config(format!("slots {i} and {j} overlap")));
            }
            if a.direction != b.direction && a.band == b.band {
                return Err(Error::invalid_config(format!(
                    "slots {i} and {j} carry opposite directions on band {}",
                    a.band
                )));
            }
        }
    }
    let mut slots: Vec<Slot> = specs
        .iter()
        .map(|s| Slot {
            start_offset: s.start,
            duration: s.duration,
            direction: s.direction,
            band: s.band,
            retransmission: s.retransmission,
        })
        .collect();
    slots.sort_by_key(|s| s.start_offset);
    Ok(Superframe { slots, span })
}

/// Channel used in the slot with the given global index, offset into `band`.
pub fn hop_channel(cfg: &MacConfig, slot_global_index: u64, band: u32) -> ChannelId {
    let n = cfg.channel_count as u64;
    let hop = (slot_global_index % n) * (cfg.hop_increment as u64 % n) % n;
    band * cfg.channel_count + hop as u32
}
