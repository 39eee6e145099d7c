use rand::Rng;

use super::mac::MacConfig;

/// A node clock relative to true simulation time. Offsets in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockState {
    pub true_time: f64,
    pub local_offset: f64,
    /// Parts per million; positive runs fast.
    pub drift_rate: f64,
    pub last_sync_time: f64,
}

impl ClockState {
    pub fn new(drift_ppm: f64) -> Self {
        ClockState { true_time: 0.0, local_offset: 0.0, drift_rate: drift_ppm, last_sync_time: 0.0 }
    }

    pub fn local_time(&self) -> f64 {
        self.true_time + self.local_offset
    }

    /// Largest |offset| the drift and sync models allow at the current time.
    pub fn offset_bound(&self, sync_error_bound: f64) -> f64 {
        sync_error_bound + self.drift_rate.abs() * 1e-6 * (self.true_time - self.last_sync_time)
    }
}

pub fn advance_clock(clk: &ClockState, dt: f64) -> ClockState {
    debug_assert!(dt >= 0.0);
    ClockState { true_time: clk.true_time + dt, local_offset: clk.local_offset + clk.drift_rate * 1e-6 * dt, ..*clk }
}

/// End of a flood: the offset lands uniformly within the sync error bound.
pub fn sync_epoch<R: Rng + ?Sized>(clk: &ClockState, cfg: &MacConfig, rng: &mut R) -> ClockState {
    let u: f64 = rng.random();
    let bound = cfg.sync_error_bound;
    ClockState { local_offset: (2.0 * u - 1.0) * bound, last_sync_time: clk.true_time, ..*clk }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Subsystem};

    #[test]
    fn linear_drift() {
        let c = advance_clock(&ClockState::new(20.0), 1.0);
        assert!((c.local_offset - 20e-6).abs() < 1e-18);
        assert_eq!(advance_clock(&c, 0.0), c);
    }

    #[test]
    fn sync_bounds_the_offset() {
        let mut rng = stream(9, Subsystem::Sync);
        let cfg = MacConfig::default();
        let c = ClockState { local_offset: 50e-6, ..ClockState::new(20.0) };
        let s = sync_epoch(&c, &cfg, &mut rng);
        assert!(s.local_offset.abs() <= 1e-6);
        let exact = MacConfig { sync_error_bound: 0.0, ..cfg };
        assert_eq!(sync_epoch(&c, &exact, &mut rng).local_offset, 0.0);
    }
}
