use alloc::collections::BTreeMap;

use rand::Rng;

use super::mac::ChannelId;
use crate::{Error, Result};

/// Two-state Markov loss process. The chain steps once per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilbertElliott {
    pub p_good_bad: f64,
    pub p_bad_good: f64,
    pub loss_good: f64,
    pub loss_bad: f64,
}

impl GilbertElliott {
    pub const LOSSLESS: GilbertElliott =
        GilbertElliott { p_good_bad: 0.0, p_bad_good: 1.0, loss_good: 0.0, loss_bad: 0.0 };

    /// Long-run probability of the bad state.
    pub fn stationary_bad(&self) -> f64 {
        let total = self.p_good_bad + self.p_bad_good;
        if total == 0.0 {
            0.0
        } else {
            self.p_good_bad / total
        }
    }

    pub fn stationary_loss_rate(&self) -> f64 {
        let pb = self.stationary_bad();
        (1.0 - pb) * self.loss_good + pb * self.loss_bad
    }

    /// P(bad after `steps` slots | current state).
    fn bad_after(&self, bad_now: bool, steps: u64) -> f64 {
        if steps == 0 {
            return if bad_now { 1.0 } else { 0.0 };
        }
        let total = self.p_good_bad + self.p_bad_good;
        if total == 0.0 {
            return if bad_now { 1.0 } else { 0.0 };
        }
        let pb = self.p_good_bad / total;
        let decay = libm::pow(1.0 - total, steps as f64);
        let start = if bad_now { 1.0 } else { 0.0 };
        (pb + (start - pb) * decay).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ChainState {
    bad: bool,
    slot: u64,
}

/// Per-channel loss: an independent Gilbert–Elliott chain on every channel,
/// plus a fixed loss probability (`base_loss`, overridden per channel id by
/// `per_channel_loss`).
///
/// Chains are advanced lazily: when a channel is used again after `n` slots,
/// its state is drawn from the exact `n`-step transition probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub base_loss: f64,
    /// Fixed loss overrides by channel id.
    pub per_channel_loss: BTreeMap<ChannelId, f64>,
    pub burst: GilbertElliott,
    chains: BTreeMap<ChannelId, ChainState>,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self::lossless()
    }
}

impl ChannelModel {
    pub fn new(base_loss: f64, per_channel_loss: BTreeMap<ChannelId, f64>, burst: GilbertElliott) -> Result<Self> {
        let model = ChannelModel { base_loss, per_channel_loss, burst, chains: BTreeMap::new() };
        model.validate()?;
        Ok(model)
    }

    pub fn lossless() -> Self {
        ChannelModel {
            base_loss: 0.0,
            per_channel_loss: BTreeMap::new(),
            burst: GilbertElliott::LOSSLESS,
            chains: BTreeMap::new(),
        }
    }

    /// Same loss probability on every channel, no bursts.
    pub fn uniform(loss: f64) -> Result<Self> {
        let model = ChannelModel { base_loss: loss, ..Self::lossless() };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.burst;
        let probs = [b.p_good_bad, b.p_bad_good, b.loss_good, b.loss_bad];
        let in_unit = |p: &f64| (0.0..=1.0).contains(p);
        if !probs.iter().all(in_unit) || !in_unit(&self.base_loss) || !self.per_channel_loss.values().all(in_unit) {
            return Err(Error::invalid_config("channel probabilities must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Forgets all chain state.
    pub fn reset(&mut self) {
        self.chains.clear();
    }

    fn fixed_loss(&self, channel: ChannelId) -> f64 {
        self.per_channel_loss.get(&channel).copied().unwrap_or(self.base_loss)
    }

    /// Draws whether a frame sent on `channel` in global slot `slot` is lost.
    /// Consumes exactly three uniforms per call.
    pub fn draw_loss<R: Rng + ?Sized>(&mut self, channel: ChannelId, slot: u64, rng: &mut R) -> bool {
        let u_state: f64 = rng.random();
        let u_burst: f64 = rng.random();
        let u_fixed: f64 = rng.random();
        let burst = self.burst;
        let p_bad = match self.chains.get(&channel) {
            Some(prev) => burst.bad_after(prev.bad, slot.saturating_sub(prev.slot)),
            None => burst.stationary_bad(),
        };
        let bad = u_state < p_bad;
        self.chains.insert(channel, ChainState { bad, slot });
        let p_loss = if bad { burst.loss_bad } else { burst.loss_good };
        u_burst < p_loss || u_fixed < self.fixed_loss(channel)
    }
}
