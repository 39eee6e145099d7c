use alloc::vec::Vec;

use rand::Rng;

use super::channel::ChannelModel;
use super::mac::{build_superframe, hop_channel, ChannelId, Direction, MacConfig, MacVariant, Superframe};
use crate::rng::{stream, Stream, Subsystem};
use crate::stats::NanosStats;
use crate::{Error, Nanos, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryStatus {
    Delivered,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeliveryOutcome {
    pub status: DeliveryStatus,
    pub send_time: Nanos,
    /// Set only when delivered.
    pub deliver_time: Option<Nanos>,
    /// When the sender knows the outcome: delivery time, or the end of the
    /// last failed attempt.
    pub resolved_time: Nanos,
    /// Channel of the last attempt, if one was made.
    pub channel_used: Option<ChannelId>,
    /// Global slot (or connection-event) index of the last attempt.
    pub slot_index: Option<u64>,
    pub attempts: u32,
}

impl DeliveryOutcome {
    pub fn is_delivered(&self) -> bool {
        self.status == DeliveryStatus::Delivered
    }

    pub fn latency(&self) -> Option<Nanos> {
        self.deliver_time.map(|d| d - self.send_time)
    }
}

/// Random streams a link consumes.
#[derive(Debug, Clone)]
pub struct LinkStreams {
    pub loss: Stream,
    pub jitter: Stream,
}

impl LinkStreams {
    pub fn new(seed: u64) -> Self {
        LinkStreams { loss: stream(seed, Subsystem::ChannelLoss), jitter: stream(seed, Subsystem::Jitter) }
    }
}

/// One bidirectional robot–controller link.
#[derive(Debug, Clone)]
pub struct Link {
    pub cfg: MacConfig,
    superframe: Option<Superframe>,
    pub channel: ChannelModel,
}

impl Link {
    pub fn new(cfg: MacConfig, channel: ChannelModel) -> Result<Self> {
        cfg.validate()?;
        channel.validate()?;
        let superframe = match cfg.variant {
            MacVariant::Gallop => Some(build_superframe(&cfg)?),
            _ => None,
        };
        Ok(Link { cfg, superframe, channel })
    }

    pub fn superframe(&self) -> Option<&Superframe> {
        self.superframe.as_ref()
    }

    /// Sends one frame that becomes ready at `ready` (MAC time).
    pub fn transmit(&mut self, direction: Direction, ready: Nanos, streams: &mut LinkStreams) -> DeliveryOutcome {
        match self.cfg.variant {
            MacVariant::Gallop => self.transmit_tdma(direction, ready, streams),
            MacVariant::BleBaseline => self.transmit_ble(direction, ready, streams),
            MacVariant::Ideal => DeliveryOutcome {
                status: DeliveryStatus::Delivered,
                send_time: ready,
                deliver_time: Some(ready),
                resolved_time: ready,
                channel_used: None,
                slot_index: None,
                attempts: 1,
            },
        }
    }

    fn transmit_tdma(&mut self, direction: Direction, ready: Nanos, streams: &mut LinkStreams) -> DeliveryOutcome {
        let sf = self.superframe.as_ref().expect("gallop link has a superframe");
        let span = sf.span.0;
        let per_frame = sf.slots.len() as u64;
        let lost_now = |attempts, resolved, channel, slot| DeliveryOutcome {
            status: DeliveryStatus::Lost,
            send_time: ready,
            deliver_time: None,
            resolved_time: resolved,
            channel_used: channel,
            slot_index: slot,
            attempts,
        };

        // first slot of this direction starting at or after `ready`
        let mut frame_index = ready.0 / span;
        let first = loop {
            let base = frame_index * span;
            let hit = sf.slots_for(direction).find(|(_, s)| base + s.start_offset.0 >= ready.0).map(|(i, _)| i);
            match hit {
                Some(i) => break Some(i),
                None if frame_index > ready.0 / span => break None,
                None => frame_index += 1,
            }
        };
        let Some(first) = first else {
            // no slot carries this direction at all
            return lost_now(0, ready, None, None);
        };

        let base = frame_index * span;
        let attempts_order = core::iter::once(first).chain(
            (first + 1..sf.slots.len()).filter(|&i| sf.slots[i].direction == direction && sf.slots[i].retransmission),
        );
        let mut attempts = 0;
        let mut last = (ready, None, None);
        for idx in attempts_order {
            let slot = sf.slots[idx];
            let global = frame_index * per_frame + idx as u64;
            let channel = hop_channel(&self.cfg, global, slot.band);
            attempts += 1;
            let end = Nanos(base + slot.end_offset().0);
            if !self.channel.draw_loss(channel, global, &mut streams.loss) {
                return DeliveryOutcome {
                    status: DeliveryStatus::Delivered,
                    send_time: ready,
                    deliver_time: Some(end),
                    resolved_time: end,
                    channel_used: Some(channel),
                    slot_index: Some(global),
                    attempts,
                };
            }
            last = (end, Some(channel), Some(global));
        }
        lost_now(attempts, last.0, last.1, last.2)
    }

    // Quantized to the next connection event strictly after `ready`, never
    // earlier than one full interval after `ready`, plus uniform jitter.
    fn transmit_ble(&mut self, direction: Direction, ready: Nanos, streams: &mut LinkStreams) -> DeliveryOutcome {
        let interval = self.cfg.ble_connection_interval.0;
        let next_event = (ready.0 / interval + 1) * interval;
        let base = next_event.max(ready.0 + interval);
        let event_index = base / interval;
        let jitter = streams.jitter.random_range(0..=self.cfg.ble_jitter_max.0);
        let channel = hop_channel(&self.cfg, event_index, self.cfg.band_for(direction));
        let lost = self.channel.draw_loss(channel, event_index, &mut streams.loss);
        let deliver = Nanos(base + jitter);
        DeliveryOutcome {
            status: if lost { DeliveryStatus::Lost } else { DeliveryStatus::Delivered },
            send_time: ready,
            deliver_time: if lost { None } else { Some(deliver) },
            resolved_time: deliver,
            channel_used: Some(channel),
            slot_index: Some(event_index),
            attempts: 1,
        }
    }
}

/// How sample ready-times fall relative to the MAC schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadyPhase {
    /// On the superframe start / connection event.
    Aligned,
    /// Uniform within each period.
    Uniform,
}

/// Full-cycle (forward then feedback) latency statistics, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub delivered: usize,
    pub lost: usize,
    pub min: f64,
    pub mean: f64,
    pub variance: f64,
    pub p99: f64,
    /// Smallest one-way latency seen in either direction.
    pub min_one_way: f64,
}

/// Monte-Carlo cycle latency over `n_samples` consecutive periods.
pub fn latency_distribution<R: Rng + ?Sized>(
    cfg: &MacConfig,
    channel: &ChannelModel,
    n_samples: usize,
    phase: ReadyPhase,
    streams: &mut LinkStreams,
    phase_rng: &mut R,
) -> Result<LatencySummary> {
    if n_samples == 0 {
        return Err(Error::invalid_argument("n_samples must be >= 1"));
    }
    let mut link = Link::new(cfg.clone(), channel.clone())?;
    let period = cfg.default_cycle().0;
    let mut cycles = Vec::with_capacity(n_samples);
    let mut one_way = NanosStats::default();
    let mut lost = 0;
    for i in 0..n_samples as u64 {
        let offset = match phase {
            ReadyPhase::Aligned => 0,
            ReadyPhase::Uniform => phase_rng.random_range(0..period),
        };
        let ready = Nanos(i * period + offset);
        let fwd = link.transmit(Direction::Forward, ready, streams);
        let Some(at_controller) = fwd.deliver_time else {
            lost += 1;
            continue;
        };
        one_way.push(at_controller - ready);
        let fb = link.transmit(Direction::Feedback, at_controller, streams);
        match fb.deliver_time {
            Some(done) => {
                one_way.push(done - at_controller);
                cycles.push(done - ready);
            }
            None => lost += 1,
        }
    }
    let stats: NanosStats = cycles.iter().copied().collect();
    let summary = stats.summary();
    Ok(LatencySummary {
        delivered: cycles.len(),
        lost,
        min: summary.map_or(f64::NAN, |s| s.min.as_secs_f64()),
        mean: summary.map_or(f64::NAN, |s| s.mean * 1e-9),
        variance: summary.map_or(f64::NAN, |s| s.variance * 1e-18),
        p99: summary.map_or(f64::NAN, |s| s.p99.as_secs_f64()),
        min_one_way: one_way.summary().map_or(f64::NAN, |s| s.min.as_secs_f64()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn streams() -> LinkStreams {
        LinkStreams::new(11)
    }

    #[test]
    fn gallop_forward_lands_at_slot_end() {
        let mut link = Link::new(MacConfig::default(), ChannelModel::lossless()).unwrap();
        let out = link.transmit(Direction::Forward, Nanos::ZERO, &mut streams());
        assert_eq!(out.deliver_time, Some(Nanos::from_millis(1)));
        assert_eq!(out.channel_used, Some(0));
        let fb = link.transmit(Direction::Feedback, Nanos::from_millis(1), &mut streams());
        assert_eq!(fb.deliver_time, Some(Nanos::from_millis(2)));
        // just missed the forward slot: wait a superframe
        let late = link.transmit(Direction::Forward, Nanos(1), &mut streams());
        assert_eq!(late.deliver_time, Some(Nanos::from_millis(3)));
    }

    #[test]
    fn gallop_total_loss_without_retransmission() {
        let mut link = Link::new(MacConfig::default(), ChannelModel::uniform(1.0).unwrap()).unwrap();
        let out = link.transmit(Direction::Forward, Nanos::ZERO, &mut streams());
        assert_eq!(out.status, DeliveryStatus::Lost);
        assert_eq!(out.attempts, 1);
        assert_eq!(out.deliver_time, None);
    }

    #[test]
    fn retransmission_slot_recovers_a_loss() {
        let cfg = MacConfig { slots_per_superframe: 4, ..Default::default() };
        // channel 0 (first forward attempt) always loses, everything else is clean
        let loss = [(0, 1.0)].into_iter().collect();
        let channel = ChannelModel::new(0.0, loss, super::super::GilbertElliott::LOSSLESS).unwrap();
        let mut link = Link::new(cfg, channel).unwrap();
        let out = link.transmit(Direction::Forward, Nanos::ZERO, &mut streams());
        assert_eq!(out.attempts, 2);
        assert_eq!(out.deliver_time, Some(Nanos::from_millis(3)));
        assert_eq!(out.slot_index, Some(2));
    }

    #[test]
    fn forward_only_layout_starves_feedback() {
        let cfg = MacConfig { slots_per_superframe: 1, ..Default::default() };
        let mut link = Link::new(cfg, ChannelModel::lossless()).unwrap();
        let fb = link.transmit(Direction::Feedback, Nanos::ZERO, &mut streams());
        assert_eq!(fb.status, DeliveryStatus::Lost);
        assert_eq!(fb.attempts, 0);
    }

    #[test]
    fn ble_aligned_ready_waits_one_interval() {
        let cfg = MacConfig { ble_jitter_max: Nanos::ZERO, ..MacConfig::ble() };
        let mut link = Link::new(cfg, ChannelModel::lossless()).unwrap();
        let out = link.transmit(Direction::Forward, Nanos::ZERO, &mut streams());
        assert_eq!(out.deliver_time, Some(Nanos::from_micros(7_500)));
        let out = link.transmit(Direction::Forward, Nanos::from_micros(7_500), &mut streams());
        assert_eq!(out.deliver_time, Some(Nanos::from_millis(15)));
    }

    #[test]
    fn ble_unaligned_ready_keeps_the_interval_floor() {
        let cfg = MacConfig { ble_jitter_max: Nanos::ZERO, ..MacConfig::ble() };
        let mut link = Link::new(cfg, ChannelModel::lossless()).unwrap();
        let out = link.transmit(Direction::Forward, Nanos::from_micros(100), &mut streams());
        assert_eq!(out.deliver_time, Some(Nanos::from_micros(7_600)));
    }

    #[test]
    fn ideal_is_instant() {
        let mut link = Link::new(MacConfig::ideal(), ChannelModel::lossless()).unwrap();
        let out = link.transmit(Direction::Feedback, Nanos(123), &mut streams());
        assert_eq!(out.latency(), Some(Nanos::ZERO));
    }
}
