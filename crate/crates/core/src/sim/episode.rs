use alloc::collections::BTreeMap;

use super::metrics::{compute_metrics, EpisodeMetrics, EpisodeTrace, TraceRecord};
use super::queue::EventQueue;
use super::scenario::ScenarioConfig;
use crate::control::{ActuationFrame, Controller};
use crate::plant::{self, is_fallen, sample_sensors, PlantState, SensorFrame};
use crate::rng::{stream, Stream, Subsystem};
use crate::wireless::{advance_clock, sync_epoch, ClockState, Direction, Link, LinkStreams};
use crate::{Nanos, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirectionCounters {
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageCounters {
    pub forward: DirectionCounters,
    pub feedback: DirectionCounters,
    /// Actuation frames applied no later than they were issued.
    pub causality_violations: u64,
    /// Actuation frames ignored because a newer one was already applied.
    pub superseded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trace: EpisodeTrace,
    pub metrics: EpisodeMetrics,
    pub counters: MessageCounters,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Sample { cycle: u64 },
    AtController { cycle: u64, frame: SensorFrame, mac_ready: Nanos, mac_arrival: Nanos },
    AtPlant { cycle: u64, frame: ActuationFrame, latency: Nanos },
    Lost { cycle: u64, direction: Direction },
    Sync,
    End,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    record: TraceRecord,
    sampled_at: f64,
}

struct Loop<'a> {
    cfg: &'a ScenarioConfig,
    cycle: Nanos,
    queue: EventQueue<Event>,
    link: Link,
    link_streams: LinkStreams,
    sensor_rng: Stream,
    sync_rng: Stream,
    plant: PlantState,
    plant_time: Nanos,
    fall_time: Option<Nanos>,
    clock: ClockState,
    controller: Controller,
    frame_seq: u64,
    held_command: f64,
    held_frame: Option<ActuationFrame>,
    pending: BTreeMap<u64, Pending>,
    done: BTreeMap<u64, TraceRecord>,
    counters: MessageCounters,
}

impl<'a> Loop<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        let cycle = cfg.cycle();
        let mut channel = cfg.channel.clone();
        channel.reset();
        Ok(Loop {
            cfg,
            cycle,
            queue: EventQueue::new(),
            link: Link::new(cfg.mac.clone(), channel)?,
            link_streams: LinkStreams::new(cfg.seed),
            sensor_rng: stream(cfg.seed, Subsystem::SensorNoise),
            sync_rng: stream(cfg.seed, Subsystem::Sync),
            plant: PlantState::tilted(cfg.initial_tilt),
            plant_time: Nanos::ZERO,
            fall_time: None,
            clock: ClockState::new(cfg.mac.clock_drift_ppm),
            controller: Controller::new(cfg.gains, cfg.alpha, cfg.plant.encoder_counts_per_rev, cycle.as_secs_f64()),
            frame_seq: 0,
            held_command: 0.0,
            held_frame: None,
            pending: BTreeMap::new(),
            done: BTreeMap::new(),
            counters: MessageCounters::default(),
        })
    }

    /// Integrates the plant up to `until` under the held command. Returns
    /// false once the body has fallen.
    fn advance_plant(&mut self, until: Nanos) -> Result<bool> {
        let substep = Nanos::from_secs_f64(plant::SUBSTEP).expect("substep");
        let torque = self.held_command * self.cfg.plant.motor_max_torque;
        while self.plant_time < until {
            let step = (until - self.plant_time).min(substep);
            self.plant = plant::step_dynamics(&self.plant, &self.cfg.plant, torque, step.as_secs_f64())?;
            self.plant_time += step;
            if is_fallen(&self.plant, self.cfg.fall_threshold) {
                self.fall_time = Some(self.plant_time);
                return Ok(false);
            }
        }
        Ok(true)
    }

    // True time at which the robot's local clock next reads `local_target`.
    fn true_time_for_local(&self, now: Nanos, local_target: f64) -> Nanos {
        let local_now = self.clock.local_time();
        let rate = 1.0 + self.clock.drift_rate * 1e-6;
        let delta = ((local_target - local_now) / rate).max(0.0);
        now + Nanos::from_secs_f64(delta).unwrap_or(Nanos::ZERO)
    }

    fn on_sample(&mut self, now: Nanos, cycle: u64) -> Result<()> {
        let frame =
            sample_sensors(&self.plant, &self.cfg.noise, &self.cfg.plant, &mut self.frame_seq, &mut self.sensor_rng)?;
        let record = TraceRecord {
            t: now.as_secs_f64(),
            tilt: self.plant.tilt.to_degrees(),
            tilt_rate: self.plant.tilt_rate.to_degrees(),
            wheel_rate: self.plant.wheel_rate.to_degrees(),
            command_left: self.held_command,
            command_right: self.held_command,
            cycle_latency: None,
            forward_dropped: false,
            feedback_dropped: false,
        };
        self.pending.insert(cycle, Pending { record, sampled_at: now.as_secs_f64() });

        // MAC slots run on the synchronized schedule; the sample is handed
        // over at the nominal cycle boundary in MAC time.
        let mac_ready = Nanos(cycle * self.cycle.0);
        let out = self.link.transmit(Direction::Forward, mac_ready, &mut self.link_streams);
        self.counters.forward.sent += 1;
        match out.deliver_time {
            Some(mac_arrival) => {
                self.counters.forward.delivered += 1;
                let at = now + (mac_arrival - mac_ready);
                self.queue.push(at, Event::AtController { cycle, frame, mac_ready, mac_arrival });
            }
            None => {
                self.counters.forward.lost += 1;
                let at = now + (out.resolved_time - mac_ready);
                self.queue.push(at, Event::Lost { cycle, direction: Direction::Forward });
            }
        }

        let next_local = (cycle + 1) as f64 * self.cycle.as_secs_f64();
        let next = self.true_time_for_local(now, next_local).max(now + Nanos(1));
        self.queue.push(next, Event::Sample { cycle: cycle + 1 });
        Ok(())
    }

    fn on_controller(
        &mut self,
        now: Nanos,
        cycle: u64,
        frame: SensorFrame,
        mac_ready: Nanos,
        mac_arrival: Nanos,
    ) -> Result<()> {
        let actuation = match self.controller.on_frame(&frame, now.as_secs_f64()) {
            Ok(a) => a,
            Err(_) => {
                // stale or simultaneous frame: nothing goes back for this cycle
                self.queue.push(now, Event::Lost { cycle, direction: Direction::Feedback });
                return Ok(());
            }
        };
        let out = self.link.transmit(Direction::Feedback, mac_arrival, &mut self.link_streams);
        self.counters.feedback.sent += 1;
        match out.deliver_time {
            Some(mac_done) => {
                self.counters.feedback.delivered += 1;
                let latency = (mac_done - mac_ready) + self.cfg.added_delay;
                let at = now + (mac_done - mac_arrival) + self.cfg.added_delay;
                self.queue.push(at, Event::AtPlant { cycle, frame: actuation, latency });
            }
            None => {
                self.counters.feedback.lost += 1;
                let at = now + (out.resolved_time - mac_arrival);
                self.queue.push(at, Event::Lost { cycle, direction: Direction::Feedback });
            }
        }
        Ok(())
    }

    fn on_plant(&mut self, now: Nanos, cycle: u64, frame: ActuationFrame, latency: Nanos) {
        let issued = frame.issue_time;
        let applied = now.as_secs_f64();
        let sampled = self.pending.get(&cycle).map_or(f64::NEG_INFINITY, |p| p.sampled_at);
        let strict = self.link.cfg.variant != crate::wireless::MacVariant::Ideal || self.cfg.added_delay > Nanos::ZERO;
        let ordered = if strict { issued < applied } else { issued <= applied };
        if !ordered || sampled > issued {
            self.counters.causality_violations += 1;
        }
        if self.held_frame.is_some_and(|h| h.seq >= frame.seq) {
            self.counters.superseded += 1;
        } else {
            self.held_command = frame.mean_command();
            self.held_frame = Some(frame);
        }
        if let Some(p) = self.pending.remove(&cycle) {
            let record = TraceRecord {
                command_left: frame.motor_command_left,
                command_right: frame.motor_command_right,
                cycle_latency: Some(latency.as_millis_f64()),
                ..p.record
            };
            self.done.insert(cycle, record);
        }
    }

    fn on_lost(&mut self, cycle: u64, direction: Direction) {
        if let Some(p) = self.pending.remove(&cycle) {
            let record = TraceRecord {
                command_left: self.held_command,
                command_right: self.held_command,
                forward_dropped: direction == Direction::Forward,
                feedback_dropped: direction == Direction::Feedback,
                ..p.record
            };
            self.done.insert(cycle, record);
        }
    }

    fn run(mut self) -> Result<Episode> {
        let end = self.cfg.episode_duration;
        if is_fallen(&self.plant, self.cfg.fall_threshold) {
            self.fall_time = Some(Nanos::ZERO);
        } else {
            self.queue.push(Nanos::ZERO, Event::Sample { cycle: 0 });
            self.queue.push(self.cfg.mac.sync_epoch_period, Event::Sync);
            self.queue.push(end, Event::End);
        }
        while self.fall_time.is_none() {
            let Some((now, event)) = self.queue.pop() else { break };
            if !self.advance_plant(now)? {
                break;
            }
            let dt = now.as_secs_f64() - self.clock.true_time;
            if dt > 0.0 {
                self.clock = advance_clock(&self.clock, dt);
            }
            match event {
                Event::End => break,
                Event::Sample { cycle } => self.on_sample(now, cycle)?,
                Event::AtController { cycle, frame, mac_ready, mac_arrival } => {
                    self.on_controller(now, cycle, frame, mac_ready, mac_arrival)?
                }
                Event::AtPlant { cycle, frame, latency } => self.on_plant(now, cycle, frame, latency),
                Event::Lost { cycle, direction } => self.on_lost(cycle, direction),
                Event::Sync => {
                    self.clock = sync_epoch(&self.clock, &self.cfg.mac, &mut self.sync_rng);
                    self.queue.push(now + self.cfg.mac.sync_epoch_period, Event::Sync);
                }
            }
        }

        let trace = EpisodeTrace {
            records: self.done.into_values().collect(),
            episode_duration: end.as_secs_f64(),
            fall_time: self.fall_time.map(Nanos::as_secs_f64),
        };
        let metrics = compute_metrics(&trace).unwrap_or_else(|_| EpisodeMetrics::without_records(&trace));
        Ok(Episode { trace, metrics, counters: self.counters })
    }
}

/// Runs one episode to its duration or to a fall. Fully determined by the
/// config, including its seed.
pub fn run_episode(cfg: &ScenarioConfig) -> Result<Episode> {
    cfg.validate()?;
    Loop::new(cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControllerGains;

    fn short(mut cfg: ScenarioConfig, secs: u64) -> ScenarioConfig {
        cfg.episode_duration = Nanos::from_secs(secs);
        cfg
    }

    #[test]
    fn ideal_network_balances() {
        let ep = run_episode(&short(ScenarioConfig::ideal(), 5)).unwrap();
        assert!(!ep.metrics.fell);
        assert!(ep.metrics.max_abs_tilt < 4.0, "{}", ep.metrics.max_abs_tilt);
        assert_eq!(ep.metrics.latency_mean, 0.0);
    }

    #[test]
    fn gallop_latency_is_constant() {
        let ep = run_episode(&short(ScenarioConfig::gallop(), 3)).unwrap();
        assert!(!ep.metrics.fell);
        assert_eq!(ep.metrics.latency_mean, 2.0);
        assert_eq!(ep.metrics.latency_variance, 0.0);
        assert_eq!(ep.counters.causality_violations, 0);
    }

    #[test]
    fn fall_at_start_still_produces_a_trace() {
        let cfg = ScenarioConfig { initial_tilt: 1.0, ..ScenarioConfig::gallop() };
        let ep = run_episode(&cfg).unwrap();
        assert!(ep.metrics.fell);
        assert_eq!(ep.metrics.balanced_duration, 0.0);
        assert!(ep.trace.records.is_empty());
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let cfg = ScenarioConfig { alpha: 2.0, ..ScenarioConfig::gallop() };
        assert!(run_episode(&cfg).is_err());
    }

    #[test]
    fn zero_gains_fall() {
        let cfg = ScenarioConfig { gains: ControllerGains::zero(), ..ScenarioConfig::ideal() };
        let ep = run_episode(&cfg).unwrap();
        assert!(ep.metrics.fell);
    }
}
