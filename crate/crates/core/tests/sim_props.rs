use nalgebra::Matrix4;
use proptest::prelude::*;
use wiloop_core::control::ControllerGains;
use wiloop_core::plant::PlantParams;
use wiloop_core::sim::{aggregate_sweep, run_episode, run_sweep, sweep_jobs, ScenarioConfig};
use wiloop_core::wireless::{ChannelModel, MacConfig};
use wiloop_core::Nanos;

fn short(mut cfg: ScenarioConfig, secs: u64, seed: u64) -> ScenarioConfig {
    cfg.episode_duration = Nanos::from_secs(secs);
    cfg.seed = seed;
    cfg
}

fn scenario(kind: u8) -> ScenarioConfig {
    match kind {
        0 => ScenarioConfig::gallop(),
        1 => ScenarioConfig::ble(),
        _ => ScenarioConfig {
            mac: MacConfig { slots_per_superframe: 4, ..MacConfig::default() },
            ..ScenarioConfig::gallop()
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn messages_are_conserved_and_causal(seed in any::<u64>(), kind in 0u8..3, loss in 0.0f64..0.6, delay_ms in 0u64..6) {
        let mut cfg = short(scenario(kind), 3, seed);
        cfg.channel = ChannelModel::uniform(loss).unwrap();
        cfg.added_delay = Nanos::from_millis(delay_ms);
        let ep = run_episode(&cfg).unwrap();
        let c = ep.counters;
        for d in [c.forward, c.feedback] {
            prop_assert_eq!(d.sent, d.delivered + d.lost);
        }
        prop_assert!(c.feedback.sent <= c.forward.delivered);
        prop_assert_eq!(c.causality_violations, 0);
        prop_assert!(ep.metrics.drop_rate >= 0.0 && ep.metrics.drop_rate <= 1.0);
        prop_assert!(ep.metrics.balanced_duration <= cfg.episode_duration.as_secs_f64());
        let dropped = ep.trace.records.iter().filter(|r| r.dropped()).count() as u64;
        prop_assert!(dropped <= c.forward.lost + c.feedback.lost);
    }

    #[test]
    fn episodes_are_reproducible(seed in any::<u64>(), kind in 0u8..3) {
        let mut cfg = short(scenario(kind), 2, seed);
        cfg.channel = ChannelModel::uniform(0.1).unwrap();
        prop_assert_eq!(run_episode(&cfg).unwrap(), run_episode(&cfg).unwrap());
    }

    #[test]
    fn trace_times_are_true_time(seed in any::<u64>(), drift in -100.0f64..100.0, bound_us in 0.0f64..50.0) {
        let mut cfg = short(ScenarioConfig::gallop(), 3, seed);
        cfg.mac.clock_drift_ppm = drift;
        cfg.mac.sync_error_bound = bound_us * 1e-6;
        let ep = run_episode(&cfg).unwrap();
        let cycle = cfg.cycle().as_secs_f64();
        let epoch = cfg.mac.sync_epoch_period.as_secs_f64();
        // local sample k sits at k·cycle, so true time is off by at most the clock offset
        let worst_offset = cfg.mac.sync_error_bound + drift.abs() * 1e-6 * epoch;
        for w in ep.trace.records.windows(2) {
            prop_assert!(w[0].t < w[1].t);
        }
        for (k, r) in ep.trace.records.iter().enumerate() {
            prop_assert!((r.t - k as f64 * cycle).abs() <= worst_offset + 1e-9, "k={} t={}", k, r.t);
        }
    }
}

#[test]
fn gallop_cycle_latency_is_exactly_two_ms() {
    let ep = run_episode(&short(ScenarioConfig::gallop(), 10, 4)).unwrap();
    assert!(ep.trace.records.iter().all(|r| r.cycle_latency == Some(2.0)));
    assert_eq!((ep.metrics.latency_mean, ep.metrics.latency_variance), (2.0, 0.0));
    assert_eq!(ep.metrics.drop_rate, 0.0);
}

#[test]
fn trace_has_one_record_per_completed_cycle() {
    let cfg = short(ScenarioConfig::gallop(), 1, 2);
    let ep = run_episode(&cfg).unwrap();
    // samples every 2 ms; the last cycle (sampled at 998 ms) closes exactly at 1 s
    assert_eq!(ep.trace.records.len(), 500);
}

fn open_loop_fall_time(p: &PlantParams, theta0: f64, threshold: f64) -> f64 {
    let (a, _) = p.linearized();
    let a4 = Matrix4::from_fn(|i, j| a[(i, j)]);
    let h = 1e-4;
    let mut step = Matrix4::identity();
    let mut term = Matrix4::identity();
    for k in 1..40 {
        term = term * a4 * h / k as f64;
        step += term;
    }
    let mut x = nalgebra::Vector4::new(theta0, 0.0, 0.0, 0.0);
    let mut t = 0.0;
    while x[0].abs() <= threshold {
        x = step * x;
        t += h;
    }
    t
}

#[test]
fn zero_gains_fall_on_the_open_loop_schedule() {
    for kind in [0, 1] {
        let mut cfg = short(scenario(kind), 5, 1);
        cfg.gains = ControllerGains::zero();
        cfg.noise = wiloop_core::plant::SensorNoise::NONE;
        let ep = run_episode(&cfg).unwrap();
        assert!(ep.metrics.fell);
        let oracle = open_loop_fall_time(&cfg.plant, cfg.initial_tilt, cfg.fall_threshold);
        let rel = (ep.metrics.balanced_duration - oracle).abs() / oracle;
        assert!(rel < 0.05, "{}: {} vs {oracle}", cfg.name, ep.metrics.balanced_duration);
    }
}

#[test]
fn single_value_sweep_is_the_seed_average() {
    let base = short(ScenarioConfig::gallop(), 5, 0);
    let seeds = [3, 4, 5];
    let rows = run_sweep(&base, "scenario.added_delay", &[0.004], &seeds).unwrap();
    assert_eq!(rows.len(), 1);
    let rms: Vec<f64> = seeds
        .iter()
        .map(|&s| {
            let cfg = ScenarioConfig { seed: s, added_delay: Nanos::from_millis(4), ..base.clone() };
            run_episode(&cfg).unwrap().metrics.rms_tilt_rate
        })
        .collect();
    let mean = rms.iter().sum::<f64>() / 3.0;
    assert!((rows[0].mean_rms_tilt_rate - mean).abs() <= 1e-12 * mean);
    assert_eq!(rows[0].fall_fraction, 0.0);
    assert_eq!(rows[0].episodes, 3);
}

#[test]
fn doubling_seeds_stays_within_standard_error() {
    let base = short(ScenarioConfig::gallop(), 10, 0);
    let values = [0.0, 0.006];
    let few: Vec<u64> = (1..=6).collect();
    let many: Vec<u64> = (1..=12).collect();
    let a = run_sweep(&base, "scenario.added_delay", &values, &few).unwrap();
    let b = run_sweep(&base, "scenario.added_delay", &values, &many).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let tol = x.stderr.hypot(y.stderr);
        assert!((x.mean_rms_tilt_rate - y.mean_rms_tilt_rate).abs() <= 2.0 * tol, "{x:?} vs {y:?}");
    }
}

#[test]
fn sweep_aggregation_is_order_independent() {
    let base = short(ScenarioConfig::gallop(), 2, 0);
    let values = [0.0, 0.002];
    let seeds = [1, 2, 3];
    let jobs = sweep_jobs(&base, "scenario.added_delay", &values, &seeds).unwrap();
    let metrics: Vec<_> = jobs.iter().map(|j| run_episode(&j.cfg).unwrap().metrics).collect();
    let forward = aggregate_sweep(&values, &jobs, &metrics);
    let rev_jobs: Vec<_> = jobs.iter().rev().cloned().collect();
    let rev_metrics: Vec<_> = metrics.iter().rev().copied().collect();
    assert_eq!(forward, aggregate_sweep(&values, &rev_jobs, &rev_metrics));
}
