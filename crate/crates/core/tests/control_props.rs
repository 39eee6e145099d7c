use nalgebra::DMatrix;
use proptest::prelude::*;
use wiloop_core::control::{
    closed_loop_matrix, closed_loop_radius, tune_default_gains, Controller, ControllerGains, DEFAULT_ALPHA,
};
use wiloop_core::plant::{sample_sensors, step_dynamics, PlantParams, PlantState, SensorFrame, SensorNoise};
use wiloop_core::rng::{stream, Subsystem};
use wiloop_core::sim::{run_episode, ScenarioConfig};
use wiloop_core::{Error, Nanos};

fn frame(seq: u64, gyro: f64, accel: f64, enc: i64) -> SensorFrame {
    SensorFrame {
        gyro_pitch_rate: gyro,
        accel_tilt: accel,
        encoder_left: enc,
        encoder_right: enc,
        sample_time: 0.0,
        seq,
    }
}

fn any_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        Just(f64::NAN),
        Just(f64::INFINITY),
        Just(f64::NEG_INFINITY),
        Just(f64::MAX),
        Just(-f64::MAX),
    ]
}

fn gains() -> impl Strategy<Value = ControllerGains> {
    (-50.0f64..50.0, -5.0f64..5.0, -50.0f64..50.0, 0.01f64..2.0, 0.01f64..1.0).prop_map(|(kp, kd, ki, il, cl)| {
        ControllerGains {
            kp_tilt: kp,
            kd_tilt: kd,
            ki_tilt: ki,
            integral_limit: il,
            command_limit: cl,
            ..ControllerGains::SHIPPED
        }
    })
}

/// Spectral radius via ‖M^(2^k)‖^(1/2^k), rescaling at each squaring.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut p = m.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..14 {
        let n = p.norm();
        p /= n;
        log_scale += n.ln() / power;
        p = &p * &p;
        power *= 2.0;
    }
    (log_scale + p.norm().ln() / power).exp()
}

proptest! {
    #[test]
    fn commands_stay_clamped(
        g in gains(),
        inputs in prop::collection::vec((any_f64(), any_f64(), any::<i32>()), 1..60),
        dt in prop_oneof![1e-6f64..0.1, Just(1e-300)],
    ) {
        let mut c = Controller::new(g, DEFAULT_ALPHA, 1320, dt);
        for (i, (gyro, accel, enc)) in inputs.into_iter().enumerate() {
            let out = c.on_frame(&frame(i as u64, gyro, accel, enc as i64), i as f64 * dt).unwrap();
            for u in [out.motor_command_left, out.motor_command_right] {
                prop_assert!(u.abs() <= g.command_limit, "{}", u);
                prop_assert!(u.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn integral_never_exceeds_its_limit(
        g in gains(),
        tilts in prop::collection::vec(-10.0f64..10.0, 1..400),
    ) {
        let mut c = Controller::new(g, 0.0, 1320, 0.005);
        for (i, t) in tilts.into_iter().enumerate() {
            c.on_frame(&frame(i as u64, 0.0, t, 0), i as f64 * 0.005).unwrap();
            prop_assert!(c.state.integral_accum.abs() <= g.integral_limit);
        }
    }

    #[test]
    fn replayed_frames_leave_state_unchanged(
        seqs in prop::collection::vec(0u64..20, 2..40),
        gyro in -5.0f64..5.0,
    ) {
        let mut c = Controller::new(ControllerGains::SHIPPED, DEFAULT_ALPHA, 1320, 0.005);
        let mut last: Option<u64> = None;
        for (i, s) in seqs.into_iter().enumerate() {
            let before = c.state;
            let res = c.on_frame(&frame(s, gyro, 0.01, 3), (i + 1) as f64 * 0.005);
            if last.is_some_and(|l| s <= l) {
                let stale = matches!(res, Err(Error::StaleFrame { .. }));
                prop_assert!(stale);
                prop_assert_eq!(c.state, before);
            } else {
                prop_assert!(res.is_ok());
                last = Some(s);
            }
        }
    }

    #[test]
    fn identical_frames_give_identical_commands(
        inputs in prop::collection::vec((-1.0f64..1.0, -0.5f64..0.5, -2000i64..2000, 1e-4f64..0.02), 1..50),
    ) {
        let run = || {
            let mut c = Controller::new(ControllerGains::SHIPPED, DEFAULT_ALPHA, 1320, 0.005);
            let mut now = 0.0;
            inputs
                .iter()
                .enumerate()
                .map(|(i, &(g, a, e, dt))| {
                    now += dt;
                    c.on_frame(&frame(i as u64, g, a, e), now).unwrap()
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn eigen_solver_agrees_with_gelfand() {
    let p = PlantParams::default();
    for (g, cycle) in [
        (ControllerGains::SHIPPED, 0.005),
        (ControllerGains::SHIPPED, 0.002),
        (ControllerGains::SHIPPED.scaled(0.5), 0.005),
        (ControllerGains::SHIPPED, 0.03),
        (ControllerGains::zero(), 0.005),
    ] {
        let m = closed_loop_matrix(&p, &g, DEFAULT_ALPHA, cycle);
        let (a, b) = (closed_loop_radius(&p, &g, DEFAULT_ALPHA, cycle), gelfand_radius(&m));
        assert!((a - b).abs() < 2e-3 * a.max(1.0), "{cycle}: {a} vs {b}");
    }
}

#[test]
fn tuning_ships_stable_gains_and_fails_at_long_cycles() {
    let p = PlantParams::default();
    let g = tune_default_gains(&p, 0.005).unwrap();
    assert_eq!(g, ControllerGains::SHIPPED);
    assert!(gelfand_radius(&closed_loop_matrix(&p, &g, DEFAULT_ALPHA, 0.005)) < 1.0);
    assert!(matches!(tune_default_gains(&p, 0.2), Err(Error::TuningFailure { .. })));
    assert!(closed_loop_radius(&p, &ControllerGains::SHIPPED.scaled(0.0), DEFAULT_ALPHA, 0.005) >= 1.0);
}

#[test]
fn two_degrees_settles_without_delay() {
    let mut cfg = ScenarioConfig::ideal();
    cfg.initial_tilt = 2f64.to_radians();
    cfg.episode_duration = Nanos::from_secs(6);
    let ep = run_episode(&cfg).unwrap();
    assert!(!ep.metrics.fell);
    let late: Vec<_> = ep.trace.records.iter().filter(|r| r.t >= 3.0).collect();
    assert!(!late.is_empty());
    for r in late {
        assert!(r.tilt.abs() < 0.2, "t={} tilt={}°", r.t, r.tilt);
    }
}

#[test]
fn estimate_tracks_true_tilt() {
    let p = PlantParams::default();
    let dt = 0.005;
    let mut c = Controller::new(ControllerGains::SHIPPED, DEFAULT_ALPHA, p.encoder_counts_per_rev, dt);
    let mut rng = stream(3, Subsystem::SensorNoise);
    let mut seq = 0;
    let mut s = PlantState::tilted(2f64.to_radians());
    for k in 0..400 {
        let f = sample_sensors(&s, &SensorNoise::NONE, &p, &mut seq, &mut rng).unwrap();
        let out = c.on_frame(&f, k as f64 * dt).unwrap();
        if k as f64 * dt >= 1.0 {
            let err = (c.state.tilt_estimate - s.tilt).abs();
            assert!(err < 0.005, "t={} err={err}", k as f64 * dt);
        }
        let torque = out.mean_command() * p.motor_max_torque;
        for _ in 0..5 {
            s = step_dynamics(&s, &p, torque, dt / 5.0).unwrap();
        }
    }
}
