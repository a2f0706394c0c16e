use bldc_core::controller::{pi_step, PiGains, PiState};
use bldc_core::drive::{
    apply_gates, hall_from_angle, pwm_generate, sector_gates, PwmConfig, HALL_SEQUENCE,
};
use bldc_core::motor::{
    derivatives, derivatives_masked, electromagnetic_torque, phase_back_emfs, Conduction,
    MotorParams, MotorState, SECTOR_WIDTH, TWO_PI,
};
use proptest::prelude::*;

/// RK4 on the phase currents with the rotor held still.
fn locked_step(
    currents: [f64; 3],
    theta: f64,
    v: [f64; 3],
    on: Conduction,
    h: f64,
    p: &MotorParams,
) -> [f64; 3] {
    let f = |i: [f64; 3]| {
        let s = MotorState {
            phase_currents: i,
            electrical_angle: theta,
            mechanical_speed: 0.0,
        };
        derivatives_masked(&s, v, on, 0.0, p).d_currents
    };
    let add = |a: [f64; 3], k: [f64; 3], s: f64| [0, 1, 2].map(|x| a[x] + s * k[x]);
    let k1 = f(currents);
    let k2 = f(add(currents, k1, 0.5 * h));
    let k3 = f(add(currents, k2, 0.5 * h));
    let k4 = f(add(currents, k3, h));
    [0, 1, 2].map(|x| currents[x] + h / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]))
}

#[test]
fn locked_rotor_step_follows_rl_time_constant() {
    let p = MotorParams::default();
    let drive = apply_gates(sector_gates(0), true, p.dc_link_voltage).unwrap();
    let h = 2e-5;
    let tau = p.phase_inductance / p.phase_resistance;
    let i_final = p.dc_link_voltage / (2.0 * p.phase_resistance);
    let mut i = [0.0; 3];
    for n in 1..=2000 {
        i = locked_step(i, 0.3, drive.voltages, drive.conducting, h, &p);
        let t = n as f64 * h;
        // two phases in series: 2L di/dt = Vdc - 2R i
        let expect = i_final * (1.0 - (-t / tau).exp());
        assert!(
            (i[0] - expect).abs() <= 1e-9 * i_final,
            "t = {t}: {} vs {expect}",
            i[0]
        );
        assert_eq!(i[1], -i[0]);
        assert_eq!(i[2], 0.0);
    }
}

#[test]
fn locked_rotor_mean_current_tracks_duty() {
    // hard chopping averages to duty * Vdc across the energized pair
    let p = MotorParams::default();
    let pwm = PwmConfig::default();
    let h = 2e-5;
    for duty in [0.1, 0.25, 0.5, 0.8] {
        let mut i = [0.0; 3];
        let mut mean = 0.0;
        let steps = 10_000;
        let tail = 1_000;
        for n in 0..steps {
            let on = pwm_generate(duty, n as f64 * h, &pwm);
            let d = apply_gates(sector_gates(2), on, p.dc_link_voltage).unwrap();
            i = locked_step(i, 2.5 * SECTOR_WIDTH, d.voltages, d.conducting, h, &p);
            if n >= steps - tail {
                mean += i[1] / tail as f64;
            }
        }
        // the carrier is sampled at the integrator step, so the applied duty
        // is quantized to the steps per period
        let period = (pwm.period() / h).round() as usize;
        let on = (0..period)
            .filter(|&n| pwm_generate(duty, n as f64 * h, &pwm))
            .count();
        let applied = on as f64 / period as f64;
        assert!((applied - duty).abs() <= 1.0 / period as f64);
        let expect = applied * p.dc_link_voltage / (2.0 * p.phase_resistance);
        assert!(
            (mean - expect).abs() < 0.01 * expect,
            "duty {duty}: {mean} vs {expect}"
        );
    }
}

#[test]
fn every_sector_produces_positive_torque() {
    let p = MotorParams::default();
    for sector in 0..6 {
        let gates = sector_gates(sector);
        // +I into the high-side phase, out of the low-side one
        let mut currents = [0.0; 3];
        for (leg, i) in currents.iter_mut().enumerate() {
            if gates.high(leg) {
                *i = 10.0;
            } else if gates.low(leg) {
                *i = -10.0;
            }
        }
        let samples = 60;
        let mut total = 0.0;
        for k in 0..samples {
            let theta = (sector as f64 + (k as f64 + 0.5) / samples as f64) * SECTOR_WIDTH;
            let state = MotorState {
                phase_currents: currents,
                electrical_angle: theta,
                mechanical_speed: 0.0,
            };
            let te = electromagnetic_torque(&state, &p);
            assert!(te >= 0.0, "sector {sector} at {theta}: {te}");
            total += te;
        }
        assert!(total / samples as f64 > 0.5, "sector {sector}");
    }
}

#[test]
fn hall_codes_over_one_revolution() {
    let n = 36_000;
    let codes: Vec<[u8; 3]> = (0..=n)
        .map(|k| hall_from_angle(TWO_PI * k as f64 / n as f64).bits)
        .collect();
    for col in 0..3 {
        let flips = codes.windows(2).filter(|w| w[0][col] != w[1][col]).count();
        assert_eq!(flips, 2, "column {col}");
    }
    for code in HALL_SEQUENCE {
        let share = codes[..n].iter().filter(|c| **c == code).count();
        assert!(
            (share as i64 - (n / 6) as i64).abs() <= 1,
            "{code:?}: {share}"
        );
    }
}

/// Plain PI with an unbounded integrator.
fn clampless(reference: f64, actual: f64, dt: f64, g: &PiGains, integral: &mut f64) -> f64 {
    let e = reference - actual;
    *integral += e * dt;
    (g.kp * e + g.ki * *integral).clamp(0.0, 1.0)
}

#[test]
fn anti_windup_recovers_faster_than_clampless() {
    let g = PiGains::new(0.01, 0.5);
    let dt = 1e-3;
    let mut state = PiState::default();
    let mut free = 0.0;
    // long saturation: reference far above actual
    for _ in 0..5_000 {
        state = pi_step(100.0, 0.0, dt, &g, state).state;
        clampless(100.0, 0.0, dt, &g, &mut free);
        assert!(state.integral.abs() <= g.integral_limit);
    }
    // error reverses
    let recover = |mut f: Box<dyn FnMut() -> f64>| (1..100_000).find(|_| f() < 1.0).unwrap();
    let mut s = state;
    let clamped = recover(Box::new(move || {
        let out = pi_step(0.0, 20.0, dt, &g, s);
        s = out.state;
        out.duty
    }));
    let mut integral = free;
    let plain = recover(Box::new(move || {
        clampless(0.0, 20.0, dt, &g, &mut integral)
    }));
    assert!(clamped < plain, "{clamped} vs {plain}");
    assert!(clamped <= 1);
}

proptest! {
    #[test]
    fn pi_output_stays_in_unit_interval(
        errs in prop::collection::vec(-500.0f64..500.0, 1..200),
        kp in 0.0f64..1.0,
        ki in 0.0f64..5.0,
    ) {
        let g = PiGains::new(kp, ki);
        let mut st = PiState::default();
        for e in errs {
            let out = pi_step(e, 0.0, 2e-4, &g, st);
            prop_assert!((0.0..=1.0).contains(&out.duty));
            st = out.state;
        }
    }

    #[test]
    fn memoryless_without_integral(
        history in prop::collection::vec(-50.0f64..50.0, 0..50),
        e in -50.0f64..50.0,
    ) {
        let g = PiGains::new(0.02, 0.0);
        let mut st = PiState::default();
        for h in history {
            st = pi_step(h, 0.0, 1e-3, &g, st).state;
        }
        let a = pi_step(e, 0.0, 1e-3, &g, st).duty;
        let b = pi_step(e, 0.0, 1e-3, &g, PiState::default()).duty;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn electrical_power_matches_mechanical(
        ia in -50.0f64..50.0,
        ib in -50.0f64..50.0,
        theta in 0.0f64..TWO_PI,
        w in -400.0f64..400.0,
    ) {
        let p = MotorParams::default();
        let s = MotorState {
            phase_currents: [ia, ib, -ia - ib],
            electrical_angle: theta,
            mechanical_speed: w,
        };
        let e = phase_back_emfs(&s, &p);
        let pe: f64 = e.iter().zip(&s.phase_currents).map(|(e, i)| e * i).sum();
        let pm = electromagnetic_torque(&s, &p) * w;
        prop_assert!((pe - pm).abs() <= 1e-9 * (1.0 + pe.abs()));
    }

    #[test]
    fn star_point_keeps_current_sum(
        v in prop::array::uniform3(-60.0f64..60.0),
        ia in -30.0f64..30.0,
        ib in -30.0f64..30.0,
        theta in 0.0f64..TWO_PI,
        w in -300.0f64..300.0,
    ) {
        let p = MotorParams::default();
        let s = MotorState {
            phase_currents: [ia, ib, -ia - ib],
            electrical_angle: theta,
            mechanical_speed: w,
        };
        let d = derivatives(&s, v, 3.0, &p);
        let sum: f64 = d.d_currents.iter().sum();
        prop_assert!(sum.abs() <= 1e-9 * d.d_currents.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
        // rigid body: J dw/dt = Te - TL - B w
        let te = electromagnetic_torque(&s, &p);
        let expect = (te - 3.0 - p.viscous_friction * w) / p.inertia;
        prop_assert!((d.d_speed - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }
}
