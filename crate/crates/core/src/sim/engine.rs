//! Fixed-step closed loop: RK4 motor integration, PWM at the integrator
//! rate, PI at the control rate, logging at the log rate.

use super::config::{SimConfig, RPM_TO_RAD_S};
use super::trace::{Trace, TraceRecord};
use super::SimError;
use crate::controller::{pi_step, PiState};
use crate::drive::{
    apply_gates, commutation_table, hall_from_angle, pwm_generate, transfer_currents, GateSignals,
    HallState,
};
use crate::motor::{
    derivatives_masked, electromagnetic_torque, emf_levels, phase_back_emfs, sector_position,
    wrap_angle, Conduction, MotorState, StateDerivative,
};

/// Any state magnitude above this is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Full drive state at one integrator step, as seen by an observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub step: u64,
    pub t: f64,
    pub state: MotorState,
    pub sector: usize,
    pub hall: HallState,
    pub gates: GateSignals,
    pub pwm_on: bool,
    pub duty: f64,
    /// rad/s
    pub reference: f64,
    pub load_torque: f64,
    /// Torque at the sample instant.
    pub te: f64,
    /// RK4-weighted torque over the step that follows; equals `te` on the
    /// final sample.
    pub te_step_mean: f64,
}

pub fn run_simulation(config: &SimConfig) -> Result<Trace, SimError> {
    run_simulation_observed(config, |_| {})
}

/// Runs the loop, calling `observer` once per integrator step (including
/// `t = 0` and `t = t_end`) with the state at the start of that step.
pub fn run_simulation_observed<F>(config: &SimConfig, mut observer: F) -> Result<Trace, SimError>
where
    F: FnMut(&StepSample),
{
    let plan = config.validate()?;
    let params = &config.motor;
    let h = config.ode_step;

    let mut state = MotorState::default();
    let mut pi = PiState::default();
    let mut duty = 0.0;
    let mut conduction: Conduction = [false; 3];
    let mut records = Vec::with_capacity(plan.log_rows() as usize);

    for step in 0..=plan.total_steps {
        let t = step as f64 * h;
        let reference = config.reference_profile.eval(t)?;
        let load = config.load_profile.eval(t)?;

        if step % plan.control_every == 0 {
            let out = pi_step(
                reference,
                state.mechanical_speed,
                config.control_step,
                &config.gains,
                pi,
            );
            duty = out.duty;
            pi = out.state;
        }

        let (sector, _) = sector_position(state.electrical_angle);
        let hall = hall_from_angle(state.electrical_angle);
        let gates = commutation_table(hall)?;
        let next_conduction = gates.conduction();
        if next_conduction != conduction {
            state.phase_currents = transfer_currents(state.phase_currents, next_conduction);
            conduction = next_conduction;
        }
        let pwm_on = pwm_generate(duty, t, &config.pwm);
        let drive = apply_gates(gates, pwm_on, params.dc_link_voltage)?;
        let te = electromagnetic_torque(&state, params);

        let mut sample = StepSample {
            step,
            t,
            state,
            sector,
            hall,
            gates,
            pwm_on,
            duty,
            reference,
            load_torque: load,
            te,
            te_step_mean: te,
        };
        if step % plan.log_every == 0 {
            records.push(record_from(&sample, config));
        }
        if step == plan.total_steps {
            observer(&sample);
            break;
        }

        let load_mid = config.load_profile.eval(t + 0.5 * h)?;
        let load_end = config.load_profile.eval(t + h)?;
        let f = |s: &MotorState, tl: f64| {
            derivatives_masked(s, drive.voltages, drive.conducting, tl, params)
        };
        let stage = |k: &StateDerivative, dt: f64| advance(&state, k, dt);
        let k1 = f(&state, load);
        let s2 = stage(&k1, 0.5 * h);
        let k2 = f(&s2, load_mid);
        let s3 = stage(&k2, 0.5 * h);
        let k3 = f(&s3, load_mid);
        let s4 = stage(&k3, h);
        let k4 = f(&s4, load_end);
        let weighted = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
        let slope = StateDerivative {
            d_currents: [0, 1, 2].map(|x| {
                weighted(
                    k1.d_currents[x],
                    k2.d_currents[x],
                    k3.d_currents[x],
                    k4.d_currents[x],
                )
            }),
            d_angle: weighted(k1.d_angle, k2.d_angle, k3.d_angle, k4.d_angle),
            d_speed: weighted(k1.d_speed, k2.d_speed, k3.d_speed, k4.d_speed),
        };
        // torque the mechanical update actually integrated over this step
        let stage_te = |k: &StateDerivative, s: &MotorState, tl: f64| {
            params.inertia * k.d_speed + tl + params.viscous_friction * s.mechanical_speed
        };
        sample.te_step_mean = weighted(
            stage_te(&k1, &state, load),
            stage_te(&k2, &s2, load_mid),
            stage_te(&k3, &s3, load_mid),
            stage_te(&k4, &s4, load_end),
        );
        observer(&sample);

        state = advance(&state, &slope, h);
        state.electrical_angle = wrap_angle(state.electrical_angle);

        let worst = state
            .phase_currents
            .iter()
            .chain(std::iter::once(&state.mechanical_speed))
            .fold(0.0f64, |m, v| {
                if v.is_finite() {
                    m.max(v.abs())
                } else {
                    f64::INFINITY
                }
            });
        if worst > DIVERGENCE_LIMIT {
            return Err(SimError::NumericalDivergence { time: t + h });
        }
    }

    Ok(Trace {
        records,
        config: Some(config.clone()),
    })
}

fn advance(state: &MotorState, d: &StateDerivative, h: f64) -> MotorState {
    MotorState {
        phase_currents: [0, 1, 2].map(|x| state.phase_currents[x] + h * d.d_currents[x]),
        electrical_angle: state.electrical_angle + h * d.d_angle,
        mechanical_speed: state.mechanical_speed + h * d.d_speed,
    }
}

fn record_from(sample: &StepSample, config: &SimConfig) -> TraceRecord {
    let state = &sample.state;
    let levels = emf_levels(sample.sector);
    TraceRecord {
        t: sample.t,
        load_torque: sample.load_torque,
        speed_ref: sample.reference / RPM_TO_RAD_S,
        speed_actual: state.mechanical_speed / RPM_TO_RAD_S,
        speed_rad: state.mechanical_speed,
        te: sample.te,
        currents: state.phase_currents,
        emfs: phase_back_emfs(state, &config.motor),
        emf_norm: levels.map(f64::from),
        hall: sample.hall.bits,
        pwm: sample.gates.gates.map(u8::from),
        duty: sample.duty,
    }
}

/// Headline numbers of a finished run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    /// Final reference speed, rpm.
    pub reference_rpm: f64,
    /// First logged time after which speed stays within `band` of the final
    /// reference; `None` if it never settles.
    pub settle_time: Option<f64>,
    pub band: f64,
    /// Mean relative speed error over the averaging window.
    pub steady_state_error: f64,
    pub final_load_torque: f64,
    /// Window means taken at every integrator step.
    pub mean_speed_rad: f64,
    pub mean_te: f64,
    pub mean_load_torque: f64,
    pub window: f64,
}

/// Accumulates integrator-rate means over the final `window` seconds.
#[derive(Debug, Clone)]
pub struct SteadyStateMonitor {
    start: f64,
    count: u64,
    speed: f64,
    te: f64,
    load: f64,
}

impl SteadyStateMonitor {
    pub fn new(config: &SimConfig, window: f64) -> Self {
        Self {
            start: (config.t_end - window).max(0.0),
            count: 0,
            speed: 0.0,
            te: 0.0,
            load: 0.0,
        }
    }

    pub fn observe(&mut self, sample: &StepSample) {
        if sample.t >= self.start {
            self.count += 1;
            self.speed += sample.state.mechanical_speed;
            self.te += sample.te_step_mean;
            self.load += sample.load_torque;
        }
    }

    /// `(mean speed, mean Te, mean load)`.
    pub fn means(&self) -> (f64, f64, f64) {
        let n = self.count.max(1) as f64;
        (self.speed / n, self.te / n, self.load / n)
    }
}

pub const SETTLE_BAND: f64 = 0.01;
pub const SUMMARY_WINDOW: f64 = 10.0;

/// Runs the simulation and summarizes it.
pub fn simulate_with_summary(config: &SimConfig) -> Result<(Trace, RunSummary), SimError> {
    let mut monitor = SteadyStateMonitor::new(config, SUMMARY_WINDOW);
    let trace = run_simulation_observed(config, |s| monitor.observe(s))?;
    let (mean_speed_rad, mean_te, mean_load_torque) = monitor.means();
    let summary = summarize(
        &trace,
        SETTLE_BAND,
        SUMMARY_WINDOW,
        (mean_speed_rad, mean_te, mean_load_torque),
    );
    Ok((trace, summary))
}

fn summarize(trace: &Trace, band: f64, window: f64, means: (f64, f64, f64)) -> RunSummary {
    let reference_rpm = trace.records.last().map_or(0.0, |r| r.speed_ref);
    let within = |r: &TraceRecord| {
        if reference_rpm == 0.0 {
            r.speed_actual.abs() <= band
        } else {
            ((r.speed_actual - reference_rpm) / reference_rpm).abs() <= band
        }
    };
    let settle_time = match trace.records.iter().rposition(|r| !within(r)) {
        None => trace.records.first().map(|r| r.t),
        Some(last_out) => trace.records.get(last_out + 1).map(|r| r.t),
    };
    let t_end = trace.records.last().map_or(0.0, |r| r.t);
    let tail: Vec<&TraceRecord> = trace
        .records
        .iter()
        .filter(|r| r.t >= t_end - window)
        .collect();
    let steady_state_error = if tail.is_empty() || reference_rpm == 0.0 {
        0.0
    } else {
        tail.iter()
            .map(|r| ((r.speed_actual - reference_rpm) / reference_rpm).abs())
            .sum::<f64>()
            / tail.len() as f64
    };
    RunSummary {
        reference_rpm,
        settle_time,
        band,
        steady_state_error,
        final_load_torque: trace.records.last().map_or(0.0, |r| r.load_torque),
        mean_speed_rad: means.0,
        mean_te: means.1,
        mean_load_torque: means.2,
        window,
    }
}
