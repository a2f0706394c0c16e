//! Three-phase BLDC machine with trapezoidal back-EMF.
//!
//! Phase electrical equations `L di/dt = v - R i - e` with an isolated star
//! point, torque from the normalized EMF shape, and the rigid-body equation
//! `J dw/dt = Te - TL - B w`. Everything here is a pure function of its
//! inputs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TWO_PI: f64 = 2.0 * PI;
/// Width of one commutation sector in electrical radians.
pub const SECTOR_WIDTH: f64 = PI / 3.0;
/// Electrical phase lag of phases a, b, c.
pub const PHASE_SHIFTS: [f64; 3] = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("motor parameter `{0}` must be strictly positive and finite")]
    NonPositive(&'static str),
    #[error("pole_pairs must be at least 1")]
    PolePairs,
    #[error("peak torque {peak} N·m is below rated torque {rated} N·m")]
    PeakBelowRated { rated: f64, peak: f64 },
    #[error("torque constant {kt} and back-EMF constant {ke} disagree (SI units require Kt = Ke)")]
    ConstantMismatch { kt: f64, ke: f64 },
}

/// Electrical and mechanical constants of the machine (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorParams {
    pub phase_resistance: f64,
    /// Effective per-phase inductance, mutual coupling folded in.
    pub phase_inductance: f64,
    pub back_emf_constant: f64,
    pub torque_constant: f64,
    pub inertia: f64,
    pub viscous_friction: f64,
    pub pole_pairs: u32,
    pub rated_torque: f64,
    pub peak_torque: f64,
    pub dc_link_voltage: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            phase_resistance: 0.1,
            phase_inductance: 1e-3,
            back_emf_constant: 0.1,
            torque_constant: 0.1,
            inertia: 0.002,
            viscous_friction: 0.001,
            pole_pairs: 4,
            rated_torque: 12.0,
            peak_torque: 18.0,
            dc_link_voltage: 100.0,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("phase_resistance", self.phase_resistance),
            ("phase_inductance", self.phase_inductance),
            ("back_emf_constant", self.back_emf_constant),
            ("torque_constant", self.torque_constant),
            ("inertia", self.inertia),
            ("viscous_friction", self.viscous_friction),
            ("rated_torque", self.rated_torque),
            ("peak_torque", self.peak_torque),
            ("dc_link_voltage", self.dc_link_voltage),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NonPositive(name));
            }
        }
        if self.pole_pairs < 1 {
            return Err(ParamError::PolePairs);
        }
        if self.peak_torque < self.rated_torque {
            return Err(ParamError::PeakBelowRated {
                rated: self.rated_torque,
                peak: self.peak_torque,
            });
        }
        let (kt, ke) = (self.torque_constant, self.back_emf_constant);
        if (kt - ke).abs() > 1e-12 * kt.max(ke) {
            return Err(ParamError::ConstantMismatch { kt, ke });
        }
        Ok(())
    }
}

/// Integrated state of the machine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorState {
    pub phase_currents: [f64; 3],
    /// Electrical angle, kept in `[0, 2π)`.
    pub electrical_angle: f64,
    /// Mechanical speed in rad/s.
    pub mechanical_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub d_currents: [f64; 3],
    pub d_angle: f64,
    pub d_speed: f64,
}

/// Which phases carry current. A floating phase has its current held at zero.
pub type Conduction = [bool; 3];

pub const ALL_PHASES: Conduction = [true; 3];

/// Wraps any finite angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// Index of the 60° electrical sector containing `theta` and the fractional
/// position inside it.
pub fn sector_position(theta: f64) -> (usize, f64) {
    let scaled = wrap_angle(theta) / SECTOR_WIDTH;
    let sector = (scaled.floor() as usize).min(5);
    (sector, (scaled - sector as f64).clamp(0.0, 1.0))
}

/// Normalized trapezoidal back-EMF of phase a.
///
/// Rising ramp on `[0°, 60°)`, flat `+1` on `[60°, 180°)`, falling ramp on
/// `[180°, 240°)`, flat `-1` on `[240°, 360°)`.
pub fn back_emf_shape(theta_e: f64) -> f64 {
    let (sector, u) = sector_position(theta_e);
    match sector {
        0 => -1.0 + 2.0 * u,
        1 | 2 => 1.0,
        3 => 1.0 - 2.0 * u,
        _ => -1.0,
    }
}

/// Shape values of the three phases at electrical angle `theta_e`.
pub fn phase_shapes(theta_e: f64) -> [f64; 3] {
    PHASE_SHIFTS.map(|shift| back_emf_shape(theta_e - shift))
}

/// Three-level EMF pattern of a sector: `+1` on the positive flat, `-1` on the
/// negative flat, `0` while the phase is on a ramp.
///
/// Uses the integer sector index so that it agrees exactly with the Hall code
/// derived from the same angle.
pub fn emf_levels(sector: usize) -> [i8; 3] {
    fn level_a(sector: usize) -> i8 {
        match sector % 6 {
            1 | 2 => 1,
            4 | 5 => -1,
            _ => 0,
        }
    }
    // phase b lags by two sectors, phase c by four
    [level_a(sector), level_a(sector + 4), level_a(sector + 2)]
}

pub fn phase_back_emfs(state: &MotorState, params: &MotorParams) -> [f64; 3] {
    let k = params.back_emf_constant * state.mechanical_speed;
    phase_shapes(state.electrical_angle).map(|f| k * f)
}

/// `Te = Kt Σ f_x i_x`; nonsingular at standstill.
pub fn electromagnetic_torque(state: &MotorState, params: &MotorParams) -> f64 {
    let shapes = phase_shapes(state.electrical_angle);
    params.torque_constant
        * shapes
            .iter()
            .zip(state.phase_currents.iter())
            .map(|(f, i)| f * i)
            .sum::<f64>()
}

/// State derivative with every phase conducting.
///
/// `phase_voltages` may be referenced to any common potential: the star
/// point is solved from `Σ i = 0`, which removes the common-mode part.
pub fn derivatives(
    state: &MotorState,
    phase_voltages: [f64; 3],
    load_torque: f64,
    params: &MotorParams,
) -> StateDerivative {
    derivatives_masked(state, phase_voltages, ALL_PHASES, load_torque, params)
}

/// State derivative with floating phases held at zero current.
///
/// The star-point voltage is chosen so the conducting currents keep summing
/// to zero; with fewer than two conducting phases no current can flow.
pub fn derivatives_masked(
    state: &MotorState,
    phase_voltages: [f64; 3],
    conducting: Conduction,
    load_torque: f64,
    params: &MotorParams,
) -> StateDerivative {
    let emfs = phase_back_emfs(state, params);
    let mut residual = [0.0; 3];
    for x in 0..3 {
        residual[x] =
            phase_voltages[x] - params.phase_resistance * state.phase_currents[x] - emfs[x];
    }

    let active = conducting.iter().filter(|&&c| c).count();
    let mut d_currents = [0.0; 3];
    if active >= 2 {
        let neutral = (0..3)
            .filter(|&x| conducting[x])
            .map(|x| residual[x])
            .sum::<f64>()
            / active as f64;
        for x in 0..3 {
            if conducting[x] {
                d_currents[x] = (residual[x] - neutral) / params.phase_inductance;
            }
        }
    }

    let te = electromagnetic_torque(state, params);
    StateDerivative {
        d_currents,
        d_angle: params.pole_pairs as f64 * state.mechanical_speed,
        d_speed: (te - load_torque - params.viscous_friction * state.mechanical_speed)
            / params.inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn shape_anchor_values() {
        assert_abs_diff_eq!(back_emf_shape(deg(120.0)), 1.0);
        assert_abs_diff_eq!(back_emf_shape(deg(30.0)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back_emf_shape(deg(300.0)), -1.0);
        assert_abs_diff_eq!(back_emf_shape(deg(210.0)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back_emf_shape(-deg(60.0)), -1.0);
    }

    #[test]
    fn shape_half_wave_antisymmetry() {
        for theta in [0.1, 1.0, 2.5] {
            assert_abs_diff_eq!(
                back_emf_shape(theta + PI),
                -back_emf_shape(theta),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn flat_tops_are_120_degrees() {
        let probes: Vec<f64> = (0..360)
            .map(|d| back_emf_shape(deg(d as f64 + 0.5)))
            .collect();
        assert_eq!(probes.iter().filter(|&&f| f == 1.0).count(), 120);
        assert_eq!(probes.iter().filter(|&&f| f == -1.0).count(), 120);
        assert!(probes.iter().all(|f| (-1.0..=1.0).contains(f)));
    }

    #[test]
    fn levels_match_shape_flats() {
        for d in 0..360 {
            let theta = deg(d as f64 + 0.5);
            let (sector, _) = sector_position(theta);
            let levels = emf_levels(sector);
            for (x, f) in phase_shapes(theta).iter().enumerate() {
                let expect = if *f == 1.0 {
                    1
                } else if *f == -1.0 {
                    -1
                } else {
                    0
                };
                assert_eq!(levels[x], expect, "phase {x} at {d}.5°");
            }
        }
    }

    #[test]
    fn emf_zero_at_standstill() {
        let state = MotorState {
            electrical_angle: 1.3,
            ..Default::default()
        };
        assert_eq!(phase_back_emfs(&state, &MotorParams::default()), [0.0; 3]);
    }

    #[test]
    fn emf_on_flat_top() {
        let state = MotorState {
            electrical_angle: deg(120.0),
            mechanical_speed: 100.0,
            ..Default::default()
        };
        let e = phase_back_emfs(&state, &MotorParams::default());
        assert_abs_diff_eq!(e[0], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn emf_sum_at_90_degrees() {
        // by hand: a on its flat (+1), b at -30° on its flat (-1),
        // c at -150° i.e. 210°, midway down its ramp (0)
        let state = MotorState {
            electrical_angle: deg(90.0),
            mechanical_speed: 50.0,
            ..Default::default()
        };
        let e = phase_back_emfs(&state, &MotorParams::default());
        assert_abs_diff_eq!(e[0], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e[1], -5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e[2], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.iter().sum::<f64>(), 0.0, epsilon = 1e-9);

        let state = MotorState {
            electrical_angle: deg(45.0),
            mechanical_speed: 50.0,
            ..Default::default()
        };
        let e = phase_back_emfs(&state, &MotorParams::default());
        // a = -1 + 2*0.75 = 0.5, b = -1, c = +1
        assert_abs_diff_eq!(e.iter().sum::<f64>(), 5.0 * 0.5, epsilon = 1e-9);
    }

    #[test]
    fn torque_examples() {
        let params = MotorParams::default();
        assert_eq!(electromagnetic_torque(&MotorState::default(), &params), 0.0);
        // at 120°: a = +1, b (at 0°) = -1, c (at 240°) = -1
        let state = MotorState {
            phase_currents: [5.0, -5.0, 0.0],
            electrical_angle: deg(120.0),
            ..Default::default()
        };
        assert_abs_diff_eq!(
            electromagnetic_torque(&state, &params),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let params = MotorParams::default();
        let state = MotorState {
            phase_currents: [20.0, -20.0, 0.0],
            electrical_angle: deg(100.0),
            mechanical_speed: 150.0,
        };
        let e = phase_back_emfs(&state, &params);
        let v = [0, 1, 2].map(|x| params.phase_resistance * state.phase_currents[x] + e[x]);
        let te = electromagnetic_torque(&state, &params);
        let load = te - params.viscous_friction * state.mechanical_speed;
        let d = derivatives(&state, v, load, &params);
        for di in d.d_currents {
            assert_abs_diff_eq!(di, 0.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(d.d_speed, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_everything_gives_zero_derivative() {
        let d = derivatives(
            &MotorState::default(),
            [0.0; 3],
            0.0,
            &MotorParams::default(),
        );
        assert_eq!(d, StateDerivative::default());
    }

    #[test]
    fn floating_phase_derivative_is_masked() {
        let params = MotorParams::default();
        let state = MotorState {
            phase_currents: [3.0, -3.0, 0.0],
            electrical_angle: 0.4,
            mechanical_speed: 30.0,
        };
        let d = derivatives_masked(
            &state,
            [50.0, -50.0, 0.0],
            [true, true, false],
            0.0,
            &params,
        );
        assert_eq!(d.d_currents[2], 0.0);
        assert_abs_diff_eq!(d.d_currents[0], -d.d_currents[1], epsilon = 1e-9);
        let single =
            derivatives_masked(&state, [50.0, 0.0, 0.0], [true, false, false], 0.0, &params);
        assert_eq!(single.d_currents, [0.0; 3]);
    }

    #[test]
    fn parameter_validation() {
        assert!(MotorParams::default().validate().is_ok());
        let bad = MotorParams {
            torque_constant: 0.2,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(ParamError::ConstantMismatch { .. })
        ));
        let bad = MotorParams {
            peak_torque: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(ParamError::PeakBelowRated { .. })
        ));
        let bad = MotorParams {
            inertia: 0.0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(ParamError::NonPositive("inertia")));
        let bad = MotorParams {
            pole_pairs: 0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(ParamError::PolePairs));
    }
}
