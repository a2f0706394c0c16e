//! Hall sensors, six-step commutation, PWM carrier and the inverter bridge.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motor::{sector_position, Conduction};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum DriveError {
    #[error("invalid Hall code {0:?} (sensor fault)")]
    InvalidHallCode([u8; 3]),
    #[error("shoot-through on leg {0}: both switches commanded on")]
    ShootThrough(usize),
}

/// Hall code of each 60° sector, sector 0 starting at `θe = 0`.
pub const HALL_SEQUENCE: [[u8; 3]; 6] = [
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 1, 1],
    [0, 0, 1],
    [1, 0, 1],
];

/// Energized phase pair per sector as `(high side, low side)`.
const COMMUTATION: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)];

/// Raw reading of the three Hall sensors. May hold a faulty code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HallState {
    pub bits: [u8; 3],
}

impl HallState {
    pub fn new(h_a: u8, h_b: u8, h_c: u8) -> Self {
        Self {
            bits: [h_a, h_b, h_c],
        }
    }

    /// Sector index for a valid code.
    pub fn sector(&self) -> Option<usize> {
        HALL_SEQUENCE.iter().position(|code| *code == self.bits)
    }

    pub fn is_valid(&self) -> bool {
        self.sector().is_some()
    }
}

/// Gate commands `g1..g6` ordered leg A high, A low, B high, B low, C high,
/// C low.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateSignals {
    pub gates: [bool; 6],
}

impl GateSignals {
    pub fn high(&self, leg: usize) -> bool {
        self.gates[2 * leg]
    }

    pub fn low(&self, leg: usize) -> bool {
        self.gates[2 * leg + 1]
    }

    pub fn check_shoot_through(&self) -> Result<(), DriveError> {
        match (0..3).find(|&leg| self.high(leg) && self.low(leg)) {
            Some(leg) => Err(DriveError::ShootThrough(leg)),
            None => Ok(()),
        }
    }

    /// Phases with a switch closed on their leg.
    pub fn conduction(&self) -> Conduction {
        [0, 1, 2].map(|leg| self.high(leg) || self.low(leg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CarrierShape {
    #[default]
    Sawtooth,
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PwmConfig {
    pub carrier_hz: f64,
    pub shape: CarrierShape,
}

impl Default for PwmConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 5_000.0,
            shape: CarrierShape::Sawtooth,
        }
    }
}

impl PwmConfig {
    pub fn period(&self) -> f64 {
        1.0 / self.carrier_hz
    }

    /// Carrier value in `[0, 1]` at `time`.
    pub fn carrier(&self, time: f64) -> f64 {
        // phase from whole nanocycles, so k * step lands on the same carrier
        // phase however far into the run it is
        const NANO: i64 = 1_000_000_000;
        let nanocycles = (time * self.carrier_hz * 1e9).round() as i64;
        let phase = nanocycles.rem_euclid(NANO) as f64 / NANO as f64;
        match self.shape {
            CarrierShape::Sawtooth => phase,
            CarrierShape::Triangle => 1.0 - (1.0 - 2.0 * phase).abs(),
        }
    }
}

pub fn hall_from_angle(theta_e: f64) -> HallState {
    let (sector, _) = sector_position(theta_e);
    let [a, b, c] = HALL_SEQUENCE[sector];
    HallState::new(a, b, c)
}

pub fn commutation_table(hall: HallState) -> Result<GateSignals, DriveError> {
    let sector = hall
        .sector()
        .ok_or(DriveError::InvalidHallCode(hall.bits))?;
    Ok(sector_gates(sector))
}

/// Gate pattern energizing the phase pair of `sector`.
pub fn sector_gates(sector: usize) -> GateSignals {
    let (high, low) = COMMUTATION[sector % 6];
    let mut gates = [false; 6];
    gates[2 * high] = true;
    gates[2 * low + 1] = true;
    GateSignals { gates }
}

/// Carrier comparison: on while the carrier sits below the duty.
pub fn pwm_generate(duty: f64, time: f64, cfg: &PwmConfig) -> bool {
    let duty = duty.clamp(0.0, 1.0);
    if duty >= 1.0 {
        return true;
    }
    cfg.carrier(time) < duty
}

/// Output of the bridge for one gate state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseDrive {
    /// Line-to-neutral voltages of the conducting phases; 0 for floating ones.
    pub voltages: [f64; 3],
    pub conducting: Conduction,
}

/// Maps gate commands to phase voltages with hard chopping on the high side.
///
/// A closed high-side switch puts its terminal at `+Vdc/2` while the PWM bit
/// is on. When chopped off, the phase freewheels through its low-side diode
/// and the terminal drops to `-Vdc/2`. Phases with both switches open float.
pub fn apply_gates(gates: GateSignals, pwm_on: bool, vdc: f64) -> Result<PhaseDrive, DriveError> {
    gates.check_shoot_through()?;
    let conducting = gates.conduction();
    let half = 0.5 * vdc;
    let terminal = [0, 1, 2].map(|leg| {
        if gates.high(leg) && pwm_on {
            half
        } else {
            -half
        }
    });

    let active = conducting.iter().filter(|&&c| c).count();
    let mut voltages = [0.0; 3];
    if active >= 2 {
        let neutral = (0..3)
            .filter(|&x| conducting[x])
            .map(|x| terminal[x])
            .sum::<f64>()
            / active as f64;
        for x in 0..3 {
            if conducting[x] {
                voltages[x] = terminal[x] - neutral;
            }
        }
    }
    Ok(PhaseDrive {
        voltages,
        conducting,
    })
}

/// Re-seats phase currents when the conduction set changes.
///
/// A phase leaving conduction drops to zero; a phase entering conduction
/// takes over the current of the one it replaces so the common phase keeps
/// its current and `Σ i = 0` holds.
pub fn transfer_currents(currents: [f64; 3], next: Conduction) -> [f64; 3] {
    let mut out = [0.0; 3];
    let active: Vec<usize> = (0..3).filter(|&x| next[x]).collect();
    match active.len() {
        0 | 1 => {}
        2 => {
            let (p, q) = (active[0], active[1]);
            // keep whichever phase was already carrying current
            if currents[p] != 0.0 || currents[q] == 0.0 {
                out[p] = currents[p];
                out[q] = -currents[p];
            } else {
                out[q] = currents[q];
                out[p] = -currents[q];
            }
        }
        _ => {
            let mean = currents.iter().sum::<f64>() / 3.0;
            out = currents.map(|i| i - mean);
        }
    }
    out
}
