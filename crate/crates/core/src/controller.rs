//! Discrete PI speed controller producing a PWM duty command.
//!
//! `u = Kp e + Ki ∫e` with `e = reference - actual`. Windup is handled by
//! conditional integration (the integral is frozen while the output is
//! saturated and the error pushes further into saturation) plus a hard clamp
//! on the accumulator.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    /// Duty per rad/s of error.
    pub kp: f64,
    /// Duty per (rad/s)·s of accumulated error.
    pub ki: f64,
    /// Bound on `|∫e|`; defaults to `1 / ki` so the integral alone can reach
    /// full duty and no further.
    pub integral_limit: f64,
}

impl PiGains {
    pub fn new(kp: f64, ki: f64) -> Self {
        let integral_limit = if ki > 0.0 { 1.0 / ki } else { f64::INFINITY };
        Self {
            kp,
            ki,
            integral_limit,
        }
    }

    pub fn with_integral_limit(mut self, limit: f64) -> Self {
        self.integral_limit = limit;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.kp >= 0.0
            && self.ki >= 0.0
            && self.kp.is_finite()
            && self.ki.is_finite()
            && self.integral_limit >= 0.0
    }
}

impl Default for PiGains {
    fn default() -> Self {
        Self::new(0.05, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    pub integral: f64,
    pub last_output_saturated: bool,
}

/// Output of one controller update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutput {
    pub duty: f64,
    /// Command before the `[0, 1]` clamp.
    pub raw: f64,
    pub state: PiState,
}

pub fn duty_to_command(u_raw: f64) -> f64 {
    u_raw.clamp(0.0, 1.0)
}

pub fn pi_step(reference: f64, actual: f64, dt: f64, gains: &PiGains, state: PiState) -> PiOutput {
    debug_assert!(dt > 0.0, "controller period must be positive");
    let error = reference - actual;

    let limit = gains.integral_limit;
    let candidate = (state.integral + error * dt).clamp(-limit, limit);
    let trial = gains.kp * error + gains.ki * candidate;
    let winding_up = (trial > 1.0 && error > 0.0) || (trial < 0.0 && error < 0.0);
    let integral = if winding_up {
        state.integral.clamp(-limit, limit)
    } else {
        candidate
    };

    let raw = gains.kp * error + gains.ki * integral;
    let duty = duty_to_command(raw);
    PiOutput {
        duty,
        raw,
        state: PiState {
            integral,
            last_output_saturated: raw != duty,
        },
    }
}
