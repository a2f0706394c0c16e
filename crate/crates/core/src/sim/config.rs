//! Simulation configuration and its flat dotted-key file format.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::profile::Profile;
use super::SimError;
use crate::controller::PiGains;
use crate::drive::PwmConfig;
use crate::motor::MotorParams;

pub const RPM_TO_RAD_S: f64 = 2.0 * PI / 60.0;

/// Every recognised configuration key with its default, for help output.
pub const CONFIG_KEYS: &str = "\
Configuration keys (TOML, dotted keys allowed; every key optional):
  t_end = 75.0                      simulated time [s]
  ode_step = 2e-5                   integrator step [s]
  control_step = 2e-4               PI update period [s]
  log_step = 0.01                   trace sampling period [s]
  seed = 0                          recorded with the run
  motor.phase_resistance = 0.1      [ohm]
  motor.phase_inductance = 1e-3     [H]
  motor.back_emf_constant = 0.1     [V·s/rad]
  motor.torque_constant = 0.1       [N·m/A], must equal back_emf_constant
  motor.inertia = 0.002             [kg·m²]
  motor.viscous_friction = 0.001    [N·m·s/rad]
  motor.pole_pairs = 4
  motor.rated_torque = 12.0         [N·m]
  motor.peak_torque = 18.0          [N·m]
  motor.dc_link_voltage = 100.0     [V]
  pi.kp = 0.05                      [duty/(rad/s)]
  pi.ki = 0.5                       [duty/(rad/s·s)]
  pi.integral_limit = 1/ki          [(rad/s)·s]
  pwm.carrier_hz = 5000.0           [Hz]
  pwm.shape = \"sawtooth\"            \"sawtooth\" or \"triangle\"
  reference.rpm = [[0, 0], [20, 3000]]   speed schedule [s, rpm]
  load.torque = [[0, 0], [50, 12]]       load schedule [s, N·m]
";

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub ode_step: f64,
    pub control_step: f64,
    pub log_step: f64,
    pub motor: MotorParams,
    pub gains: PiGains,
    pub pwm: PwmConfig,
    /// Speed schedule in rad/s.
    pub reference_profile: Profile,
    /// Load torque schedule in N·m.
    pub load_profile: Profile,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        ConfigFile::default()
            .into_config()
            .expect("built-in defaults are valid")
    }
}

/// Integer ratios between the three time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepPlan {
    pub total_steps: u64,
    pub control_every: u64,
    pub log_every: u64,
    pub carrier_steps: u64,
}

impl StepPlan {
    pub fn log_rows(&self) -> u64 {
        self.total_steps / self.log_every + 1
    }
}

fn integer_ratio(big: f64, small: f64, what: &str) -> Result<u64, SimError> {
    let ratio = (big / small).round();
    if ratio < 1.0 || (ratio * small - big).abs() > 1e-9 * big {
        return Err(SimError::ConfigInvalid(format!(
            "{what} must be an integer multiple ({big} / {small} = {})",
            big / small
        )));
    }
    Ok(ratio as u64)
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| SimError::ConfigInvalid(e.message().to_string()))?;
        let config = file.into_config()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SimError::ConfigNotFound(path.to_path_buf()),
            _ => SimError::Io(e),
        })?;
        Self::from_toml_str(&text)
    }

    /// Serializes back to the file format; `from_toml_str` reproduces the
    /// same config.
    pub fn to_toml(&self) -> String {
        let file = ConfigFile::from_config(self);
        toml::to_string(&file).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<StepPlan, SimError> {
        let invalid = |msg: &str| Err(SimError::ConfigInvalid(msg.to_string()));
        for (name, v) in [
            ("t_end", self.t_end),
            ("ode_step", self.ode_step),
            ("control_step", self.control_step),
            ("log_step", self.log_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(&format!("{name} must be positive"));
            }
        }
        if !(self.ode_step <= self.control_step && self.control_step <= self.log_step) {
            return invalid("steps must satisfy ode_step <= control_step <= log_step");
        }
        let control_every = integer_ratio(self.control_step, self.ode_step, "control_step")?;
        let log_every =
            integer_ratio(self.log_step, self.control_step, "log_step")? * control_every;
        let total_steps = integer_ratio(self.t_end, self.ode_step, "t_end")?;
        if !(self.pwm.carrier_hz.is_finite() && self.pwm.carrier_hz > 0.0) {
            return invalid("pwm.carrier_hz must be positive");
        }
        let carrier_steps = integer_ratio(self.pwm.period(), self.ode_step, "pwm carrier period")?;
        self.motor
            .validate()
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        if !self.gains.is_valid() {
            return invalid("pi gains must be non-negative and finite");
        }
        if self.reference_profile.points().is_empty() || self.load_profile.points().is_empty() {
            return Err(SimError::EmptyProfile);
        }
        Ok(StepPlan {
            total_steps,
            control_every,
            log_every,
            carrier_steps,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    t_end: f64,
    ode_step: f64,
    control_step: f64,
    log_step: f64,
    seed: u64,
    motor: MotorParams,
    pi: PiSection,
    pwm: PwmConfig,
    reference: ReferenceSection,
    load: LoadSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PiSection {
    kp: f64,
    ki: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    integral_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ReferenceSection {
    rpm: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LoadSection {
    torque: Vec<[f64; 2]>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            t_end: 75.0,
            ode_step: 20e-6,
            control_step: 200e-6,
            log_step: 0.01,
            seed: 0,
            motor: MotorParams::default(),
            pi: PiSection::default(),
            pwm: PwmConfig::default(),
            reference: ReferenceSection::default(),
            load: LoadSection::default(),
        }
    }
}

impl Default for PiSection {
    fn default() -> Self {
        let gains = PiGains::default();
        Self {
            kp: gains.kp,
            ki: gains.ki,
            integral_limit: None,
        }
    }
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            rpm: vec![[0.0, 0.0], [20.0, 3000.0]],
        }
    }
}

impl Default for LoadSection {
    fn default() -> Self {
        Self {
            torque: vec![[0.0, 0.0], [50.0, 12.0]],
        }
    }
}

impl ConfigFile {
    fn into_config(self) -> Result<SimConfig, SimError> {
        let mut gains = PiGains::new(self.pi.kp, self.pi.ki);
        if let Some(limit) = self.pi.integral_limit {
            gains = gains.with_integral_limit(limit);
        }
        let pairs = |v: Vec<[f64; 2]>| v.into_iter().map(|[t, x]| (t, x)).collect();
        Ok(SimConfig {
            t_end: self.t_end,
            ode_step: self.ode_step,
            control_step: self.control_step,
            log_step: self.log_step,
            motor: self.motor,
            gains,
            pwm: self.pwm,
            reference_profile: Profile::new(pairs(self.reference.rpm))?.scaled(RPM_TO_RAD_S),
            load_profile: Profile::new(pairs(self.load.torque))?,
            seed: self.seed,
        })
    }

    fn from_config(config: &SimConfig) -> Self {
        let default_limit = PiGains::new(config.gains.kp, config.gains.ki).integral_limit;
        let points = |p: &Profile, scale: f64| {
            p.points()
                .iter()
                .map(|&(t, v)| [t, v * scale])
                .collect::<Vec<_>>()
        };
        Self {
            t_end: config.t_end,
            ode_step: config.ode_step,
            control_step: config.control_step,
            log_step: config.log_step,
            seed: config.seed,
            motor: config.motor,
            pi: PiSection {
                kp: config.gains.kp,
                ki: config.gains.ki,
                integral_limit: (config.gains.integral_limit != default_limit)
                    .then_some(config.gains.integral_limit),
            },
            pwm: config.pwm,
            reference: ReferenceSection {
                rpm: points(&config.reference_profile, 1.0 / RPM_TO_RAD_S),
            },
            load: LoadSection {
                torque: points(&config.load_profile, 1.0),
            },
        }
    }
}
