//! Piecewise-linear schedules over time.

use serde::{Deserialize, Serialize};

use super::SimError;

/// `(time, value)` breakpoints, linearly interpolated and held constant past
/// either end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, SimError> {
        if points.is_empty() {
            return Err(SimError::EmptyProfile);
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(SimError::ConfigInvalid(
                "profile breakpoints must be finite".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(SimError::ConfigInvalid(
                "profile breakpoint times must be non-decreasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|&(t, v)| (t, v * factor)).collect(),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, SimError> {
        let (first, last) = match (self.points.first(), self.points.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(SimError::EmptyProfile),
        };
        if t <= first.0 {
            return Ok(first.1);
        }
        if t >= last.0 {
            return Ok(last.1);
        }
        let idx = self.points.partition_point(|&(pt, _)| pt <= t);
        let (t0, v0) = self.points[idx - 1];
        let (t1, v1) = self.points[idx];
        if t1 == t0 {
            return Ok(v1);
        }
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    /// Value after the last breakpoint.
    pub fn final_value(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }
}

/// Load torque in N·m at time `t`.
pub fn load_profile_eval(profile: &Profile, t: f64) -> Result<f64, SimError> {
    profile.eval(t)
}

/// Reference speed in rad/s at time `t`.
pub fn reference_profile_eval(profile: &Profile, t: f64) -> Result<f64, SimError> {
    profile.eval(t)
}
