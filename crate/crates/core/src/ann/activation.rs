use std::fmt;
use std::str::FromStr;

use super::AnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Activation::Sigmoid => {
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = sigmoid(v);
                }
            }
            Activation::Identity => out.copy_from_slice(z),
            Activation::Softmax => softmax(z, out),
        }
    }

    /// Vector-Jacobian product: maps `dL/da` to `dL/dz` given the layer
    /// output `a`.
    pub fn backprop(&self, a: &[f64], grad_a: &[f64], grad_z: &mut [f64]) {
        match self {
            Activation::Sigmoid => {
                for ((gz, &y), &g) in grad_z.iter_mut().zip(a).zip(grad_a) {
                    *gz = g * y * (1.0 - y);
                }
            }
            Activation::Identity => grad_z.copy_from_slice(grad_a),
            Activation::Softmax => {
                let dot: f64 = a.iter().zip(grad_a).map(|(y, g)| y * g).sum();
                for ((gz, &y), &g) in grad_z.iter_mut().zip(a).zip(grad_a) {
                    *gz = y * (g - dot);
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = AnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            "identity" => Ok(Activation::Identity),
            other => Err(AnnError::ModelFormat(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        let mut out = [0.0; 5];
        softmax(&[0.3; 5], &mut out);
        for o in out {
            assert!((o - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_inputs_stay_finite() {
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
        let mut out = [0.0; 3];
        softmax(&[1000.0, 0.0, -1000.0], &mut out);
        assert!(out.iter().all(|v| v.is_finite()));
        assert!((out[0] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(z in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
            let mut out = vec![0.0; z.len()];
            softmax(&z, &mut out);
            prop_assert!(out.iter().all(|&p| p >= 0.0));
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn sigmoid_symmetry(z in -30.0f64..30.0) {
            let s = sigmoid(z);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert!((sigmoid(-z) - (1.0 - s)).abs() < 1e-12);
        }
    }
}
