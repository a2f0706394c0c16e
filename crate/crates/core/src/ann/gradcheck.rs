//! Finite-difference audit of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::Activation;
use super::dd::Dd;
use super::network::{LayerSpec, LossKind, Mlp, BCE_CLAMP};
use super::AnnError;

/// Central-difference step.
pub const FD_EPSILON: f64 = 1e-5;

/// Denominator floor of the relative error, so parameters whose true
/// gradient is ~0 are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// Pass threshold on the maximum relative error.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckResult {
    pub max_rel_error: f64,
    /// Flat index of the worst parameter.
    pub worst_parameter: usize,
    pub parameters: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Loss with parameter `idx` shifted by `shift`, evaluated in double-double
/// so the two sides of a central difference do not cancel to noise.
fn shifted_loss_dd(
    mlp: &Mlp,
    x: &[f64],
    target: &[f64],
    loss: LossKind,
    idx: usize,
    shift: f64,
) -> Dd {
    let mut offset = 0;
    let mut a: Vec<Dd> = x.iter().map(|&v| Dd::new(v)).collect();
    for layer in mlp.layers() {
        let param = |k: usize, v: f64| {
            if k == idx {
                Dd::sum(v, shift)
            } else {
                Dd::new(v)
            }
        };
        let n_w = layer.weights.len();
        let z: Vec<Dd> = (0..layer.spec.width)
            .map(|r| {
                let mut acc = param(offset + n_w + r, layer.biases[r]);
                for (c, &x) in a.iter().enumerate() {
                    let k = r * layer.inputs + c;
                    acc = acc + param(offset + k, layer.weights[k]) * x;
                }
                acc
            })
            .collect();
        offset += n_w + layer.biases.len();
        a = match layer.spec.activation {
            Activation::Identity => z,
            Activation::Sigmoid => z
                .iter()
                .map(|&v| Dd::ONE / (Dd::ONE + (-v).exp()))
                .collect(),
            Activation::Softmax => {
                let max = z.iter().map(|v| v.hi).fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<Dd> = z.iter().map(|&v| (v - Dd::new(max)).exp()).collect();
                let total = e.iter().fold(Dd::ZERO, |s, &v| s + v);
                e.into_iter().map(|v| v / total).collect()
            }
        };
    }
    let k = Dd::new(a.len() as f64);
    let mut sum = Dd::ZERO;
    for (&y, &t) in a.iter().zip(target) {
        let t = Dd::new(t);
        sum = sum
            + match loss {
                LossKind::Mse => (y - t) * (y - t),
                LossKind::BinaryCrossEntropy => {
                    let y = if y.hi < BCE_CLAMP {
                        Dd::new(BCE_CLAMP)
                    } else if y.hi > 1.0 - BCE_CLAMP {
                        Dd::new(1.0 - BCE_CLAMP)
                    } else {
                        y
                    };
                    -(t * y.ln() + (Dd::ONE - t) * (Dd::ONE - y).ln())
                }
            };
    }
    let scale = match loss {
        LossKind::Mse => Dd::new(2.0) * k,
        LossKind::BinaryCrossEntropy => k,
    };
    sum / scale
}

/// Central difference of the loss with respect to parameter `idx`.
pub fn numeric_gradient(mlp: &Mlp, x: &[f64], target: &[f64], loss: LossKind, idx: usize) -> f64 {
    let plus = shifted_loss_dd(mlp, x, target, loss, idx, FD_EPSILON);
    let minus = shifted_loss_dd(mlp, x, target, loss, idx, -FD_EPSILON);
    ((plus - minus) / Dd::new(2.0 * FD_EPSILON)).to_f64()
}

/// Compares backprop against central differences for every parameter.
pub fn gradient_check(
    mlp: &Mlp,
    x: &[f64],
    target: &[f64],
    loss: LossKind,
) -> Result<GradCheckResult, AnnError> {
    let pass = mlp.forward(x)?;
    let analytic = mlp.backward(&pass, target, loss)?.flatten();
    let mut worst = (0.0, 0);
    for (idx, &a) in analytic.iter().enumerate() {
        let numeric = numeric_gradient(mlp, x, target, loss, idx);
        let err = relative_error(a, numeric);
        if err > worst.0 {
            worst = (err, idx);
        }
    }
    Ok(GradCheckResult {
        max_rel_error: worst.0,
        worst_parameter: worst.1,
        parameters: analytic.len(),
    })
}

/// One activation/loss pairing of the audit.
#[derive(Debug, Clone, PartialEq)]
pub struct ComboResult {
    pub hidden: Activation,
    pub output: Activation,
    pub loss: LossKind,
    pub networks: usize,
    pub max_rel_error: f64,
}

impl ComboResult {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.hidden, self.output, self.loss.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub combos: Vec<ComboResult>,
    pub max_rel_error: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < AUDIT_TOLERANCE
    }
}

/// Output/loss pairings checked by the audit. Cross-entropy needs outputs in
/// `(0, 1)`, so it is paired with sigmoid and softmax outputs only; identity
/// still meets cross-entropy through the hidden layers.
pub fn audit_combos() -> Vec<(Activation, Activation, LossKind)> {
    let mut out = vec![];
    for hidden in [Activation::Sigmoid, Activation::Identity] {
        for output in [
            Activation::Sigmoid,
            Activation::Softmax,
            Activation::Identity,
        ] {
            for loss in [LossKind::Mse, LossKind::BinaryCrossEntropy] {
                if output == Activation::Identity && loss == LossKind::BinaryCrossEntropy {
                    continue;
                }
                out.push((hidden, output, loss));
            }
        }
    }
    out
}

/// Random 3-layer networks for every pairing in [`audit_combos`].
pub fn gradient_audit(seed: u64, networks_per_combo: usize) -> Result<AuditReport, AnnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut combos = vec![];
    for (hidden, output, loss) in audit_combos() {
        let mut max_err: f64 = 0.0;
        for _ in 0..networks_per_combo {
            let inputs = rng.gen_range(2..=4);
            let outputs = rng.gen_range(2..=3);
            let specs = [
                LayerSpec::new(rng.gen_range(2..=5), hidden),
                LayerSpec::new(rng.gen_range(2..=5), hidden),
                LayerSpec::new(outputs, output),
            ];
            let mut mlp = Mlp::new(inputs, &specs, rng.gen())?;
            // non-zero biases so no parameter sits at a symmetric point
            for k in 0..mlp.parameter_count() {
                let w = mlp.parameter(k) + rng.gen_range(-0.5..0.5);
                mlp.set_parameter(k, w);
            }
            let x: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..outputs).map(|_| rng.gen_range(0.05..0.95)).collect();
            let res = gradient_check(&mlp, &x, &target, loss)?;
            max_err = max_err.max(res.max_rel_error);
        }
        combos.push(ComboResult {
            hidden,
            output,
            loss,
            networks: networks_per_combo,
            max_rel_error: max_err,
        });
    }
    let max_rel_error = combos.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(AuditReport {
        combos,
        max_rel_error,
    })
}
