//! Dense feed-forward network: `z = W a + b`, `a' = act(z)` per layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::Activation;
use super::AnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        Self { width, activation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    BinaryCrossEntropy,
}

/// Probabilities are clamped this far from 0 and 1 inside the log.
pub(crate) const BCE_CLAMP: f64 = 1e-12;

impl LossKind {
    /// Per-sample loss, averaged over output components.
    ///
    /// MSE is `Σ (y - t)² / (2k)`, so a single linear output has
    /// `dE/dW = (y - t) x`.
    pub fn loss(&self, output: &[f64], target: &[f64]) -> f64 {
        let k = output.len() as f64;
        match self {
            LossKind::Mse => {
                output
                    .iter()
                    .zip(target)
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
                    / (2.0 * k)
            }
            LossKind::BinaryCrossEntropy => {
                -output
                    .iter()
                    .zip(target)
                    .map(|(&y, &t)| {
                        let y = y.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                        t * y.ln() + (1.0 - t) * (1.0 - y).ln()
                    })
                    .sum::<f64>()
                    / k
            }
        }
    }

    /// `dE/dy` for the loss above.
    pub fn gradient(&self, output: &[f64], target: &[f64], grad: &mut [f64]) {
        let k = output.len() as f64;
        for ((g, &y), &t) in grad.iter_mut().zip(output).zip(target) {
            *g = match self {
                LossKind::Mse => (y - t) / k,
                LossKind::BinaryCrossEntropy => {
                    let y = y.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    (y - t) / (y * (1.0 - y) * k)
                }
            };
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::BinaryCrossEntropy => "binary_cross_entropy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub inputs: usize,
    /// Row-major `width × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn affine(&self, input: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.inputs..(r + 1) * self.inputs];
            *o = self.biases[r] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    inputs: usize,
    layers: Vec<Layer>,
}

/// Layer outputs of one forward pass; `activations[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input")
    }
}

/// Per-layer `dE/dW` (same layout as the weights) and `dE/db`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: mlp
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn reset(&mut self) {
        self.scale(0.0);
    }

    /// Flattened in [`Mlp::parameter`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

impl Mlp {
    /// Builds a network with Glorot-uniform weights, `±g·√(6 / (fan_in +
    /// fan_out))` with `g = 4` for sigmoid layers and 1 otherwise.
    ///
    /// Biases start at `-½ Σ_j W_ij`, so a layer fed values centred on ½
    /// (min-max scaled inputs, sigmoid outputs) starts with zero-mean
    /// pre-activations. Without this a deep sigmoid stack saturates and its
    /// output no longer depends on the input.
    pub fn new(inputs: usize, specs: &[LayerSpec], seed: u64) -> Result<Self, AnnError> {
        validate_topology(inputs, specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = inputs;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let gain = match spec.activation {
                Activation::Sigmoid => 4.0,
                Activation::Softmax | Activation::Identity => 1.0,
            };
            let bound = gain * (6.0 / (fan_in + spec.width) as f64).sqrt();
            let weights: Vec<f64> = (0..spec.width * fan_in)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            let biases = weights
                .chunks(fan_in)
                .map(|row| -0.5 * row.iter().sum::<f64>())
                .collect();
            layers.push(Layer {
                spec: *spec,
                inputs: fan_in,
                weights,
                biases,
            });
            fan_in = spec.width;
        }
        Ok(Self { inputs, layers })
    }

    pub fn from_layers(inputs: usize, layers: Vec<Layer>) -> Result<Self, AnnError> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_topology(inputs, &specs)?;
        let mut fan_in = inputs;
        for (k, layer) in layers.iter().enumerate() {
            if layer.inputs != fan_in
                || layer.weights.len() != layer.spec.width * fan_in
                || layer.biases.len() != layer.spec.width
            {
                return Err(AnnError::DimensionMismatch(format!(
                    "layer {k} parameters do not match a {}×{fan_in} layer",
                    layer.spec.width
                )));
            }
            if layer
                .weights
                .iter()
                .chain(&layer.biases)
                .any(|v| !v.is_finite())
            {
                return Err(AnnError::NonFiniteWeights(k));
            }
            fan_in = layer.spec.width;
        }
        Ok(Self { inputs, layers })
    }

    pub fn input_width(&self) -> usize {
        self.inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(self.inputs, |l| l.spec.width)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameter by flat index: each layer's weights row-major, then its
    /// biases.
    pub fn parameter(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            if idx < layer.weights.len() {
                return layer.weights[idx];
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                return layer.biases[idx];
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_parameter(&mut self, mut idx: usize, value: f64) {
        for layer in &mut self.layers {
            if idx < layer.weights.len() {
                layer.weights[idx] = value;
                return;
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                layer.biases[idx] = value;
                return;
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass, AnnError> {
        if x.len() != self.inputs {
            return Err(AnnError::DimensionMismatch(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.inputs
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let mut z = Vec::new();
        for layer in &self.layers {
            let prev = activations.last().expect("input pushed");
            z.resize(layer.spec.width, 0.0);
            layer.affine(prev, &mut z);
            let mut a = vec![0.0; layer.spec.width];
            layer.spec.activation.apply(&z, &mut a);
            activations.push(a);
        }
        Ok(ForwardPass { activations })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, AnnError> {
        let mut pass = self.forward(x)?;
        Ok(pass.activations.pop().expect("output present"))
    }

    pub fn loss(&self, x: &[f64], target: &[f64], loss: LossKind) -> Result<f64, AnnError> {
        let y = self.predict(x)?;
        check_target(&y, target)?;
        Ok(loss.loss(&y, target))
    }

    /// Chain-rule gradients of the per-sample loss.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        target: &[f64],
        loss: LossKind,
    ) -> Result<Gradients, AnnError> {
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_gradients(pass, target, loss, &mut grads)?;
        Ok(grads)
    }

    /// Adds this sample's gradients into `grads`.
    pub fn accumulate_gradients(
        &self,
        pass: &ForwardPass,
        target: &[f64],
        loss: LossKind,
        grads: &mut Gradients,
    ) -> Result<(), AnnError> {
        if pass.activations.len() != self.layers.len() + 1
            || pass
                .activations
                .iter()
                .zip(std::iter::once(self.inputs).chain(self.layers.iter().map(|l| l.spec.width)))
                .any(|(a, w)| a.len() != w)
        {
            return Err(AnnError::DimensionMismatch(
                "activations do not come from this network".into(),
            ));
        }
        check_target(pass.output(), target)?;

        let mut grad_a = vec![0.0; self.output_width()];
        loss.gradient(pass.output(), target, &mut grad_a);
        let mut grad_z = Vec::new();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let out = &pass.activations[k + 1];
            let input = &pass.activations[k];
            grad_z.resize(layer.spec.width, 0.0);
            layer.spec.activation.backprop(out, &grad_a, &mut grad_z);

            let gw = &mut grads.weights[k];
            let gb = &mut grads.biases[k];
            for (r, &d) in grad_z.iter().enumerate() {
                gb[r] += d;
                let row = &mut gw[r * layer.inputs..(r + 1) * layer.inputs];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }

            if k > 0 {
                grad_a.clear();
                grad_a.resize(layer.inputs, 0.0);
                for (r, &d) in grad_z.iter().enumerate() {
                    let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                    for (g, &w) in grad_a.iter_mut().zip(row) {
                        *g += d * w;
                    }
                }
            }
        }
        Ok(())
    }

    /// Plain gradient-descent update.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (k, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[k]) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(&grads.biases[k]) {
                *b -= learning_rate * g;
            }
        }
    }
}

fn check_target(output: &[f64], target: &[f64]) -> Result<(), AnnError> {
    if output.len() != target.len() {
        return Err(AnnError::DimensionMismatch(format!(
            "target has {} values, network outputs {}",
            target.len(),
            output.len()
        )));
    }
    Ok(())
}

fn validate_topology(inputs: usize, specs: &[LayerSpec]) -> Result<(), AnnError> {
    if inputs == 0 || specs.is_empty() {
        return Err(AnnError::InvalidTopology(
            "need a non-empty input and at least one layer".into(),
        ));
    }
    if let Some(k) = specs.iter().position(|s| s.width == 0) {
        return Err(AnnError::InvalidTopology(format!(
            "layer {k} has zero width"
        )));
    }
    if let Some(k) = specs[..specs.len() - 1]
        .iter()
        .position(|s| s.activation == Activation::Softmax)
    {
        return Err(AnnError::InvalidTopology(format!(
            "softmax is only allowed on the output layer (found on layer {k})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net() -> Mlp {
        Mlp::from_layers(
            3,
            vec![Layer {
                spec: LayerSpec::new(3, Activation::Identity),
                inputs: 3,
                weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                biases: vec![0.0; 3],
            }],
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = identity_net();
        assert_eq!(
            net.predict(&[0.5, -2.0, 7.0]).unwrap(),
            vec![0.5, -2.0, 7.0]
        );
    }

    #[test]
    fn zero_weights_give_half_and_uniform() {
        let mut net = Mlp::new(
            2,
            &[
                LayerSpec::new(4, Activation::Sigmoid),
                LayerSpec::new(5, Activation::Softmax),
            ],
            1,
        )
        .unwrap();
        for k in 0..net.parameter_count() {
            net.set_parameter(k, 0.0);
        }
        let pass = net.forward(&[0.3, 0.9]).unwrap();
        assert!(pass.activations[1].iter().all(|&v| v == 0.5));
        assert!(pass.output().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let net = Mlp::new(
            2,
            &[
                LayerSpec::new(3, Activation::Sigmoid),
                LayerSpec::new(2, Activation::Identity),
            ],
            4,
        )
        .unwrap();
        let x = [0.1, -0.4];
        let pass = net.forward(&x).unwrap();
        let target = pass.output().to_vec();
        let grads = net.backward(&pass, &target, LossKind::Mse).unwrap();
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_linear_neuron_hand_gradient() {
        let net = Mlp::from_layers(
            2,
            vec![Layer {
                spec: LayerSpec::new(1, Activation::Identity),
                inputs: 2,
                weights: vec![0.5, -1.0],
                biases: vec![0.25],
            }],
        )
        .unwrap();
        let x = [2.0, 3.0];
        let pass = net.forward(&x).unwrap();
        let y = pass.output()[0];
        assert_eq!(y, 0.5 * 2.0 - 3.0 + 0.25);
        let t = 1.0;
        let grads = net.backward(&pass, &[t], LossKind::Mse).unwrap();
        assert_eq!(grads.weights[0], vec![(y - t) * 2.0, (y - t) * 3.0]);
        assert_eq!(grads.biases[0], vec![y - t]);
    }

    #[test]
    fn dimension_errors() {
        let net = identity_net();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(AnnError::DimensionMismatch(_))
        ));
        let pass = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            net.backward(&pass, &[1.0], LossKind::Mse),
            Err(AnnError::DimensionMismatch(_))
        ));
        let other = Mlp::new(
            3,
            &[
                LayerSpec::new(2, Activation::Sigmoid),
                LayerSpec::new(3, Activation::Identity),
            ],
            0,
        )
        .unwrap();
        assert!(matches!(
            other.backward(&pass, &[0.0; 3], LossKind::Mse),
            Err(AnnError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn softmax_only_on_output() {
        let err = Mlp::new(
            2,
            &[
                LayerSpec::new(3, Activation::Softmax),
                LayerSpec::new(1, Activation::Identity),
            ],
            0,
        );
        assert!(matches!(err, Err(AnnError::InvalidTopology(_))));
        assert!(Mlp::new(2, &[LayerSpec::new(0, Activation::Sigmoid)], 0).is_err());
    }

    #[test]
    fn glorot_bounds_and_seeding() {
        let specs = [
            LayerSpec::new(5, Activation::Sigmoid),
            LayerSpec::new(1, Activation::Identity),
        ];
        let a = Mlp::new(3, &specs, 11).unwrap();
        let b = Mlp::new(3, &specs, 11).unwrap();
        let c = Mlp::new(3, &specs, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = 4.0 * (6.0f64 / 8.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
        let out_bound = (6.0f64 / 6.0).sqrt();
        assert!(a.layers()[1].weights.iter().all(|w| w.abs() <= out_bound));
        // centred on an input of all ½
        let z: Vec<f64> = a.layers()[0]
            .weights
            .chunks(3)
            .zip(&a.layers()[0].biases)
            .map(|(row, b)| b + row.iter().map(|w| 0.5 * w).sum::<f64>())
            .collect();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }
}
