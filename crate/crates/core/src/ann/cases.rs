//! Datasets and topologies of the four trace-driven prediction cases.

use std::fmt;

use super::activation::Activation;
use super::network::{LayerSpec, Mlp};
use super::train::{split_dataset, AccuracyRule, Optimizer, Split, TrainConfig};
use super::AnnError;
use crate::sim::ColumnSource;

/// Width of every hidden layer.
pub const HIDDEN_WIDTH: usize = 5;

/// Accuracy band for continuous targets, in normalized units (2% of the
/// target column's range).
pub const DEFAULT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// Load torque, Te and reference speed to actual speed.
    SpeedFromTorque,
    /// Phase A back-EMF to phase A current.
    CurrentFromEmf,
    /// Hall code to normalized EMF pattern.
    EmfFromHall,
    /// Gate pattern to normalized EMF pattern.
    EmfFromPwm,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [
        CaseId::SpeedFromTorque,
        CaseId::CurrentFromEmf,
        CaseId::EmfFromHall,
        CaseId::EmfFromPwm,
    ];

    pub fn from_number(n: u32) -> Result<Self, AnnError> {
        match n {
            1 => Ok(CaseId::SpeedFromTorque),
            2 => Ok(CaseId::CurrentFromEmf),
            3 => Ok(CaseId::EmfFromHall),
            4 => Ok(CaseId::EmfFromPwm),
            other => Err(AnnError::InvalidCase(other)),
        }
    }

    pub fn number(&self) -> u32 {
        match self {
            CaseId::SpeedFromTorque => 1,
            CaseId::CurrentFromEmf => 2,
            CaseId::EmfFromHall => 3,
            CaseId::EmfFromPwm => 4,
        }
    }

    pub fn input_columns(&self) -> &'static [&'static str] {
        match self {
            CaseId::SpeedFromTorque => &["load_torque", "te", "speed_ref"],
            CaseId::CurrentFromEmf => &["ea"],
            CaseId::EmfFromHall => &["hall_a", "hall_b", "hall_c"],
            CaseId::EmfFromPwm => &["pwm_a", "pwm_b", "pwm_c", "pwm_d", "pwm_e", "pwm_f"],
        }
    }

    pub fn target_columns(&self) -> &'static [&'static str] {
        match self {
            CaseId::SpeedFromTorque => &["speed_actual"],
            CaseId::CurrentFromEmf => &["ia"],
            CaseId::EmfFromHall | CaseId::EmfFromPwm => &["emf_norm_a", "emf_norm_b", "emf_norm_c"],
        }
    }

    /// Layer count including the input and output layers.
    pub fn layer_count(&self) -> usize {
        match self {
            CaseId::SpeedFromTorque => 7,
            CaseId::CurrentFromEmf => 16,
            CaseId::EmfFromHall | CaseId::EmfFromPwm => 8,
        }
    }

    fn is_regression(&self) -> bool {
        matches!(self, CaseId::SpeedFromTorque | CaseId::CurrentFromEmf)
    }

    /// Training defaults, shared by all four cases: Adam at 0.01 with a
    /// 0.95 per-epoch decay, halved again after any epoch whose training
    /// loss rises. Plain SGD leaves the deep sigmoid stacks on the
    /// predict-the-mean plateau, and a fixed rate keeps rattling around the
    /// noise floor of the current waveform once it gets off it.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            lr_decay: 0.95,
            lr_backoff: 0.5,
            batch_size: 32,
            optimizer: Optimizer::ADAM,
            ..TrainConfig::default()
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case {}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseOptions {
    pub split_fraction: f64,
    /// Seeds the train/validation partition.
    pub seed: u64,
    /// Softmax output layer for the regression cases instead of identity.
    /// A width-1 softmax is constant, so this only serves comparisons.
    pub softmax_output: bool,
    pub tolerance: f64,
}

impl Default for CaseOptions {
    fn default() -> Self {
        Self {
            split_fraction: 0.8,
            seed: 0,
            softmax_output: false,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Affine map of one column onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { min: 0.0, max: 1.0 };

    pub fn fit(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min, max }
    }

    fn span(&self) -> f64 {
        // a constant column maps to 0
        if self.max > self.min {
            self.max - self.min
        } else {
            1.0
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / self.span()
    }

    pub fn invert(&self, v: f64) -> f64 {
        self.min + v * self.span()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseDataset {
    pub case: Option<CaseId>,
    pub input_columns: Vec<String>,
    pub target_columns: Vec<String>,
    /// Normalized, one row per time sample.
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub split: Split,
    pub input_norm: Vec<Normalization>,
    pub target_norm: Vec<Normalization>,
    pub accuracy: AccuracyRule,
}

impl CaseDataset {
    /// Dataset over already-normalized matrices.
    pub fn from_rows(
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        accuracy: AccuracyRule,
        split_fraction: f64,
        seed: u64,
    ) -> Result<Self, AnnError> {
        if inputs.len() != targets.len() {
            return Err(AnnError::ShapeMismatch(format!(
                "{} input rows against {} target rows",
                inputs.len(),
                targets.len()
            )));
        }
        let in_w = inputs.first().map_or(0, Vec::len);
        let out_w = targets.first().map_or(0, Vec::len);
        if inputs.iter().any(|r| r.len() != in_w) || targets.iter().any(|r| r.len() != out_w) {
            return Err(AnnError::ShapeMismatch("ragged rows".into()));
        }
        let split = split_dataset(inputs.len(), split_fraction, seed)?;
        Ok(Self {
            case: None,
            input_columns: (0..in_w).map(|k| format!("x{k}")).collect(),
            target_columns: (0..out_w).map(|k| format!("y{k}")).collect(),
            inputs,
            targets,
            split,
            input_norm: vec![Normalization::IDENTITY; in_w],
            target_norm: vec![Normalization::IDENTITY; out_w],
            accuracy,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_columns.len()
    }

    pub fn target_width(&self) -> usize {
        self.target_columns.len()
    }

    pub fn rows(&self) -> usize {
        self.inputs.len()
    }

    /// Validation MSE of always predicting the training-partition mean, in
    /// normalized units.
    pub fn mean_baseline_mse(&self) -> f64 {
        let mut total = 0.0;
        for c in 0..self.target_width() {
            let mean = self
                .split
                .train
                .iter()
                .map(|&r| self.targets[r][c])
                .sum::<f64>()
                / self.split.train.len() as f64;
            total += self
                .split
                .validation
                .iter()
                .map(|&r| (self.targets[r][c] - mean).powi(2))
                .sum::<f64>();
        }
        total / (self.split.validation.len() * self.target_width()) as f64
    }
}

/// Hidden and output layers for `case`; the input layer is implicit.
pub fn case_topology(case: CaseId, opts: &CaseOptions) -> Vec<LayerSpec> {
    let hidden = case.layer_count() - 2;
    let output = if !case.is_regression() {
        Activation::Sigmoid
    } else if opts.softmax_output {
        Activation::Softmax
    } else {
        Activation::Identity
    };
    let mut specs = vec![LayerSpec::new(HIDDEN_WIDTH, Activation::Sigmoid); hidden];
    specs.push(LayerSpec::new(case.target_columns().len(), output));
    specs
}

/// Builds the normalized dataset and the layer list of `case`.
///
/// Continuous columns are min-max scaled onto `[0, 1]`; binary Hall/PWM
/// columns pass through; EMF patterns map from `{-1, 0, 1}` to
/// `{0, 0.5, 1}` so a sigmoid output can reach them.
pub fn build_case<S: ColumnSource + ?Sized>(
    case: CaseId,
    trace: &S,
    opts: &CaseOptions,
) -> Result<(CaseDataset, Vec<LayerSpec>), AnnError> {
    assemble(case, trace, opts, None)
}

/// Like [`build_case`] but scales columns with previously fitted
/// normalizations, e.g. the ones stored alongside a trained model.
pub fn build_case_normalized<S: ColumnSource + ?Sized>(
    case: CaseId,
    trace: &S,
    opts: &CaseOptions,
    input_norm: &[Normalization],
    target_norm: &[Normalization],
) -> Result<(CaseDataset, Vec<LayerSpec>), AnnError> {
    assemble(case, trace, opts, Some((input_norm, target_norm)))
}

/// EMF levels `{-1, 0, 1}` onto `{0, 0.5, 1}`.
const TERNARY: Normalization = Normalization {
    min: -1.0,
    max: 1.0,
};

fn case_accuracy(case: CaseId, opts: &CaseOptions) -> AccuracyRule {
    if case.is_regression() {
        AccuracyRule::Tolerance(opts.tolerance)
    } else {
        AccuracyRule::Levels(vec![0.0, 0.5, 1.0])
    }
}

fn assemble<S: ColumnSource + ?Sized>(
    case: CaseId,
    trace: &S,
    opts: &CaseOptions,
    fixed: Option<(&[Normalization], &[Normalization])>,
) -> Result<(CaseDataset, Vec<LayerSpec>), AnnError> {
    let fetch = |names: &[&str]| -> Result<Vec<Vec<f64>>, AnnError> {
        names
            .iter()
            .map(|n| {
                trace
                    .column(n)
                    .ok_or_else(|| AnnError::MissingColumn(n.to_string()))
            })
            .collect()
    };
    let in_cols = fetch(case.input_columns())?;
    let out_cols = fetch(case.target_columns())?;

    let (input_norm, target_norm, accuracy) = match fixed {
        Some((i, t)) => {
            if i.len() != in_cols.len() || t.len() != out_cols.len() {
                return Err(AnnError::ShapeMismatch(format!(
                    "{case} needs {} input and {} target scalings, got {} and {}",
                    in_cols.len(),
                    out_cols.len(),
                    i.len(),
                    t.len()
                )));
            }
            (i.to_vec(), t.to_vec(), case_accuracy(case, opts))
        }
        None if case.is_regression() => (
            in_cols.iter().map(|c| Normalization::fit(c)).collect(),
            out_cols.iter().map(|c| Normalization::fit(c)).collect(),
            case_accuracy(case, opts),
        ),
        None => (
            vec![Normalization::IDENTITY; in_cols.len()],
            vec![TERNARY; out_cols.len()],
            case_accuracy(case, opts),
        ),
    };

    let rows = trace.row_count();
    let matrix = |cols: &[Vec<f64>], norms: &[Normalization]| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|r| cols.iter().zip(norms).map(|(c, n)| n.apply(c[r])).collect())
            .collect()
    };
    let inputs = matrix(&in_cols, &input_norm);
    let targets = matrix(&out_cols, &target_norm);
    let split = split_dataset(rows, opts.split_fraction, opts.seed)?;

    let data = CaseDataset {
        case: Some(case),
        input_columns: case.input_columns().iter().map(|s| s.to_string()).collect(),
        target_columns: case
            .target_columns()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        inputs,
        targets,
        split,
        input_norm,
        target_norm,
        accuracy,
    };
    Ok((data, case_topology(case, opts)))
}

/// Network output and target per row, both in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub columns: Vec<String>,
    pub predicted: Vec<Vec<f64>>,
    pub actual: Vec<Vec<f64>>,
    /// Whether each row belongs to the validation partition.
    pub validation: Vec<bool>,
}

pub fn predict_case(mlp: &Mlp, data: &CaseDataset) -> Result<Prediction, AnnError> {
    if mlp.input_width() != data.input_width() || mlp.output_width() != data.target_width() {
        return Err(AnnError::DimensionMismatch(format!(
            "network is {}→{}, dataset is {}→{}",
            mlp.input_width(),
            mlp.output_width(),
            data.input_width(),
            data.target_width()
        )));
    }
    let denorm = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .zip(&data.target_norm)
            .map(|(&v, n)| n.invert(v))
            .collect()
    };
    let mut predicted = Vec::with_capacity(data.rows());
    for x in &data.inputs {
        predicted.push(denorm(&mlp.predict(x)?));
    }
    let mut validation = vec![false; data.rows()];
    for &r in &data.split.validation {
        validation[r] = true;
    }
    Ok(Prediction {
        columns: data.target_columns.clone(),
        predicted,
        actual: data.targets.iter().map(|t| denorm(t)).collect(),
        validation,
    })
}
