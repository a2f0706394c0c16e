//! Mini-batch training, dataset partitioning and per-epoch metrics.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cases::CaseDataset;
use super::network::{Gradients, LossKind, Mlp};
use super::AnnError;
use crate::sim::format_sig9;

/// Parameter update rule applied to each mini-batch gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// `w -= lr * g`.
    Sgd,
    /// Adam with bias-corrected moment estimates.
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub split_fraction: f64,
    pub learning_rate: f64,
    /// Per-epoch learning rate factor: epoch `e` runs at
    /// `learning_rate * lr_decay^(e-1)`. 1 keeps the rate constant.
    pub lr_decay: f64,
    /// Extra factor applied to the rate, on top of the decay, after every
    /// epoch whose training loss rose above the previous one. 1 disables it.
    pub lr_backoff: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            split_fraction: 0.8,
            learning_rate: 0.05,
            lr_decay: 1.0,
            lr_backoff: 1.0,
            batch_size: 32,
            loss: LossKind::Mse,
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AnnError> {
        let bad = |msg: &str| Err(AnnError::InvalidConfig(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad("split_fraction must lie strictly between 0 and 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if !(self.lr_backoff > 0.0 && self.lr_backoff <= 1.0) {
            return bad("lr_backoff must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Row indices of the training and validation partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Seeded shuffle of `0..rows`, then the first `⌈fraction·rows⌉` go to
/// training. Both partitions keep at least one row.
pub fn split_dataset(rows: usize, split_fraction: f64, seed: u64) -> Result<Split, AnnError> {
    if rows < 2 {
        return Err(AnnError::TooFewRows(rows));
    }
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(AnnError::InvalidConfig(
            "split_fraction must lie strictly between 0 and 1".into(),
        ));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the small offset keeps 0.8 * 10 from rounding up to 9
    let n_train = ((split_fraction * rows as f64 - 1e-9).ceil() as usize).clamp(1, rows - 1);
    let validation = order.split_off(n_train);
    Ok(Split {
        train: order,
        validation,
    })
}

/// How predictions are scored for the accuracy metric.
#[derive(Debug, Clone, PartialEq)]
pub enum AccuracyRule {
    /// Target takes one of these levels; a prediction counts when it rounds
    /// to the target's level.
    Levels(Vec<f64>),
    /// Continuous target; a prediction counts when within this distance.
    Tolerance(f64),
}

impl AccuracyRule {
    fn hit(&self, prediction: f64, target: f64) -> bool {
        match self {
            AccuracyRule::Levels(levels) => nearest(levels, prediction) == nearest(levels, target),
            AccuracyRule::Tolerance(tau) => (prediction - target).abs() <= *tau,
        }
    }
}

fn nearest(levels: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (k, l) in levels.iter().enumerate() {
        if (v - l).abs() < (v - levels[best]).abs() {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    /// Fraction of output elements scored correct.
    pub accuracy: f64,
    /// Mean squared residual over all output elements.
    pub mse: f64,
    /// Mean absolute residual over all output elements.
    pub mae: f64,
}

/// Scores a batch of predictions. Sums run in row order, so results do not
/// depend on how rows were produced.
pub fn metrics(
    predictions: &[Vec<f64>],
    targets: &[Vec<f64>],
    loss: LossKind,
    rule: &AccuracyRule,
) -> Result<Metrics, AnnError> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(AnnError::ShapeMismatch(format!(
            "{} prediction rows against {} target rows",
            predictions.len(),
            targets.len()
        )));
    }
    let (mut loss_sum, mut hits, mut sq, mut abs, mut elements) = (0.0, 0usize, 0.0, 0.0, 0usize);
    for (row, (p, t)) in predictions.iter().zip(targets).enumerate() {
        if p.len() != t.len() {
            return Err(AnnError::ShapeMismatch(format!(
                "row {row}: {} predictions against {} targets",
                p.len(),
                t.len()
            )));
        }
        loss_sum += loss.loss(p, t);
        for (&y, &target) in p.iter().zip(t) {
            let r = y - target;
            sq += r * r;
            abs += r.abs();
            hits += usize::from(rule.hit(y, target));
            elements += 1;
        }
    }
    let n = elements as f64;
    Ok(Metrics {
        loss: loss_sum / predictions.len() as f64,
        accuracy: hits as f64 / n,
        mse: sq / n,
        mae: abs / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    /// Validation mean squared error.
    pub mse: f64,
    /// Validation mean absolute error.
    pub mae: f64,
}

pub const METRICS_COLUMNS: [&str; 7] = [
    "epoch",
    "train_loss",
    "val_loss",
    "train_accuracy",
    "val_accuracy",
    "mse",
    "mae",
];

pub fn write_metrics_csv<W: Write>(history: &[EpochMetrics], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", METRICS_COLUMNS.join(","))?;
    for m in history {
        let values = [
            m.train_loss,
            m.val_loss,
            m.train_accuracy,
            m.val_accuracy,
            m.mse,
            m.mae,
        ]
        .map(format_sig9);
        writeln!(out, "{},{}", m.epoch, values.join(","))?;
    }
    Ok(())
}

/// Scores `mlp` on the given rows of `data`.
pub fn evaluate(
    mlp: &Mlp,
    data: &CaseDataset,
    rows: &[usize],
    loss: LossKind,
) -> Result<Metrics, AnnError> {
    let predictions = rows
        .iter()
        .map(|&r| mlp.predict(&data.inputs[r]))
        .collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<Vec<f64>> = rows.iter().map(|&r| data.targets[r].clone()).collect();
    metrics(&predictions, &targets, loss, &data.accuracy)
}

/// Optimizer state carried across batches.
struct Stepper {
    optimizer: Optimizer,
    learning_rate: f64,
    /// Adam first and second moments, flattened in parameter order.
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Stepper {
    fn new(net: &Mlp, cfg: &TrainConfig) -> Self {
        let n = match cfg.optimizer {
            Optimizer::Sgd => 0,
            Optimizer::Adam { .. } => net.parameter_count(),
        };
        Self {
            optimizer: cfg.optimizer,
            learning_rate: cfg.learning_rate,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn apply(&mut self, net: &mut Mlp, grads: &Gradients) {
        match self.optimizer {
            Optimizer::Sgd => net.apply_gradients(grads, self.learning_rate),
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (k, g) in grads.flatten().into_iter().enumerate() {
                    self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
                    self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
                    let update =
                        self.learning_rate * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + epsilon);
                    net.set_parameter(k, net.parameter(k) - update);
                }
            }
        }
    }
}

/// Trains on `data.split.train` and reports both partitions after every
/// epoch. Batches are drawn from a per-epoch reshuffle seeded by `cfg.seed`.
pub fn train(
    mlp: &Mlp,
    data: &CaseDataset,
    cfg: &TrainConfig,
) -> Result<(Mlp, Vec<EpochMetrics>), AnnError> {
    cfg.validate()?;
    if data.split.train.is_empty() || data.split.validation.is_empty() {
        return Err(AnnError::TooFewRows(data.inputs.len()));
    }
    if data.input_width() != mlp.input_width() || data.target_width() != mlp.output_width() {
        return Err(AnnError::DimensionMismatch(format!(
            "dataset is {}→{}, network is {}→{}",
            data.input_width(),
            data.target_width(),
            mlp.input_width(),
            mlp.output_width()
        )));
    }

    let mut net = mlp.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = data.split.train.clone();
    let mut grads = Gradients::zeros_like(&net);
    let mut step = Stepper::new(&net, cfg);
    let mut history: Vec<EpochMetrics> = Vec::with_capacity(cfg.epochs);
    let mut backoff = 1.0;
    for epoch in 1..=cfg.epochs {
        step.learning_rate = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32 - 1) * backoff;
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grads.reset();
            for &row in batch {
                let pass = net.forward(&data.inputs[row])?;
                net.accumulate_gradients(&pass, &data.targets[row], cfg.loss, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            step.apply(&mut net, &grads);
        }

        let tr = evaluate(&net, data, &data.split.train, cfg.loss)?;
        let va = evaluate(&net, data, &data.split.validation, cfg.loss)?;
        if !(tr.loss.is_finite() && va.loss.is_finite()) {
            return Err(AnnError::NonFiniteLoss { epoch });
        }
        if history.last().is_some_and(|prev| tr.loss > prev.train_loss) {
            backoff *= cfg.lr_backoff;
        }
        history.push(EpochMetrics {
            epoch,
            train_loss: tr.loss,
            val_loss: va.loss,
            train_accuracy: tr.accuracy,
            val_accuracy: va.accuracy,
            mse: va.mse,
            mae: va.mae,
        });
    }
    Ok((net, history))
}
