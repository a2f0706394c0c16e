//! Plain-text model files.
//!
//! ```text
//! bldc-mlp 1
//! case 3
//! inputs 3
//! input_norm 0 1
//! ...one line per input column
//! target_norm -1 1
//! ...one line per output column
//! layer 5 sigmoid
//! w 0.12 -0.5 0.33
//! ...one `w` row per node (width rows of `inputs` values)
//! b 0 0 0 0 0
//! layer 3 sigmoid
//! ...
//! ```
//!
//! `case` and the normalization lines are optional. Numbers use Rust's
//! shortest round-trip formatting, so reading a written file restores every
//! parameter bit for bit.

use std::io::{BufRead, Write};

use super::activation::Activation;
use super::cases::{CaseId, Normalization};
use super::network::{Layer, LayerSpec, Mlp};
use super::AnnError;

const MAGIC: &str = "bldc-mlp 1";

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub mlp: Mlp,
    pub case: Option<CaseId>,
    pub input_norm: Vec<Normalization>,
    pub target_norm: Vec<Normalization>,
}

impl SavedModel {
    pub fn bare(mlp: Mlp) -> Self {
        Self {
            mlp,
            case: None,
            input_norm: vec![],
            target_norm: vec![],
        }
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_model<W: Write>(model: &SavedModel, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    if let Some(case) = model.case {
        writeln!(out, "case {}", case.number())?;
    }
    writeln!(out, "inputs {}", model.mlp.input_width())?;
    for n in &model.input_norm {
        writeln!(out, "input_norm {}", join(&[n.min, n.max]))?;
    }
    for n in &model.target_norm {
        writeln!(out, "target_norm {}", join(&[n.min, n.max]))?;
    }
    for layer in model.mlp.layers() {
        writeln!(out, "layer {} {}", layer.spec.width, layer.spec.activation)?;
        for row in layer.weights.chunks(layer.inputs) {
            writeln!(out, "w {}", join(row))?;
        }
        writeln!(out, "b {}", join(&layer.biases))?;
    }
    Ok(())
}

fn parse_numbers(line_no: usize, fields: &[&str]) -> Result<Vec<f64>, AnnError> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| {
                AnnError::ModelFormat(format!("line {line_no}: `{f}` is not a number"))
            })
        })
        .collect()
}

pub fn read_model<R: BufRead>(source: R) -> Result<SavedModel, AnnError> {
    let mut lines = source.lines().enumerate();
    let fmt_err = |line: usize, msg: &str| AnnError::ModelFormat(format!("line {line}: {msg}"));

    match lines.next() {
        Some((_, Ok(l))) if l.trim() == MAGIC => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(AnnError::ModelFormat(format!("missing `{MAGIC}` header"))),
    }

    let mut case = None;
    let mut inputs = None;
    let mut input_norm = vec![];
    let mut target_norm = vec![];
    let mut layers: Vec<Layer> = vec![];
    let mut fan_in = 0;
    for (idx, line) in lines {
        let line = line?;
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((&key, rest)) = fields.split_first() else {
            continue;
        };
        match key {
            "case" => {
                let n: u32 = rest
                    .first()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| fmt_err(line_no, "expected a case number"))?;
                case = Some(CaseId::from_number(n)?);
            }
            "inputs" => {
                let n: usize = rest
                    .first()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| fmt_err(line_no, "expected an input width"))?;
                inputs = Some(n);
                fan_in = n;
            }
            "input_norm" | "target_norm" => {
                let v = parse_numbers(line_no, rest)?;
                if v.len() != 2 {
                    return Err(fmt_err(line_no, "normalization needs `min max`"));
                }
                let n = Normalization {
                    min: v[0],
                    max: v[1],
                };
                if key == "input_norm" {
                    input_norm.push(n);
                } else {
                    target_norm.push(n);
                }
            }
            "layer" => {
                if inputs.is_none() {
                    return Err(fmt_err(line_no, "`inputs` must precede the first layer"));
                }
                if let [width, act] = rest {
                    let width: usize = width
                        .parse()
                        .map_err(|_| fmt_err(line_no, "layer width is not an integer"))?;
                    if let Some(prev) = layers.last() {
                        fan_in = prev.spec.width;
                    }
                    layers.push(Layer {
                        spec: LayerSpec::new(width, act.parse::<Activation>()?),
                        inputs: fan_in,
                        weights: Vec::with_capacity(width * fan_in),
                        biases: vec![],
                    });
                } else {
                    return Err(fmt_err(line_no, "expected `layer <width> <activation>`"));
                }
            }
            "w" | "b" => {
                let layer = layers
                    .last_mut()
                    .ok_or_else(|| fmt_err(line_no, "parameters before any `layer` line"))?;
                let values = parse_numbers(line_no, rest)?;
                if key == "w" {
                    if values.len() != layer.inputs {
                        return Err(fmt_err(
                            line_no,
                            "weight row length differs from layer input width",
                        ));
                    }
                    layer.weights.extend(values);
                } else {
                    layer.biases = values;
                }
            }
            other => return Err(fmt_err(line_no, &format!("unknown key `{other}`"))),
        }
    }

    let inputs = inputs.ok_or_else(|| AnnError::ModelFormat("missing `inputs` line".into()))?;
    let mlp = Mlp::from_layers(inputs, layers).map_err(|e| match e {
        AnnError::DimensionMismatch(m) | AnnError::InvalidTopology(m) => AnnError::ModelFormat(m),
        other => other,
    })?;
    if !input_norm.is_empty() && input_norm.len() != mlp.input_width() {
        return Err(AnnError::ModelFormat(
            "input_norm count differs from input width".into(),
        ));
    }
    if !target_norm.is_empty() && target_norm.len() != mlp.output_width() {
        return Err(AnnError::ModelFormat(
            "target_norm count differs from output width".into(),
        ));
    }
    Ok(SavedModel {
        mlp,
        case,
        input_norm,
        target_norm,
    })
}
