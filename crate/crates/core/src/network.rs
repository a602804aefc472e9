//! The feed-forward classifier: ReLU hidden layers, 2-way softmax output,
//! inverted dropout, exact backpropagation, and bit-exact parameter
//! serialization.
//!
//! Class index 0 is toponym, index 1 is non-toponym, everywhere.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::linalg::{dot, relu_scalar, softmax, Matrix, Vector};

pub const TOPONYM_CLASS: usize = 0;
pub const NON_TOPONYM_CLASS: usize = 1;

impl Label {
    /// Output-layer class index of this label.
    pub fn class_index(self) -> usize {
        match self {
            Label::Toponym => TOPONYM_CLASS,
            Label::NonToponym => NON_TOPONYM_CLASS,
        }
    }

    /// One-hot target distribution of this label.
    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Label::Toponym => [1.0, 0.0],
            Label::NonToponym => [0.0, 1.0],
        }
    }
}

/// Network shape. The defaults are 3 hidden layers of 500 ReLU units with
/// dropout 0.5; [`ArchConfig::baseline`] gives the 2×150 reference shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub dropout_p: f64,
    pub output_classes: usize,
}

impl ArchConfig {
    pub fn new(input_dim: usize) -> Self {
        ArchConfig {
            input_dim,
            hidden_layers: 3,
            hidden_units: 500,
            dropout_p: 0.5,
            output_classes: 2,
        }
    }

    /// The 2-layer × 150-unit reference architecture.
    pub fn baseline(input_dim: usize) -> Self {
        ArchConfig {
            hidden_layers: 2,
            hidden_units: 150,
            ..ArchConfig::new(input_dim)
        }
    }

    /// (rows, cols) of each layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_dim;
        for _ in 0..self.hidden_layers {
            shapes.push((self.hidden_units, fan_in));
            fan_in = self.hidden_units;
        }
        shapes.push((self.output_classes, fan_in));
        shapes
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidInput("input_dim must be positive".into()));
        }
        if self.output_classes != 2 {
            return Err(Error::InvalidInput(
                "only 2-class output is supported".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidInput(format!(
                "dropout_p {} outside [0, 1)",
                self.dropout_p
            )));
        }
        if self.hidden_layers > 0 && self.hidden_units == 0 {
            return Err(Error::InvalidInput("hidden_units must be positive".into()));
        }
        Ok(())
    }
}

/// One dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vector,
}

/// The trained (or initializing) parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub arch: ArchConfig,
    pub seed: u64,
}

/// Classification output for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// `[p(toponym), p(non-toponym)]`, summing to 1.
    pub probabilities: Vector,
}

impl Prediction {
    pub fn p_toponym(&self) -> f64 {
        self.probabilities[TOPONYM_CLASS]
    }

    pub fn p_non_toponym(&self) -> f64 {
        self.probabilities[NON_TOPONYM_CLASS]
    }
}

/// Everything backward needs from a training-mode forward pass: the input
/// fed to each layer, the pre-dropout ReLU outputs, the dropout scale masks,
/// and the softmax output.
#[derive(Debug, Clone)]
pub struct Trace {
    layer_inputs: Vec<Vector>,
    relu_outputs: Vec<Vector>,
    masks: Option<Vec<Vector>>,
    pub probs: Vector,
}

/// Per-parameter gradients (or any parameter-shaped accumulator, e.g. the
/// momentum velocity).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelParams) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: Vector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in layer.weights.data_mut() {
                *w *= factor;
            }
            for b in &mut layer.bias.0 {
                *b *= factor;
            }
        }
    }

    /// L2 norm over every component of every layer.
    pub fn global_norm(&self) -> f64 {
        let mut total = 0.0;
        for layer in &self.layers {
            total += layer.weights.data().iter().map(|w| w * w).sum::<f64>();
            total += layer.bias.iter().map(|b| b * b).sum::<f64>();
        }
        total.sqrt()
    }
}

/// Initializes parameters: weights uniform in `±sqrt(6 / fan_in)` per layer,
/// biases zero, deterministic for a given seed.
pub fn init_model(arch: ArchConfig, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = arch
        .layer_shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let limit = (6.0 / cols as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            Layer {
                weights: Matrix::from_rows(rows, cols, data).expect("shape by construction"),
                bias: Vector::zeros(rows),
            }
        })
        .collect();
    Ok(ModelParams { layers, arch, seed })
}

impl ModelParams {
    fn check_input(&self, x: &Vector) -> Result<()> {
        if x.len() != self.arch.input_dim {
            return Err(Error::Dimension {
                context: "forward input",
                expected: self.arch.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Inference-mode forward pass: no dropout, deterministic.
    pub fn forward(&self, x: &Vector) -> Result<Prediction> {
        self.check_input(x)?;
        let mut activation = x.clone();
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            activation = affine_relu(layer, &activation);
        }
        let out = affine_plain(&self.layers[last], &activation);
        Ok(prediction_from_logits(out))
    }

    /// Training-mode forward pass with inverted dropout: each hidden unit is
    /// kept with probability `1 - p` and scaled by `1 / (1 - p)`, so
    /// inference needs no rescaling. Returns the trace backward needs.
    pub fn forward_train(&self, x: &Vector, rng: &mut impl Rng) -> Result<(Trace, Prediction)> {
        self.check_input(x)?;
        let p = self.arch.dropout_p;
        let use_dropout = p > 0.0;
        let keep = 1.0 - p;
        let scale = 1.0 / keep;

        let hidden_count = self.layers.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut relu_outputs = Vec::with_capacity(hidden_count);
        let mut masks = use_dropout.then(|| Vec::with_capacity(hidden_count));

        let mut activation = x.clone();
        for layer in &self.layers[..hidden_count] {
            layer_inputs.push(activation.clone());
            let relu_out = affine_relu(layer, &activation);
            if let Some(masks) = &mut masks {
                let mask: Vec<f64> = (0..relu_out.len())
                    .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
                    .collect();
                activation = Vector(
                    relu_out
                        .iter()
                        .zip(&mask)
                        .map(|(h, m)| h * m)
                        .collect(),
                );
                masks.push(Vector(mask));
            } else {
                activation = relu_out.clone();
            }
            relu_outputs.push(relu_out);
        }
        layer_inputs.push(activation);
        let out = affine_plain(
            &self.layers[hidden_count],
            layer_inputs.last().expect("pushed above"),
        );
        let prediction = prediction_from_logits(out);
        let trace = Trace {
            layer_inputs,
            relu_outputs,
            masks,
            probs: prediction.probabilities.clone(),
        };
        Ok((trace, prediction))
    }

    /// Exact gradients of `class_weight × cross_entropy(probs, target)` with
    /// respect to every weight and bias, honoring the recorded dropout masks.
    pub fn backward(&self, trace: &Trace, target: Label, class_weight: f64) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(trace, &target.one_hot(), class_weight, &mut grads)?;
        Ok(grads)
    }

    /// Like [`ModelParams::backward`] but accumulates into `acc` (used for
    /// batch averaging) and accepts an arbitrary target distribution.
    pub fn backward_into(
        &self,
        trace: &Trace,
        target: &[f64; 2],
        class_weight: f64,
        acc: &mut Gradients,
    ) -> Result<()> {
        self.check_trace(trace)?;
        if acc.layers.len() != self.layers.len() {
            return Err(Error::InvalidInput(
                "gradient accumulator does not match model".into(),
            ));
        }

        // softmax + cross-entropy: delta at the output is w · (p - y)
        let mut delta: Vec<f64> = trace
            .probs
            .iter()
            .zip(target)
            .map(|(p, y)| class_weight * (p - y))
            .collect();

        for k in (0..self.layers.len()).rev() {
            let input = &trace.layer_inputs[k];
            let grad_layer = &mut acc.layers[k];
            for (i, &d) in delta.iter().enumerate() {
                grad_layer.bias.0[i] += d;
                let row = grad_layer.weights.row_mut(i);
                for (g, &a) in row.iter_mut().zip(input.iter()) {
                    *g += d * a;
                }
            }
            if k == 0 {
                break;
            }
            // propagate to the layer below: W^T delta, then the dropout mask
            // and the ReLU gate of that layer's recorded forward pass
            let weights = &self.layers[k].weights;
            let mut below = vec![0.0; weights.cols()];
            for (i, &d) in delta.iter().enumerate() {
                for (b, &w) in below.iter_mut().zip(weights.row(i)) {
                    *b += d * w;
                }
            }
            let relu_out = &trace.relu_outputs[k - 1];
            if let Some(masks) = &trace.masks {
                for ((b, &m), &h) in below.iter_mut().zip(masks[k - 1].iter()).zip(relu_out.iter())
                {
                    *b *= m * if h > 0.0 { 1.0 } else { 0.0 };
                }
            } else {
                for (b, &h) in below.iter_mut().zip(relu_out.iter()) {
                    *b *= if h > 0.0 { 1.0 } else { 0.0 };
                }
            }
            delta = below;
        }
        Ok(())
    }

    fn check_trace(&self, trace: &Trace) -> Result<()> {
        let hidden_count = self.layers.len() - 1;
        if trace.layer_inputs.len() != self.layers.len()
            || trace.relu_outputs.len() != hidden_count
            || trace.masks.as_ref().is_some_and(|m| m.len() != hidden_count)
            || trace.probs.len() != self.arch.output_classes
        {
            return Err(Error::InvalidInput(
                "trace does not match model architecture".into(),
            ));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if trace.layer_inputs[k].len() != layer.weights.cols() {
                return Err(Error::Dimension {
                    context: "backward trace",
                    expected: layer.weights.cols(),
                    actual: trace.layer_inputs[k].len(),
                });
            }
        }
        Ok(())
    }
}

fn affine_relu(layer: &Layer, x: &Vector) -> Vector {
    let w = &layer.weights;
    let mut out = Vec::with_capacity(w.rows());
    for i in 0..w.rows() {
        out.push(relu_scalar(dot(w.row(i), x.as_slice()) + layer.bias[i]));
    }
    Vector(out)
}

fn affine_plain(layer: &Layer, x: &Vector) -> Vector {
    let w = &layer.weights;
    let mut out = Vec::with_capacity(w.rows());
    for i in 0..w.rows() {
        out.push(dot(w.row(i), x.as_slice()) + layer.bias[i]);
    }
    Vector(out)
}

fn prediction_from_logits(logits: Vector) -> Prediction {
    let probs = softmax(&logits);
    // tie (exactly 0.5/0.5) predicts the majority class, non-toponym
    let label = if probs[TOPONYM_CLASS] > probs[NON_TOPONYM_CLASS] {
        Label::Toponym
    } else {
        Label::NonToponym
    };
    Prediction {
        label,
        probabilities: probs,
    }
}

const MAGIC: &[u8; 8] = b"DFFNNMDL";
const FORMAT_VERSION: u32 = 1;

/// Writes the model: magic string, format version, architecture, seed, then
/// every parameter as little-endian f64 in layer order (weights row-major,
/// then bias, per layer).
pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(model.arch.input_dim as u32)?;
    w.write_u32::<LittleEndian>(model.arch.hidden_layers as u32)?;
    w.write_u32::<LittleEndian>(model.arch.hidden_units as u32)?;
    w.write_u32::<LittleEndian>(model.arch.output_classes as u32)?;
    w.write_f64::<LittleEndian>(model.arch.dropout_p)?;
    w.write_u64::<LittleEndian>(model.seed)?;
    for layer in &model.layers {
        for &v in layer.weights.data() {
            w.write_f64::<LittleEndian>(v)?;
        }
        for &v in layer.bias.iter() {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a model written by [`save_model`], validating magic, version, and
/// shape consistency. The round trip is bit-exact.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Serialization(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Serialization(format!(
            "unsupported format version {version}"
        )));
    }
    let arch = ArchConfig {
        input_dim: r.read_u32::<LittleEndian>()? as usize,
        hidden_layers: r.read_u32::<LittleEndian>()? as usize,
        hidden_units: r.read_u32::<LittleEndian>()? as usize,
        output_classes: r.read_u32::<LittleEndian>()? as usize,
        dropout_p: r.read_f64::<LittleEndian>()?,
    };
    arch.validate()
        .map_err(|e| Error::Serialization(e.to_string()))?;
    let seed = r.read_u64::<LittleEndian>()?;

    let mut layers = Vec::new();
    for (rows, cols) in arch.layer_shapes() {
        let mut data = vec![0.0; rows * cols];
        r.read_f64_into::<LittleEndian>(&mut data)
            .map_err(|_| Error::Serialization("truncated parameter block".into()))?;
        let mut bias = vec![0.0; rows];
        r.read_f64_into::<LittleEndian>(&mut bias)
            .map_err(|_| Error::Serialization("truncated parameter block".into()))?;
        if data.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Serialization("non-finite parameter".into()));
        }
        layers.push(Layer {
            weights: Matrix::from_rows(rows, cols, data)
                .map_err(|e| Error::Serialization(e.to_string()))?,
            bias: Vector(bias),
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Serialization("trailing bytes after parameters".into()));
    }
    Ok(ModelParams { layers, arch, seed })
}
