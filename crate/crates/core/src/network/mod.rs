//! Dense feedforward networks with hand-derived backpropagation.
//!
//! Every layer stores one weight matrix of shape `(input_dim + 1) × output_dim`
//! whose last row is the bias, so a layer computes `φ([x | 1] · W)`.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointFormat};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{matmul_into, Activation, Loss, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            activation,
        }
    }
}

/// Builds a chain of specs from a list of widths, using `hidden` everywhere
/// except the last layer.
pub fn chain_specs(widths: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
    let n = widths.len().saturating_sub(1);
    widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec::new(w[0], w[1], if i + 1 == n { output } else { hidden }))
        .collect()
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::invalid("network needs at least one layer"));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.input_dim == 0 || s.output_dim == 0 {
            return Err(Error::invalid(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && specs[i - 1].output_dim != s.input_dim {
            return Err(Error::invalid(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                specs[i - 1].output_dim,
                s.input_dim
            )));
        }
        if s.activation == Activation::Softmax && i + 1 != specs.len() {
            return Err(Error::invalid(format!(
                "softmax is only allowed on the output layer (found on layer {i})"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    specs: Vec<LayerSpec>,
    weights: Vec<Matrix>,
}

/// Activations recorded by a forward pass.
///
/// `outputs[0]` is the input batch and `outputs[k]` the post-activation of
/// layer `k`; `pre_activations[k - 1]` holds the matching `z_k`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub outputs: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("trace always holds the input")
    }

    pub fn layer_output(&self, k: usize) -> &Matrix {
        &self.outputs[k]
    }
}

/// One gradient matrix per layer, shaped like the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    layers: Vec<Matrix>,
}

impl GradientSet {
    pub fn zeros_for(net: &Network) -> Self {
        Self {
            layers: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
        }
    }

    pub fn from_layers(layers: Vec<Matrix>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &Matrix {
        &self.layers[k]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Matrix::is_finite)
    }

    pub fn scale(&mut self, s: f64) {
        for m in &mut self.layers {
            for v in m.data_mut() {
                *v *= s;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &GradientSet, s: f64) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::invalid("gradient sets have different layer counts"));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_scaled_in_place(b, s)?;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.layers.iter().map(Matrix::max_abs).fold(0.0, f64::max)
    }
}

impl Network {
    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = specs
            .iter()
            .map(|s| {
                let bound = (6.0 / (s.input_dim + s.output_dim) as f64).sqrt();
                let mut w = Matrix::zeros(s.input_dim + 1, s.output_dim);
                for v in &mut w.data_mut()[..s.input_dim * s.output_dim] {
                    *v = rng.gen_range(-bound..bound);
                }
                w
            })
            .collect();
        Ok(Self {
            specs: specs.to_vec(),
            weights,
        })
    }

    pub fn from_parts(specs: Vec<LayerSpec>, weights: Vec<Matrix>) -> Result<Self> {
        validate_specs(&specs)?;
        if specs.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} layer specs but {} weight matrices",
                specs.len(),
                weights.len()
            )));
        }
        for (s, w) in specs.iter().zip(&weights) {
            if w.shape() != (s.input_dim + 1, s.output_dim) {
                return Err(Error::shape(
                    "from_parts",
                    w.shape(),
                    (s.input_dim + 1, s.output_dim),
                ));
            }
            w.ensure_finite("from_parts")?;
        }
        Ok(Self { specs, weights })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn depth(&self) -> usize {
        self.specs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].output_dim
    }

    pub fn output_activation(&self) -> Activation {
        self.specs[self.specs.len() - 1].activation
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace> {
        self.forward_upto(batch, self.depth())
    }

    /// Forward pass through the first `layers` layers only.
    pub fn forward_upto(&self, batch: &Matrix, layers: usize) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(
                "forward",
                batch.shape(),
                (batch.rows(), self.input_dim()),
            ));
        }
        if layers > self.depth() {
            return Err(Error::invalid(format!(
                "requested {layers} layers from a {}-layer network",
                self.depth()
            )));
        }
        let mut outputs = Vec::with_capacity(layers + 1);
        let mut pre_activations = Vec::with_capacity(layers);
        outputs.push(batch.clone());
        for k in 0..layers {
            let z = affine(&outputs[k], &self.weights[k]);
            z.ensure_finite("forward")?;
            outputs.push(self.specs[k].activation.apply(&z));
            pre_activations.push(z);
        }
        Ok(ForwardTrace {
            outputs,
            pre_activations,
        })
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let mut trace = self.forward(batch)?;
        Ok(trace.outputs.pop().expect("non-empty trace"))
    }

    /// Post-activation of hidden layer `layer_index` (1-based, excluding the
    /// output layer).
    pub fn hidden_representation(&self, batch: &Matrix, layer_index: usize) -> Result<Matrix> {
        if layer_index == 0 || layer_index >= self.depth() {
            return Err(Error::invalid(format!(
                "hidden layer index {layer_index} outside 1..={}",
                self.depth() - 1
            )));
        }
        let mut trace = self.forward_upto(batch, layer_index)?;
        Ok(trace.outputs.pop().expect("non-empty trace"))
    }

    /// Gradient of `loss(prediction, target)` with respect to every weight.
    ///
    /// Softmax outputs only pair with cross-entropy, whose combined output
    /// delta is `(softmax(z) - y) / N`.
    pub fn backward(&self, trace: &ForwardTrace, loss: Loss, target: &Matrix) -> Result<GradientSet> {
        self.check_trace(trace, self.depth())?;
        let prediction = trace.output();
        if prediction.shape() != target.shape() {
            return Err(Error::shape("backward", prediction.shape(), target.shape()));
        }
        let delta = match (self.output_activation(), loss) {
            (Activation::Softmax, Loss::CrossEntropy) => {
                // validates the one-hot rows
                loss.value(prediction, target)?;
                let n = prediction.rows().max(1) as f64;
                prediction.zip_map(target, |p, y| (p - y) / n)?
            }
            (Activation::Softmax, _) | (_, Loss::CrossEntropy) => {
                return Err(Error::Unsupported(format!(
                    "{loss:?} with {:?} output",
                    self.output_activation()
                )))
            }
            (act, _) => {
                let d_out = loss.gradient(prediction, target)?;
                d_out.hadamard(&act.derivative(trace.pre_activations.last().unwrap())?)?
            }
        };
        Ok(self.propagate(trace, self.depth(), delta, false)?.0)
    }

    /// Backpropagates an upstream gradient `d_repr = ∂J/∂ŷ_k` given at the
    /// output of layer `k` (1-based). Layers above `k` get zero gradients.
    pub fn backward_from_layer(
        &self,
        trace: &ForwardTrace,
        k: usize,
        d_repr: &Matrix,
    ) -> Result<GradientSet> {
        Ok(self.backward_from_layer_impl(trace, k, d_repr, false)?.0)
    }

    /// Like [`Network::backward_from_layer`] at the output layer, also
    /// returning `∂J/∂input`.
    pub fn backward_with_input_grad(
        &self,
        trace: &ForwardTrace,
        d_output: &Matrix,
    ) -> Result<(GradientSet, Matrix)> {
        let (g, dx) = self.backward_from_layer_impl(trace, self.depth(), d_output, true)?;
        Ok((g, dx.expect("input gradient requested")))
    }

    fn backward_from_layer_impl(
        &self,
        trace: &ForwardTrace,
        k: usize,
        d_repr: &Matrix,
        want_input: bool,
    ) -> Result<(GradientSet, Option<Matrix>)> {
        if k == 0 || k > self.depth() {
            return Err(Error::invalid(format!(
                "layer index {k} outside 1..={}",
                self.depth()
            )));
        }
        self.check_trace(trace, k)?;
        let z = &trace.pre_activations[k - 1];
        if d_repr.shape() != z.shape() {
            return Err(Error::shape("backward_from_layer", d_repr.shape(), z.shape()));
        }
        let delta = d_repr.hadamard(&self.specs[k - 1].activation.derivative(z)?)?;
        self.propagate(trace, k, delta, want_input)
    }

    fn check_trace(&self, trace: &ForwardTrace, needed: usize) -> Result<()> {
        if trace.outputs.len() < needed + 1 || trace.pre_activations.len() < needed {
            return Err(Error::invalid(format!(
                "trace covers {} layers, {needed} needed",
                trace.pre_activations.len()
            )));
        }
        for k in 0..needed {
            let expected = (trace.outputs[0].rows(), self.specs[k].output_dim);
            if trace.pre_activations[k].shape() != expected
                || trace.outputs[k].cols() != self.specs[k].input_dim
            {
                return Err(Error::invalid(format!(
                    "trace layer {} does not match the network",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// `delta` is `∂J/∂z_top`. Walks down to layer 1.
    fn propagate(
        &self,
        trace: &ForwardTrace,
        top: usize,
        mut delta: Matrix,
        want_input: bool,
    ) -> Result<(GradientSet, Option<Matrix>)> {
        let mut grads = GradientSet::zeros_for(self);
        let mut input_grad = None;
        for k in (1..=top).rev() {
            let below = &trace.outputs[k - 1];
            let top_rows = below.transpose_matmul(&delta)?;
            let mut data = top_rows.into_data();
            data.extend(delta.column_sums());
            grads.layers[k - 1] = Matrix::from_vec(below.cols() + 1, delta.cols(), data)?;

            if k > 1 || want_input {
                let d_below = back_through_weights(&delta, &self.weights[k - 1]);
                if k > 1 {
                    let act = self.specs[k - 2].activation;
                    delta = d_below.hadamard(&act.derivative(&trace.pre_activations[k - 2])?)?;
                } else {
                    input_grad = Some(d_below);
                }
            }
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("backward"));
        }
        Ok((grads, input_grad))
    }
}

/// `[x | 1] · w`
fn affine(x: &Matrix, w: &Matrix) -> Matrix {
    let (n, d) = x.shape();
    let m = w.cols();
    let mut out = Matrix::zeros(n, m);
    matmul_into(x.data(), n, d, w.data(), m, out.data_mut());
    let bias = w.row(d);
    for r in 0..n {
        for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
            *o += b;
        }
    }
    out
}

/// `delta · W_topᵀ`, dropping the bias row.
fn back_through_weights(delta: &Matrix, w: &Matrix) -> Matrix {
    let d = w.rows() - 1;
    let mut out = Matrix::zeros(delta.rows(), d);
    for r in 0..delta.rows() {
        let dr = delta.row(r);
        let orow = out.row_mut(r);
        for (i, o) in orow.iter_mut().enumerate() {
            let wi = w.row(i);
            let mut acc = 0.0;
            for (a, b) in dr.iter().zip(wi) {
                acc += a * b;
            }
            *o = acc;
        }
    }
    out
}
