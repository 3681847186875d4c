use serde::{Deserialize, Serialize};

use super::dataset::TriModalBatch;
use super::schedule::ImportanceWeights;
use crate::error::{Error, Result};
use crate::math::{Activation, Loss, Matrix};
use crate::network::{chain_specs, GradientSet, LayerSpec, Network};
use crate::rng::derive_seed;

/// Layer widths of the five segments.
///
/// Main path: `x → [input encoder] → x̃ → [link] → ỹ → [output decoder] → y`.
/// The input decoder maps `x̃` back to `x`; the output encoder maps `y` to `ỹ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtlArchitecture {
    pub input_dim: usize,
    pub input_code_dim: usize,
    pub link_hidden: Vec<usize>,
    pub output_code_dim: usize,
    pub output_dim: usize,
}

impl MtlArchitecture {
    /// 2500 → 1025 → 512 → 64 → 136.
    pub fn full_scale() -> Self {
        Self {
            input_dim: 2500,
            input_code_dim: 1025,
            link_hidden: vec![512],
            output_code_dim: 64,
            output_dim: 136,
        }
    }

    /// 400 → 128 → 64 → 16 → 20.
    pub fn desk_scale() -> Self {
        Self {
            input_dim: 400,
            input_code_dim: 128,
            link_hidden: vec![64],
            output_code_dim: 16,
            output_dim: 20,
        }
    }

    fn link_widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_code_dim];
        w.extend(&self.link_hidden);
        w.push(self.output_code_dim);
        w
    }
}

/// The five parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    InputEncoder = 0,
    InputDecoder = 1,
    Link = 2,
    OutputEncoder = 3,
    OutputDecoder = 4,
}

impl Segment {
    pub const ALL: [Segment; 5] = [
        Segment::InputEncoder,
        Segment::InputDecoder,
        Segment::Link,
        Segment::OutputEncoder,
        Segment::OutputDecoder,
    ];
    pub const INPUT_AE: [Segment; 2] = [Segment::InputEncoder, Segment::InputDecoder];
    pub const OUTPUT_AE: [Segment; 2] = [Segment::OutputEncoder, Segment::OutputDecoder];
}

/// Main network plus input and output auto-encoders.
///
/// The input encoder and output decoder exist once and are used by both the
/// main path and their auto-encoder, so every update to them is seen by both.
#[derive(Debug, Clone, PartialEq)]
pub struct MtlNetwork {
    segments: [Network; 5],
}

/// Sub-losses of one minibatch and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MtlLosses {
    pub total: f64,
    /// `J_s`; `None` when the batch has no paired sample.
    pub supervised: Option<f64>,
    /// `J_in`; `None` when the batch has no input.
    pub input: Option<f64>,
    /// `J_out`; `None` when the batch has no label.
    pub output: Option<f64>,
}

/// Per-segment gradients; `None` marks segments the objective does not touch.
#[derive(Debug, Clone, PartialEq)]
pub struct MtlGradients {
    pub segments: [Option<GradientSet>; 5],
}

impl MtlGradients {
    pub fn empty() -> Self {
        Self {
            segments: Default::default(),
        }
    }

    pub fn get(&self, s: Segment) -> Option<&GradientSet> {
        self.segments[s as usize].as_ref()
    }

    fn accumulate(&mut self, s: Segment, g: GradientSet, weight: f64) -> Result<()> {
        match &mut self.segments[s as usize] {
            Some(acc) => acc.add_scaled(&g, weight),
            slot @ None => {
                let mut g = g;
                g.scale(weight);
                *slot = Some(g);
                Ok(())
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.segments.iter().flatten().all(GradientSet::is_finite)
    }
}

fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    Loss::MeanSquaredError.value(pred, target)
}

impl MtlNetwork {
    /// Sigmoid everywhere except the tanh output decoder.
    pub fn init(arch: &MtlArchitecture, seed: u64) -> Result<Self> {
        let sig = Activation::Sigmoid;
        let specs: [Vec<LayerSpec>; 5] = [
            vec![LayerSpec::new(arch.input_dim, arch.input_code_dim, sig)],
            vec![LayerSpec::new(arch.input_code_dim, arch.input_dim, sig)],
            chain_specs(&arch.link_widths(), sig, sig),
            vec![LayerSpec::new(arch.output_dim, arch.output_code_dim, sig)],
            vec![LayerSpec::new(arch.output_code_dim, arch.output_dim, Activation::Tanh)],
        ];
        let mut nets = Vec::with_capacity(5);
        for (i, s) in specs.iter().enumerate() {
            nets.push(Network::init(s, derive_seed(seed, i as u64))?);
        }
        Self::from_segments(nets.try_into().expect("five segments"))
    }

    pub fn from_segments(segments: [Network; 5]) -> Result<Self> {
        let [enc_in, dec_in, link, enc_out, dec_out] = &segments;
        let chain = [
            (enc_in, link, "input encoder → link"),
            (link, dec_out, "link → output decoder"),
            (enc_in, dec_in, "input encoder → input decoder"),
            (enc_out, dec_out, "output encoder → output decoder"),
        ];
        for (a, b, what) in chain {
            if a.output_dim() != b.input_dim() {
                return Err(Error::invalid(format!(
                    "{what}: {} outputs feed {} inputs",
                    a.output_dim(),
                    b.input_dim()
                )));
            }
        }
        if dec_in.output_dim() != enc_in.input_dim() || enc_out.input_dim() != dec_out.output_dim() {
            return Err(Error::invalid("auto-encoders must reconstruct their own input"));
        }
        Ok(Self { segments })
    }

    pub fn segment(&self, s: Segment) -> &Network {
        &self.segments[s as usize]
    }

    pub fn segment_mut(&mut self, s: Segment) -> &mut Network {
        &mut self.segments[s as usize]
    }

    pub fn segments(&self) -> &[Network; 5] {
        &self.segments
    }

    pub fn input_dim(&self) -> usize {
        self.segment(Segment::InputEncoder).input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.segment(Segment::OutputDecoder).output_dim()
    }

    /// Main path prediction `P̄_out(L(P_in(x)))`.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let code = self.segment(Segment::InputEncoder).predict(x)?;
        let link = self.segment(Segment::Link).predict(&code)?;
        self.segment(Segment::OutputDecoder).predict(&link)
    }

    /// `P̄_in(P_in(x))`
    pub fn reconstruct_input(&self, x: &Matrix) -> Result<Matrix> {
        let code = self.segment(Segment::InputEncoder).predict(x)?;
        self.segment(Segment::InputDecoder).predict(&code)
    }

    /// `P̄_out(P_out(y))`
    pub fn reconstruct_output(&self, y: &Matrix) -> Result<Matrix> {
        let code = self.segment(Segment::OutputEncoder).predict(y)?;
        self.segment(Segment::OutputDecoder).predict(&code)
    }

    /// `J_s`: mean squared error of the main path.
    pub fn supervised_loss(&self, x: &Matrix, y: &Matrix) -> Result<f64> {
        mse(&self.predict(x)?, y)
    }

    /// Evaluates the weighted criterion without gradients.
    pub fn criterion(&self, batch: &TriModalBatch, weights: ImportanceWeights) -> Result<MtlLosses> {
        weights.validate()?;
        let supervised = if batch.has_pairs() {
            Some(self.supervised_loss(&batch.paired_inputs, &batch.paired_targets)?)
        } else {
            None
        };
        let input = if batch.has_inputs() {
            Some(mse(&self.reconstruct_input(&batch.corrupted_inputs)?, &batch.inputs)?)
        } else {
            None
        };
        let output = if batch.has_targets() {
            Some(mse(&self.reconstruct_output(&batch.targets)?, &batch.targets)?)
        } else {
            None
        };
        Ok(MtlLosses {
            total: weights.supervised * supervised.unwrap_or(0.0)
                + weights.input * input.unwrap_or(0.0)
                + weights.output * output.unwrap_or(0.0),
            supervised,
            input,
            output,
        })
    }

    /// `J_in` and its gradients over the input encoder and decoder.
    pub fn input_task_gradient(&self, batch: &TriModalBatch) -> Result<(f64, GradientSet, GradientSet)> {
        let enc = self.segment(Segment::InputEncoder);
        let dec = self.segment(Segment::InputDecoder);
        let t_enc = enc.forward(&batch.corrupted_inputs)?;
        let t_dec = dec.forward(t_enc.output())?;
        let loss = mse(t_dec.output(), &batch.inputs)?;
        let d_out = Loss::MeanSquaredError.gradient(t_dec.output(), &batch.inputs)?;
        let (g_dec, d_code) = dec.backward_with_input_grad(&t_dec, &d_out)?;
        let g_enc = enc.backward_from_layer(&t_enc, enc.depth(), &d_code)?;
        Ok((loss, g_enc, g_dec))
    }

    /// `J_out` and its gradients over the output encoder and decoder.
    pub fn output_task_gradient(&self, batch: &TriModalBatch) -> Result<(f64, GradientSet, GradientSet)> {
        let enc = self.segment(Segment::OutputEncoder);
        let dec = self.segment(Segment::OutputDecoder);
        let t_enc = enc.forward(&batch.targets)?;
        let t_dec = dec.forward(t_enc.output())?;
        let loss = mse(t_dec.output(), &batch.targets)?;
        let d_out = Loss::MeanSquaredError.gradient(t_dec.output(), &batch.targets)?;
        let (g_dec, d_code) = dec.backward_with_input_grad(&t_dec, &d_out)?;
        let g_enc = enc.backward_from_layer(&t_enc, enc.depth(), &d_code)?;
        Ok((loss, g_enc, g_dec))
    }

    /// `J_s` and its gradients over the input encoder, link and output decoder.
    pub fn supervised_gradient(
        &self,
        x: &Matrix,
        y: &Matrix,
    ) -> Result<(f64, GradientSet, GradientSet, GradientSet)> {
        let enc = self.segment(Segment::InputEncoder);
        let link = self.segment(Segment::Link);
        let dec = self.segment(Segment::OutputDecoder);
        let t_enc = enc.forward(x)?;
        let t_link = link.forward(t_enc.output())?;
        let t_dec = dec.forward(t_link.output())?;
        let loss = mse(t_dec.output(), y)?;
        let d_out = Loss::MeanSquaredError.gradient(t_dec.output(), y)?;
        let (g_dec, d_link) = dec.backward_with_input_grad(&t_dec, &d_out)?;
        let (g_link, d_code) = link.backward_with_input_grad(&t_link, &d_link)?;
        let g_enc = enc.backward_from_layer(&t_enc, enc.depth(), &d_code)?;
        Ok((loss, g_enc, g_link, g_dec))
    }

    /// Gradient of `λ_sup·J_s + λ_in·J_in + λ_out·J_out`. Terms with zero
    /// weight or no applicable samples are skipped entirely.
    pub fn criterion_gradient(
        &self,
        batch: &TriModalBatch,
        weights: ImportanceWeights,
    ) -> Result<(MtlLosses, MtlGradients)> {
        weights.validate()?;
        let mut losses = MtlLosses::default();
        let mut grads = MtlGradients::empty();
        if batch.has_pairs() && weights.supervised > 0.0 {
            let (l, g_enc, g_link, g_dec) =
                self.supervised_gradient(&batch.paired_inputs, &batch.paired_targets)?;
            grads.accumulate(Segment::InputEncoder, g_enc, weights.supervised)?;
            grads.accumulate(Segment::Link, g_link, weights.supervised)?;
            grads.accumulate(Segment::OutputDecoder, g_dec, weights.supervised)?;
            losses.supervised = Some(l);
        }
        if batch.has_inputs() && weights.input > 0.0 {
            let (l, g_enc, g_dec) = self.input_task_gradient(batch)?;
            grads.accumulate(Segment::InputEncoder, g_enc, weights.input)?;
            grads.accumulate(Segment::InputDecoder, g_dec, weights.input)?;
            losses.input = Some(l);
        }
        if batch.has_targets() && weights.output > 0.0 {
            let (l, g_enc, g_dec) = self.output_task_gradient(batch)?;
            grads.accumulate(Segment::OutputEncoder, g_enc, weights.output)?;
            grads.accumulate(Segment::OutputDecoder, g_dec, weights.output)?;
            losses.output = Some(l);
        }
        losses.total = weights.supervised * losses.supervised.unwrap_or(0.0)
            + weights.input * losses.input.unwrap_or(0.0)
            + weights.output * losses.output.unwrap_or(0.0);
        Ok((losses, grads))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for s in &self.segments {
            let b = s.to_bytes();
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(&b);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut nets = Vec::with_capacity(5);
        let mut pos = 0;
        for _ in 0..5 {
            let len_bytes = bytes
                .get(pos..pos + 8)
                .ok_or_else(|| Error::Checkpoint("truncated multi-task checkpoint".into()))?;
            let len = u64::from_le_bytes(len_bytes.try_into().expect("8 bytes")) as usize;
            pos += 8;
            let body = bytes
                .get(pos..pos + len)
                .ok_or_else(|| Error::Checkpoint("truncated multi-task checkpoint".into()))?;
            nets.push(Network::from_bytes(body)?);
            pos += len;
        }
        if pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Self::from_segments(nets.try_into().expect("five segments"))
    }
}
