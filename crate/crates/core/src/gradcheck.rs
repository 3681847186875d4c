//! Central finite-difference checks of every analytic gradient.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hint::{hint_penalty, hint_penalty_gradient, Dissimilarity};
use crate::math::{Activation, Loss, Matrix};
use crate::mtl::{ImportanceWeights, MtlArchitecture, MtlNetwork, SampleKind, TriModalBatch, TriModalDataset};
use crate::network::{chain_specs, GradientSet, Network};
use crate::rng::rng_for;

pub const FD_STEP: f64 = 1e-6;
pub const REL_TOLERANCE: f64 = 1e-5;
/// Magnitude below which errors are measured absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-4;
/// Pre-activations and NMD coordinate gaps closer than this to a kink are resampled.
const KINK_MARGIN: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Central differences of `f` around `params`.
pub fn numeric_gradient(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p)?;
        p[i] = orig - h;
        let down = f(&p)?;
        p[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Largest relative error between two gradients.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

pub fn flatten_network(net: &Network) -> Vec<f64> {
    net.weights().iter().flat_map(|w| w.data().iter().copied()).collect()
}

pub fn load_network_params(net: &mut Network, params: &[f64]) -> Result<()> {
    if params.len() != net.parameter_count() {
        return Err(Error::invalid(format!(
            "{} parameters for a network with {}",
            params.len(),
            net.parameter_count()
        )));
    }
    let mut pos = 0;
    for w in net.weights_mut() {
        let d = w.data_mut();
        d.copy_from_slice(&params[pos..pos + d.len()]);
        pos += d.len();
    }
    Ok(())
}

pub fn flatten_gradients(g: &GradientSet) -> Vec<f64> {
    g.layers().iter().flat_map(|m| m.data().iter().copied()).collect()
}

fn flatten_mtl(net: &MtlNetwork) -> Vec<f64> {
    net.segments().iter().flat_map(flatten_network).collect()
}

fn load_mtl_params(net: &mut MtlNetwork, params: &[f64]) -> Result<()> {
    let mut pos = 0;
    for s in crate::mtl::Segment::ALL {
        let seg = net.segment_mut(s);
        let n = seg.parameter_count();
        load_network_params(seg, &params[pos..pos + n])?;
        pos += n;
    }
    Ok(())
}

/// Objective family exercised by one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CheckKind {
    /// Plain network with a given hidden activation and output/loss pairing.
    Network {
        hidden: Activation,
        output: Activation,
        loss: Loss,
    },
    /// Weighted three-task criterion with all weights at 1 and shared segments.
    MultiTask,
    /// `γ·CE + λ·J_H` at a hidden layer.
    Hint { measure: Dissimilarity },
}

impl CheckKind {
    /// Every family, network pairings first.
    pub fn all() -> Vec<CheckKind> {
        let hidden = [
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Relu,
            Activation::Identity,
        ];
        let heads = [
            (Activation::Softmax, Loss::CrossEntropy),
            (Activation::Sigmoid, Loss::MeanSquaredError),
            (Activation::Tanh, Loss::MeanSquaredError),
            (Activation::Identity, Loss::MeanSquaredError),
            (Activation::Relu, Loss::MeanSquaredError),
        ];
        let mut kinds = Vec::new();
        for h in hidden {
            for (output, loss) in heads {
                kinds.push(CheckKind::Network {
                    hidden: h,
                    output,
                    loss,
                });
            }
        }
        kinds.push(CheckKind::MultiTask);
        for measure in [Dissimilarity::Sed, Dissimilarity::Nmd, Dissimilarity::As] {
            kinds.push(CheckKind::Hint { measure });
        }
        kinds
    }

    /// Short name without commas, e.g. `tanh/softmax/crossentropy`.
    pub fn label(&self) -> String {
        match self {
            CheckKind::Network {
                hidden,
                output,
                loss,
            } => format!("{hidden:?}/{output:?}/{loss:?}").to_lowercase(),
            CheckKind::MultiTask => "multitask".into(),
            CheckKind::Hint { measure } => format!("hint/{measure:?}").to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub kind: CheckKind,
    pub widths: Vec<usize>,
    pub batch: usize,
    pub parameters: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub cases: Vec<CaseReport>,
    pub max_rel_error: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOLERANCE
    }

    pub fn worst(&self) -> Option<&CaseReport> {
        self.cases
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect())
        .expect("finite")
}

fn random_widths(rng: &mut impl Rng, depth: usize) -> Vec<usize> {
    (0..=depth).map(|_| rng.gen_range(2..=10)).collect()
}

fn random_net(rng: &mut impl Rng, widths: &[usize], hidden: Activation, output: Activation) -> Network {
    let specs = chain_specs(widths, hidden, output);
    let mut net = Network::init(&specs, rng.gen()).expect("valid specs");
    // non-zero biases so nothing sits on a symmetric point
    for w in net.weights_mut() {
        let (r, c) = w.shape();
        for j in 0..c {
            w.set(r - 1, j, rng.gen_range(-0.5..0.5));
        }
    }
    net
}

fn near_kink(net: &Network, x: &Matrix) -> Result<bool> {
    let trace = net.forward(x)?;
    for (k, spec) in net.specs().iter().enumerate() {
        if spec.activation == Activation::Relu
            && trace.pre_activations[k].data().iter().any(|z| z.abs() < KINK_MARGIN)
        {
            return Ok(true);
        }
    }
    Ok(false)
}

fn check_network(rng: &mut impl Rng, hidden: Activation, output: Activation, loss: Loss) -> Result<CaseReport> {
    let depth = rng.gen_range(2..=4);
    let widths = random_widths(rng, depth);
    let batch = rng.gen_range(1..=6);
    let (net, x) = loop {
        let net = random_net(rng, &widths, hidden, output);
        let x = random_matrix(rng, batch, widths[0], -1.0, 1.0);
        if !near_kink(&net, &x)? {
            break (net, x);
        }
    };
    let out_dim = widths[depth];
    let y = match loss {
        Loss::CrossEntropy => {
            let mut y = Matrix::zeros(batch, out_dim);
            for i in 0..batch {
                y.set(i, rng.gen_range(0..out_dim), 1.0);
            }
            y
        }
        Loss::MeanSquaredError => random_matrix(rng, batch, out_dim, -1.0, 1.0),
    };
    let trace = net.forward(&x)?;
    let analytic = flatten_gradients(&net.backward(&trace, loss, &y)?);
    let mut probe = net.clone();
    let numeric = numeric_gradient(&flatten_network(&net), FD_STEP, |p| {
        load_network_params(&mut probe, p)?;
        loss.value(&probe.predict(&x)?, &y)
    })?;
    Ok(CaseReport {
        kind: CheckKind::Network {
            hidden,
            output,
            loss,
        },
        widths,
        batch,
        parameters: analytic.len(),
        max_rel_error: max_relative_error(&analytic, &numeric),
    })
}

fn check_multitask(rng: &mut impl Rng) -> Result<CaseReport> {
    let arch = MtlArchitecture {
        input_dim: rng.gen_range(3..=10),
        input_code_dim: rng.gen_range(2..=8),
        link_hidden: vec![rng.gen_range(2..=8)],
        output_code_dim: rng.gen_range(2..=6),
        output_dim: rng.gen_range(2..=8),
    };
    let batch = rng.gen_range(1..=6);
    let mut net = MtlNetwork::init(&arch, rng.gen())?;
    for s in crate::mtl::Segment::ALL {
        for w in net.segment_mut(s).weights_mut() {
            let (r, c) = w.shape();
            for j in 0..c {
                w.set(r - 1, j, rng.gen_range(-0.5..0.5));
            }
        }
    }
    let x = random_matrix(rng, batch, arch.input_dim, 0.0, 1.0);
    let y = random_matrix(rng, batch, arch.output_dim, -0.9, 0.9);
    let data = TriModalDataset::new(x, y, vec![SampleKind::Paired; batch])?;
    let idx: Vec<usize> = (0..batch).collect();
    let tri = TriModalBatch::gather(&data, &idx, 0.2, rng.gen())?;
    let w = ImportanceWeights::new(1.0, 1.0, 1.0);
    let (_, grads) = net.criterion_gradient(&tri, w)?;
    let analytic: Vec<f64> = crate::mtl::Segment::ALL
        .iter()
        .flat_map(|&s| flatten_gradients(grads.get(s).expect("all segments active")))
        .collect();
    let mut probe = net.clone();
    let numeric = numeric_gradient(&flatten_mtl(&net), FD_STEP, |p| {
        load_mtl_params(&mut probe, p)?;
        Ok(probe.criterion(&tri, w)?.total)
    })?;
    let mut widths = vec![arch.input_dim, arch.input_code_dim];
    widths.extend(&arch.link_hidden);
    widths.extend([arch.output_code_dim, arch.output_dim]);
    Ok(CaseReport {
        kind: CheckKind::MultiTask,
        widths,
        batch,
        parameters: analytic.len(),
        max_rel_error: max_relative_error(&analytic, &numeric),
    })
}

fn nmd_near_kink(reps: &Matrix, labels: &[usize]) -> bool {
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if labels[i] == labels[j]
                && reps
                    .row(i)
                    .iter()
                    .zip(reps.row(j))
                    .any(|(a, b)| (a - b).abs() < KINK_MARGIN)
            {
                return true;
            }
        }
    }
    false
}

fn check_hint(rng: &mut impl Rng, measure: Dissimilarity) -> Result<CaseReport> {
    let depth = rng.gen_range(2..=4);
    let widths = random_widths(rng, depth);
    let batch = rng.gen_range(2..=6);
    let classes = widths[depth];
    let hidden = *[Activation::Sigmoid, Activation::Tanh]
        .choose(rng)
        .expect("non-empty");
    let layer = rng.gen_range(1..depth);
    let gamma = rng.gen_range(0.5..2.0);
    let lambda = rng.gen_range(0.5..2.0);
    let (net, x, labels) = loop {
        let net = random_net(rng, &widths, hidden, Activation::Softmax);
        let x = random_matrix(rng, batch, widths[0], -1.0, 1.0);
        let mut labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
        labels[1] = labels[0];
        let reps = net.hidden_representation(&x, layer)?;
        let pg = hint_penalty_gradient(&reps, &labels, measure)?;
        let bad = pg.singular_pairs > 0 || (measure == Dissimilarity::Nmd && nmd_near_kink(&reps, &labels));
        if !bad {
            break (net, x, labels);
        }
    };
    let mut y = Matrix::zeros(batch, classes);
    for (i, &l) in labels.iter().enumerate() {
        y.set(i, l, 1.0);
    }
    let trace = net.forward(&x)?;
    let mut grads = net.backward(&trace, Loss::CrossEntropy, &y)?;
    grads.scale(gamma);
    let pg = hint_penalty_gradient(trace.layer_output(layer), &labels, measure)?;
    grads.add_scaled(&net.backward_from_layer(&trace, layer, &pg.grad)?, lambda)?;
    let analytic = flatten_gradients(&grads);
    let mut probe = net.clone();
    let numeric = numeric_gradient(&flatten_network(&net), FD_STEP, |p| {
        load_network_params(&mut probe, p)?;
        let t = probe.forward(&x)?;
        Ok(gamma * Loss::CrossEntropy.value(t.output(), &y)?
            + lambda * hint_penalty(t.layer_output(layer), &labels, measure)?)
    })?;
    Ok(CaseReport {
        kind: CheckKind::Hint { measure },
        widths,
        batch,
        parameters: analytic.len(),
        max_rel_error: max_relative_error(&analytic, &numeric),
    })
}

pub fn check_case(kind: CheckKind, seed: u64) -> Result<CaseReport> {
    let mut rng = rng_for(seed, 0x6C);
    match kind {
        CheckKind::Network {
            hidden,
            output,
            loss,
        } => check_network(&mut rng, hidden, output, loss),
        CheckKind::MultiTask => check_multitask(&mut rng),
        CheckKind::Hint { measure } => check_hint(&mut rng, measure),
    }
}

/// `configs` random checks cycling through [`CheckKind::all`].
pub fn run_suite(configs: usize, seed: u64) -> Result<SuiteReport> {
    let kinds = CheckKind::all();
    let mut cases = Vec::with_capacity(configs);
    for i in 0..configs {
        cases.push(check_case(kinds[i % kinds.len()], seed.wrapping_add(i as u64))?);
    }
    let max_rel_error = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(SuiteReport {
        cases,
        max_rel_error,
    })
}
