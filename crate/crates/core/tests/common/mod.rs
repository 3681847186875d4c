//! Test-side oracles shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use regnet::hint::{hint_penalty, hint_penalty_gradient, Dissimilarity};
use regnet::math::{Activation, Loss, Matrix};
use regnet::mtl::{
    ImportanceWeights, MtlArchitecture, MtlNetwork, SampleKind, Segment, TriModalBatch,
    TriModalDataset,
};
use regnet::network::{chain_specs, GradientSet, Network};
use regnet::rng::rng_for;

pub const H: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, 1e-4)`
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

/// Exhaustive double loop over ordered same-class pairs.
pub fn double_loop_penalty(reps: &Matrix, labels: &[usize], measure: Dissimilarity) -> f64 {
    let classes: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort();
        c.dedup();
        c
    };
    let mut sum = 0.0;
    let mut present = 0usize;
    for &s in &classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == s).collect();
        let n = members.len();
        if n < 2 {
            continue;
        }
        present += 1;
        let mut class_total = 0.0;
        for &i in &members {
            let mut per_sample = 0.0;
            for &j in &members {
                if i != j {
                    per_sample += oracle_measure(reps.row(i), reps.row(j), measure);
                }
            }
            class_total += per_sample / (n - 1) as f64;
        }
        sum += class_total / n as f64;
    }
    if present == 0 {
        0.0
    } else {
        sum / present as f64
    }
}

pub fn oracle_measure(a: &[f64], b: &[f64], measure: Dissimilarity) -> f64 {
    match measure {
        Dissimilarity::Sed => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum(),
        Dissimilarity::Nmd => {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
        }
        Dissimilarity::As => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            (dot / (na * nb)).clamp(-1.0, 1.0).acos()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum GradKind {
    Net {
        hidden: Activation,
        output: Activation,
        loss: Loss,
    },
    MultiTask,
    Hint(Dissimilarity),
}

pub fn gradient_kinds() -> Vec<GradKind> {
    let mut kinds = Vec::new();
    for hidden in [
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Relu,
        Activation::Identity,
    ] {
        for (output, loss) in [
            (Activation::Softmax, Loss::CrossEntropy),
            (Activation::Sigmoid, Loss::MeanSquaredError),
            (Activation::Tanh, Loss::MeanSquaredError),
            (Activation::Identity, Loss::MeanSquaredError),
            (Activation::Relu, Loss::MeanSquaredError),
        ] {
            kinds.push(GradKind::Net {
                hidden,
                output,
                loss,
            });
        }
    }
    kinds.push(GradKind::MultiTask);
    for m in [Dissimilarity::Sed, Dissimilarity::Nmd, Dissimilarity::As] {
        kinds.push(GradKind::Hint(m));
    }
    kinds
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn randomize_biases(rng: &mut impl Rng, net: &mut Network) {
    for w in net.weights_mut() {
        let last = w.rows() - 1;
        for v in w.row_mut(last) {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
}

fn one_hot(labels: &[usize], classes: usize) -> Matrix {
    let mut y = Matrix::zeros(labels.len(), classes);
    for (i, &l) in labels.iter().enumerate() {
        y.set(i, l, 1.0);
    }
    y
}

fn relu_near_kink(net: &Network, x: &Matrix) -> bool {
    let trace = net.forward(x).unwrap();
    net.specs().iter().enumerate().any(|(k, s)| {
        s.activation == Activation::Relu
            && trace.pre_activations[k].data().iter().any(|z| z.abs() < 1e-4)
    })
}

/// Central differences over every weight of `nets`, compared with `analytic`
/// (same layout). Returns the max relative error.
fn compare_fd(
    nets: &mut [Network],
    analytic: &[GradientSet],
    objective: &dyn Fn(&[Network]) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 0..nets.len() {
        for k in 0..nets[n].depth() {
            for j in 0..nets[n].weights()[k].data().len() {
                let orig = nets[n].weights()[k].data()[j];
                nets[n].weights_mut()[k].data_mut()[j] = orig + H;
                let plus = objective(nets);
                nets[n].weights_mut()[k].data_mut()[j] = orig - H;
                let minus = objective(nets);
                nets[n].weights_mut()[k].data_mut()[j] = orig;
                let numeric = (plus - minus) / (2.0 * H);
                worst = worst.max(rel_err(analytic[n].layer(k).data()[j], numeric));
            }
        }
    }
    worst
}

/// Max relative error between analytic and finite-difference gradients for one
/// random configuration of `kind`.
pub fn gradient_case(kind: &GradKind, seed: u64) -> f64 {
    let mut rng = rng_for(seed, 0xF0);
    match *kind {
        GradKind::Net {
            hidden,
            output,
            loss,
        } => {
            let depth = rng.gen_range(2..=4);
            let widths: Vec<usize> = (0..=depth).map(|_| rng.gen_range(2..=10)).collect();
            let batch = rng.gen_range(1..=6);
            let (net, x) = loop {
                let mut net =
                    Network::init(&chain_specs(&widths, hidden, output), rng.gen()).unwrap();
                randomize_biases(&mut rng, &mut net);
                let x = random_matrix(&mut rng, batch, widths[0], -1.0, 1.0);
                if !relu_near_kink(&net, &x) {
                    break (net, x);
                }
            };
            let classes = widths[depth];
            let y = match loss {
                Loss::CrossEntropy => {
                    let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
                    one_hot(&labels, classes)
                }
                Loss::MeanSquaredError => random_matrix(&mut rng, batch, classes, -1.0, 1.0),
            };
            let analytic = net.backward(&net.forward(&x).unwrap(), loss, &y).unwrap();
            let objective = |nets: &[Network]| loss.value(&nets[0].predict(&x).unwrap(), &y).unwrap();
            compare_fd(&mut [net], &[analytic], &objective)
        }
        GradKind::MultiTask => {
            let arch = MtlArchitecture {
                input_dim: rng.gen_range(3..=10),
                input_code_dim: rng.gen_range(2..=8),
                link_hidden: vec![rng.gen_range(2..=8)],
                output_code_dim: rng.gen_range(2..=6),
                output_dim: rng.gen_range(2..=8),
            };
            let batch = rng.gen_range(2..=6);
            let mut net = MtlNetwork::init(&arch, rng.gen()).unwrap();
            for s in Segment::ALL {
                randomize_biases(&mut rng, net.segment_mut(s));
            }
            let x = random_matrix(&mut rng, batch, arch.input_dim, 0.0, 1.0);
            let y = random_matrix(&mut rng, batch, arch.output_dim, -0.9, 0.9);
            let mut kinds = vec![SampleKind::Paired; batch];
            kinds[0] = *[SampleKind::InputOnly, SampleKind::LabelOnly, SampleKind::Paired]
                .choose(&mut rng)
                .unwrap();
            kinds[1] = SampleKind::Paired;
            let data = TriModalDataset::new(x, y, kinds).unwrap();
            let idx: Vec<usize> = (0..batch).collect();
            let tri = TriModalBatch::gather(&data, &idx, 0.2, rng.gen()).unwrap();
            let w = ImportanceWeights::new(
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.2..1.0),
            );
            let (_, grads) = net.criterion_gradient(&tri, w).unwrap();
            let analytic: Vec<GradientSet> = Segment::ALL
                .iter()
                .map(|&s| grads.get(s).expect("every segment is active").clone())
                .collect();
            // segments in ALL order: in-enc, in-dec, link, out-enc, out-dec
            let objective = |nets: &[Network]| {
                let mse = |p: &Matrix, t: &Matrix| Loss::MeanSquaredError.value(p, t).unwrap();
                let code = nets[0].predict(&tri.paired_inputs).unwrap();
                let pred = nets[4].predict(&nets[2].predict(&code).unwrap()).unwrap();
                let mut total = w.supervised * mse(&pred, &tri.paired_targets);
                if tri.inputs.rows() > 0 {
                    let rec = nets[1]
                        .predict(&nets[0].predict(&tri.corrupted_inputs).unwrap())
                        .unwrap();
                    total += w.input * mse(&rec, &tri.inputs);
                }
                if tri.targets.rows() > 0 {
                    let rec = nets[4]
                        .predict(&nets[3].predict(&tri.targets).unwrap())
                        .unwrap();
                    total += w.output * mse(&rec, &tri.targets);
                }
                total
            };
            let mut nets: Vec<Network> = Segment::ALL.iter().map(|&s| net.segment(s).clone()).collect();
            compare_fd(&mut nets, &analytic, &objective)
        }
        GradKind::Hint(measure) => {
            let depth = rng.gen_range(2..=4);
            let widths: Vec<usize> = (0..=depth).map(|_| rng.gen_range(2..=10)).collect();
            let batch = rng.gen_range(2..=6);
            let classes = widths[depth];
            let layer = rng.gen_range(1..depth);
            let hidden = if rng.gen_bool(0.5) {
                Activation::Sigmoid
            } else {
                Activation::Tanh
            };
            let (gamma, lambda) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
            let (net, x, labels) = loop {
                let mut net = Network::init(
                    &chain_specs(&widths, hidden, Activation::Softmax),
                    rng.gen(),
                )
                .unwrap();
                randomize_biases(&mut rng, &mut net);
                let x = random_matrix(&mut rng, batch, widths[0], -1.0, 1.0);
                let mut labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
                labels[1] = labels[0];
                let reps = net.hidden_representation(&x, layer).unwrap();
                let pg = hint_penalty_gradient(&reps, &labels, measure).unwrap();
                let near_kink = measure == Dissimilarity::Nmd
                    && (0..batch).any(|i| {
                        (i + 1..batch).any(|j| {
                            labels[i] == labels[j]
                                && reps
                                    .row(i)
                                    .iter()
                                    .zip(reps.row(j))
                                    .any(|(a, b)| (a - b).abs() < 1e-4)
                        })
                    });
                if pg.singular_pairs == 0 && !near_kink {
                    break (net, x, labels);
                }
            };
            let y = one_hot(&labels, classes);
            let trace = net.forward(&x).unwrap();
            let mut grads = net.backward(&trace, Loss::CrossEntropy, &y).unwrap();
            grads.scale(gamma);
            let pg = hint_penalty_gradient(trace.layer_output(layer), &labels, measure).unwrap();
            let hint_grads = net.backward_from_layer(&trace, layer, &pg.grad).unwrap();
            grads.add_scaled(&hint_grads, lambda).unwrap();
            let objective = |nets: &[Network]| {
                let t = nets[0].forward(&x).unwrap();
                gamma * Loss::CrossEntropy.value(t.output(), &y).unwrap()
                    + lambda * hint_penalty(t.layer_output(layer), &labels, measure).unwrap()
            };
            compare_fd(&mut [net], &[grads], &objective)
        }
    }
}
