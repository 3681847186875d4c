use serde::{Deserialize, Serialize};

use super::{hint_penalty, hint_penalty_gradient, Dissimilarity};
use crate::error::{Error, Result};
use crate::math::{Loss, Matrix};
use crate::network::Network;
use crate::optim::{sgd_step, sgd_step_layers, OptimConfig, OptimizerState};
use crate::rng::epoch_permutation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HintConfig {
    /// 1-based hidden layer whose output is penalized.
    pub layer_index: usize,
    pub measure: Dissimilarity,
    /// Weight of the supervised cross-entropy term.
    pub gamma: f64,
    /// Weight of the hint term.
    pub lambda: f64,
}

impl HintConfig {
    /// Last hidden layer, SED, `γ = λ = 1`.
    pub fn for_network(net: &Network) -> Self {
        Self {
            layer_index: net.depth() - 1,
            measure: Dissimilarity::Sed,
            gamma: 1.0,
            lambda: 1.0,
        }
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(self.gamma >= 0.0 && self.lambda >= 0.0) {
            return Err(Error::invalid("hint weights gamma and lambda must be >= 0"));
        }
        if self.layer_index == 0 || self.layer_index >= net.depth() {
            return Err(Error::invalid(format!(
                "hint layer {} outside 1..={}",
                self.layer_index,
                net.depth() - 1
            )));
        }
        Ok(())
    }
}

/// Returns a warning when the penalized layer has an unbounded activation.
pub fn check_hint_layer(net: &Network, cfg: &HintConfig) -> Option<String> {
    let act = net.specs().get(cfg.layer_index.checked_sub(1)?)?.activation;
    if act.is_bounded() {
        None
    } else {
        Some(format!(
            "hint penalty on layer {} with unbounded {act:?} activation; \
             bounded activations (sigmoid, tanh) are more suitable",
            cfg.layer_index
        ))
    }
}

/// The two optimizers of the alternating scheme. They never share state.
#[derive(Debug, Clone)]
pub struct HintOptimizers {
    pub supervised: OptimConfig,
    pub supervised_state: OptimizerState,
    pub hint: OptimConfig,
    pub hint_state: OptimizerState,
}

impl HintOptimizers {
    pub fn new(net: &Network, supervised: OptimConfig, hint: OptimConfig) -> Self {
        Self {
            supervised,
            supervised_state: OptimizerState::for_network(net),
            hint,
            hint_state: OptimizerState::for_network(net),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HintEpochStats {
    /// Mean minibatch cross-entropy, measured before each supervised step.
    pub supervised_loss: f64,
    /// Mean minibatch hint penalty, measured before each hint step.
    pub hint_loss: f64,
}

pub(crate) fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut y = Matrix::zeros(labels.len(), classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::invalid(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        y.set(i, l, 1.0);
    }
    Ok(y)
}

/// One epoch of alternating training.
///
/// For every minibatch of the shuffled set: a step on `γ·J_sup` with the
/// supervised optimizer over all layers, then a step on `λ·J_H` with the hint
/// optimizer over layers `1..=layer_index` only.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch_hint(
    net: &mut Network,
    images: &Matrix,
    labels: &[usize],
    cfg: &HintConfig,
    optimizers: &mut HintOptimizers,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<HintEpochStats> {
    cfg.validate(net)?;
    if epoch == 0 && cfg.lambda > 0.0 {
        if let Some(warning) = check_hint_layer(net, cfg) {
            log::warn!("{warning}");
        }
    }
    if images.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} images for {} labels",
            images.rows(),
            labels.len()
        )));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let classes = net.output_dim();
    let order = epoch_permutation(images.rows(), seed, epoch);
    let mut sup_total = 0.0;
    let mut hint_total = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(batch_size) {
        let x = images.select_rows(chunk);
        let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
        let y = one_hot(&batch_labels, classes)?;

        let trace = net.forward(&x)?;
        sup_total += Loss::CrossEntropy.value(trace.output(), &y)?;
        if cfg.gamma > 0.0 {
            let mut grads = net.backward(&trace, Loss::CrossEntropy, &y)?;
            grads.scale(cfg.gamma);
            sgd_step(
                net,
                &grads,
                &mut optimizers.supervised_state,
                &optimizers.supervised,
            )?;
        }

        if cfg.lambda > 0.0 {
            let k = cfg.layer_index;
            let trace = net.forward_upto(&x, k)?;
            let pg = hint_penalty_gradient(trace.layer_output(k), &batch_labels, cfg.measure)?;
            hint_total += pg.value;
            let grads = net.backward_from_layer(&trace, k, &pg.grad.scale(cfg.lambda))?;
            sgd_step_layers(
                net,
                &grads,
                &mut optimizers.hint_state,
                &optimizers.hint,
                k,
            )?;
        }
        batches += 1;
    }
    let n = batches.max(1) as f64;
    Ok(HintEpochStats {
        supervised_loss: sup_total / n,
        hint_loss: hint_total / n,
    })
}

/// Hint penalty measured at every layer `1..=K` (output included), averaged
/// over consecutive chunks of `batch_size` rows. Evaluation only.
pub fn invariance_probe(
    net: &Network,
    images: &Matrix,
    labels: &[usize],
    measure: Dissimilarity,
    batch_size: usize,
) -> Result<Vec<f64>> {
    if images.rows() != labels.len() {
        return Err(Error::invalid("probe needs one label per image"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut totals = vec![0.0; net.depth()];
    let mut chunks = 0usize;
    let mut start = 0;
    while start < images.rows() {
        let end = (start + batch_size).min(images.rows());
        let trace = net.forward(&images.row_block(start, end))?;
        for (k, total) in totals.iter_mut().enumerate() {
            *total += hint_penalty(trace.layer_output(k + 1), &labels[start..end], measure)?;
        }
        chunks += 1;
        start = end;
    }
    let n = chunks.max(1) as f64;
    Ok(totals.into_iter().map(|t| t / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Activation;
    use crate::network::chain_specs;

    fn small_net(hidden: Activation, seed: u64) -> Network {
        Network::init(&chain_specs(&[4, 6, 5, 3], hidden, Activation::Softmax), seed).unwrap()
    }

    fn toy_data() -> (Matrix, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let c = (i % 3) as f64;
                vec![0.1 * c, 0.3 + 0.05 * i as f64, 0.9 - 0.2 * c, 0.5]
            })
            .collect();
        let labels = (0..12).map(|i| i % 3).collect();
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn relu_hint_layer_warns() {
        let net = small_net(Activation::Relu, 0);
        let cfg = HintConfig::for_network(&net);
        assert!(check_hint_layer(&net, &cfg).is_some());
        let net = small_net(Activation::Sigmoid, 0);
        assert!(check_hint_layer(&net, &cfg).is_none());
    }

    #[test]
    fn config_rejects_output_layer() {
        let net = small_net(Activation::Sigmoid, 0);
        let mut cfg = HintConfig::for_network(&net);
        cfg.layer_index = 3;
        assert!(cfg.validate(&net).is_err());
    }

    #[test]
    fn zero_lambda_matches_plain_training() {
        let (x, labels) = toy_data();
        let mut a = small_net(Activation::Sigmoid, 4);
        let mut b = a.clone();
        let cfg = HintConfig {
            lambda: 0.0,
            ..HintConfig::for_network(&a)
        };
        let opt = OptimConfig::sgd(0.1).with_momentum(0.9);
        let mut opts = HintOptimizers::new(&a, opt, opt);
        for epoch in 0..3 {
            train_epoch_hint(&mut a, &x, &labels, &cfg, &mut opts, 4, 9, epoch).unwrap();
        }
        // plain minibatch SGD written out directly
        let mut state = OptimizerState::for_network(&b);
        let y_all = one_hot(&labels, 3).unwrap();
        for epoch in 0..3 {
            for chunk in epoch_permutation(12, 9, epoch).chunks(4) {
                let xb = x.select_rows(chunk);
                let yb = y_all.select_rows(chunk);
                let trace = b.forward(&xb).unwrap();
                let g = b.backward(&trace, Loss::CrossEntropy, &yb).unwrap();
                sgd_step(&mut b, &g, &mut state, &opt).unwrap();
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn hint_step_decreases_penalty() {
        let x = Matrix::from_rows(&[[0.1, 0.8, 0.3, 0.5], [0.9, 0.2, 0.6, 0.1]]).unwrap();
        let labels = [1, 1];
        let mut net = small_net(Activation::Sigmoid, 2);
        let cfg = HintConfig {
            gamma: 0.0,
            ..HintConfig::for_network(&net)
        };
        let before = hint_penalty(
            &net.hidden_representation(&x, 2).unwrap(),
            &labels,
            cfg.measure,
        )
        .unwrap();
        let mut opts = HintOptimizers::new(&net, OptimConfig::sgd(0.01), OptimConfig::sgd(0.01));
        train_epoch_hint(&mut net, &x, &labels, &cfg, &mut opts, 2, 0, 0).unwrap();
        let after = hint_penalty(
            &net.hidden_representation(&x, 2).unwrap(),
            &labels,
            cfg.measure,
        )
        .unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn hint_step_leaves_upper_layers_alone() {
        let (x, labels) = toy_data();
        let mut net = small_net(Activation::Sigmoid, 6);
        let before = net.clone();
        let cfg = HintConfig {
            gamma: 0.0,
            layer_index: 1,
            ..HintConfig::for_network(&net)
        };
        let mut opts = HintOptimizers::new(&net, OptimConfig::sgd(0.1), OptimConfig::sgd(0.1));
        train_epoch_hint(&mut net, &x, &labels, &cfg, &mut opts, 6, 1, 0).unwrap();
        assert_ne!(net.weights()[0], before.weights()[0]);
        assert_eq!(net.weights()[1], before.weights()[1]);
        assert_eq!(net.weights()[2], before.weights()[2]);
    }

    #[test]
    fn probe_on_identical_samples_is_zero() {
        let net = small_net(Activation::Sigmoid, 3);
        let x = Matrix::filled(2, 4, 0.3);
        let probe = invariance_probe(&net, &x, &[0, 0], Dissimilarity::Nmd, 10).unwrap();
        assert_eq!(probe, vec![0.0; 3]);
    }

    #[test]
    fn probe_matches_manual_penalty() {
        let (x, labels) = toy_data();
        let net = small_net(Activation::Tanh, 8);
        let probe = invariance_probe(&net, &x, &labels, Dissimilarity::Nmd, 100).unwrap();
        let trace = net.forward(&x).unwrap();
        for k in 1..=3 {
            let manual = hint_penalty(trace.layer_output(k), &labels, Dissimilarity::Nmd).unwrap();
            assert_eq!(probe[k - 1], manual);
        }
    }
}
