use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::network::{GradientSet, Network};

/// Hyperparameters of momentum SGD with L1/L2 weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    #[serde(default)]
    pub l2_alpha: f64,
    #[serde(default)]
    pub l1_alpha: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            l2_alpha: 0.0,
            l1_alpha: 0.0,
        }
    }
}

impl OptimConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            momentum: 0.0,
            l2_alpha: 0.0,
            l1_alpha: 0.0,
        }
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_l2(mut self, alpha: f64) -> Self {
        self.l2_alpha = alpha;
        self
    }

    pub fn with_l1(mut self, alpha: f64) -> Self {
        self.l1_alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.l2_alpha >= 0.0 && self.l1_alpha >= 0.0) {
            return Err(Error::invalid("weight decay coefficients must be >= 0"));
        }
        Ok(())
    }
}

/// Velocity buffers, one per layer, starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    velocity: Vec<Matrix>,
}

impl OptimizerState {
    pub fn for_network(net: &Network) -> Self {
        Self {
            velocity: net
                .weights()
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
        }
    }

    pub fn velocity(&self) -> &[Matrix] {
        &self.velocity
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One momentum step over every layer:
///
/// `g = ∇ + α₂·W + α₁·sign(W)` (decay skipped on bias rows),
/// `v ← μ·v − η·g`, `W ← W + v`.
pub fn sgd_step(
    net: &mut Network,
    grads: &GradientSet,
    state: &mut OptimizerState,
    cfg: &OptimConfig,
) -> Result<()> {
    let depth = net.depth();
    sgd_step_layers(net, grads, state, cfg, depth)
}

/// Same as [`sgd_step`] but only touches layers `1..=upto`.
pub fn sgd_step_layers(
    net: &mut Network,
    grads: &GradientSet,
    state: &mut OptimizerState,
    cfg: &OptimConfig,
    upto: usize,
) -> Result<()> {
    if grads.len() != net.depth() || state.velocity.len() != net.depth() || upto > net.depth() {
        return Err(Error::invalid(
            "gradient, optimizer state and network disagree on layer count",
        ));
    }
    for (k, g) in grads.layers().iter().enumerate().take(upto) {
        if !g.is_finite() {
            return Err(Error::NumericalAbort(format!(
                "non-finite gradient in layer {}",
                k + 1
            )));
        }
        let w = &net.weights()[k];
        if g.shape() != w.shape() {
            return Err(Error::shape("sgd_step", g.shape(), w.shape()));
        }
    }
    let OptimConfig {
        learning_rate: eta,
        momentum: mu,
        l2_alpha: l2,
        l1_alpha: l1,
    } = *cfg;
    for k in 0..upto {
        let w = &mut net.weights_mut()[k];
        let v = &mut state.velocity[k];
        let g = grads.layer(k);
        let decayed = (w.rows() - 1) * w.cols();
        let (wd, vd, gd) = (w.data_mut(), v.data_mut(), g.data());
        for i in 0..wd.len() {
            let mut total = gd[i];
            if i < decayed {
                total += l2 * wd[i] + l1 * sign(wd[i]);
            }
            vd[i] = mu * vd[i] - eta * total;
            wd[i] += vd[i];
        }
        if !w.is_finite() {
            return Err(Error::NumericalAbort(format!(
                "weights of layer {} diverged",
                k + 1
            )));
        }
    }
    Ok(())
}
