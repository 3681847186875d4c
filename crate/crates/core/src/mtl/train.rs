use serde::{Deserialize, Serialize};

use super::dataset::{TriModalBatch, TriModalDataset};
use super::model::{MtlGradients, MtlNetwork, Segment};
use super::schedule::{ImportanceWeights, ScheduleSpec};
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::network::GradientSet;
use crate::optim::{sgd_step, EarlyStopping, OptimConfig, OptimizerState, StopDecision};
use crate::rng::{derive_seed, epoch_permutation};

/// Which auxiliary tasks take part in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMask {
    Mlp,
    MlpIn,
    MlpOut,
    MlpInOut,
}

impl TaskMask {
    pub const ALL: [TaskMask; 4] = [
        TaskMask::Mlp,
        TaskMask::MlpIn,
        TaskMask::MlpOut,
        TaskMask::MlpInOut,
    ];

    pub fn uses_input(self) -> bool {
        matches!(self, TaskMask::MlpIn | TaskMask::MlpInOut)
    }

    pub fn uses_output(self) -> bool {
        matches!(self, TaskMask::MlpOut | TaskMask::MlpInOut)
    }

    pub fn label(self) -> &'static str {
        match self {
            TaskMask::Mlp => "MLP",
            TaskMask::MlpIn => "MLP+in",
            TaskMask::MlpOut => "MLP+out",
            TaskMask::MlpInOut => "MLP+in+out",
        }
    }

    /// Zeroes the weights of disabled tasks. Without any auxiliary task the
    /// supervised weight is pinned to 1.
    pub fn apply(self, w: ImportanceWeights) -> ImportanceWeights {
        if self == TaskMask::Mlp {
            return ImportanceWeights::SUPERVISED_ONLY;
        }
        ImportanceWeights::new(
            w.supervised,
            if self.uses_input() { w.input } else { 0.0 },
            if self.uses_output() { w.output } else { 0.0 },
        )
    }
}

/// Five optimizer states per role; roles never share momentum.
#[derive(Debug, Clone)]
pub struct MtlOptimizers {
    pub main: OptimConfig,
    pub auto_encoder: OptimConfig,
    main_states: Vec<OptimizerState>,
    ae_states: Vec<OptimizerState>,
}

impl MtlOptimizers {
    pub fn from_config(net: &MtlNetwork, cfg: &MtlTrainConfig) -> Self {
        Self::new(net, cfg.main_optimizer, cfg.ae_optimizer)
    }

    pub fn new(net: &MtlNetwork, main: OptimConfig, auto_encoder: OptimConfig) -> Self {
        let states = || net.segments().iter().map(OptimizerState::for_network).collect();
        Self {
            main,
            auto_encoder,
            main_states: states(),
            ae_states: states(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.main.validate()?;
        self.auto_encoder.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtlTrainConfig {
    pub batch_size: usize,
    pub corruption: f64,
    pub mask: TaskMask,
    pub main_optimizer: OptimConfig,
    pub ae_optimizer: OptimConfig,
}

impl Default for MtlTrainConfig {
    /// Batch 10, 20% masking noise, momentum 0.9 at learning rate 1e-3 for
    /// every step and L2 decay 1e-2 on the auto-encoder steps.
    fn default() -> Self {
        let main = OptimConfig::sgd(1e-3).with_momentum(0.9);
        Self {
            batch_size: 10,
            corruption: 0.2,
            mask: TaskMask::MlpInOut,
            main_optimizer: main,
            ae_optimizer: main.with_l2(1e-2),
        }
    }
}

/// One CSV row. Sub-losses are minibatch means measured before each step;
/// `None` when the corresponding step never ran this epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtlEpochLog {
    pub epoch: usize,
    pub weights: ImportanceWeights,
    pub supervised_train: Option<f64>,
    pub input: Option<f64>,
    pub output: Option<f64>,
    pub supervised_valid: Option<f64>,
}

impl MtlEpochLog {
    pub const CSV_HEADER: &'static str =
        "epoch,lambda_sup,lambda_in,lambda_out,j_s_train,j_in,j_out,j_s_valid";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.weights.supervised,
            self.weights.input,
            self.weights.output,
            opt(self.supervised_train),
            opt(self.input),
            opt(self.output),
            opt(self.supervised_valid)
        )
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

fn step_segments(
    net: &mut MtlNetwork,
    grads: &MtlGradients,
    states: &mut [OptimizerState],
    cfg: &OptimConfig,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NumericalAbort("non-finite multi-task gradient".into()));
    }
    for s in Segment::ALL {
        if let Some(g) = grads.get(s) {
            sgd_step(net.segment_mut(s), g, &mut states[s as usize], cfg)?;
        }
    }
    Ok(())
}

fn pair_gradients(a: (Segment, GradientSet), b: (Segment, GradientSet), w: f64) -> MtlGradients {
    let mut g = MtlGradients::empty();
    for (s, mut set) in [a, b] {
        set.scale(w);
        g.segments[s as usize] = Some(set);
    }
    g
}

/// One epoch in the order: input auto-encoder step (batches with inputs),
/// output auto-encoder step (batches with labels), joint step on the weighted
/// criterion (batches with pairs). Importance weights are evaluated once, at
/// the start of the epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch_mtl(
    net: &mut MtlNetwork,
    data: &TriModalDataset,
    schedule: &ScheduleSpec,
    cfg: &MtlTrainConfig,
    optimizers: &mut MtlOptimizers,
    seed: u64,
    epoch: usize,
) -> Result<MtlEpochLog> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let weights = cfg.mask.apply(schedule.eval(epoch));
    weights.validate()?;
    let order = epoch_permutation(data.len(), seed, epoch);
    let (mut j_s, mut j_in, mut j_out) = (Mean::default(), Mean::default(), Mean::default());
    for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
        let batch_seed = derive_seed(seed, ((epoch as u64) << 32) | b as u64);
        let batch = TriModalBatch::gather(data, chunk, cfg.corruption, batch_seed)?;
        if batch.has_inputs() && weights.input > 0.0 {
            let (l, g_enc, g_dec) = net.input_task_gradient(&batch)?;
            j_in.push(l);
            let g = pair_gradients(
                (Segment::InputEncoder, g_enc),
                (Segment::InputDecoder, g_dec),
                weights.input,
            );
            step_segments(net, &g, &mut optimizers.ae_states, &optimizers.auto_encoder)?;
        }
        if batch.has_targets() && weights.output > 0.0 {
            let (l, g_enc, g_dec) = net.output_task_gradient(&batch)?;
            j_out.push(l);
            let g = pair_gradients(
                (Segment::OutputEncoder, g_enc),
                (Segment::OutputDecoder, g_dec),
                weights.output,
            );
            step_segments(net, &g, &mut optimizers.ae_states, &optimizers.auto_encoder)?;
        }
        if batch.has_pairs() {
            let (losses, g) = net.criterion_gradient(&batch, weights)?;
            if let Some(l) = losses.supervised {
                j_s.push(l);
            }
            step_segments(net, &g, &mut optimizers.main_states, &optimizers.main)?;
        }
    }
    Ok(MtlEpochLog {
        epoch,
        weights,
        supervised_train: j_s.get(),
        input: j_in.get(),
        output: j_out.get(),
        supervised_valid: None,
    })
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct MtlFit {
    /// Weights at the epoch of lowest validation MSE.
    pub best: MtlNetwork,
    pub best_epoch: usize,
    pub best_valid: f64,
    pub logs: Vec<MtlEpochLog>,
}

/// Trains for `epochs` epochs, keeping the snapshot with the lowest
/// validation MSE. `patience = None` disables early termination.
#[allow(clippy::too_many_arguments)]
pub fn fit_mtl(
    mut net: MtlNetwork,
    train: &TriModalDataset,
    valid_x: &Matrix,
    valid_y: &Matrix,
    schedule: &ScheduleSpec,
    cfg: &MtlTrainConfig,
    epochs: usize,
    patience: Option<usize>,
    seed: u64,
) -> Result<MtlFit> {
    schedule.validate()?;
    let mut optimizers = MtlOptimizers::from_config(&net, cfg);
    optimizers.validate()?;
    let mut stopper = EarlyStopping::new(patience.unwrap_or(usize::MAX));
    let mut logs = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut log = train_epoch_mtl(&mut net, train, schedule, cfg, &mut optimizers, seed, epoch)?;
        let valid = net.supervised_loss(valid_x, valid_y)?;
        log.supervised_valid = Some(valid);
        log::debug!("epoch {epoch}: {}", log.csv_row());
        logs.push(log);
        if stopper.update(valid, &net) == StopDecision::Stop {
            break;
        }
    }
    let best_epoch = stopper.best_epoch();
    let best_valid = stopper.best_loss();
    let best = stopper.into_best().unwrap_or(net);
    Ok(MtlFit {
        best,
        best_epoch,
        best_valid,
        logs,
    })
}
