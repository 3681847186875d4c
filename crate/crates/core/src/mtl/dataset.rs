use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng::rng_for;

/// Which parts of a sample are observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Input and label: member of S, F and L.
    Paired,
    /// Input only: member of F.
    InputOnly,
    /// Label only: member of L.
    LabelOnly,
}

impl SampleKind {
    pub fn has_input(self) -> bool {
        matches!(self, SampleKind::Paired | SampleKind::InputOnly)
    }

    pub fn has_label(self) -> bool {
        matches!(self, SampleKind::Paired | SampleKind::LabelOnly)
    }
}

/// Samples carrying an input, a label, or both.
///
/// Missing parts are stored as zero rows so row `i` of `inputs` and `targets`
/// always refers to sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriModalDataset {
    inputs: Matrix,
    targets: Matrix,
    kinds: Vec<SampleKind>,
}

impl TriModalDataset {
    pub fn new(inputs: Matrix, targets: Matrix, kinds: Vec<SampleKind>) -> Result<Self> {
        if inputs.rows() != kinds.len() || targets.rows() != kinds.len() {
            return Err(Error::invalid(format!(
                "{} inputs, {} targets and {} sample kinds",
                inputs.rows(),
                targets.rows(),
                kinds.len()
            )));
        }
        let mut inputs = inputs;
        let mut targets = targets;
        for (i, kind) in kinds.iter().enumerate() {
            if kind.has_input() {
                if inputs.row(i).iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::invalid(format!("input row {i} leaves [0, 1]")));
                }
            } else {
                inputs.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
            }
            if kind.has_label() {
                if targets.row(i).iter().any(|v| !(-1.0..=1.0).contains(v)) {
                    return Err(Error::invalid(format!("target row {i} leaves [-1, 1]")));
                }
            } else {
                targets.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Ok(Self {
            inputs,
            targets,
            kinds,
        })
    }

    /// Every sample paired.
    pub fn supervised(inputs: Matrix, targets: Matrix) -> Result<Self> {
        let n = inputs.rows();
        Self::new(inputs, targets, vec![SampleKind::Paired; n])
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn kinds(&self) -> &[SampleKind] {
        &self.kinds
    }

    pub fn count(&self, kind: SampleKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// Sizes of (S, F, L).
    pub fn subset_sizes(&self) -> (usize, usize, usize) {
        let s = self.count(SampleKind::Paired);
        let f = self.kinds.iter().filter(|k| k.has_input()).count();
        let l = self.kinds.iter().filter(|k| k.has_label()).count();
        (s, f, l)
    }
}

/// Zeroes each entry independently with probability `level`.
pub fn corrupt_input(x: &Matrix, level: f64, seed: u64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::invalid(format!(
            "corruption level {level} outside [0, 1)"
        )));
    }
    if level == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = rng_for(seed, 0xC0_22);
    let mut out = x.clone();
    for v in out.data_mut() {
        if rng.gen::<f64>() < level {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// The three views of one minibatch.
#[derive(Debug, Clone)]
pub struct TriModalBatch {
    /// Inputs of paired samples (S ∩ B).
    pub paired_inputs: Matrix,
    /// Targets of paired samples (S ∩ B).
    pub paired_targets: Matrix,
    /// Clean inputs of F ∩ B.
    pub inputs: Matrix,
    /// `inputs` after masking noise.
    pub corrupted_inputs: Matrix,
    /// Targets of L ∩ B.
    pub targets: Matrix,
}

impl TriModalBatch {
    pub fn gather(
        data: &TriModalDataset,
        indices: &[usize],
        corruption: f64,
        seed: u64,
    ) -> Result<Self> {
        let pick = |pred: fn(SampleKind) -> bool| -> Vec<usize> {
            indices
                .iter()
                .copied()
                .filter(|&i| pred(data.kinds[i]))
                .collect()
        };
        let paired = pick(|k| k == SampleKind::Paired);
        let with_x = pick(SampleKind::has_input);
        let with_y = pick(SampleKind::has_label);
        let inputs = data.inputs.select_rows(&with_x);
        let corrupted_inputs = corrupt_input(&inputs, corruption, seed)?;
        Ok(Self {
            paired_inputs: data.inputs.select_rows(&paired),
            paired_targets: data.targets.select_rows(&paired),
            inputs,
            corrupted_inputs,
            targets: data.targets.select_rows(&with_y),
        })
    }

    pub fn has_inputs(&self) -> bool {
        self.inputs.rows() > 0
    }

    pub fn has_targets(&self) -> bool {
        self.targets.rows() > 0
    }

    pub fn has_pairs(&self) -> bool {
        self.paired_inputs.rows() > 0
    }
}
