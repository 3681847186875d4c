//! Class-wise invariance regularization.
//!
//! The hint penalty pulls hidden representations of same-class samples in a
//! minibatch toward each other. For each class `s` with `n_s ≥ 2` members the
//! per-sample term is the mean dissimilarity to the other members; these are
//! averaged within the class and then across the classes present.

mod measure;
mod train;

pub use measure::{Dissimilarity, ANGULAR_SINGULAR_BAND};
pub use train::{
    check_hint_layer, invariance_probe, train_epoch_hint, HintConfig, HintEpochStats,
    HintOptimizers,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Value and row gradient of the hint penalty.
#[derive(Debug, Clone)]
pub struct PenaltyGradient {
    pub value: f64,
    pub grad: Matrix,
    /// Pairs whose angular gradient was zeroed near cosine ±1.
    pub singular_pairs: usize,
}

/// Groups row indices by label, keeping only classes with two or more rows.
fn class_groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() >= 2).collect()
}

fn check_rows(representations: &Matrix, labels: &[usize]) -> Result<()> {
    if representations.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} representations for {} labels",
            representations.rows(),
            labels.len()
        )));
    }
    Ok(())
}

/// Hint penalty `J_H` of one minibatch.
pub fn hint_penalty(representations: &Matrix, labels: &[usize], measure: Dissimilarity) -> Result<f64> {
    check_rows(representations, labels)?;
    let groups = class_groups(labels);
    if groups.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for g in &groups {
        let n = g.len() as f64;
        let mut pair_sum = 0.0;
        for (p, &i) in g.iter().enumerate() {
            for &j in &g[p + 1..] {
                pair_sum += measure.value(representations.row(i), representations.row(j))?;
            }
        }
        // each unordered pair appears twice in Σ_i Σ_{j≠i}
        total += 2.0 * pair_sum / (n * (n - 1.0));
    }
    Ok(total / groups.len() as f64)
}

/// [`hint_penalty`] together with `∂J_H/∂representations`.
pub fn hint_penalty_gradient(
    representations: &Matrix,
    labels: &[usize],
    measure: Dissimilarity,
) -> Result<PenaltyGradient> {
    check_rows(representations, labels)?;
    let groups = class_groups(labels);
    let mut grad = Matrix::zeros(representations.rows(), representations.cols());
    if groups.is_empty() {
        return Ok(PenaltyGradient {
            value: 0.0,
            grad,
            singular_pairs: 0,
        });
    }
    let classes = groups.len() as f64;
    let dim = representations.cols();
    let mut total = 0.0;
    let mut singular_pairs = 0;
    let mut ga = vec![0.0; dim];
    let mut gb = vec![0.0; dim];
    for g in &groups {
        let n = g.len() as f64;
        let weight = 2.0 / (n * (n - 1.0) * classes);
        for (p, &i) in g.iter().enumerate() {
            for &j in &g[p + 1..] {
                let (a, b) = (representations.row(i), representations.row(j));
                total += weight * measure.value(a, b)?;
                ga.iter_mut().for_each(|v| *v = 0.0);
                gb.iter_mut().for_each(|v| *v = 0.0);
                if !measure.accumulate_gradient(a, b, weight, &mut ga, &mut gb)? {
                    singular_pairs += 1;
                }
                for (dst, v) in grad.row_mut(i).iter_mut().zip(&ga) {
                    *dst += v;
                }
                for (dst, v) in grad.row_mut(j).iter_mut().zip(&gb) {
                    *dst += v;
                }
            }
        }
    }
    if singular_pairs > 0 {
        log::debug!("angular gradient zeroed for {singular_pairs} near-parallel pairs");
    }
    Ok(PenaltyGradient {
        value: total,
        grad,
        singular_pairs,
    })
}
