//! Task metrics: classification error, landmark NRMSE with its CDF and AUC,
//! and the trimmed multi-run aggregate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the NRMSE range integrated by [`auc_cdf`].
pub const AUC_RANGE: f64 = 0.5;
/// Grid step of [`auc_cdf`].
pub const AUC_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    points: Vec<(f64, f64)>,
    reference: (usize, usize),
}

impl Shape {
    pub fn new(points: Vec<(f64, f64)>, reference: (usize, usize)) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a shape needs at least two points"));
        }
        let (a, b) = reference;
        if a == b || a >= points.len() || b >= points.len() {
            return Err(Error::invalid(format!(
                "reference indices {reference:?} invalid for {} points",
                points.len()
            )));
        }
        Ok(Self { points, reference })
    }

    /// Interleaved `[x0, y0, x1, y1, ...]` coordinates.
    pub fn from_flat(coords: &[f64], reference: (usize, usize)) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::invalid("odd number of landmark coordinates"));
        }
        Self::new(coords.chunks_exact(2).map(|c| (c[0], c[1])).collect(), reference)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn reference_distance(&self) -> f64 {
        let (a, b) = self.reference;
        dist(self.points[a], self.points[b])
    }
}

fn dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Mean point-to-point distance normalized by the truth's reference distance.
pub fn nrmse(pred: &Shape, truth: &Shape) -> Result<f64> {
    if pred.points.len() != truth.points.len() {
        return Err(Error::invalid(format!(
            "shapes have {} and {} points",
            pred.points.len(),
            truth.points.len()
        )));
    }
    let d = truth.reference_distance();
    if d <= 0.0 {
        return Err(Error::Degenerate(
            "reference points of the ground-truth shape coincide".into(),
        ));
    }
    let total: f64 = pred
        .points
        .iter()
        .zip(&truth.points)
        .map(|(&p, &g)| dist(p, g))
        .sum();
    Ok(total / (truth.points.len() as f64 * d))
}

/// Fraction of errors `≤ x`.
pub fn cdf_at(errors: &[f64], x: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("cdf of an empty error list"));
    }
    Ok(errors.iter().filter(|&&e| e <= x).count() as f64 / errors.len() as f64)
}

/// Mean of the CDF over `0, 0.001, ..., 0.5` (501 points), in `[0, 1]`.
pub fn auc_cdf(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("auc of an empty error list"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let steps = (AUC_RANGE / AUC_STEP).round() as usize;
    let n = sorted.len() as f64;
    let total: f64 = (0..=steps)
        .map(|i| {
            let x = i as f64 * AUC_RANGE / steps as f64;
            sorted.partition_point(|&e| e <= x) as f64 / n
        })
        .sum();
    Ok(total / (steps + 1) as f64)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}±{:.3}", self.mean, self.std)
    }
}

pub fn mean_std(values: &[f64]) -> Aggregate {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Aggregate {
        mean,
        std: var.sqrt(),
    }
}

/// Drops one best and one worst value, then reports mean ± std of the rest.
pub fn aggregate_runs(values: &[f64]) -> Result<Aggregate> {
    if values.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 runs to aggregate, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(mean_std(&sorted[1..sorted.len() - 1]))
}

/// Percentage of mismatched class ids.
pub fn classification_error(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = predictions.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(100.0 * wrong as f64 / truth.len() as f64)
}
