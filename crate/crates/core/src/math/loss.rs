use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Probability floor applied before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `1/(2N) Σ_rows Σ_dims (t - p)²`
    MeanSquaredError,
    /// `-(1/N) Σ_rows Σ_dims t·log p` over one-hot targets.
    CrossEntropy,
}

fn check_shapes(prediction: &Matrix, target: &Matrix) -> Result<()> {
    if prediction.shape() != target.shape() {
        return Err(Error::shape("loss", prediction.shape(), target.shape()));
    }
    Ok(())
}

fn check_one_hot(target: &Matrix) -> Result<()> {
    for (i, row) in target.iter_rows().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::invalid(format!(
                "cross-entropy target row {i} is not one-hot"
            )));
        }
    }
    Ok(())
}

impl Loss {
    pub fn value(self, prediction: &Matrix, target: &Matrix) -> Result<f64> {
        check_shapes(prediction, target)?;
        let n = prediction.rows().max(1) as f64;
        match self {
            Loss::MeanSquaredError => {
                let total: f64 = prediction
                    .data()
                    .iter()
                    .zip(target.data())
                    .map(|(p, t)| (t - p) * (t - p))
                    .sum();
                Ok(0.5 * total / n)
            }
            Loss::CrossEntropy => {
                check_one_hot(target)?;
                let total: f64 = prediction
                    .data()
                    .iter()
                    .zip(target.data())
                    .filter(|(_, &t)| t != 0.0)
                    .map(|(&p, &t)| -t * p.clamp(PROB_FLOOR, 1.0).ln())
                    .sum();
                Ok(total / n)
            }
        }
    }

    /// Gradient of [`Loss::value`] with respect to the prediction.
    pub fn gradient(self, prediction: &Matrix, target: &Matrix) -> Result<Matrix> {
        check_shapes(prediction, target)?;
        let n = prediction.rows().max(1) as f64;
        match self {
            Loss::MeanSquaredError => prediction.zip_map(target, |p, t| (p - t) / n),
            Loss::CrossEntropy => {
                check_one_hot(target)?;
                prediction.zip_map(target, |p, t| {
                    if t == 0.0 || p < PROB_FLOOR {
                        0.0
                    } else {
                        -t / (p * n)
                    }
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let p = Matrix::from_rows(&[[0.3, -0.2], [1.0, 2.0]]).unwrap();
        assert_eq!(Loss::MeanSquaredError.value(&p, &p).unwrap(), 0.0);
        let p = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let t = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(Loss::MeanSquaredError.value(&p, &t).unwrap(), 12.5);
    }

    #[test]
    fn cross_entropy_of_exact_prediction_is_zero() {
        let y = Matrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(Loss::CrossEntropy.value(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_rejects_soft_targets() {
        let p = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        assert!(Loss::CrossEntropy.value(&p, &p).is_err());
    }

    #[test]
    fn shape_mismatch() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(
            Loss::MeanSquaredError.value(&a, &b),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let p = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let t = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        let v = Loss::CrossEntropy.value(&p, &t).unwrap();
        assert!((v + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn gradients_match_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..100 {
            let mut p = Matrix::from_vec(2, 3, (0..6).map(|_| rng.gen_range(0.05..0.95)).collect())
                .unwrap();
            let mut t = Matrix::zeros(2, 3);
            t.set(0, rng.gen_range(0..3), 1.0);
            t.set(1, rng.gen_range(0..3), 1.0);
            for loss in [Loss::MeanSquaredError, Loss::CrossEntropy] {
                let g = loss.gradient(&p, &t).unwrap();
                for k in 0..6 {
                    let orig = p.data()[k];
                    p.data_mut()[k] = orig + h;
                    let up = loss.value(&p, &t).unwrap();
                    p.data_mut()[k] = orig - h;
                    let down = loss.value(&p, &t).unwrap();
                    p.data_mut()[k] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let an = g.data()[k];
                    let denom = fd.abs().max(an.abs());
                    assert!(
                        denom < 1e-10 || (fd - an).abs() / denom < 1e-5,
                        "{loss:?}: {fd} vs {an}"
                    );
                }
            }
        }
    }
}
