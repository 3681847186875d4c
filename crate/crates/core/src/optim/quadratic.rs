//! Diagonal quadratic objectives `½ (w − w*)ᵀ H (w − w*)` and the closed-form
//! solutions of gradient descent, L1 decay and L2 decay on them.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    eigenvalues: Vec<f64>,
    optimum: Vec<f64>,
}

impl QuadraticModel {
    pub fn new(eigenvalues: Vec<f64>, optimum: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != optimum.len() {
            return Err(Error::invalid(format!(
                "{} eigenvalues for a {}-dimensional optimum",
                eigenvalues.len(),
                optimum.len()
            )));
        }
        if let Some(bad) = eigenvalues.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!("eigenvalue {bad} is not positive")));
        }
        if optimum.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadratic optimum"));
        }
        Ok(Self {
            eigenvalues,
            optimum,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.optimum)
            .zip(w)
            .map(|((l, o), x)| 0.5 * l * (x - o) * (x - o))
            .sum()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.optimum)
            .zip(w)
            .map(|((l, o), x)| l * (x - o))
            .collect()
    }

    fn check_step(&self, step: f64) -> Result<()> {
        for &l in &self.eigenvalues {
            if (1.0 - step * l).abs() >= 1.0 {
                return Err(Error::invalid(format!(
                    "step {step} is unstable for eigenvalue {l}: |1 - step*eigenvalue| >= 1"
                )));
            }
        }
        Ok(())
    }

    /// Runs `steps` literal gradient-descent iterations from `w = 0`.
    pub fn gd_trajectory(&self, step: f64, steps: usize) -> Result<Vec<f64>> {
        self.check_step(step)?;
        let mut w = vec![0.0; self.dim()];
        for _ in 0..steps {
            let g = self.gradient(&w);
            for (x, gi) in w.iter_mut().zip(g) {
                *x -= step * gi;
            }
        }
        Ok(w)
    }

    /// `[I − (I − εΛ)^τ] w*`, the iterate after `steps` steps from zero.
    pub fn gd_closed_form(&self, step: f64, steps: usize) -> Result<Vec<f64>> {
        self.check_step(step)?;
        let tau = i32::try_from(steps).map_err(|_| Error::invalid("step count too large"))?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(&self.optimum)
            .map(|(l, o)| (1.0 - (1.0 - step * l).powi(tau)) * o)
            .collect())
    }

    /// Minimizer of the quadratic plus `α‖w‖₁`:
    /// `sign(w*_i) · max(|w*_i| − α/H_ii, 0)`.
    pub fn l1_minimizer(&self, alpha: f64) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.optimum)
            .map(|(&l, &o)| o.signum() * (o.abs() - alpha / l).max(0.0))
            .collect()
    }

    /// Minimizer of the quadratic plus `½α‖w‖²`: `Λ_i / (Λ_i + α) · w*_i`.
    pub fn l2_minimizer(&self, alpha: f64) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.optimum)
            .map(|(&l, &o)| l / (l + alpha) * o)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(l: f64, o: f64) -> QuadraticModel {
        QuadraticModel::new(vec![l], vec![o]).unwrap()
    }

    #[test]
    fn gd_closed_form_example() {
        let m = scalar(2.0, 1.0);
        let w = m.gd_closed_form(0.1, 3).unwrap()[0];
        assert!((w - 0.488).abs() < 1e-12);
        let it = m.gd_trajectory(0.1, 3).unwrap()[0];
        assert!((it - 0.488).abs() < 1e-12);
        assert_eq!(m.gd_trajectory(0.1, 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn unstable_step_is_rejected() {
        let m = scalar(2.0, 1.0);
        assert!(m.gd_trajectory(1.0, 3).is_err());
        assert!(m.gd_closed_form(1.5, 3).is_err());
    }

    #[test]
    fn l1_examples() {
        assert_eq!(scalar(1.0, 0.3).l1_minimizer(0.5), vec![0.0]);
        assert_eq!(scalar(1.0, -2.0).l1_minimizer(0.5), vec![-1.5]);
    }

    #[test]
    fn l2_examples() {
        assert_eq!(scalar(1.0, 2.0).l2_minimizer(1.0), vec![1.0]);
        assert_eq!(scalar(0.3, 2.0).l2_minimizer(0.0), vec![2.0]);
    }

    #[test]
    fn model_validation() {
        assert!(QuadraticModel::new(vec![0.0], vec![1.0]).is_err());
        assert!(QuadraticModel::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn plain_descent_decreases_loss() {
        let m = QuadraticModel::new(vec![0.5, 2.0, 3.5], vec![1.0, -1.0, 0.25]).unwrap();
        let eta = 1.9 / 3.5;
        let mut prev = m.loss(&[0.0; 3]);
        for t in 1..50 {
            let w = m.gd_trajectory(eta, t).unwrap();
            let l = m.loss(&w);
            assert!(l < prev);
            prev = l;
        }
    }
}
