use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    /// Row-wise softmax. Only valid on the output layer.
    Softmax,
    Identity,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax of one row, written into `out`.
pub fn softmax_row(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

impl Activation {
    /// Output range is bounded (the hint penalty works best on such layers).
    pub fn is_bounded(self) -> bool {
        matches!(self, Activation::Sigmoid | Activation::Tanh | Activation::Softmax)
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Tanh => 1,
            Activation::Relu => 2,
            Activation::Softmax => 3,
            Activation::Identity => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Sigmoid,
            1 => Activation::Tanh,
            2 => Activation::Relu,
            3 => Activation::Softmax,
            4 => Activation::Identity,
            _ => return None,
        })
    }

    pub fn apply(self, z: &Matrix) -> Matrix {
        match self {
            Activation::Sigmoid => z.map(sigmoid),
            Activation::Tanh => z.map(f64::tanh),
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
            Activation::Softmax => {
                let mut out = Matrix::zeros(z.rows(), z.cols());
                for r in 0..z.rows() {
                    softmax_row(z.row(r), out.row_mut(r));
                }
                out
            }
        }
    }

    /// Elementwise derivative evaluated at the pre-activation `z`.
    pub fn derivative(self, z: &Matrix) -> Result<Matrix> {
        Ok(match self {
            Activation::Sigmoid => z.map(|v| {
                let s = sigmoid(v);
                s * (1.0 - s)
            }),
            Activation::Tanh => z.map(|v| {
                let t = v.tanh();
                1.0 - t * t
            }),
            // value 1 at exactly zero
            Activation::Relu => z.map(|v| if v >= 0.0 { 1.0 } else { 0.0 }),
            Activation::Identity => z.map(|_| 1.0),
            Activation::Softmax => {
                return Err(Error::Unsupported(
                    "softmax derivative is only available fused with cross-entropy".into(),
                ))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(a: Activation, z: f64) -> f64 {
        a.apply(&Matrix::filled(1, 1, z)).get(0, 0)
    }

    fn scalar_derivative(a: Activation, z: f64) -> f64 {
        a.derivative(&Matrix::filled(1, 1, z)).unwrap().get(0, 0)
    }

    #[test]
    fn known_values() {
        assert_eq!(scalar(Activation::Sigmoid, 0.0), 0.5);
        let s = Activation::Softmax.apply(&Matrix::zeros(1, 3));
        for &p in s.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let lhs = 0.7f64.tanh();
        let rhs = 2.0 * sigmoid(1.4) - 1.0;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn known_derivatives() {
        assert_eq!(scalar_derivative(Activation::Sigmoid, 0.0), 0.25);
        assert_eq!(scalar_derivative(Activation::Tanh, 0.0), 1.0);
        assert_eq!(scalar_derivative(Activation::Relu, -2.0), 0.0);
        assert_eq!(scalar_derivative(Activation::Relu, 0.0), 1.0);
    }

    #[test]
    fn softmax_derivative_is_unsupported() {
        assert!(matches!(
            Activation::Softmax.derivative(&Matrix::zeros(1, 2)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let z = Matrix::from_rows(&[[1000.0, 1000.0, -1000.0]]).unwrap();
        let p = Activation::Softmax.apply(&z);
        assert!(p.is_finite());
        assert!((p.get(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for act in [Activation::Sigmoid, Activation::Tanh, Activation::Relu, Activation::Identity] {
            for _ in 0..100 {
                let mut z: f64 = rng.gen_range(-4.0..4.0);
                if act == Activation::Relu && z.abs() < 1e-3 {
                    z += 0.5;
                }
                let fd = (scalar(act, z + h) - scalar(act, z - h)) / (2.0 * h);
                let an = scalar_derivative(act, z);
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-5 || (fd - an).abs() < 1e-9, "{act:?} at {z}: {fd} vs {an}");
            }
        }
    }

    proptest! {
        #[test]
        fn tanh_sigmoid_identity(z in -30.0f64..30.0) {
            prop_assert!((z.tanh() - (2.0 * sigmoid(2.0 * z) - 1.0)).abs() < 1e-12);
        }

        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            row in proptest::collection::vec(-50.0f64..50.0, 1..8),
            c in -100.0f64..100.0,
        ) {
            let z = Matrix::from_rows(&[row.clone()]).unwrap();
            let p = Activation::Softmax.apply(&z);
            prop_assert!((p.sum() - 1.0).abs() < 1e-12);
            prop_assert!(p.data().iter().all(|&v| v > 0.0));
            let shifted = Activation::Softmax.apply(&z.map(|v| v + c));
            for (a, b) in p.data().iter().zip(shifted.data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn ranges(z in -15.0f64..15.0) {
            let s = sigmoid(z);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert!(z.tanh().abs() < 1.0);
            prop_assert!(scalar(Activation::Relu, z) >= 0.0);
        }
    }
}
