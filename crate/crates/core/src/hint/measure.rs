use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosines this close to ±1 get a zero angular gradient.
pub const ANGULAR_SINGULAR_BAND: f64 = 1e-8;

/// Dissimilarity between two representation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dissimilarity {
    /// Squared Euclidean distance `Σ (a_v − b_v)²`.
    Sed,
    /// Normalized Manhattan distance `(1/V) Σ |a_v − b_v|`.
    Nmd,
    /// Angle `arccos(⟨a,b⟩ / (‖a‖‖b‖))`.
    As,
}

impl std::str::FromStr for Dissimilarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sed" => Ok(Dissimilarity::Sed),
            "nmd" => Ok(Dissimilarity::Nmd),
            "as" => Ok(Dissimilarity::As),
            other => Err(Error::invalid(format!("unknown dissimilarity `{other}`"))),
        }
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!(
            "dissimilarity needs equal non-empty dims, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate(
            "angular similarity of a zero vector".into(),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(((dot / (na * nb)).clamp(-1.0, 1.0), na, nb))
}

/// `arccos` of the cosine, evaluated as `2·atan2(‖â − b̂‖, ‖â + b̂‖)` on the
/// unit vectors so that small angles (and `a == b`) stay exact.
fn angle(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate(
            "angular similarity of a zero vector".into(),
        ));
    }
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

impl Dissimilarity {
    pub fn value(self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dims(a, b)?;
        Ok(match self {
            Dissimilarity::Sed => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Dissimilarity::Nmd => {
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
            }
            Dissimilarity::As => angle(a, b)?,
        })
    }

    /// Adds `scale · ∂C/∂a` into `grad_a` and `scale · ∂C/∂b` into `grad_b`.
    ///
    /// Returns `false` when the angular gradient was zeroed because the
    /// vectors are (anti)parallel.
    pub fn accumulate_gradient(
        self,
        a: &[f64],
        b: &[f64],
        scale: f64,
        grad_a: &mut [f64],
        grad_b: &mut [f64],
    ) -> Result<bool> {
        check_dims(a, b)?;
        match self {
            Dissimilarity::Sed => {
                for v in 0..a.len() {
                    let d = 2.0 * (a[v] - b[v]) * scale;
                    grad_a[v] += d;
                    grad_b[v] -= d;
                }
            }
            Dissimilarity::Nmd => {
                let k = scale / a.len() as f64;
                for v in 0..a.len() {
                    let diff = a[v] - b[v];
                    let s = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    grad_a[v] += k * s;
                    grad_b[v] -= k * s;
                }
            }
            Dissimilarity::As => {
                let (c, na, nb) = cosine(a, b)?;
                if 1.0 - c.abs() < ANGULAR_SINGULAR_BAND {
                    return Ok(false);
                }
                let outer = -scale / (1.0 - c * c).sqrt();
                for v in 0..a.len() {
                    grad_a[v] += outer * (b[v] / (na * nb) - c * a[v] / (na * na));
                    grad_b[v] += outer * (a[v] / (na * nb) - c * b[v] / (nb * nb));
                }
            }
        }
        Ok(true)
    }
}
