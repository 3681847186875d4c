use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabeledImageSet;
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng::rng_for;

/// Two noisy prototype images, one per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoClassConfig {
    pub count: usize,
    pub side: usize,
    /// Half-width of the uniform pixel noise.
    pub noise: f64,
    pub seed: u64,
}

impl TwoClassConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            side: 8,
            noise: 0.35,
            seed,
        }
    }
}

/// Class 0 is a vertical bar, class 1 a diagonal stroke; each sample gets a
/// random one-pixel shift, intensity scaling and additive noise.
pub fn gen_two_class(cfg: &TwoClassConfig) -> Result<LabeledImageSet> {
    if cfg.side < 4 {
        return Err(Error::invalid("two-class images need side >= 4"));
    }
    let s = cfg.side;
    let mut rng = rng_for(cfg.seed, 0x2C1A);
    let mut data = Vec::with_capacity(cfg.count * s * s);
    let mut labels = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let label = i % 2;
        let shift = rng.gen_range(-1i64..=1);
        let gain = rng.gen_range(0.6..1.0);
        for r in 0..s {
            for c in 0..s {
                let c_shift = c as i64 - shift;
                let on = match label {
                    0 => (c_shift - s as i64 / 2).abs() <= 1,
                    _ => (c_shift - r as i64).abs() <= 1,
                };
                let base = if on { gain } else { 0.0 };
                let v: f64 = base + rng.gen_range(-cfg.noise..=cfg.noise);
                data.push(v.clamp(0.0, 1.0));
            }
        }
        labels.push(label);
    }
    LabeledImageSet::new(Matrix::from_vec(cfg.count, s * s, data)?, labels, s, s)
}
