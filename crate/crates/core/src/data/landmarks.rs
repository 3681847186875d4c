use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::metrics::Shape;
use crate::mtl::{SampleKind, TriModalDataset};
use crate::rng::{derive_seed, rng_for};

const SPLAT_SIGMA: f64 = 1.0;
const CONTOUR_INTENSITY: f64 = 0.5;
/// Harmonics of the radial perturbation.
const HARMONICS: [usize; 2] = [2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkConfig {
    pub count: usize,
    pub points: usize,
    pub side: usize,
    /// Amplitude of each radial harmonic, relative to the ellipse radius.
    pub perturbation: f64,
    pub seed: u64,
}

impl LandmarkConfig {
    pub fn new(count: usize, points: usize, side: usize, seed: u64) -> Self {
        Self {
            count,
            points,
            side,
            perturbation: 0.06,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 4 {
            return Err(Error::invalid("landmark task needs at least 4 points"));
        }
        if self.side < 16 {
            return Err(Error::invalid("landmark images need side >= 16"));
        }
        if !(0.0..=0.075).contains(&self.perturbation) {
            return Err(Error::invalid("perturbation must lie in [0, 0.075]"));
        }
        Ok(())
    }
}

/// Geometry of one sample, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub rotation: f64,
    /// `(amplitude, phase)` per harmonic.
    pub harmonics: [(f64, f64); 2],
}

impl ShapeParams {
    pub fn sample(rng: &mut impl Rng, side: usize, perturbation: f64) -> Self {
        let s = side as f64;
        Self {
            center: (rng.gen_range(0.4..0.6) * s, rng.gen_range(0.4..0.6) * s),
            axes: (rng.gen_range(0.2..0.3) * s, rng.gen_range(0.2..0.3) * s),
            rotation: rng.gen_range(-PI / 6.0..PI / 6.0),
            harmonics: [
                (rng.gen_range(0.0..=perturbation), rng.gen_range(0.0..2.0 * PI)),
                (rng.gen_range(0.0..=perturbation), rng.gen_range(0.0..2.0 * PI)),
            ],
        }
    }

    /// `P` points at equally spaced ellipse angles, scaled radially by
    /// `1 + Σ a_m cos(m·φ + φ_m)`.
    pub fn points(&self, count: usize) -> Vec<(f64, f64)> {
        let (cos_r, sin_r) = (self.rotation.cos(), self.rotation.sin());
        (0..count)
            .map(|p| {
                let phi = 2.0 * PI * p as f64 / count as f64;
                let radial = 1.0
                    + HARMONICS
                        .iter()
                        .zip(&self.harmonics)
                        .map(|(&m, &(a, ph))| a * (m as f64 * phi + ph).cos())
                        .sum::<f64>();
                let u = self.axes.0 * phi.cos() * radial;
                let v = self.axes.1 * phi.sin() * radial;
                (
                    self.center.0 + cos_r * u - sin_r * v,
                    self.center.1 + sin_r * u + cos_r * v,
                )
            })
            .collect()
    }
}

fn segment_distance_sq(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx - px, a.1 + t * dy - py);
    cx * cx + cy * cy
}

/// Gaussian splats on the points plus the closed contour at half intensity,
/// clipped to `[0, 1]`. Pixel `(row, col)` has centre `(x = col, y = row)`.
pub fn rasterize(points: &[(f64, f64)], side: usize) -> Vec<f64> {
    let two_sigma_sq = 2.0 * SPLAT_SIGMA * SPLAT_SIGMA;
    let mut img = vec![0.0; side * side];
    for row in 0..side {
        for col in 0..side {
            let (x, y) = (col as f64, row as f64);
            let mut v = 0.0;
            for &(px, py) in points {
                v += (-((x - px).powi(2) + (y - py).powi(2)) / two_sigma_sq).exp();
            }
            let d_sq = (0..points.len())
                .map(|i| segment_distance_sq(x, y, points[i], points[(i + 1) % points.len()]))
                .fold(f64::INFINITY, f64::min);
            v += CONTOUR_INTENSITY * (-d_sq / two_sigma_sq).exp();
            img[row * side + col] = v.clamp(0.0, 1.0);
        }
    }
    img
}

/// Rendered images and their normalized landmark targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLandmarkTask {
    pub images: Matrix,
    /// Row `i` is `[x_1, y_1, …, x_P, y_P]` scaled to `[−1, 1]`.
    pub targets: Matrix,
    pub side: usize,
    pub points: usize,
    /// Indices of two opposite points used as the NRMSE reference distance.
    pub reference: (usize, usize),
}

impl SyntheticLandmarkTask {
    pub fn len(&self) -> usize {
        self.images.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.images.rows() == 0
    }

    pub fn shape(&self, row: &[f64]) -> Result<Shape> {
        Shape::from_flat(row, self.reference)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            images: self.images.select_rows(idx),
            targets: self.targets.select_rows(idx),
            ..self.clone()
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            images: self.images.row_block(start, end),
            targets: self.targets.row_block(start, end),
            ..self.clone()
        }
    }

    /// Assigns each sample a kind in the given proportions. The first
    /// `round(paired·n)` shuffled samples are paired, the next
    /// `round(input_only·n)` input-only, the rest label-only.
    pub fn partition(&self, paired: f64, input_only: f64, seed: u64) -> Result<TriModalDataset> {
        if !(0.0..=1.0).contains(&paired)
            || !(0.0..=1.0).contains(&input_only)
            || paired + input_only > 1.0 + 1e-12
        {
            return Err(Error::invalid("partition fractions must be in [0, 1] and sum to at most 1"));
        }
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(seed, 0x9A27));
        let n_paired = (paired * n as f64).round() as usize;
        let n_input = ((input_only * n as f64).round() as usize).min(n - n_paired);
        let mut kinds = vec![SampleKind::LabelOnly; n];
        for (rank, &i) in order.iter().enumerate() {
            kinds[i] = if rank < n_paired {
                SampleKind::Paired
            } else if rank < n_paired + n_input {
                SampleKind::InputOnly
            } else {
                SampleKind::LabelOnly
            };
        }
        TriModalDataset::new(self.images.clone(), self.targets.clone(), kinds)
    }
}

/// Train / validation / test sets of one generated task.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSplits {
    pub train: SyntheticLandmarkTask,
    pub valid: SyntheticLandmarkTask,
    pub test: SyntheticLandmarkTask,
}

impl LandmarkSplits {
    /// Consecutive blocks of one generated task.
    pub fn generate(
        sizes: (usize, usize, usize),
        points: usize,
        side: usize,
        perturbation: f64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = LandmarkConfig {
            count: sizes.0 + sizes.1 + sizes.2,
            points,
            side,
            perturbation,
            seed,
        };
        let all = gen_synthetic_landmarks(&cfg)?;
        Ok(Self {
            train: all.slice(0, sizes.0),
            valid: all.slice(sizes.0, sizes.0 + sizes.1),
            test: all.slice(sizes.0 + sizes.1, cfg.count),
        })
    }
}

pub fn gen_synthetic_landmarks(cfg: &LandmarkConfig) -> Result<SyntheticLandmarkTask> {
    cfg.validate()?;
    let side = cfg.side;
    let scale = 2.0 / (side - 1) as f64;
    let mut images = Vec::with_capacity(cfg.count * side * side);
    let mut targets = Vec::with_capacity(cfg.count * 2 * cfg.points);
    for i in 0..cfg.count {
        let mut rng = rng_for(derive_seed(cfg.seed, i as u64), 0x1A2D);
        let params = ShapeParams::sample(&mut rng, side, cfg.perturbation);
        let pts = params.points(cfg.points);
        images.extend(rasterize(&pts, side));
        for (x, y) in pts {
            let (tx, ty) = (x * scale - 1.0, y * scale - 1.0);
            if !(-1.0..=1.0).contains(&tx) || !(-1.0..=1.0).contains(&ty) {
                return Err(Error::invalid(format!("landmark ({x}, {y}) left the image")));
            }
            targets.extend([tx, ty]);
        }
    }
    Ok(SyntheticLandmarkTask {
        images: Matrix::from_vec(cfg.count, side * side, images)?,
        targets: Matrix::from_vec(cfg.count, 2 * cfg.points, targets)?,
        side,
        points: cfg.points,
        reference: (0, cfg.points / 2),
    })
}
