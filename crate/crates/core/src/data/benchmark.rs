use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabeledImageSet;
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Std,
    Noise,
    Img,
}

impl std::str::FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(BenchmarkKind::Std),
            "noise" => Ok(BenchmarkKind::Noise),
            "img" => Ok(BenchmarkKind::Img),
            other => Err(Error::invalid(format!("unknown benchmark kind `{other}`"))),
        }
    }
}

/// Training-set size tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubsetTag {
    #[serde(rename = "1k")]
    K1,
    #[serde(rename = "3k")]
    K3,
    #[serde(rename = "5k")]
    K5,
    #[serde(rename = "50k")]
    K50,
    #[serde(rename = "all")]
    All,
}

impl SubsetTag {
    pub fn size(self) -> Option<usize> {
        match self {
            SubsetTag::K1 => Some(1000),
            SubsetTag::K3 => Some(3000),
            SubsetTag::K5 => Some(5000),
            SubsetTag::K50 => Some(50_000),
            SubsetTag::All => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSplit {
    pub train: LabeledImageSet,
    pub valid: LabeledImageSet,
    pub test: LabeledImageSet,
    pub tag: SubsetTag,
}

/// Last `valid_size` training images become the validation set.
pub fn split_standard(
    train: LabeledImageSet,
    test: LabeledImageSet,
    valid_size: usize,
) -> Result<BenchmarkSplit> {
    if valid_size >= train.len() {
        return Err(Error::invalid(format!(
            "validation size {valid_size} leaves no training data out of {}",
            train.len()
        )));
    }
    let cut = train.len() - valid_size;
    let head: Vec<usize> = (0..cut).collect();
    let tail: Vec<usize> = (cut..train.len()).collect();
    Ok(BenchmarkSplit {
        valid: train.select(&tail),
        train: train.select(&head),
        test,
        tag: SubsetTag::All,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub filter_size: usize,
    pub threshold: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            filter_size: 5,
            threshold: 0.1,
        }
    }
}

/// Target sizes when resampling a split with replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl ResampleSizes {
    /// 100000 / 20000 / 50000
    pub const FULL: Self = Self {
        train: 100_000,
        valid: 20_000,
        test: 50_000,
    };
}

/// Mean over a `k × k` window, truncated at the borders.
pub fn box_filter(img: &[f64], rows: usize, cols: usize, k: usize) -> Vec<f64> {
    let r = (k / 2) as isize;
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let mut sum = 0.0;
            let mut n = 0usize;
            for di in -r..=r {
                for dj in -r..=r {
                    let (y, x) = (i + di, j + dj);
                    if y >= 0 && x >= 0 && (y as usize) < rows && (x as usize) < cols {
                        sum += img[y as usize * cols + x as usize];
                        n += 1;
                    }
                }
            }
            out[i as usize * cols + j as usize] = sum / n as f64;
        }
    }
    out
}

/// Digit pixels above `threshold` overwrite the background.
pub fn composite(digit: &[f64], background: &[f64], threshold: f64) -> Vec<f64> {
    digit
        .iter()
        .zip(background)
        .map(|(&d, &b)| if d > threshold { d } else { b })
        .collect()
}

/// Grayscale images in `[0, 1]` to crop backgrounds from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BackgroundPool {
    pub images: Vec<Matrix>,
}

impl BackgroundPool {
    fn crop(&self, rng: &mut impl Rng, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let img = self
            .images
            .choose(rng)
            .ok_or_else(|| Error::invalid("background pool is empty"))?;
        if img.rows() < rows || img.cols() < cols {
            return Err(Error::invalid(format!(
                "background {}x{} smaller than {rows}x{cols}",
                img.rows(),
                img.cols()
            )));
        }
        let y0 = rng.gen_range(0..=img.rows() - rows);
        let x0 = rng.gen_range(0..=img.cols() - cols);
        let mut out = Vec::with_capacity(rows * cols);
        for y in y0..y0 + rows {
            out.extend_from_slice(&img.row(y)[x0..x0 + cols]);
        }
        Ok(out)
    }
}

/// Loads every png/jpeg/bmp file in `dir` as grayscale, upscaling any image
/// smaller than `min_side`.
pub fn load_background_dir(dir: &Path, min_side: usize) -> Result<BackgroundPool> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg" | "bmp"))
        })
        .collect();
    paths.sort();
    let mut images = Vec::with_capacity(paths.len());
    for p in paths {
        let mut img = image::open(&p)
            .map_err(|e| Error::Image(format!("{}: {e}", p.display())))?
            .to_luma8();
        let side = min_side as u32;
        if img.width() < side || img.height() < side {
            img = image::imageops::resize(
                &img,
                img.width().max(side),
                img.height().max(side),
                image::imageops::FilterType::Triangle,
            );
        }
        let data = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
        images.push(Matrix::from_vec(img.height() as usize, img.width() as usize, data)?);
    }
    if images.is_empty() {
        return Err(Error::invalid(format!("no images in {}", dir.display())));
    }
    Ok(BackgroundPool { images })
}

fn with_backgrounds(
    set: &LabeledImageSet,
    kind: BenchmarkKind,
    size: Option<usize>,
    pool: Option<&BackgroundPool>,
    params: &NoiseParams,
    seed: u64,
) -> Result<LabeledImageSet> {
    let (rows, cols) = set.side();
    let mut rng = rng_for(seed, 0xBAC6);
    let picks: Vec<usize> = match size {
        Some(n) => {
            if set.is_empty() {
                return Err(Error::invalid("cannot resample an empty set"));
            }
            (0..n).map(|_| rng.gen_range(0..set.len())).collect()
        }
        None => (0..set.len()).collect(),
    };
    let mut data = Vec::with_capacity(picks.len() * rows * cols);
    for &i in &picks {
        let background = match kind {
            BenchmarkKind::Noise => {
                let noise: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
                box_filter(&noise, rows, cols, params.filter_size)
            }
            BenchmarkKind::Img => pool
                .ok_or_else(|| Error::invalid("img benchmark needs a background pool"))?
                .crop(&mut rng, rows, cols)?,
            BenchmarkKind::Std => unreachable!("std is a passthrough"),
        };
        data.extend(composite(set.images().row(i), &background, params.threshold));
    }
    let labels = picks.iter().map(|&i| set.labels()[i]).collect();
    LabeledImageSet::new(Matrix::from_vec(picks.len(), rows * cols, data)?, labels, rows, cols)
}

/// Builds the std / noise / img variant of `base`. With `sizes`, each split is
/// resampled with replacement and every drawn image gets a fresh background.
pub fn build_benchmark(
    kind: BenchmarkKind,
    base: &BenchmarkSplit,
    pool: Option<&BackgroundPool>,
    sizes: Option<ResampleSizes>,
    params: &NoiseParams,
    seed: u64,
) -> Result<BenchmarkSplit> {
    if kind == BenchmarkKind::Std {
        return Ok(base.clone());
    }
    if kind == BenchmarkKind::Img && pool.map_or(true, |p| p.images.is_empty()) {
        return Err(Error::invalid("img benchmark needs a non-empty background pool"));
    }
    if params.filter_size == 0 {
        return Err(Error::invalid("filter size must be positive"));
    }
    let build = |set: &LabeledImageSet, n: Option<usize>, stream: u64| {
        with_backgrounds(set, kind, n, pool, params, derive_seed(seed, stream))
    };
    Ok(BenchmarkSplit {
        train: build(&base.train, sizes.map(|s| s.train), 1)?,
        valid: build(&base.valid, sizes.map(|s| s.valid), 2)?,
        test: build(&base.test, sizes.map(|s| s.test), 3)?,
        tag: base.tag,
    })
}

/// Class-stratified training subset; validation and test are untouched.
pub fn subsample(split: &BenchmarkSplit, tag: SubsetTag, seed: u64) -> Result<BenchmarkSplit> {
    let Some(n) = tag.size() else {
        return Ok(BenchmarkSplit {
            tag,
            ..split.clone()
        });
    };
    let train = &split.train;
    if n > train.len() {
        return Err(Error::invalid(format!(
            "subset of {n} requested from {} training images",
            train.len()
        )));
    }
    let mut rng = rng_for(seed, 0x5AB5);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in train.labels().iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let classes = by_class.len();
    let mut order: Vec<usize> = by_class.keys().copied().collect();
    order.shuffle(&mut rng);
    let base = n / classes;
    let extra = n % classes;
    let mut picked = Vec::with_capacity(n);
    for (rank, class) in order.iter().enumerate() {
        let quota = base + usize::from(rank < extra);
        let pool = by_class.get_mut(class).expect("class key");
        if pool.len() < quota {
            return Err(Error::invalid(format!(
                "class {class} has {} images, {quota} needed",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        picked.extend_from_slice(&pool[..quota]);
    }
    picked.sort_unstable();
    Ok(BenchmarkSplit {
        train: train.select(&picked),
        valid: split.valid.clone(),
        test: split.test.clone(),
        tag,
    })
}
