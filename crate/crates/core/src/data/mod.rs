//! Dataset ingestion, benchmark builders and synthetic generators.

mod benchmark;
mod idx;
mod landmarks;
mod manifest;
mod two_class;

pub use benchmark::{
    box_filter, build_benchmark, composite, load_background_dir, split_standard, subsample,
    BackgroundPool, BenchmarkKind, BenchmarkSplit, NoiseParams, ResampleSizes, SubsetTag,
};
pub use idx::{
    read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxArray, IdxData,
    IdxImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use landmarks::{
    gen_synthetic_landmarks, LandmarkConfig, LandmarkSplits, ShapeParams, SyntheticLandmarkTask,
};
pub use manifest::DatasetManifest;
pub use two_class::{gen_two_class, TwoClassConfig};

use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Flattened grayscale images in `[0, 1]` with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Matrix,
    labels: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl LabeledImageSet {
    pub fn new(images: Matrix, labels: Vec<usize>, rows: usize, cols: usize) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.rows(),
                labels: labels.len(),
            });
        }
        if images.cols() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} images need {} columns, got {}",
                rows * cols,
                images.cols()
            )));
        }
        if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("pixel values must lie in [0, 1]"));
        }
        Ok(Self {
            images,
            labels,
            rows,
            cols,
        })
    }

    pub fn from_idx(images: &IdxImages, labels: &[u8]) -> Result<Self> {
        if images.count() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.count(),
                labels: labels.len(),
            });
        }
        let pixels = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
        let m = Matrix::from_vec(images.count(), images.rows * images.cols, pixels)?;
        Self::new(
            m,
            labels.iter().map(|&l| l as usize).collect(),
            images.rows,
            images.cols,
        )
    }

    /// Quantizes back to bytes (`round(255·p)`).
    pub fn to_idx(&self) -> Result<(IdxImages, Vec<u8>)> {
        let pixels = self
            .images
            .data()
            .iter()
            .map(|p| (p * 255.0).round() as u8)
            .collect();
        let labels = self
            .labels
            .iter()
            .map(|&l| u8::try_from(l).map_err(|_| Error::invalid(format!("label {l} exceeds 255"))))
            .collect::<Result<_>>()?;
        Ok((
            IdxImages {
                rows: self.rows,
                cols: self.cols,
                pixels,
            },
            labels,
        ))
    }

    pub fn images(&self) -> &Matrix {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn side(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            images: self.images.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }

    /// Rows whose label is in `keep`, relabeled by their position in `keep`.
    pub fn filter_classes(&self, keep: &[usize]) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        let mut out = self.select(&idx);
        for l in &mut out.labels {
            *l = keep.iter().position(|k| k == l).expect("filtered");
        }
        out
    }
}

/// Reads an image file and a label file in IDX format.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    LabeledImageSet::from_idx(&images, &labels)
}

/// Standard MNIST file names inside `dir`, plain or with `.idx` style dashes.
pub fn load_mnist_dir(dir: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let find = |stem: &str| -> Result<std::path::PathBuf> {
        for name in [stem.to_string(), stem.replacen("-idx", ".idx", 1)] {
            let p = dir.join(&name);
            if p.exists() {
                return Ok(p);
            }
        }
        Err(Error::invalid(format!("{} not found in {}", stem, dir.display())))
    };
    let train = load_idx(
        &find("train-images-idx3-ubyte")?,
        &find("train-labels-idx1-ubyte")?,
    )?;
    let test = load_idx(
        &find("t10k-images-idx3-ubyte")?,
        &find("t10k-labels-idx1-ubyte")?,
    )?;
    Ok((train, test))
}
