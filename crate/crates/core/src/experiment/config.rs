use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{BenchmarkKind, NoiseParams, ResampleSizes, SubsetTag};
use crate::error::{Error, Result};
use crate::hint::Dissimilarity;
use crate::math::Activation;
use crate::mtl::{MtlArchitecture, ScheduleSpec, TaskMask};

/// Variable naming the directory searched for MNIST IDX files.
pub const MNIST_DIR_ENV: &str = "REGNET_MNIST_DIR";

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum ExperimentConfig {
    HintClassification(HintExperiment),
    MtlLandmarks(MtlExperiment),
    Gradcheck(GradcheckExperiment),
    QuadraticOracles(OracleExperiment),
}

impl ExperimentConfig {
    /// Parses JSON, naming the offending key path on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg_err = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| cfg_err(".", e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| cfg_err(".", "config must be a JSON object".into()))?;
        let task = match obj.remove("task") {
            Some(serde_json::Value::String(t)) => t,
            Some(_) => return Err(cfg_err("task", "must be a string".into())),
            None => return Err(cfg_err("task", "missing field".into())),
        };
        fn parse<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
            serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })
        }
        let cfg = match task.as_str() {
            "hint_classification" => ExperimentConfig::HintClassification(parse(value)?),
            "mtl_landmarks" => ExperimentConfig::MtlLandmarks(parse(value)?),
            "gradcheck" => ExperimentConfig::Gradcheck(parse(value)?),
            "quadratic_oracles" => ExperimentConfig::QuadraticOracles(parse(value)?),
            other => {
                return Err(cfg_err(
                    "task",
                    format!("unknown task `{other}` (expected hint_classification, mtl_landmarks, gradcheck or quadratic_oracles)"),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn task(&self) -> &'static str {
        match self {
            ExperimentConfig::HintClassification(_) => "hint_classification",
            ExperimentConfig::MtlLandmarks(_) => "mtl_landmarks",
            ExperimentConfig::Gradcheck(_) => "gradcheck",
            ExperimentConfig::QuadraticOracles(_) => "quadratic_oracles",
        }
    }

    pub fn name(&self) -> String {
        let name = match self {
            ExperimentConfig::HintClassification(c) => &c.name,
            ExperimentConfig::MtlLandmarks(c) => &c.name,
            ExperimentConfig::Gradcheck(c) => &c.name,
            ExperimentConfig::QuadraticOracles(c) => &c.name,
        };
        name.clone().unwrap_or_else(|| self.task().to_string())
    }

    pub fn seeds(&self) -> &[u64] {
        match self {
            ExperimentConfig::HintClassification(c) => &c.seeds,
            ExperimentConfig::MtlLandmarks(c) => &c.seeds,
            ExperimentConfig::Gradcheck(c) => &c.seeds,
            ExperimentConfig::QuadraticOracles(c) => &c.seeds,
        }
    }

    pub fn set_seeds(&mut self, seeds: Vec<u64>) {
        match self {
            ExperimentConfig::HintClassification(c) => c.seeds = seeds,
            ExperimentConfig::MtlLandmarks(c) => c.seeds = seeds,
            ExperimentConfig::Gradcheck(c) => c.seeds = seeds,
            ExperimentConfig::QuadraticOracles(c) => c.seeds = seeds,
        }
    }

    pub fn output_dir(&self) -> Option<&Path> {
        match self {
            ExperimentConfig::HintClassification(c) => c.output_dir.as_deref(),
            ExperimentConfig::MtlLandmarks(c) => c.output_dir.as_deref(),
            ExperimentConfig::Gradcheck(c) => c.output_dir.as_deref(),
            ExperimentConfig::QuadraticOracles(c) => c.output_dir.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |path: &str, message: &str| Error::Config {
            path: path.into(),
            message: message.into(),
        };
        if self.seeds().is_empty() {
            return Err(cfg_err("seeds", "seed list must not be empty"));
        }
        match self {
            ExperimentConfig::HintClassification(c) => {
                if c.variants.is_empty() {
                    return Err(cfg_err("variants", "at least one variant is required"));
                }
                if c.hidden.is_empty() {
                    return Err(cfg_err("hidden", "at least one hidden layer is required"));
                }
                if c.batch_size == 0 {
                    return Err(cfg_err("batch_size", "must be positive"));
                }
                for (i, v) in c.variants.iter().enumerate() {
                    if let Some(h) = &v.hint {
                        if let Some(layer) = h.layer {
                            if layer == 0 || layer > c.hidden.len() {
                                return Err(cfg_err(
                                    &format!("variants[{i}].hint.layer"),
                                    "must name a hidden layer (1-based)",
                                ));
                            }
                        }
                    }
                }
                if let HintData::Mnist { dir: Some(d), .. } = &c.data {
                    if !d.is_dir() {
                        return Err(cfg_err("data.dir", "directory does not exist"));
                    }
                }
            }
            ExperimentConfig::MtlLandmarks(c) => {
                if c.variants.is_empty() {
                    return Err(cfg_err("variants", "at least one variant is required"));
                }
                if c.epochs == 0 {
                    return Err(cfg_err("epochs", "must be positive"));
                }
                if c.architecture.output_dim != 2 * c.data.points {
                    return Err(cfg_err(
                        "architecture.output_dim",
                        "must equal twice the landmark count",
                    ));
                }
                if c.architecture.input_dim != c.data.side * c.data.side {
                    return Err(cfg_err("architecture.input_dim", "must equal side squared"));
                }
                if let Some(s) = &c.schedule {
                    s.validate().map_err(|e| cfg_err("schedule", &e.to_string()))?;
                }
            }
            ExperimentConfig::Gradcheck(c) => {
                if c.configs == 0 {
                    return Err(cfg_err("configs", "must be positive"));
                }
            }
            ExperimentConfig::QuadraticOracles(c) => {
                if c.models == 0 || c.dim == 0 {
                    return Err(cfg_err("models", "models and dim must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Source images of a classification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum HintData {
    Mnist {
        /// Falls back to the `REGNET_MNIST_DIR` variable.
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default = "default_benchmark")]
        benchmark: BenchmarkKind,
        #[serde(default = "default_subset")]
        subset: SubsetTag,
        #[serde(default = "default_valid_size")]
        valid_size: usize,
        /// Keep only these digits, relabeled 0..n.
        #[serde(default)]
        classes: Option<Vec<usize>>,
        #[serde(default)]
        noise: NoiseParams,
        #[serde(default)]
        resample: Option<ResampleSizes>,
        #[serde(default)]
        background_dir: Option<PathBuf>,
        #[serde(default)]
        data_seed: u64,
    },
    TwoClass {
        train: usize,
        valid: usize,
        test: usize,
        #[serde(default = "default_two_class_side")]
        side: usize,
        #[serde(default = "default_two_class_noise")]
        noise: f64,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_benchmark() -> BenchmarkKind {
    BenchmarkKind::Std
}
fn default_subset() -> SubsetTag {
    SubsetTag::K1
}
fn default_valid_size() -> usize {
    10_000
}
fn default_two_class_side() -> usize {
    8
}
fn default_two_class_noise() -> f64 {
    0.35
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintSpec {
    /// 1-based hidden layer; defaults to the last hidden layer.
    #[serde(default)]
    pub layer: Option<usize>,
    #[serde(default = "default_measure")]
    pub measure: Dissimilarity,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn default_measure() -> Dissimilarity {
    Dissimilarity::Sed
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintVariant {
    pub name: String,
    pub epochs: usize,
    #[serde(default)]
    pub hint: Option<HintSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintExperiment {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: HintData,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_hint_batch")]
    pub batch_size: usize,
    #[serde(default = "default_hint_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Learning rate of the hint optimizer; defaults to `learning_rate`.
    #[serde(default)]
    pub hint_learning_rate: Option<f64>,
    #[serde(default = "default_hint_variants")]
    pub variants: Vec<HintVariant>,
    /// Record the NMD invariance probe on the training set every epoch.
    #[serde(default)]
    pub probe: bool,
}

fn default_hidden() -> Vec<usize> {
    vec![300, 200, 100]
}
fn default_activation() -> Activation {
    Activation::Sigmoid
}
fn default_hint_batch() -> usize {
    100
}
fn default_hint_lr() -> f64 {
    0.1
}
fn default_momentum() -> f64 {
    0.9
}
fn default_hint_variants() -> Vec<HintVariant> {
    vec![
        HintVariant {
            name: "mlp".into(),
            epochs: 100,
            hint: None,
        },
        HintVariant {
            name: "mlp+hint(sed)".into(),
            epochs: 60,
            hint: Some(HintSpec {
                layer: None,
                measure: Dissimilarity::Sed,
                gamma: 1.0,
                lambda: 1.0,
            }),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkData {
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_eval")]
    pub valid: usize,
    #[serde(default = "default_eval")]
    pub test: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_side")]
    pub side: usize,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// Fraction of training samples with both image and landmarks.
    #[serde(default = "default_paired")]
    pub paired_fraction: f64,
    /// Fraction with an image only; the remainder has landmarks only.
    #[serde(default = "default_input_only")]
    pub input_only_fraction: f64,
    #[serde(default)]
    pub data_seed: u64,
}

fn default_train() -> usize {
    2000
}
fn default_eval() -> usize {
    400
}
fn default_points() -> usize {
    10
}
fn default_side() -> usize {
    20
}
fn default_perturbation() -> f64 {
    0.06
}
fn default_paired() -> f64 {
    0.1
}
fn default_input_only() -> f64 {
    0.45
}

impl Default for LandmarkData {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtlExperiment {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub data: LandmarkData,
    #[serde(default = "MtlArchitecture::desk_scale")]
    pub architecture: MtlArchitecture,
    #[serde(default = "default_mtl_epochs")]
    pub epochs: usize,
    /// Defaults to the abridged linear schedule saturating at 20% of `epochs`.
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default = "default_mtl_variants")]
    pub variants: Vec<TaskMask>,
    #[serde(default = "default_mtl_batch")]
    pub batch_size: usize,
    #[serde(default = "default_corruption")]
    pub corruption: f64,
    #[serde(default = "default_mtl_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_ae_l2")]
    pub ae_l2: f64,
    #[serde(default)]
    pub patience: Option<usize>,
}

fn default_mtl_epochs() -> usize {
    200
}
fn default_mtl_variants() -> Vec<TaskMask> {
    vec![TaskMask::Mlp, TaskMask::MlpInOut]
}
fn default_mtl_batch() -> usize {
    10
}
fn default_corruption() -> f64 {
    0.2
}
fn default_mtl_lr() -> f64 {
    1e-2
}
fn default_ae_l2() -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckExperiment {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_single_seed")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_gradcheck_configs")]
    pub configs: usize,
}

fn default_single_seed() -> Vec<u64> {
    vec![0]
}
fn default_gradcheck_configs() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleExperiment {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_single_seed")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_oracle_models")]
    pub models: usize,
    #[serde(default = "default_oracle_dim")]
    pub dim: usize,
}

fn default_oracle_models() -> usize {
    20
}
fn default_oracle_dim() -> usize {
    10
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_parse_with_defaults() {
        let c = ExperimentConfig::from_json(r#"{"task": "mtl_landmarks"}"#).unwrap();
        let ExperimentConfig::MtlLandmarks(m) = &c else {
            panic!("wrong task")
        };
        assert_eq!(m.epochs, 200);
        assert_eq!(m.architecture, MtlArchitecture::desk_scale());
        assert_eq!(c.seeds().len(), 5);
        let g = ExperimentConfig::from_json(r#"{"task": "gradcheck", "configs": 3}"#).unwrap();
        assert_eq!(g.task(), "gradcheck");
    }

    #[test]
    fn errors_name_the_key_path() {
        let err = ExperimentConfig::from_json(
            r#"{"task": "hint_classification", "data": {"source": "two_class", "train": "x", "valid": 1, "test": 1}}"#,
        )
        .unwrap_err();
        match err {
            Error::Config { path, .. } => assert!(path.contains("data"), "{path}"),
            other => panic!("{other:?}"),
        }
        let err = ExperimentConfig::from_json(r#"{"task": "mtl_landmarks", "epoch": 3}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { path, .. } if path == "epoch"), "{err:?}");
        let err = ExperimentConfig::from_json(r#"{"task": "gradcheck", "seeds": []}"#).unwrap_err();
        assert!(matches!(err, Error::Config { path, .. } if path == "seeds"));
    }

    #[test]
    fn round_trips_through_json() {
        let c = ExperimentConfig::from_json(
            r#"{"task": "hint_classification", "data": {"source": "two_class", "train": 10, "valid": 4, "test": 4}}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }
}
