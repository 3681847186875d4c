use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{aggregate_runs, mean_std, Aggregate};

/// Final metrics of one (variant, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub variant: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    /// Per-epoch log, relative to the output directory.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub task: String,
    /// SHA-256 of the canonical JSON config.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    /// variant -> metric -> aggregate over seeds.
    pub aggregates: BTreeMap<String, BTreeMap<String, Aggregate>>,
    /// Variant names in run order.
    pub variants: Vec<String>,
    /// Pass/fail of built-in checks (gradcheck, oracles); absent for training tasks.
    #[serde(default)]
    pub passed: Option<bool>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_string(cfg)?;
    Ok(format!("{:x}", Sha256::digest(canonical.as_bytes())))
}

/// Trimmed aggregate with 3+ seeds, plain mean ± std otherwise.
pub fn aggregate_values(values: &[f64]) -> Aggregate {
    aggregate_runs(values).unwrap_or_else(|_| mean_std(values))
}

impl RunReport {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            name: cfg.name(),
            task: cfg.task().to_string(),
            config_hash: config_hash(cfg)?,
            config: cfg.clone(),
            seeds: cfg.seeds().to_vec(),
            runs: Vec::new(),
            aggregates: BTreeMap::new(),
            variants: Vec::new(),
            passed: None,
            notes: Vec::new(),
            wall_clock_seconds: 0.0,
        })
    }

    pub fn push(&mut self, run: SeedRun) {
        if !self.variants.contains(&run.variant) {
            self.variants.push(run.variant.clone());
        }
        self.runs.push(run);
    }

    /// Values of `metric` for `variant`, in seed order.
    pub fn values(&self, variant: &str, metric: &str) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.variant == variant)
            .filter_map(|r| r.metrics.get(metric).copied())
            .collect()
    }

    /// Rebuilds `aggregates` from `runs`.
    pub fn recompute_aggregates(&mut self) {
        let mut out = BTreeMap::new();
        for variant in &self.variants {
            let mut names: Vec<&String> = self
                .runs
                .iter()
                .filter(|r| &r.variant == variant)
                .flat_map(|r| r.metrics.keys())
                .collect();
            names.sort();
            names.dedup();
            let per: BTreeMap<String, Aggregate> = names
                .into_iter()
                .map(|m| (m.clone(), aggregate_values(&self.values(variant, m))))
                .collect();
            out.insert(variant.clone(), per);
        }
        self.aggregates = out;
    }

    pub fn mean(&self, variant: &str, metric: &str) -> Option<f64> {
        let v = self.values(variant, metric);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Same report with wall-clock zeroed, for replay comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

/// One row per (report, variant), one column per metric, cells `mean±std`.
pub fn compare_table(reports: &[RunReport], metrics: &[String], format: TableFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to compare"));
    }
    if metrics.is_empty() {
        return Err(Error::invalid("no metrics selected"));
    }
    let task = &reports[0].task;
    if let Some(other) = reports.iter().find(|r| &r.task != task) {
        return Err(Error::invalid(format!(
            "reports mix tasks `{task}` and `{}`",
            other.task
        )));
    }
    let mut rows = Vec::new();
    for r in reports {
        for variant in &r.variants {
            let aggs = r.aggregates.get(variant);
            let mut cells = vec![format!("{}/{}", r.name, variant)];
            for m in metrics {
                let a = aggs.and_then(|a| a.get(m)).ok_or_else(|| {
                    Error::invalid(format!("metric `{m}` missing for {}/{variant}", r.name))
                })?;
                cells.push(a.to_string());
            }
            rows.push(cells);
        }
    }
    let mut header = vec!["config".to_string()];
    header.extend(metrics.iter().cloned());
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for row in rows {
                out.push_str(&format!("| {} |\n", row.join(" | ")));
            }
        }
        TableFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
    }
    Ok(out)
}
