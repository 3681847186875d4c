//! Config-driven experiment runs and their reports.
//!
//! Output layout under the run directory:
//! `report.json`, `config.json`, `csv/{variant}_seed{n}.csv` and
//! `checkpoints/{variant}_seed{n}.bin`.

pub mod checks;
pub mod config;
pub mod hint_task;
pub mod mtl_task;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{
    ExperimentConfig, GradcheckExperiment, HintData, HintExperiment, HintSpec, HintVariant,
    LandmarkData, MtlExperiment, OracleExperiment, MNIST_DIR_ENV,
};
pub use report::{compare_table, config_hash, RunReport, SeedRun, TableFormat};

use crate::error::{Error, Result};

/// Variable overriding the default output root `runs`.
pub const OUTPUT_ROOT_ENV: &str = "REGNET_OUTPUT_ROOT";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides both the config's `output_dir` and the default location.
    pub out_dir: Option<PathBuf>,
    /// Allow writing into an existing directory.
    pub force: bool,
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn resolve_output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| cfg.output_dir().map(Path::to_path_buf))
        .unwrap_or_else(|| output_root().join(cfg.name()))
}

pub(crate) fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Runs every variant and seed of `cfg`, writing logs, checkpoints and
/// `report.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    let out = resolve_output_dir(cfg, opts);
    if out.exists() && !opts.force {
        return Err(Error::InvalidArgument(format!(
            "output directory {} already exists (use --force to overwrite)",
            out.display()
        )));
    }
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;

    let start = Instant::now();
    let mut report = RunReport::new(cfg)?;
    log::info!("{} ({}) -> {}", report.name, report.task, out.display());
    match cfg {
        ExperimentConfig::HintClassification(c) => hint_task::run(c, &out, &mut report)?,
        ExperimentConfig::MtlLandmarks(c) => mtl_task::run(c, &out, &mut report)?,
        ExperimentConfig::Gradcheck(c) => checks::run_gradcheck(c, &out, &mut report)?,
        ExperimentConfig::QuadraticOracles(c) => checks::run_oracles(c, &out, &mut report)?,
    }
    report.recompute_aggregates();
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.save(&out.join("report.json"))?;
    Ok(report)
}
