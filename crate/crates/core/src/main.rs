use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use regnet::data::{
    build_benchmark, gen_synthetic_landmarks, gen_two_class, load_mnist_dir, split_standard,
    subsample, write_idx_images, write_idx_labels, BenchmarkKind, DatasetManifest, IdxArray,
    IdxData, LabeledImageSet, LandmarkConfig, NoiseParams, SubsetTag, TwoClassConfig,
};
use regnet::experiment::{
    compare_table, run_experiment, ExperimentConfig, GradcheckExperiment, OracleExperiment,
    RunOptions, RunReport, TableFormat, MNIST_DIR_ENV,
};
use regnet::Error;

#[derive(Parser)]
#[command(name = "regnet", version, about = "Regularized feedforward network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Seed count (`7` runs seeds 0..7) or explicit list (`3,5,8`).
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write into an existing output directory.
        #[arg(long)]
        force: bool,
    },
    /// Finite-difference check of every analytic gradient.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Closed-form checks of gradient descent, L1/L2 decay and early stopping.
    Oracles {
        #[arg(long, default_value_t = 20)]
        models: usize,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Generate a dataset as IDX files plus manifest.json.
    GenData {
        kind: DataKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample count (landmarks, two-class).
        #[arg(long, default_value_t = 2800)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 20)]
        side: usize,
        /// MNIST directory for `benchmark`; defaults to $REGNET_MNIST_DIR.
        #[arg(long)]
        mnist_dir: Option<PathBuf>,
        #[arg(long, default_value = "noise")]
        benchmark: String,
        #[arg(long, default_value = "all")]
        subset: String,
        #[arg(long)]
        force: bool,
    },
    /// Tabulate aggregated metrics of several reports.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Comma-separated metric names.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Landmarks,
    TwoClass,
    Benchmark,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

enum Failure {
    Error(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => 2,
                Error::NumericalAbort(_) | Error::NonFinite(_) => 3,
                _ => 1,
            })
        }
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config {
        path: "--seeds".into(),
        message: format!("expected a count or a comma-separated list, got `{spec}`"),
    };
    if spec.contains(',') {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        let n: u64 = spec.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        Ok((0..n).collect())
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            seeds,
            out,
            force,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seeds {
                cfg.set_seeds(parse_seeds(&s)?);
            }
            finish(run_experiment(&cfg, &RunOptions { out_dir: out, force })?)
        }
        Command::Gradcheck {
            configs,
            seed,
            out,
            force,
        } => {
            let cfg = ExperimentConfig::Gradcheck(GradcheckExperiment {
                name: Some("gradcheck".into()),
                seeds: vec![seed],
                output_dir: None,
                configs,
            });
            run_check(cfg, out, force)
        }
        Command::Oracles {
            models,
            dim,
            seed,
            out,
            force,
        } => {
            let cfg = ExperimentConfig::QuadraticOracles(OracleExperiment {
                name: Some("oracles".into()),
                seeds: vec![seed],
                output_dir: None,
                models,
                dim,
            });
            run_check(cfg, out, force)
        }
        Command::GenData {
            kind,
            out,
            seed,
            count,
            points,
            side,
            mnist_dir,
            benchmark,
            subset,
            force,
        } => {
            if out.exists() && !force {
                return Err(Error::InvalidArgument(format!(
                    "output directory {} already exists (use --force to overwrite)",
                    out.display()
                ))
                .into());
            }
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            let manifest = match kind {
                DataKind::Landmarks => gen_landmarks(&out, count, points, side, seed)?,
                DataKind::TwoClass => gen_two(&out, count, seed)?,
                DataKind::Benchmark => gen_benchmark(&out, mnist_dir, &benchmark, &subset, seed)?,
            };
            manifest.save(&out.join("manifest.json"))?;
            println!("wrote {} files to {}", manifest.files.len(), out.display());
            Ok(())
        }
        Command::Compare {
            reports,
            metrics,
            format,
        } => {
            let loaded = reports
                .iter()
                .map(|p| RunReport::load(p))
                .collect::<Result<Vec<_>, _>>()?;
            let metrics = if metrics.is_empty() {
                default_metrics(&loaded[0])
            } else {
                metrics
            };
            let format = match format {
                Format::Markdown => TableFormat::Markdown,
                Format::Csv => TableFormat::Csv,
            };
            print!("{}", compare_table(&loaded, &metrics, format)?);
            Ok(())
        }
    }
}

fn default_metrics(report: &RunReport) -> Vec<String> {
    report
        .aggregates
        .values()
        .next()
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default()
}

fn run_check(cfg: ExperimentConfig, out: Option<PathBuf>, force: bool) -> Result<(), Failure> {
    let dir = match out {
        Some(dir) => dir,
        None => {
            let tmp = std::env::temp_dir().join(format!("regnet-{}-{}", cfg.task(), std::process::id()));
            let report = run_experiment(
                &cfg,
                &RunOptions {
                    out_dir: Some(tmp.clone()),
                    force: true,
                },
            );
            let _ = std::fs::remove_dir_all(&tmp);
            return finish(report?);
        }
    };
    finish(run_experiment(
        &cfg,
        &RunOptions {
            out_dir: Some(dir),
            force,
        },
    )?)
}

fn finish(report: RunReport) -> Result<(), Failure> {
    for (variant, metrics) in &report.aggregates {
        let cells: Vec<String> = metrics
            .iter()
            .map(|(k, v)| format!("{k}={:.4e}±{:.1e}", v.mean, v.std))
            .collect();
        println!("{variant}: {}", cells.join(" "));
    }
    println!("{:.1}s", report.wall_clock_seconds);
    match report.passed {
        Some(false) => Err(Failure::Check(format!("{} exceeded its tolerance", report.task))),
        _ => Ok(()),
    }
}

fn gen_landmarks(out: &Path, count: usize, points: usize, side: usize, seed: u64) -> Result<DatasetManifest, Error> {
    let cfg = LandmarkConfig::new(count, points, side, seed);
    let task = gen_synthetic_landmarks(&cfg)?;
    let images = IdxArray::new(
        vec![count, side, side],
        IdxData::F64(task.images.data().to_vec()),
    )?;
    let targets = IdxArray::new(
        vec![count, 2 * points],
        IdxData::F64(task.targets.data().to_vec()),
    )?;
    images.write(&out.join("images.idx"))?;
    targets.write(&out.join("targets.idx"))?;
    Ok(DatasetManifest {
        kind: "landmarks".into(),
        seed,
        parameters: serde_json::to_value(cfg)?,
        files: vec!["images.idx".into(), "targets.idx".into()],
    })
}

fn write_set(out: &Path, prefix: &str, set: &LabeledImageSet) -> Result<Vec<String>, Error> {
    let (images, labels) = set.to_idx()?;
    let img = format!("{prefix}-images-idx3-ubyte");
    let lab = format!("{prefix}-labels-idx1-ubyte");
    write_idx_images(&out.join(&img), &images)?;
    write_idx_labels(&out.join(&lab), &labels)?;
    Ok(vec![img, lab])
}

fn gen_two(out: &Path, count: usize, seed: u64) -> Result<DatasetManifest, Error> {
    let cfg = TwoClassConfig::new(count, seed);
    let set = gen_two_class(&cfg)?;
    Ok(DatasetManifest {
        kind: "two_class".into(),
        seed,
        parameters: serde_json::to_value(cfg)?,
        files: write_set(out, "all", &set)?,
    })
}

fn gen_benchmark(
    out: &Path,
    mnist_dir: Option<PathBuf>,
    benchmark: &str,
    subset: &str,
    seed: u64,
) -> Result<DatasetManifest, Error> {
    let dir = mnist_dir
        .or_else(|| std::env::var_os(MNIST_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::Config {
            path: "--mnist-dir".into(),
            message: format!("no MNIST directory given and {MNIST_DIR_ENV} is not set"),
        })?;
    let kind: BenchmarkKind = benchmark.parse()?;
    let tag: SubsetTag = serde_json::from_value(serde_json::Value::String(subset.into()))
        .map_err(|e| Error::Config {
            path: "--subset".into(),
            message: e.to_string(),
        })?;
    let (train, test) = load_mnist_dir(&dir)?;
    let base = split_standard(train, test, 10_000)?;
    let params = NoiseParams::default();
    let split = subsample(&build_benchmark(kind, &base, None, None, &params, seed)?, tag, seed)?;
    let mut files = write_set(out, "train", &split.train)?;
    files.extend(write_set(out, "valid", &split.valid)?);
    files.extend(write_set(out, "test", &split.test)?);
    Ok(DatasetManifest {
        kind: format!("mnist-{benchmark}"),
        seed,
        parameters: serde_json::json!({
            "subset": subset,
            "valid_size": 10_000,
            "filter_size": params.filter_size,
            "threshold": params.threshold,
        }),
        files,
    })
}
