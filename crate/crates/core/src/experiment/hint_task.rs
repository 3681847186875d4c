use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::config::{HintData, HintExperiment, HintVariant, MNIST_DIR_ENV};
use super::mtl_task::file_stem;
use super::report::{RunReport, SeedRun};
use super::{write_bytes, write_lines};
use crate::data::{
    build_benchmark, gen_two_class, load_background_dir, load_mnist_dir, split_standard, subsample,
    BenchmarkKind, BenchmarkSplit, LabeledImageSet, SubsetTag, TwoClassConfig,
};
use crate::error::{Error, Result};
use crate::hint::{invariance_probe, train_epoch_hint, Dissimilarity, HintConfig, HintOptimizers};
use crate::math::{Activation, Matrix};
use crate::metrics::classification_error;
use crate::network::{chain_specs, Network};
use crate::optim::{EarlyStopping, OptimConfig};

/// Resolves the MNIST directory from the config or the environment.
pub fn mnist_dir(configured: Option<&Path>) -> Option<PathBuf> {
    configured
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(MNIST_DIR_ENV).map(PathBuf::from))
        .filter(|p| p.is_dir())
}

pub fn prepare_data(data: &HintData) -> Result<BenchmarkSplit> {
    match data {
        HintData::TwoClass {
            train,
            valid,
            test,
            side,
            noise,
            data_seed,
        } => {
            let make = |count: usize, stream: u64| {
                gen_two_class(&TwoClassConfig {
                    count,
                    side: *side,
                    noise: *noise,
                    seed: crate::rng::derive_seed(*data_seed, stream),
                })
            };
            Ok(BenchmarkSplit {
                train: make(*train, 0)?,
                valid: make(*valid, 1)?,
                test: make(*test, 2)?,
                tag: SubsetTag::All,
            })
        }
        HintData::Mnist {
            dir,
            benchmark,
            subset,
            valid_size,
            classes,
            noise,
            resample,
            background_dir,
            data_seed,
        } => {
            let dir = mnist_dir(dir.as_deref()).ok_or_else(|| Error::Config {
                path: "data.dir".into(),
                message: format!("no MNIST directory given and {MNIST_DIR_ENV} is not set"),
            })?;
            let (mut train, mut test) = load_mnist_dir(&dir)?;
            if let Some(keep) = classes {
                train = train.filter_classes(keep);
                test = test.filter_classes(keep);
            }
            let base = split_standard(train, test, *valid_size)?;
            let pool = match (benchmark, background_dir) {
                (BenchmarkKind::Img, Some(bg)) => Some(load_background_dir(bg, base.train.side().0)?),
                _ => None,
            };
            let built = build_benchmark(*benchmark, &base, pool.as_ref(), *resample, noise, *data_seed)?;
            subsample(&built, *subset, *data_seed)
        }
    }
}

pub fn init_network(cfg: &HintExperiment, data: &BenchmarkSplit, seed: u64) -> Result<Network> {
    let classes = data
        .train
        .class_count()
        .max(data.valid.class_count())
        .max(data.test.class_count());
    let mut widths = vec![data.train.images().cols()];
    widths.extend(&cfg.hidden);
    widths.push(classes);
    Network::init(&chain_specs(&widths, cfg.activation, Activation::Softmax), seed)
}

pub fn hint_config(net: &Network, variant: &HintVariant) -> HintConfig {
    match &variant.hint {
        None => HintConfig {
            lambda: 0.0,
            ..HintConfig::for_network(net)
        },
        Some(h) => HintConfig {
            layer_index: h.layer.unwrap_or(net.depth() - 1),
            measure: h.measure,
            gamma: h.gamma,
            lambda: h.lambda,
        },
    }
}

pub fn error_rate(net: &Network, set: &LabeledImageSet) -> Result<f64> {
    let pred = predict_in_chunks(net, set.images(), 1000)?;
    classification_error(&pred, set.labels())
}

fn predict_in_chunks(net: &Network, x: &Matrix, chunk: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(x.rows());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + chunk).min(x.rows());
        out.extend(net.predict(&x.row_block(start, end))?.argmax_rows());
        start = end;
    }
    Ok(out)
}

/// Outcome of one classifier training run.
#[derive(Debug, Clone)]
pub struct HintFit {
    pub best: Network,
    /// 1-based epoch of the lowest validation error.
    pub best_epoch: usize,
    pub valid_error: f64,
    pub test_error: f64,
    /// NMD probe per layer of the final network, output layer last.
    pub final_probe: Vec<f64>,
    pub csv: Vec<String>,
}

pub fn fit_classifier(
    cfg: &HintExperiment,
    data: &BenchmarkSplit,
    variant: &HintVariant,
    seed: u64,
) -> Result<HintFit> {
    let mut net = init_network(cfg, data, seed)?;
    let hint = hint_config(&net, variant);
    hint.validate(&net)?;
    let sup = OptimConfig::sgd(cfg.learning_rate).with_momentum(cfg.momentum);
    let hint_opt = OptimConfig::sgd(cfg.hint_learning_rate.unwrap_or(cfg.learning_rate))
        .with_momentum(cfg.momentum);
    let mut opts = HintOptimizers::new(&net, sup, hint_opt);
    let mut stopper = EarlyStopping::new(usize::MAX);
    let depth = net.depth();
    let mut header = "epoch,j_sup_train,j_h_train,valid_error,test_error".to_string();
    if cfg.probe {
        for k in 1..=depth {
            header.push_str(&format!(",probe_l{k}"));
        }
    }
    let mut csv = vec![header];
    let mut final_probe = Vec::new();
    for epoch in 0..variant.epochs {
        let stats = train_epoch_hint(
            &mut net,
            data.train.images(),
            data.train.labels(),
            &hint,
            &mut opts,
            cfg.batch_size,
            seed,
            epoch,
        )?;
        let valid_error = error_rate(&net, &data.valid)?;
        let test_error = error_rate(&net, &data.test)?;
        let mut row = format!(
            "{},{:e},{:e},{},{}",
            epoch,
            stats.supervised_loss,
            stats.hint_loss,
            valid_error,
            test_error
        );
        if cfg.probe || epoch + 1 == variant.epochs {
            let probe = invariance_probe(
                &net,
                data.train.images(),
                data.train.labels(),
                Dissimilarity::Nmd,
                cfg.batch_size,
            )?;
            if cfg.probe {
                for p in &probe {
                    row.push_str(&format!(",{p:e}"));
                }
            }
            final_probe = probe;
        }
        csv.push(row);
        stopper.update(valid_error, &net);
    }
    let best_epoch = stopper.best_epoch();
    let best = stopper.into_best().unwrap_or(net);
    Ok(HintFit {
        valid_error: error_rate(&best, &data.valid)?,
        test_error: error_rate(&best, &data.test)?,
        best,
        best_epoch,
        final_probe,
        csv,
    })
}

pub fn run(cfg: &HintExperiment, out: &Path, report: &mut RunReport) -> Result<()> {
    let data = prepare_data(&cfg.data)?;
    log::info!(
        "data: {} train / {} valid / {} test, {} classes",
        data.train.len(),
        data.valid.len(),
        data.test.len(),
        data.train.class_count()
    );
    for variant in &cfg.variants {
        for &seed in &cfg.seeds {
            let fit = fit_classifier(cfg, &data, variant, seed)?;
            log::info!(
                "{} seed {seed}: valid {:.2}% test {:.2}% (best epoch {})",
                variant.name,
                fit.valid_error,
                fit.test_error,
                fit.best_epoch
            );
            let stem = format!("{}_seed{seed}", file_stem(&variant.name));
            let csv = Path::new("csv").join(format!("{stem}.csv"));
            write_lines(&out.join(&csv), &fit.csv)?;
            let ckpt = Path::new("checkpoints").join(format!("{stem}.bin"));
            write_bytes(&out.join(&ckpt), &fit.best.to_bytes())?;

            let mut metrics = BTreeMap::new();
            metrics.insert("valid_error".to_string(), fit.valid_error);
            metrics.insert("test_error".to_string(), fit.test_error);
            metrics.insert("best_epoch".to_string(), fit.best_epoch as f64);
            for (k, p) in fit.final_probe.iter().enumerate() {
                metrics.insert(format!("probe_l{}", k + 1), *p);
            }
            report.push(SeedRun {
                variant: variant.name.clone(),
                seed,
                metrics,
                csv: Some(csv),
                checkpoint: Some(ckpt),
            });
        }
    }
    Ok(())
}
