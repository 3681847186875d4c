use std::collections::BTreeMap;
use std::path::Path;

use super::config::MtlExperiment;
use super::report::{RunReport, SeedRun};
use super::{write_bytes, write_lines};
use crate::data::{LandmarkSplits, SyntheticLandmarkTask};
use crate::error::Result;
use crate::metrics::{auc_cdf, nrmse};
use crate::mtl::{fit_mtl, MtlEpochLog, MtlNetwork, MtlTrainConfig, ScheduleSpec, TaskMask};
use crate::optim::OptimConfig;

pub fn prepare_data(cfg: &MtlExperiment) -> Result<LandmarkSplits> {
    let d = &cfg.data;
    LandmarkSplits::generate(
        (d.train, d.valid, d.test),
        d.points,
        d.side,
        d.perturbation,
        d.data_seed,
    )
}

pub fn train_config(cfg: &MtlExperiment, mask: TaskMask) -> MtlTrainConfig {
    let main = OptimConfig::sgd(cfg.learning_rate).with_momentum(cfg.momentum);
    MtlTrainConfig {
        batch_size: cfg.batch_size,
        corruption: cfg.corruption,
        mask,
        main_optimizer: main,
        ae_optimizer: main.with_l2(cfg.ae_l2),
    }
}

/// NRMSE of every predicted shape against the truth.
pub fn shape_errors(task: &SyntheticLandmarkTask, predictions: &crate::Matrix) -> Result<Vec<f64>> {
    (0..task.len())
        .map(|i| {
            nrmse(
                &task.shape(predictions.row(i))?,
                &task.shape(task.targets.row(i))?,
            )
        })
        .collect()
}

pub fn run(cfg: &MtlExperiment, out: &Path, report: &mut RunReport) -> Result<()> {
    let splits = prepare_data(cfg)?;
    let d = &cfg.data;
    let train = splits
        .train
        .partition(d.paired_fraction, d.input_only_fraction, d.data_seed)?;
    let (paired, input_only, label_only) = train.subset_sizes();
    log::info!("training set: {paired} paired, {input_only} input-only, {label_only} label-only");
    let schedule = cfg
        .schedule
        .unwrap_or_else(|| ScheduleSpec::default_for(cfg.epochs));
    for &mask in &cfg.variants {
        let variant = mask.label().to_string();
        for &seed in &cfg.seeds {
            let net = MtlNetwork::init(&cfg.architecture, seed)?;
            let fit = fit_mtl(
                net,
                &train,
                &splits.valid.images,
                &splits.valid.targets,
                &schedule,
                &train_config(cfg, mask),
                cfg.epochs,
                cfg.patience,
                seed,
            )?;
            let test_mse = fit.best.supervised_loss(&splits.test.images, &splits.test.targets)?;
            let errors = shape_errors(&splits.test, &fit.best.predict(&splits.test.images)?)?;
            let test_auc = auc_cdf(&errors)?;
            log::info!(
                "{variant} seed {seed}: valid {:.4e} test {:.4e} auc {:.4} (best epoch {})",
                fit.best_valid,
                test_mse,
                test_auc,
                fit.best_epoch
            );

            let stem = format!("{}_seed{seed}", file_stem(&variant));
            let csv = Path::new("csv").join(format!("{stem}.csv"));
            let mut lines = vec![MtlEpochLog::CSV_HEADER.to_string()];
            lines.extend(fit.logs.iter().map(MtlEpochLog::csv_row));
            write_lines(&out.join(&csv), &lines)?;
            let ckpt = Path::new("checkpoints").join(format!("{stem}.bin"));
            write_bytes(&out.join(&ckpt), &fit.best.to_bytes())?;

            let mut metrics = BTreeMap::new();
            metrics.insert("valid_mse".to_string(), fit.best_valid);
            metrics.insert("test_mse".to_string(), test_mse);
            metrics.insert("test_auc".to_string(), test_auc);
            metrics.insert(
                "test_nrmse_mean".to_string(),
                errors.iter().sum::<f64>() / errors.len().max(1) as f64,
            );
            metrics.insert("best_epoch".to_string(), fit.best_epoch as f64);
            report.push(SeedRun {
                variant: variant.clone(),
                seed,
                metrics,
                csv: Some(csv),
                checkpoint: Some(ckpt),
            });
        }
    }
    Ok(())
}

/// Variant label reduced to characters safe in file names.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
