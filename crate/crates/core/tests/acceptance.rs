//! Acceptance suite: prints one PASS / FAIL / SKIPPED line per criterion and
//! exits non-zero if any criterion fails.
//!
//! `REGNET_ACCEPTANCE=1,3` restricts the run to the listed criteria.

mod common;

use std::time::Instant;

use common::*;
use rand::Rng;
use regnet::data::{
    gen_two_class, IdxArray, IdxData, IdxImages, TwoClassConfig, read_idx_images, read_idx_labels,
    write_idx_images, write_idx_labels,
};
use regnet::experiment::{
    hint_task, run_experiment, ExperimentConfig, HintData, HintExperiment, HintSpec, HintVariant,
    MtlExperiment, RunOptions, RunReport,
};
use regnet::hint::{hint_penalty, Dissimilarity};
use regnet::math::{Activation, Matrix};
use regnet::metrics::{aggregate_runs, auc_cdf, cdf_at, nrmse, Shape};
use regnet::mtl::{ImportanceWeights, ScheduleKind, ScheduleSpec, TaskMask};
use regnet::optim::QuadraticModel;
use regnet::rng::rng_for;

enum Status {
    Pass,
    Fail,
    Skipped,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

type Criterion = fn() -> Outcome;

fn main() {
    let only: Option<Vec<usize>> = std::env::var("REGNET_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, Criterion); 8] = [
        (1, "gradient correctness", gradients),
        (2, "closed-form optimizer oracles", optimizer_oracles),
        (3, "metric oracles", metric_oracles),
        (4, "hint-penalty equivalence", hint_equivalence),
        (5, "hint desk-scale trend", hint_trend),
        (6, "multi-task desk-scale trend", mtl_trend),
        (7, "invariance-probe monotonicity", probe_monotonicity),
        (8, "determinism and formats", determinism),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::check(false, format!("panicked: {msg}"))
        });
        let status = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skipped => "SKIPPED",
        };
        println!(
            "criterion {n} ({name}): {status} - {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

// 1 ------------------------------------------------------------------------

fn gradients() -> Outcome {
    let kinds = gradient_kinds();
    let mut worst: f64 = 0.0;
    let mut worst_kind = String::new();
    for i in 0..50 {
        let kind = &kinds[i % kinds.len()];
        let err = gradient_case(kind, 1000 + i as u64);
        if err > worst {
            worst = err;
            worst_kind = format!("{kind:?}");
        }
    }
    let suite = regnet::gradcheck::run_suite(50, 7).expect("library suite runs");
    Outcome::check(
        worst < 1e-5 && suite.passed(),
        format!(
            "50 configurations, max relative error {worst:.2e} ({worst_kind}); library suite {:.2e}; tolerance 1e-5",
            suite.max_rel_error
        ),
    )
}

// 2 ------------------------------------------------------------------------

fn optimizer_oracles() -> Outcome {
    let mut rng = rng_for(21, 0);
    let mut gd: f64 = 0.0;
    let mut l1: f64 = 0.0;
    let mut es: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.gen_range(1..=10);
        let eig: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..4.0)).collect();
        let opt: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let model = QuadraticModel::new(eig.clone(), opt.clone()).unwrap();

        // (a) literal gradient descent on ½(w − w*)ᵀΛ(w − w*)
        let step = rng.gen_range(0.01..0.24);
        let tau = rng.gen_range(1..300);
        let mut w = vec![0.0; d];
        for _ in 0..tau {
            for i in 0..d {
                w[i] -= step * eig[i] * (w[i] - opt[i]);
            }
        }
        let closed = model.gd_closed_form(step, tau).unwrap();
        gd = w.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(gd, f64::max);

        // (b) L1 minimizer against a 1-D grid search per coordinate
        let alpha = rng.gen_range(0.0..4.0);
        let sol = model.l1_minimizer(alpha);
        for i in 0..d {
            let f = |x: f64| 0.5 * eig[i] * (x - opt[i]).powi(2) + alpha * x.abs();
            let grid = zoom_grid_min(f, -opt[i].abs() - 1.0, opt[i].abs() + 1.0);
            l1 = l1.max((grid - sol[i]).abs());
        }

        // (c) early-stopped GD against the L2 solution Λ/(Λ+α)·w*
        for alpha in [0.1f64, 1.0] {
            let eps = 0.01;
            let cap = 0.1f64.min(0.1 * alpha);
            let lam: Vec<f64> = (0..d).map(|_| rng.gen_range(1e-4..=cap)).collect();
            let m = QuadraticModel::new(lam.clone(), opt.clone()).unwrap();
            let tau = (1.0 / (eps * alpha)).round() as usize;
            let stopped = m.gd_trajectory(eps, tau).unwrap();
            for i in 0..d {
                let ridge = lam[i] / (lam[i] + alpha) * opt[i];
                es = es.max(((stopped[i] - ridge) / ridge).abs());
            }
        }
    }
    Outcome::check(
        gd <= 1e-10 && l1 <= 1e-6 && es <= 0.05,
        format!("gd trajectory {gd:.1e} (≤1e-10), l1 grid {l1:.1e} (≤1e-6), early stop vs l2 {:.2}% (≤5%)", es * 100.0),
    )
}

/// Repeated grid scan with zoom; the objective is convex.
fn zoom_grid_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let n = 400;
        let h = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|i| lo + h * i as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        if h < 1e-10 {
            return best;
        }
        lo = best - h;
        hi = best + h;
    }
}

// 3 ------------------------------------------------------------------------

fn metric_oracles() -> Outcome {
    let mut rng = rng_for(33, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.gen_range(4..=12);
        let truth: Vec<f64> = (0..2 * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pred: Vec<f64> = truth.iter().map(|t| t + rng.gen_range(-0.3..0.3)).collect();
        let reference = (0, p / 2);
        let got = nrmse(
            &Shape::from_flat(&pred, reference).unwrap(),
            &Shape::from_flat(&truth, reference).unwrap(),
        )
        .unwrap();
        let mut sum = 0.0;
        for k in 0..p {
            sum += ((pred[2 * k] - truth[2 * k]).powi(2) + (pred[2 * k + 1] - truth[2 * k + 1]).powi(2)).sqrt();
        }
        let (a, b) = (reference.0, reference.1);
        let iod = ((truth[2 * a] - truth[2 * b]).powi(2) + (truth[2 * a + 1] - truth[2 * b + 1]).powi(2)).sqrt();
        worst = worst.max((got - sum / (p as f64 * iod)).abs());
    }
    let nrmse_err = worst;

    let mut cdf_err: f64 = 0.0;
    let mut auc_err: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..60);
        let errors: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    // exactly on a grid point
                    rng.gen_range(0..=500) as f64 * 0.5 / 500.0
                } else {
                    rng.gen_range(0.0..0.7)
                }
            })
            .collect();
        let x = rng.gen_range(0.0..0.6);
        let count = errors.iter().filter(|&&e| e <= x).count();
        cdf_err = cdf_err.max((cdf_at(&errors, x).unwrap() - count as f64 / n as f64).abs());
        let mut total = 0.0;
        for i in 0..=500 {
            let g = i as f64 * 0.5 / 500.0;
            let mut c = 0usize;
            for &e in &errors {
                if e <= g {
                    c += 1;
                }
            }
            total += c as f64 / n as f64;
        }
        auc_err = auc_err.max((auc_cdf(&errors).unwrap() - total / 501.0).abs());
    }

    let mut agg_err: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(3..12);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..20.0)).collect();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let kept = &sorted[1..n - 1];
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let std = (kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / kept.len() as f64).sqrt();
        let a = aggregate_runs(&values).unwrap();
        agg_err = agg_err.max((a.mean - mean).abs()).max((a.std - std).abs());
    }

    let zero = auc_cdf(&[0.0; 17]).unwrap();
    let high = auc_cdf(&[0.51, 0.9, 3.0]).unwrap();
    let worst = nrmse_err.max(cdf_err).max(auc_err).max(agg_err);
    Outcome::check(
        worst <= 1e-12 && zero == 1.0 && high == 0.0,
        format!(
            "nrmse {nrmse_err:.1e}, cdf {cdf_err:.1e}, auc {auc_err:.1e}, aggregate {agg_err:.1e} (≤1e-12); auc(all zero) = {zero}, auc(all > 0.5) = {high}"
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn hint_equivalence() -> Outcome {
    let mut rng = rng_for(44, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let rows = rng.gen_range(1..=16);
        let dim = rng.gen_range(1..=8);
        let classes = rng.gen_range(1..=4);
        let data: Vec<f64> = (0..rows * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let reps = Matrix::from_vec(rows, dim, data).unwrap();
        let labels: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
        for measure in [Dissimilarity::Sed, Dissimilarity::Nmd, Dissimilarity::As] {
            let got = hint_penalty(&reps, &labels, measure).unwrap();
            let want = double_loop_penalty(&reps, &labels, measure);
            worst = worst.max((got - want).abs());
        }
    }
    Outcome::check(
        worst <= 1e-12,
        format!("200 minibatches x 3 measures, max |difference| {worst:.1e} (≤1e-12)"),
    )
}

// 5 ------------------------------------------------------------------------

fn hint_trend() -> Outcome {
    let Some(dir) = hint_task::mnist_dir(None) else {
        return Outcome {
            status: Status::Skipped,
            detail: format!(
                "MNIST not found; set {} to a directory holding the four IDX files",
                regnet::experiment::MNIST_DIR_ENV
            ),
        };
    };
    let cfg = ExperimentConfig::HintClassification(HintExperiment {
        name: Some("hint-trend".into()),
        seeds: vec![0, 1, 2, 3, 4],
        output_dir: None,
        data: HintData::Mnist {
            dir: Some(dir),
            benchmark: regnet::data::BenchmarkKind::Std,
            subset: regnet::data::SubsetTag::K1,
            valid_size: 10_000,
            classes: None,
            noise: Default::default(),
            resample: None,
            background_dir: None,
            data_seed: 0,
        },
        hidden: vec![300, 200, 100],
        activation: Activation::Sigmoid,
        batch_size: 100,
        learning_rate: 0.1,
        momentum: 0.9,
        hint_learning_rate: None,
        variants: vec![
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
        ],
        probe: false,
    });
    let report = run_in_tempdir(&cfg);
    let base = report.mean("mlp", "test_error").unwrap();
    let hint = report.mean("mlp+hint(sed)", "test_error").unwrap();
    Outcome::check(
        base - hint >= 0.5,
        format!("mean test error mlp {base:.2}% vs mlp+hint(sed) {hint:.2}% (need a gap ≥ 0.5 points)"),
    )
}

// 6 ------------------------------------------------------------------------

fn mtl_trend() -> Outcome {
    let mut cfg: MtlExperiment = serde_json::from_str("{}").unwrap();
    cfg.name = Some("mtl-trend".into());
    cfg.seeds = vec![0, 1, 2, 3, 4];
    cfg.variants = vec![TaskMask::Mlp, TaskMask::MlpInOut];
    cfg.schedule = Some(ScheduleSpec::default_for(cfg.epochs));
    assert_eq!(cfg.epochs, 200);
    assert_eq!((cfg.data.train, cfg.data.valid, cfg.data.test, cfg.data.points), (2000, 400, 400, 10));
    let report = run_in_tempdir(&ExperimentConfig::MtlLandmarks(cfg));
    let (mlp, full) = (TaskMask::Mlp.label(), TaskMask::MlpInOut.label());
    let v_mlp = report.mean(mlp, "valid_mse").unwrap();
    let v_full = report.mean(full, "valid_mse").unwrap();
    let a_mlp = report.mean(mlp, "test_auc").unwrap();
    let a_full = report.mean(full, "test_auc").unwrap();
    Outcome::check(
        v_full < v_mlp && a_full > a_mlp,
        format!(
            "valid MSE {mlp} {v_mlp:.4e} vs {full} {v_full:.4e}; test AUC {mlp} {a_mlp:.4} vs {full} {a_full:.4}"
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn probe_monotonicity() -> Outcome {
    let cfg: HintExperiment = serde_json::from_value(serde_json::json!({
        "seeds": [0],
        "data": {"source": "two_class", "train": 400, "valid": 200, "test": 200},
        "hidden": [32, 16, 8],
        "batch_size": 20,
        "learning_rate": 0.1,
        "variants": [{"name": "mlp", "epochs": 30}]
    }))
    .unwrap();
    let data = hint_task::prepare_data(&cfg.data).unwrap();
    let fit = hint_task::fit_classifier(&cfg, &data, &cfg.variants[0], 0).unwrap();
    let probe = fit.final_probe;
    // inversions among hidden layers (all but the last entry)
    let hidden_inversions = probe[..probe.len() - 1]
        .windows(2)
        .filter(|w| w[1] > w[0])
        .count();
    let output_ok = probe[probe.len() - 1] <= probe[probe.len() - 2];
    let shown: Vec<String> = probe.iter().map(|p| format!("{p:.3e}")).collect();
    Outcome::check(
        probe.len() == 4 && hidden_inversions <= 1 && output_ok,
        format!(
            "NMD probe by layer [{}], {hidden_inversions} hidden-layer inversion(s), test error {:.1}%",
            shown.join(", "),
            fit.test_error
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn determinism() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // replays of small configs
    let configs = [
        r#"{"task": "mtl_landmarks", "seeds": [3], "epochs": 3,
            "data": {"train": 60, "valid": 20, "test": 20}, "variants": ["mlp", "mlp_in_out"]}"#,
        r#"{"task": "hint_classification", "seeds": [1],
            "data": {"source": "two_class", "train": 60, "valid": 20, "test": 20},
            "hidden": [12, 8], "batch_size": 10, "probe": true,
            "variants": [{"name": "mlp", "epochs": 3}, {"name": "hint", "epochs": 3, "hint": {"measure": "nmd"}}]}"#,
    ];
    for text in configs {
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let run = |dir: &std::path::Path| {
            run_experiment(
                &cfg,
                &RunOptions {
                    out_dir: Some(dir.to_path_buf()),
                    force: true,
                },
            )
            .unwrap()
        };
        let (ra, rb) = (run(a.path()), run(b.path()));
        let same_report = ra.without_timing() == rb.without_timing();
        let mut same_files = true;
        for r in &ra.runs {
            for rel in [&r.csv, &r.checkpoint].into_iter().flatten() {
                let fa = std::fs::read(a.path().join(rel)).unwrap();
                let fb = std::fs::read(b.path().join(rel)).unwrap();
                same_files &= fa == fb && !fa.is_empty();
            }
        }
        ok &= same_report && same_files;
        notes.push(format!("{} replay identical: {}", cfg.task(), same_report && same_files));
    }

    // IDX round trips
    let dir = tempfile::tempdir().unwrap();
    let set = gen_two_class(&TwoClassConfig::new(30, 5)).unwrap();
    let (images, labels) = set.to_idx().unwrap();
    write_idx_images(&dir.path().join("i"), &images).unwrap();
    write_idx_labels(&dir.path().join("l"), &labels).unwrap();
    let back: IdxImages = read_idx_images(&dir.path().join("i")).unwrap();
    let idx_u8 = back == images && read_idx_labels(&dir.path().join("l")).unwrap() == labels;
    let mut rng = rng_for(8, 0);
    let values: Vec<f64> = (0..60).map(|_| rng.gen_range(-1e3..1e3)).collect();
    let arr = IdxArray::new(vec![3, 4, 5], IdxData::F64(values)).unwrap();
    arr.write(&dir.path().join("f")).unwrap();
    let idx_f64 = IdxArray::read(&dir.path().join("f")).unwrap() == arr
        && std::fs::read(dir.path().join("f")).unwrap() == arr.to_bytes();
    ok &= idx_u8 && idx_f64;
    notes.push(format!("idx u8 round trip: {idx_u8}, f64 round trip: {idx_f64}"));

    // schedule invariants on a 10·t1 horizon
    let t1 = 20;
    let kinds = [
        ScheduleKind::Stairs { t1 },
        ScheduleKind::Linear { total_epochs: t1 },
        ScheduleKind::AbridgedLinear { t1 },
        ScheduleKind::Exponential { sigma: t1 as f64 / 5.0 },
    ];
    let mut sched_ok = true;
    for kind in kinds {
        let spec = ScheduleSpec::new(kind);
        let ws: Vec<ImportanceWeights> = (0..=10 * t1).map(|t| spec.eval(t)).collect();
        let in_range = ws.iter().all(|w| {
            [w.supervised, w.input, w.output]
                .iter()
                .all(|v| (0.0..=1.0).contains(v))
        });
        let monotone = ws.windows(2).all(|p| {
            p[1].supervised >= p[0].supervised && p[1].input <= p[0].input && p[1].output <= p[0].output
        });
        let first = ws[0];
        let last = ws[10 * t1];
        let start = first.supervised == 0.0 && first.input == 1.0 && first.output == 1.0;
        let end = (last.supervised - 1.0).abs() < 1e-6 && last.input < 1e-6 && last.output < 1e-6;
        sched_ok &= in_range && monotone && start && end;
    }
    ok &= sched_ok;
    notes.push(format!("schedule invariants (4 kinds): {sched_ok}"));
    Outcome::check(ok, notes.join("; "))
}

fn run_in_tempdir(cfg: &ExperimentConfig) -> RunReport {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(
        cfg,
        &RunOptions {
            out_dir: Some(dir.path().join("run")),
            force: false,
        },
    )
    .unwrap()
}
