use regnet::experiment::{run_experiment, ExperimentConfig, RunOptions, RunReport};
use regnet::metrics::{aggregate_runs, mean_std};

fn run(cfg: &ExperimentConfig, dir: &std::path::Path) -> RunReport {
    run_experiment(
        cfg,
        &RunOptions {
            out_dir: Some(dir.to_path_buf()),
            force: true,
        },
    )
    .unwrap()
}

const HINT: &str = r#"{
    "task": "hint_classification",
    "seeds": [0, 1, 2],
    "data": {"source": "two_class", "train": 80, "valid": 30, "test": 30},
    "hidden": [10, 6],
    "batch_size": 20,
    "variants": [
        {"name": "mlp", "epochs": 4},
        {"name": "hint-as", "epochs": 3, "hint": {"measure": "as", "layer": 1}}
    ]
}"#;

#[test]
fn report_json_is_identical_modulo_wall_clock() {
    let cfg = ExperimentConfig::from_json(HINT).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&cfg, a.path());
    let rb = run(&cfg, b.path());
    assert_eq!(ra.without_timing(), rb.without_timing());
    let strip = |p: &std::path::Path| {
        let mut r = RunReport::load(&p.join("report.json")).unwrap();
        r.wall_clock_seconds = 0.0;
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_eq!(ra.config, cfg);
    assert_eq!(ra.config_hash.len(), 64);
}

#[test]
fn aggregates_recompute_from_seed_values() {
    let cfg = ExperimentConfig::from_json(HINT).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cfg, dir.path());
    assert_eq!(report.runs.len(), 6);
    for variant in ["mlp", "hint-as"] {
        for metric in ["valid_error", "test_error", "best_epoch", "probe_l1", "probe_l3"] {
            let values = report.values(variant, metric);
            assert_eq!(values.len(), 3, "{variant}/{metric}");
            let agg = report.aggregates[variant][metric];
            assert_eq!(agg, aggregate_runs(&values).unwrap());
        }
        let epochs = report.values(variant, "best_epoch");
        assert!(epochs.iter().all(|&e| e >= 1.0 && e <= 4.0));
    }
    // fewer than three seeds fall back to the plain mean
    let mut two = cfg.clone();
    two.set_seeds(vec![4, 5]);
    let report = run(&two, dir.path());
    let v = report.values("mlp", "test_error");
    assert_eq!(report.aggregates["mlp"]["test_error"], mean_std(&v));
}

#[test]
fn csv_logs_have_one_row_per_epoch() {
    let cfg = ExperimentConfig::from_json(HINT).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cfg, dir.path());
    for r in &report.runs {
        let text = std::fs::read_to_string(dir.path().join(r.csv.as_ref().unwrap())).unwrap();
        let epochs = if r.variant == "mlp" { 4 } else { 3 };
        assert_eq!(text.lines().count(), epochs + 1);
        assert!(text.starts_with("epoch,j_sup_train,j_h_train,valid_error,test_error"));
        let ckpt = std::fs::read(dir.path().join(r.checkpoint.as_ref().unwrap())).unwrap();
        let net = regnet::Network::from_bytes(&ckpt).unwrap();
        assert_eq!(net.depth(), 3);
    }
}

#[test]
fn mtl_run_logs_schedule_and_losses() {
    let cfg = ExperimentConfig::from_json(
        r#"{"task": "mtl_landmarks", "seeds": [1], "epochs": 5,
            "variants": ["mlp_out"],
            "data": {"train": 50, "valid": 10, "test": 10, "paired_fraction": 0.5, "input_only_fraction": 0.2},
            "schedule": {"kind": "stairs", "t1": 2}}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cfg, dir.path());
    let r = &report.runs[0];
    assert_eq!(r.variant, "MLP+out");
    let text = std::fs::read_to_string(dir.path().join(r.csv.as_ref().unwrap())).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,lambda_sup,lambda_in,lambda_out,j_s_train,j_in,j_out,j_s_valid");
    assert_eq!(lines.len(), 6);
    // stairs: reconstruction only before t1, input task masked out
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&first[1..4], &["0", "0", "1"]);
    let last: Vec<&str> = lines[5].split(',').collect();
    assert_eq!(&last[1..4], &["1", "0", "0"]);
    let auc = r.metrics["test_auc"];
    assert!((0.0..=1.0).contains(&auc));
}
