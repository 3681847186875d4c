use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{GradcheckExperiment, OracleExperiment};
use super::report::{RunReport, SeedRun};
use super::write_lines;
use crate::error::Result;
use crate::gradcheck::{run_suite, REL_TOLERANCE};
use crate::optim::QuadraticModel;
use crate::rng::rng_for;

pub const GD_TOLERANCE: f64 = 1e-10;
pub const L1_TOLERANCE: f64 = 1e-6;
pub const EARLY_STOP_TOLERANCE: f64 = 0.05;
/// Learning rate of the early-stopping comparison.
pub const EARLY_STOP_STEP: f64 = 0.01;

pub fn run_gradcheck(cfg: &GradcheckExperiment, out: &Path, report: &mut RunReport) -> Result<()> {
    let mut passed = true;
    for &seed in &cfg.seeds {
        let suite = run_suite(cfg.configs, seed)?;
        let mut lines = vec!["case,kind,widths,batch,parameters,max_rel_error".to_string()];
        for (i, c) in suite.cases.iter().enumerate() {
            let widths: Vec<String> = c.widths.iter().map(|w| w.to_string()).collect();
            lines.push(format!(
                "{i},{},{},{},{},{:e}",
                c.kind.label(),
                widths.join("-"),
                c.batch,
                c.parameters,
                c.max_rel_error
            ));
        }
        let csv = Path::new("csv").join(format!("gradcheck_seed{seed}.csv"));
        write_lines(&out.join(&csv), &lines)?;
        println!(
            "gradcheck seed {seed}: {} configurations, max relative error {:.3e} (tolerance {:.0e})",
            suite.cases.len(),
            suite.max_rel_error,
            REL_TOLERANCE
        );
        passed &= suite.passed();
        let mut metrics = BTreeMap::new();
        metrics.insert("max_rel_error".to_string(), suite.max_rel_error);
        report.push(SeedRun {
            variant: "gradcheck".into(),
            seed,
            metrics,
            csv: Some(csv),
            checkpoint: None,
        });
    }
    report.passed = Some(passed);
    Ok(())
}

/// Worst residuals of the three closed-form checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResiduals {
    /// Max |GD iterate − closed form|.
    pub gd_trajectory: f64,
    /// Max |L1 closed form − grid-search minimizer|.
    pub l1_grid: f64,
    /// Max elementwise relative gap between early-stopped GD and the L2 solution.
    pub early_stop_l2: f64,
}

impl OracleResiduals {
    pub fn passed(&self) -> bool {
        self.gd_trajectory <= GD_TOLERANCE
            && self.l1_grid <= L1_TOLERANCE
            && self.early_stop_l2 <= EARLY_STOP_TOLERANCE
    }
}

/// Minimizes a convex 1-D function on `[lo, hi]` by repeatedly scanning a
/// grid and zooming in around the best point.
pub fn grid_minimize(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const POINTS: usize = 201;
    loop {
        let step = (hi - lo) / (POINTS - 1) as f64;
        let mut best = lo;
        let mut best_val = f(lo);
        for i in 1..POINTS {
            let x = lo + step * i as f64;
            let v = f(x);
            if v < best_val {
                best = x;
                best_val = v;
            }
        }
        if step < tol {
            return best;
        }
        lo = best - step;
        hi = best + step;
    }
}

pub fn quadratic_residuals(models: usize, dim: usize, seed: u64) -> Result<OracleResiduals> {
    let mut rng = rng_for(seed, 0x0_4AC1E);
    let mut gd: f64 = 0.0;
    let mut l1: f64 = 0.0;
    let mut es: f64 = 0.0;
    for _ in 0..models {
        let d = rng.gen_range(1..=dim);
        let eig: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..5.0)).collect();
        let opt: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m = QuadraticModel::new(eig.clone(), opt.clone())?;
        let step = rng.gen_range(0.01..0.19);
        let steps = rng.gen_range(1..200);
        let a = m.gd_trajectory(step, steps)?;
        let b = m.gd_closed_form(step, steps)?;
        gd = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(gd, f64::max);

        let alpha = rng.gen_range(0.0..3.0);
        let closed = m.l1_minimizer(alpha);
        for i in 0..d {
            let (l, o) = (eig[i], opt[i]);
            let f = |w: f64| 0.5 * l * (w - o).powi(2) + alpha * w.abs();
            let r = o.abs() + 1.0;
            let grid = grid_minimize(f, -r, r, 1e-9);
            l1 = l1.max((grid - closed[i]).abs());
        }

        for alpha in [0.1f64, 1.0] {
            let cap = (0.1 * alpha).min(0.1);
            let eig: Vec<f64> = (0..d).map(|_| rng.gen_range(cap * 1e-3..=cap)).collect();
            let m = QuadraticModel::new(eig, opt.clone())?;
            let tau = (1.0 / (EARLY_STOP_STEP * alpha)).round() as usize;
            let stopped = m.gd_trajectory(EARLY_STOP_STEP, tau)?;
            let ridge = m.l2_minimizer(alpha);
            for (s, r) in stopped.iter().zip(&ridge) {
                es = es.max(((s - r) / r).abs());
            }
        }
    }
    Ok(OracleResiduals {
        gd_trajectory: gd,
        l1_grid: l1,
        early_stop_l2: es,
    })
}

pub fn run_oracles(cfg: &OracleExperiment, out: &Path, report: &mut RunReport) -> Result<()> {
    let mut passed = true;
    let mut lines = vec!["seed,gd_trajectory,l1_grid,early_stop_l2".to_string()];
    for &seed in &cfg.seeds {
        let r = quadratic_residuals(cfg.models, cfg.dim, seed)?;
        println!(
            "oracles seed {seed}: gd trajectory {:.3e} (tol {GD_TOLERANCE:.0e}), l1 grid {:.3e} (tol {L1_TOLERANCE:.0e}), early stop vs l2 {:.3e} (tol {EARLY_STOP_TOLERANCE})",
            r.gd_trajectory, r.l1_grid, r.early_stop_l2
        );
        lines.push(format!(
            "{seed},{:e},{:e},{:e}",
            r.gd_trajectory, r.l1_grid, r.early_stop_l2
        ));
        passed &= r.passed();
        let mut metrics = BTreeMap::new();
        metrics.insert("gd_trajectory".to_string(), r.gd_trajectory);
        metrics.insert("l1_grid".to_string(), r.l1_grid);
        metrics.insert("early_stop_l2".to_string(), r.early_stop_l2);
        report.push(SeedRun {
            variant: "quadratic".into(),
            seed,
            metrics,
            csv: None,
            checkpoint: None,
        });
    }
    write_lines(&out.join("csv").join("oracles.csv"), &lines)?;
    report.passed = Some(passed);
    Ok(())
}
