//! Sample-size sweeps: simulate, calibrate, fit and score every
//! `(n, replication)` cell, then fit the log-log slope of the medians.

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::process::{Process, ProcessConfig};
use super::{
    best_constant_excess, estimate_excess_risk_classification, estimate_l2_error,
    estimate_loss_excess, fit_slope, quantile_sorted, SlopeFit,
};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::penalty::{PenaltyFamily, Regime, TuningParams};
use crate::rng::{rng_from_seed, split_seed};
use crate::theory::{calibrate, effective_smoothness, CalibrationConstants, FunctionClass};
use crate::trainer::{fit, TrainConfig};

/// Penalty family plus the tuning knobs, as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    #[serde(flatten)]
    pub family: PenaltyFamily,
    #[serde(default = "one")]
    pub lambda_scale: f64,
    pub nu3: f64,
    pub regime: Regime,
    /// Mixing constants `c` and `γ` (subexponential regime only).
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub gamma: f64,
}

fn one() -> f64 {
    1.0
}

impl PenaltyConfig {
    pub fn tuning(&self) -> TuningParams {
        TuningParams {
            regime: self.regime,
            c: self.c,
            gamma: self.gamma,
            nu3: self.nu3,
            lambda_scale: self.lambda_scale,
        }
    }
}

/// Function class used for calibration, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ClassConfig {
    Holder {
        s: f64,
        d: usize,
        kappa: f64,
    },
    Composition {
        beta: Vec<f64>,
        t: Vec<usize>,
        d: usize,
        kappa: f64,
    },
}

impl ClassConfig {
    pub fn build(&self) -> Result<FunctionClass> {
        Ok(match self {
            ClassConfig::Holder { s, d, kappa } => FunctionClass::Holder {
                s: *s,
                d: *d,
                kappa: *kappa,
            },
            ClassConfig::Composition { beta, t, d, kappa } => FunctionClass::Composition {
                smoothness: effective_smoothness(beta, t)?,
                d: *d,
                kappa: *kappa,
            },
        })
    }
}

/// Synthetic errors `c n^{-exponent} exp(log_sd Z)` used instead of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub c: f64,
    pub exponent: f64,
    #[serde(default)]
    pub log_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellId {
    pub n: usize,
    pub replication: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

fn default_bootstrap() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub process: ProcessConfig,
    pub loss: LossSpec,
    pub penalty: PenaltyConfig,
    pub class: ClassConfig,
    #[serde(default)]
    pub constants: CalibrationConstants,
    #[serde(default)]
    pub train: TrainConfig,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub m_test: usize,
    #[serde(default)]
    pub seed: u64,
    /// Bootstrap resamples for the slope standard error.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub synthetic: Option<ErrorModel>,
    /// Cells whose training data get a NaN response.
    #[serde(default)]
    pub poison_cells: Vec<CellId>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "n_grid must be strictly increasing: {:?}",
                self.n_grid
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.m_test == 0 {
            return Err(Error::Config("m_test must be positive".into()));
        }
        self.train.validate()?;
        if self.synthetic.is_none() {
            self.penalty.tuning().validate()?;
        }
        Ok(())
    }
}

/// Seed of cell `(n, replication)`; independent of the grid and of `R`.
pub fn cell_seed(seed: u64, n: usize, replication: usize) -> u64 {
    split_seed(split_seed(seed, n as u64), replication as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub ok: bool,
    /// Squared L2 error (regression) or excess logistic risk (classification).
    pub error: Option<f64>,
    /// Raw excess of the training loss (regression only).
    pub loss_excess: Option<f64>,
    /// Excess risk of the best constant (classification only).
    pub baseline: Option<f64>,
    pub l0: Option<usize>,
    pub final_objective: Option<f64>,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub stage: Option<String>,
    pub message: Option<String>,
}

impl CellRow {
    fn empty(n: usize, replication: usize, seed: u64) -> Self {
        Self {
            n,
            replication,
            seed,
            ok: false,
            error: None,
            loss_excess: None,
            baseline: None,
            l0: None,
            final_objective: None,
            depth: None,
            width: None,
            lambda: None,
            tau: None,
            stage: None,
            message: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub ok: usize,
    pub failed: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

impl NSummary {
    pub fn iqr(&self) -> Option<f64> {
        Some(self.q75? - self.q25?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub task: Task,
    pub rows: Vec<CellRow>,
    pub summary: Vec<NSummary>,
    pub slope: Option<SlopeFit>,
    /// `"ok"` or `"insufficient-points"`.
    pub slope_status: String,
    pub bootstrap_se: Option<f64>,
    /// `-e` for the class's rate `n^{-e}`.
    pub theoretical_slope: f64,
    pub failed_cells: usize,
}

impl SweepResult {
    /// Number of adjacent grid points where the median increases.
    pub fn median_inversions(&self) -> usize {
        let medians: Vec<f64> = self.summary.iter().filter_map(|s| s.median).collect();
        medians.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn medians(&self) -> Vec<(usize, f64)> {
        self.summary
            .iter()
            .filter_map(|s| s.median.map(|m| (s.n, m)))
            .collect()
    }
}

struct Context {
    process: Process,
    class: FunctionClass,
    tuning: TuningParams,
}

fn run_cell(cfg: &SweepConfig, ctx: &Context, n: usize, rep: usize) -> CellRow {
    let seed = cell_seed(cfg.seed, n, rep);
    let mut row = CellRow::empty(n, rep, seed);
    let fail = |mut row: CellRow, stage: &str, e: Error| {
        row.stage = Some(stage.to_string());
        row.message = Some(e.to_string());
        row
    };
    let sim_seed = split_seed(seed, 0);
    let train_seed = split_seed(seed, 1);
    let test_seed = split_seed(seed, 2);

    if let Some(model) = cfg.synthetic {
        let mut rng = rng_from_seed(sim_seed);
        let z: f64 = StandardNormal.sample(&mut rng);
        row.error = Some(model.c * (n as f64).powf(-model.exponent) * (model.log_sd * z).exp());
        row.ok = true;
        return row;
    }

    let mut sample = match ctx.process.simulate(n, sim_seed) {
        Ok(s) => s,
        Err(e) => return fail(row, "simulate", e),
    };
    if cfg.poison_cells.contains(&CellId { n, replication: rep }) {
        if let Some(y) = sample.data.ys_mut().first_mut() {
            *y = f64::NAN;
        }
    }
    let calib = match calibrate(
        &ctx.tuning,
        &ctx.class,
        n,
        cfg.loss.lipschitz_const(),
        cfg.penalty.family,
        &cfg.constants,
    ) {
        Ok(c) => c,
        Err(e) => return fail(row, "calibrate", e),
    };
    row.depth = Some(calib.depth);
    row.width = Some(calib.width);
    row.lambda = Some(calib.penalty.lambda);
    row.tau = Some(calib.penalty.tau);
    let train = TrainConfig {
        seed: train_seed,
        ..cfg.train.clone()
    };
    let (net, trace) = match fit(&sample.data, &calib.arch, &cfg.loss, &calib.penalty, &train) {
        Ok(r) => r,
        Err(e) => return fail(row, "fit", e),
    };
    let last = trace.final_record().expect("trace has the initial record");
    row.l0 = Some(last.l0);
    row.final_objective = Some(last.objective);

    let scored = match &ctx.process {
        Process::Binary(spec) => estimate_excess_risk_classification(&net, spec, cfg.m_test, test_seed)
            .and_then(|e| {
                row.baseline = Some(best_constant_excess(spec, cfg.m_test, test_seed)?.value);
                Ok(e.value)
            }),
        regression => {
            let truth = regression.truth().expect("regression process has a truth");
            estimate_l2_error(&net, &truth, regression, cfg.m_test, test_seed).and_then(|e| {
                row.loss_excess = Some(
                    estimate_loss_excess(&net, &truth, regression, &cfg.loss, cfg.m_test, test_seed)?
                        .value,
                );
                Ok(e.value)
            })
        }
    };
    match scored {
        Ok(v) => {
            row.error = Some(v);
            row.ok = true;
            row
        }
        Err(e) => fail(row, "estimate", e),
    }
}

/// Runs every cell on a pool of `workers` threads. The result does not
/// depend on `workers`.
pub fn rate_sweep(cfg: &SweepConfig, workers: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let process = cfg.process.build()?;
    let class = cfg.class.build()?;
    if cfg.synthetic.is_none() && class.input_dim() != process.input_dim() {
        return Err(Error::Config(format!(
            "class dimension {} does not match process input dimension {}",
            class.input_dim(),
            process.input_dim()
        )));
    }
    let ctx = Context {
        process,
        class,
        tuning: cfg.penalty.tuning(),
    };
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<CellRow> =
        pool.install(|| cells.par_iter().map(|&(n, r)| run_cell(cfg, &ctx, n, r)).collect());

    let per_n: Vec<(usize, Vec<f64>)> = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let errs = rows
                .iter()
                .filter(|r| r.n == n && r.ok)
                .filter_map(|r| r.error)
                .collect();
            (n, errs)
        })
        .collect();
    let summary: Vec<NSummary> = per_n
        .iter()
        .map(|(n, errs)| {
            let mut sorted = errs.clone();
            sorted.sort_by(f64::total_cmp);
            let q = |p| (!sorted.is_empty()).then(|| quantile_sorted(&sorted, p));
            NSummary {
                n: *n,
                ok: errs.len(),
                failed: cfg.replications - errs.len(),
                median: q(0.5),
                q25: q(0.25),
                q75: q(0.75),
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = summary
        .iter()
        .filter_map(|s| s.median.map(|m| (s.n as f64, m)))
        .collect();
    let (slope, slope_status) = match fit_slope(&points) {
        Ok(f) => (Some(f), "ok".to_string()),
        Err(Error::InsufficientPoints(_)) => (None, "insufficient-points".to_string()),
        Err(e) => return Err(e),
    };
    let bootstrap_se = if cfg.replications >= 2 && slope.is_some() {
        bootstrap_slope_se(&per_n, cfg.bootstrap, split_seed(cfg.seed, u64::MAX))
    } else {
        None
    };
    let failed_cells = rows.iter().filter(|r| !r.ok).count();
    Ok(SweepResult {
        task: if ctx.process.is_binary() {
            Task::Classification
        } else {
            Task::Regression
        },
        rows,
        summary,
        slope,
        slope_status,
        bootstrap_se,
        theoretical_slope: -ctx.class.rate_exponent(),
        failed_cells,
    })
}

fn bootstrap_slope_se(per_n: &[(usize, Vec<f64>)], resamples: usize, seed: u64) -> Option<f64> {
    use rand::Rng as _;
    let mut rng = rng_from_seed(seed);
    let mut slopes = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut pts = Vec::with_capacity(per_n.len());
        for (n, errs) in per_n {
            if errs.is_empty() {
                continue;
            }
            let mut draw: Vec<f64> = (0..errs.len())
                .map(|_| errs[rng.random_range(0..errs.len())])
                .collect();
            draw.sort_by(f64::total_cmp);
            pts.push((*n as f64, quantile_sorted(&draw, 0.5)));
        }
        if let Ok(f) = fit_slope(&pts) {
            slopes.push(f.slope);
        }
    }
    if slopes.len() < 2 {
        return None;
    }
    let k = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / k;
    Some((slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt())
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

/// Revision string baked in at build time, if any.
pub fn revision() -> &'static str {
    option_env!("GIT_REVISION").unwrap_or("unversioned")
}

#[derive(Serialize)]
struct SweepMetadata<'a> {
    revision: &'a str,
    crate_version: &'a str,
    os: &'a str,
    arch: &'a str,
    config: &'a SweepConfig,
    task: Task,
    slope: &'a Option<SlopeFit>,
    slope_status: &'a str,
    bootstrap_se: Option<f64>,
    theoretical_slope: f64,
    median_inversions: usize,
    failed_cells: usize,
    summary: &'a [NSummary],
    seed_ledger: Vec<(usize, usize, u64)>,
}

/// Writes `cells.csv`, `summary.csv` and `result.json` into `dir`.
pub fn persist_sweep(result: &SweepResult, cfg: &SweepConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("cells.csv"))?;
    w.write_record([
        "n",
        "replication",
        "seed",
        "ok",
        "error",
        "loss_excess",
        "baseline",
        "l0",
        "final_objective",
        "depth",
        "width",
        "lambda",
        "tau",
        "stage",
        "message",
    ])?;
    for r in &result.rows {
        w.write_record([
            r.n.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            r.ok.to_string(),
            opt(&r.error),
            opt(&r.loss_excess),
            opt(&r.baseline),
            opt(&r.l0),
            opt(&r.final_objective),
            opt(&r.depth),
            opt(&r.width),
            opt(&r.lambda),
            opt(&r.tau),
            opt(&r.stage),
            opt(&r.message),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["n", "ok", "failed", "median", "q25", "q75", "iqr"])?;
    for s in &result.summary {
        w.write_record([
            s.n.to_string(),
            s.ok.to_string(),
            s.failed.to_string(),
            opt(&s.median),
            opt(&s.q25),
            opt(&s.q75),
            opt(&s.iqr()),
        ])?;
    }
    w.flush()?;

    let meta = SweepMetadata {
        revision: revision(),
        crate_version: env!("CARGO_PKG_VERSION"),
        os: std::env::consts::OS,
        arch: std::env::consts::ARCH,
        config: cfg,
        task: result.task,
        slope: &result.slope,
        slope_status: &result.slope_status,
        bootstrap_se: result.bootstrap_se,
        theoretical_slope: result.theoretical_slope,
        median_inversions: result.median_inversions(),
        failed_cells: result.failed_cells,
        summary: &result.summary,
        seed_ledger: result.rows.iter().map(|r| (r.n, r.replication, r.seed)).collect(),
    };
    fs::write(dir.join("result.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
