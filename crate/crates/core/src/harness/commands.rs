//! Jobs behind the `spdnn` subcommands. Each reads a JSON config, writes
//! its artifacts into an output directory and returns a JSON summary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::probe::{a4_probe, ProbeConfig};
use super::process::ProcessConfig;
use super::sweep::{persist_sweep, rate_sweep, revision, ClassConfig, PenaltyConfig, SweepConfig};
use super::{estimate_excess_risk_classification, estimate_l2_error};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::processes::{stability_of_phis, GexparParams};
use crate::rng::split_seed;
use crate::theory::{
    build_hypercube, calibrate, effective_smoothness, verify_lemma1, CalibrationConstants,
    HypercubeOptions,
};
use crate::trainer::{fit, TrainConfig};

/// Outcome of a job: a JSON summary and whether an acceptance check failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: Value,
    pub check_failed: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self {
            summary,
            check_failed: false,
        }
    }
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub process: ProcessConfig,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Writes `data.csv` (and `eta.csv` for binary processes).
pub fn run_simulate(cfg: &SimulateConfig, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    let seed = seed.unwrap_or(cfg.seed);
    let sample = cfg.process.build()?.simulate(cfg.n, seed)?;
    fs::create_dir_all(out)?;
    sample
        .data
        .write_csv(BufWriter::new(File::create(out.join("data.csv"))?))?;
    if let Some(eta) = &sample.eta {
        let mut w = csv::Writer::from_path(out.join("eta.csv"))?;
        w.write_record(["t", "eta"])?;
        for (t, e) in eta.iter().enumerate() {
            w.write_record([(t + 1).to_string(), e.to_string()])?;
        }
        w.flush()?;
    }
    Ok(Outcome::ok(json!({
        "rows": sample.data.len(),
        "dim": sample.data.dim(),
        "seed": seed,
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainJobConfig {
    pub process: ProcessConfig,
    pub n: usize,
    pub loss: LossSpec,
    pub penalty: PenaltyConfig,
    pub class: ClassConfig,
    #[serde(default)]
    pub constants: CalibrationConstants,
    #[serde(default)]
    pub train: TrainConfig,
    /// Held-out path length for scoring; zero skips scoring.
    #[serde(default)]
    pub m_test: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Simulates, calibrates and fits one model. Writes `model.json`,
/// `trace.csv` and `train.json`.
pub fn run_train(cfg: &TrainJobConfig, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    let seed = seed.unwrap_or(cfg.seed);
    let process = cfg.process.build()?;
    let class = cfg.class.build()?;
    let sample = process.simulate(cfg.n, split_seed(seed, 0))?;
    let calib = calibrate(
        &cfg.penalty.tuning(),
        &class,
        cfg.n,
        cfg.loss.lipschitz_const(),
        cfg.penalty.family,
        &cfg.constants,
    )?;
    let train = TrainConfig {
        seed: split_seed(seed, 1),
        ..cfg.train.clone()
    };
    let (net, trace) = fit(&sample.data, &calib.arch, &cfg.loss, &calib.penalty, &train)?;

    let error = if cfg.m_test == 0 {
        None
    } else if let Some(truth) = process.truth() {
        Some(estimate_l2_error(&net, &truth, &process, cfg.m_test, split_seed(seed, 2))?.value)
    } else {
        let spec = process.binary_spec()?;
        Some(estimate_excess_risk_classification(&net, spec, cfg.m_test, split_seed(seed, 2))?.value)
    };

    fs::create_dir_all(out)?;
    fs::write(out.join("model.json"), net.to_json()? + "\n")?;
    trace.write_csv(BufWriter::new(File::create(out.join("trace.csv"))?))?;
    let summary = json!({
        "seed": seed,
        "revision": revision(),
        "depth": calib.depth,
        "width": calib.width,
        "weight_bound": calib.weight_bound,
        "lambda": calib.penalty.lambda,
        "tau": calib.penalty.tau,
        "selected_run": trace.selected_run,
        "final_objectives": trace.final_objectives,
        "rejected_steps": trace.rejected_steps,
        "final": trace.final_record(),
        "error": error,
    });
    write_json(&out.join("train.json"), &summary)?;
    Ok(Outcome::ok(summary))
}

/// Runs the sweep and persists `cells.csv`, `summary.csv`, `result.json`.
pub fn run_sweep(cfg: &SweepConfig, seed: Option<u64>, workers: usize, out: &Path) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = rate_sweep(&cfg, workers)?;
    persist_sweep(&result, &cfg, out)?;
    Ok(Outcome::ok(json!({
        "slope": result.slope.as_ref().map(|s| s.slope),
        "slope_status": result.slope_status,
        "theoretical_slope": result.theoretical_slope,
        "bootstrap_se": result.bootstrap_se,
        "failed_cells": result.failed_cells,
        "median_inversions": result.median_inversions(),
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundConfig {
    pub beta: Vec<f64>,
    pub t: Vec<usize>,
    pub n: usize,
    #[serde(default)]
    pub hypercube: HypercubeOptions,
}

/// Builds the hypercube construction and writes `lowerbound.json`. The
/// outcome is flagged failed when either check fails.
pub fn run_lowerbound(cfg: &LowerBoundConfig, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    let mut opts = cfg.hypercube;
    if let Some(s) = seed {
        opts.seed = s;
    }
    let smooth = effective_smoothness(&cfg.beta, &cfg.t)?;
    let construction = build_hypercube(&smooth, cfg.n, &opts)?;
    let report = verify_lemma1(&construction);
    fs::create_dir_all(out)?;
    write_json(&out.join("lowerbound.json"), &report)?;
    Ok(Outcome {
        check_failed: !report.passed(),
        summary: serde_json::to_value(&report)?,
    })
}

/// Runs the curvature probe and writes `probe.json`.
pub fn run_probe(cfg: &ProbeConfig, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = a4_probe(&cfg)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("probe.json"), &result)?;
    Ok(Outcome::ok(serde_json::to_value(&result)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StabilityConfig {
    Params { params: GexparParams },
    Phis { phis: Vec<f64> },
}

/// Checks the characteristic roots and writes `stability.json`.
pub fn run_stability(cfg: &StabilityConfig, out: &Path) -> Result<Outcome> {
    let report = match cfg {
        StabilityConfig::Params { params } => {
            params.validate()?;
            stability_of_phis(&params.phis())
        }
        StabilityConfig::Phis { phis } => {
            if phis.is_empty() || phis.iter().any(|p| !p.is_finite()) {
                return Err(Error::Config("phis must be nonempty and finite".into()));
            }
            stability_of_phis(phis)
        }
    };
    fs::create_dir_all(out)?;
    write_json(&out.join("stability.json"), &report)?;
    Ok(Outcome::ok(serde_json::to_value(&report)?))
}
