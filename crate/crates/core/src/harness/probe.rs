//! Curvature of the excess risk around the truth under constant shifts.

use serde::{Deserialize, Serialize};

use super::process::{Process, ProcessConfig};
use super::{conditional_logistic_excess, fit_slope, logit};
use crate::error::{Error, Result};
use crate::losses::{LossSpec, PointLoss};

fn default_shifts() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
}

fn default_draws() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub process: ProcessConfig,
    pub loss: LossSpec,
    #[serde(default = "default_shifts")]
    pub shifts: Vec<f64>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Fitted exponent of `excess ~ |a|^kappa`.
    pub kappa: f64,
    pub intercept: f64,
    pub stderr: Option<f64>,
    /// `(|a|, excess)` for every shift, including dropped ones.
    pub points: Vec<(f64, f64)>,
    pub dropped: usize,
}

/// Estimates `R(h* + a) - R(h*)` on one path for every shift `a` (common
/// random numbers) and fits the log-log slope against `|a|`.
pub fn a4_probe(cfg: &ProbeConfig) -> Result<ProbeResult> {
    if cfg.shifts.is_empty() || cfg.shifts.iter().any(|a| *a == 0.0 || !a.is_finite()) {
        return Err(Error::Config("shifts must be finite and non-zero".into()));
    }
    if cfg.draws == 0 {
        return Err(Error::Config("draws must be positive".into()));
    }
    let process: Process = cfg.process.build()?;
    let sample = process.simulate(cfg.draws, cfg.seed)?;
    let k = sample.data.len() as f64;

    let points: Vec<(f64, f64)> = match (&process, &sample.eta) {
        (Process::Binary(_), Some(eta)) => {
            if !matches!(cfg.loss, LossSpec::Logistic) {
                return Err(Error::Config("binary processes require the logistic loss".into()));
            }
            cfg.shifts
                .iter()
                .map(|&a| {
                    let excess = eta
                        .iter()
                        .map(|&e| conditional_logistic_excess(e, logit(e) + a))
                        .sum::<f64>()
                        / k;
                    (a.abs(), excess)
                })
                .collect()
        }
        _ => {
            let truth = process.truth().expect("regression process has a truth");
            let base: Vec<(f64, f64)> = sample.data.iter().map(|(x, y)| (truth.eval(x), y)).collect();
            cfg.shifts
                .iter()
                .map(|&a| {
                    let excess = base
                        .iter()
                        .map(|&(h, y)| cfg.loss.value(h + a, y) - cfg.loss.value(h, y))
                        .sum::<f64>()
                        / k;
                    (a.abs(), excess)
                })
                .collect()
        }
    };

    fit_probe_points(points)
}

/// Fits `log excess` on `log |a|`, failing when more than half the points
/// have a non-positive estimate.
pub fn fit_probe_points(points: Vec<(f64, f64)>) -> Result<ProbeResult> {
    let fit = fit_slope(&points);
    let dropped = points
        .iter()
        .filter(|(_, e)| !(*e > 0.0 && e.is_finite()))
        .count();
    if 2 * dropped > points.len() {
        return Err(Error::ProbeFailure(format!(
            "{dropped} of {} excess estimates were not positive",
            points.len()
        )));
    }
    let fit = fit.map_err(|e| Error::ProbeFailure(e.to_string()))?;
    Ok(ProbeResult {
        kappa: fit.slope,
        intercept: fit.intercept,
        stderr: fit.stderr,
        points,
        dropped,
    })
}
