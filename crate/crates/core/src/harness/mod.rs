//! Experiment orchestration: held-out error estimation, log-log slope fits,
//! rate sweeps, the excess-risk curvature probe and the command-line jobs.

pub mod commands;
pub mod probe;
pub mod process;
pub mod sweep;

use serde::{Deserialize, Serialize};

use crate::data::in_unit_cube;
use crate::error::{Error, Result};
use crate::losses::{logistic_phi, PointLoss};
use crate::network::Network;
use crate::processes::{BinaryArSpec, Truth};

pub use probe::{a4_probe, ProbeConfig, ProbeResult};
pub use process::{Process, ProcessConfig, Sample, TruthConfig};
pub use sweep::{rate_sweep, ErrorModel, SweepConfig, SweepResult, Task};

/// Anything that maps an input window to a real prediction.
pub trait Predictor: Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

impl Predictor for Network {
    fn predict(&self, x: &[f64]) -> f64 {
        self.clamp_output(self.forward_raw(x))
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Monte-Carlo mean with its naive standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Number of terms averaged.
    pub used: usize,
}

fn mean_and_se(values: &[f64]) -> Estimate {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        std_error: (var / k).sqrt(),
        used: values.len(),
    }
}

/// Mean of `(ĥ(X_t) - h*(X_t))^2` over the windows of a fresh path of length
/// `m_test` that fall in `[0,1]^d`.
pub fn estimate_l2_error<P: Predictor + ?Sized>(
    pred: &P,
    truth: &Truth,
    process: &Process,
    m_test: usize,
    seed: u64,
) -> Result<Estimate> {
    let sample = process.simulate(m_test, seed)?;
    let sq: Vec<f64> = sample
        .data
        .iter()
        .filter(|(x, _)| in_unit_cube(x))
        .map(|(x, _)| {
            let d = pred.predict(x) - truth.eval(x);
            d * d
        })
        .collect();
    if sq.is_empty() {
        return Err(Error::EstimationSupport);
    }
    Ok(mean_and_se(&sq))
}

/// Mean of `ℓ(ĥ(X_t), Y_t) - ℓ(h*(X_t), Y_t)` over the held-out windows in
/// `[0,1]^d`.
pub fn estimate_loss_excess<P: Predictor + ?Sized, L: PointLoss + ?Sized>(
    pred: &P,
    truth: &Truth,
    process: &Process,
    loss: &L,
    m_test: usize,
    seed: u64,
) -> Result<Estimate> {
    let sample = process.simulate(m_test, seed)?;
    let diffs: Vec<f64> = sample
        .data
        .iter()
        .filter(|(x, _)| in_unit_cube(x))
        .map(|(x, y)| loss.value(pred.predict(x), y) - loss.value(truth.eval(x), y))
        .collect();
    if diffs.is_empty() {
        return Err(Error::EstimationSupport);
    }
    Ok(mean_and_se(&diffs))
}

fn xlogx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// `η φ(h) + (1-η) φ(-h) - H(η)` with `φ(v) = log(1 + e^{-v})` and `H` the
/// binary entropy in nats; the minimum over `h` is zero.
pub fn conditional_logistic_excess(eta: f64, h: f64) -> f64 {
    let risk = eta * logistic_phi(h) + (1.0 - eta) * logistic_phi(-h);
    let entropy = -(xlogx(eta) + xlogx(1.0 - eta));
    (risk - entropy).max(0.0)
}

/// `log(η / (1 - η))`, infinite at the endpoints.
pub fn logit(eta: f64) -> f64 {
    (eta / (1.0 - eta)).ln()
}

/// Closed-form conditional excess logistic risk of `pred`, averaged over the
/// windows of a fresh path of length `m_test`.
pub fn estimate_excess_risk_classification<P: Predictor + ?Sized>(
    pred: &P,
    spec: &BinaryArSpec,
    m_test: usize,
    seed: u64,
) -> Result<Estimate> {
    let process = Process::Binary(spec.clone());
    let sample = process.simulate(m_test, seed)?;
    let eta = sample.eta.expect("binary processes report eta");
    let values: Vec<f64> = sample
        .data
        .iter()
        .zip(&eta)
        .map(|((x, _), e)| conditional_logistic_excess(*e, pred.predict(x)))
        .collect();
    if values.is_empty() {
        return Err(Error::EstimationSupport);
    }
    Ok(mean_and_se(&values))
}

/// Excess risk of the best constant predictor `logit(mean η)`, on the same
/// held-out path as [`estimate_excess_risk_classification`].
pub fn best_constant_excess(spec: &BinaryArSpec, m_test: usize, seed: u64) -> Result<Estimate> {
    let process = Process::Binary(spec.clone());
    let sample = process.simulate(m_test, seed)?;
    let eta = sample.eta.expect("binary processes report eta");
    let mean_eta = eta.iter().sum::<f64>() / eta.len() as f64;
    let c = logit(mean_eta.clamp(1e-12, 1.0 - 1e-12));
    let values: Vec<f64> = eta.iter().map(|e| conditional_logistic_excess(*e, c)).collect();
    Ok(mean_and_se(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` with fewer than three usable points.
    pub stderr: Option<f64>,
    pub used: usize,
    /// Points dropped because the error was not positive and finite.
    pub rejected: Vec<(f64, f64)>,
}

/// Ordinary least squares of `log error` on `log n`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut rejected = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(n, e) in points {
        if n > 0.0 && e > 0.0 && e.is_finite() && n.is_finite() {
            xs.push(n.ln());
            ys.push(e.ln());
        } else {
            rejected.push((n, e));
        }
    }
    let k = xs.len();
    if k < 2 {
        return Err(Error::InsufficientPoints(k));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints(1));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (k > 2).then(|| {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (kf - 2.0) / sxx).sqrt()
    });
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        used: k,
        rejected,
    })
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}
