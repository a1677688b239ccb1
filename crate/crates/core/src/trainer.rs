//! Penalized empirical risk minimization by proximal gradient steps.
//!
//! Each step takes a gradient step on the empirical risk, applies the exact
//! componentwise prox of the penalty restricted to `[-B, B]`, then projects.
//! Several independently initialized runs are made and the one with the
//! smallest final objective is kept.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{empirical_risk, PointLoss};
use crate::network::{Architecture, Network, DEFAULT_ZERO_TOL};
use crate::penalty::PenaltySpec;
use crate::rng::{rng_from_seed, split_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSize {
    #[default]
    Full,
    Size(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Size(b) => s.serialize_u64(*b as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Count(usize),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "full" => Ok(BatchSize::Full),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "batch_size must be \"full\" or a positive integer, got {t:?}"
            ))),
            Raw::Count(0) => Err(serde::de::Error::custom("batch_size must be positive")),
            Raw::Count(b) => Ok(BatchSize::Size(b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub step_size: f64,
    pub schedule: Schedule,
    /// Extra runs beyond the first.
    pub restarts: usize,
    pub seed: u64,
    /// Only used with full batches.
    pub backtracking: bool,
    pub zero_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: BatchSize::Full,
            step_size: 0.1,
            schedule: Schedule::Cosine,
            restarts: 2,
            seed: 0,
            backtracking: true,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if let BatchSize::Size(0) = self.batch_size {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(Error::Config("zero_tol must be >= 0".into()));
        }
        Ok(())
    }

    fn step_at(&self, epoch: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.step_size,
            Schedule::Cosine => {
                let frac = epoch as f64 / self.epochs as f64;
                self.step_size * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub risk: f64,
    pub penalty: f64,
    pub l0: usize,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Records of the selected run, `epochs + 1` of them.
    pub records: Vec<EpochRecord>,
    pub selected_run: usize,
    /// Final objective of every run; `None` marks a diverged run.
    pub final_objectives: Vec<Option<f64>>,
    /// Steps whose backtracking search found no acceptable step size.
    pub rejected_steps: usize,
}

impl TrainTrace {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "objective", "risk", "penalty", "l0", "linf"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.objective.to_string(),
                r.risk.to_string(),
                r.penalty.to_string(),
                r.l0.to_string(),
                r.linf.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Empirical risk plus total penalty.
pub fn objective<L: PointLoss + ?Sized>(
    net: &Network,
    data: &Dataset,
    loss: &L,
    penalty: &PenaltySpec,
) -> Result<f64> {
    Ok(empirical_risk(loss, net, data)? + penalty.total(net.params().as_slice()))
}

fn record<L: PointLoss + ?Sized>(
    epoch: usize,
    net: &Network,
    data: &Dataset,
    loss: &L,
    penalty: &PenaltySpec,
    zero_tol: f64,
) -> Result<EpochRecord> {
    let risk = empirical_risk(loss, net, data)?;
    let pen = penalty.total(net.params().as_slice());
    Ok(EpochRecord {
        epoch,
        objective: risk + pen,
        risk,
        penalty: pen,
        l0: net.params().sparsity(zero_tol),
        linf: net.params().sup_norm(),
    })
}

struct RunOutcome {
    net: Network,
    records: Vec<EpochRecord>,
    rejected: usize,
}

/// Fits the penalized estimator. Deterministic for a fixed `config.seed`.
pub fn fit<L: PointLoss + ?Sized>(
    data: &Dataset,
    arch: &Architecture,
    loss: &L,
    penalty: &PenaltySpec,
    config: &TrainConfig,
) -> Result<(Network, TrainTrace)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::DegenerateSample("empty training set".into()));
    }
    if data.dim() != arch.input_dim() {
        return Err(Error::Shape {
            expected: arch.input_dim(),
            got: data.dim(),
        });
    }
    for &y in data.ys() {
        loss.validate(y)?;
    }

    let runs = config.restarts + 1;
    let mut best: Option<(usize, f64, RunOutcome)> = None;
    let mut finals = Vec::with_capacity(runs);
    let mut last_records = Vec::new();
    for run in 0..runs {
        let seed = split_seed(config.seed, run as u64);
        match single_run(data, arch, loss, penalty, config, seed)? {
            Ok(outcome) => {
                let obj = outcome.records.last().map(|r| r.objective).unwrap();
                finals.push(Some(obj));
                if best.as_ref().map_or(true, |(_, b, _)| obj < *b) {
                    best = Some((run, obj, outcome));
                }
            }
            Err(records) => {
                finals.push(None);
                last_records = records;
            }
        }
    }
    match best {
        Some((run, _, outcome)) => Ok((
            outcome.net,
            TrainTrace {
                records: outcome.records,
                selected_run: run,
                final_objectives: finals,
                rejected_steps: outcome.rejected,
            },
        )),
        None => Err(Error::TrainingFailed {
            runs,
            trace: Box::new(TrainTrace {
                records: last_records,
                selected_run: runs - 1,
                final_objectives: finals,
                rejected_steps: 0,
            }),
        }),
    }
}

/// Outer error: hard failure. Inner error: the run diverged, with its records.
#[allow(clippy::type_complexity)]
fn single_run<L: PointLoss + ?Sized>(
    data: &Dataset,
    arch: &Architecture,
    loss: &L,
    penalty: &PenaltySpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<std::result::Result<RunOutcome, Vec<EpochRecord>>> {
    let mut rng = rng_from_seed(seed);
    let mut net = Network::init_uniform(arch.clone(), &mut rng);
    let bound = arch.weight_bound();
    let mut records = Vec::with_capacity(config.epochs + 1);
    let first = record(0, &net, data, loss, penalty, config.zero_tol)?;
    if !first.objective.is_finite() {
        records.push(first);
        return Ok(Err(records));
    }
    records.push(first);
    let mut rejected = 0;
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..config.epochs {
        let eta = config.step_at(epoch);
        match config.batch_size {
            BatchSize::Full => {
                let current = records.last().unwrap().objective;
                if !full_step(&mut net, data, loss, penalty, eta, current, config.backtracking)? {
                    rejected += 1;
                }
            }
            BatchSize::Size(b) => {
                order.shuffle(&mut rng);
                for batch in order.chunks(b) {
                    let g = net.gradient(loss, data, Some(batch))?;
                    let theta = net.params_mut().as_mut_slice();
                    for (t, gi) in theta.iter_mut().zip(&g.grad) {
                        *t -= eta * gi;
                    }
                    penalty.prox_in_place(theta, eta, bound);
                    net.params_mut().project(bound);
                }
            }
        }
        let rec = record(epoch + 1, &net, data, loss, penalty, config.zero_tol)?;
        let finite = rec.objective.is_finite();
        records.push(rec);
        if !finite {
            return Ok(Err(records));
        }
    }
    Ok(Ok(RunOutcome {
        net,
        records,
        rejected,
    }))
}

const MAX_BACKTRACKS: usize = 40;

/// One full-batch proximal step. Returns `false` when no step was accepted.
fn full_step<L: PointLoss + ?Sized>(
    net: &mut Network,
    data: &Dataset,
    loss: &L,
    penalty: &PenaltySpec,
    eta0: f64,
    current_objective: f64,
    backtracking: bool,
) -> Result<bool> {
    let bound = net.architecture().weight_bound();
    let g = net.gradient(loss, data, None)?;
    let theta = net.params().as_slice().to_vec();
    let risk = g.mean_loss;
    let mut eta = eta0;
    let tries = if backtracking { MAX_BACKTRACKS } else { 1 };
    for _ in 0..tries {
        let mut cand: Vec<f64> = theta.iter().zip(&g.grad).map(|(t, gi)| t - eta * gi).collect();
        penalty.prox_in_place(&mut cand, eta, bound);
        for v in &mut cand {
            *v = v.clamp(-bound, bound);
        }
        let mut trial = net.clone();
        trial.params_mut().as_mut_slice().copy_from_slice(&cand);
        if !backtracking {
            *net = trial;
            return Ok(true);
        }
        let new_risk = empirical_risk(loss, &trial, data)?;
        let (mut lin, mut sq) = (0.0, 0.0);
        for ((c, t), gi) in cand.iter().zip(&theta).zip(&g.grad) {
            let d = c - t;
            lin += gi * d;
            sq += d * d;
        }
        let model = risk + lin + sq / (2.0 * eta);
        let new_obj = new_risk + penalty.total(&cand);
        if new_risk <= model && new_obj <= current_objective {
            *net = trial;
            return Ok(true);
        }
        eta *= 0.5;
    }
    Ok(false)
}
