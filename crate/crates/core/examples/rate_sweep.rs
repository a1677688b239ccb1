//! A short sample-size sweep: per-cell errors, medians and the fitted
//! log-log slope.

use spdnn::harness::process::TruthConfig;
use spdnn::harness::sweep::{ClassConfig, PenaltyConfig};
use spdnn::harness::{rate_sweep, ProcessConfig, SweepConfig};
use spdnn::processes::{Noise, TargetSpec};
use spdnn::theory::CalibrationConstants;
use spdnn::trainer::BatchSize;
use spdnn::{LossSpec, PenaltyFamily, Regime, TrainConfig};

fn main() -> spdnn::Result<()> {
    let cfg = SweepConfig {
        process: ProcessConfig::Ar {
            truth: TruthConfig::Target {
                spec: TargetSpec::Holder { s: 2.0, k: 1.0, d: 1 },
            },
            noise: Noise::Gaussian,
            burn_in: 1000,
            certificate: None,
        },
        loss: LossSpec::Huber { delta: 10.0 },
        penalty: PenaltyConfig {
            family: PenaltyFamily::ClippedL1,
            lambda_scale: 1e-4,
            nu3: 5.0,
            regime: Regime::Exponential,
            c: 1.0,
            gamma: 1.0,
        },
        class: ClassConfig::Holder { s: 2.0, d: 1, kappa: 2.0 },
        constants: CalibrationConstants {
            c_l: 0.3,
            ..CalibrationConstants::default()
        },
        train: TrainConfig {
            epochs: 100,
            batch_size: BatchSize::Full,
            step_size: 0.5,
            restarts: 0,
            ..TrainConfig::default()
        },
        n_grid: vec![256, 512, 1024, 2048],
        replications: 4,
        m_test: 20_000,
        seed: 1,
        bootstrap: 200,
        synthetic: None,
        poison_cells: vec![],
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let r = rate_sweep(&cfg, workers)?;
    for s in &r.summary {
        println!("n = {:>5}: median {:.3e}, iqr {:.1e}", s.n, s.median.unwrap_or(f64::NAN), s.iqr().unwrap_or(f64::NAN));
    }
    match &r.slope {
        Some(fit) => println!("slope {:.3} (theory {:.3})", fit.slope, r.theoretical_slope),
        None => println!("slope: {}", r.slope_status),
    }
    Ok(())
}
