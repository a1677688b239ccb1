//! Logistic estimator on a binary autoregression, scored by the closed-form
//! excess risk against the best constant.

use spdnn::harness::{best_constant_excess, estimate_excess_risk_classification, Process};
use spdnn::processes::{BinaryArSpec, LabelLink};
use spdnn::theory::{calibrate, CalibrationConstants, FunctionClass};
use spdnn::trainer::BatchSize;
use spdnn::{fit, LossSpec, PenaltyFamily, TrainConfig, TuningParams};

fn main() -> spdnn::Result<()> {
    let spec = BinaryArSpec::new(1, LabelLink::Linear { coefs: vec![0.4] });
    let n = 4096;
    let sample = Process::Binary(spec.clone()).simulate(n, 5)?;

    let calib = calibrate(
        &TuningParams::exponential(5.0, 1e-4),
        &FunctionClass::Holder { s: 2.0, d: 1, kappa: 2.0 },
        n,
        1.0,
        PenaltyFamily::ClippedL1,
        &CalibrationConstants {
            c_l: 0.3,
            ..CalibrationConstants::default()
        },
    )?;
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: BatchSize::Full,
        step_size: 0.5,
        restarts: 1,
        ..TrainConfig::default()
    };
    let (net, _) = fit(&sample.data, &calib.arch, &LossSpec::Logistic, &calib.penalty, &cfg)?;

    let excess = estimate_excess_risk_classification(&net, &spec, 20_000, 6)?;
    let baseline = best_constant_excess(&spec, 20_000, 6)?;
    println!("excess risk {:.3e}, best constant {:.3e}", excess.value, baseline.value);
    for y in [-1.0, 1.0] {
        println!("h({y:+}) = {:.4}", net.forward(&[y], true)?);
    }
    Ok(())
}
