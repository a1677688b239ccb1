//! Simulates a nonlinear AR(1) path, calibrates the network class for its
//! size, fits the penalized estimator and scores it on a fresh path.

use spdnn::harness::{estimate_l2_error, Process};
use spdnn::processes::{make_target, ArSpec, Noise, TargetSpec, Truth};
use spdnn::theory::{calibrate, CalibrationConstants, FunctionClass};
use spdnn::trainer::BatchSize;
use spdnn::{fit, LossSpec, PenaltyFamily, TrainConfig, TuningParams};

fn main() -> spdnn::Result<()> {
    let truth = Truth::Target(make_target(&TargetSpec::Holder { s: 2.0, k: 1.0, d: 1 })?);
    let process = Process::Ar(ArSpec::new(truth.clone(), Noise::Gaussian));
    let n = 2048;
    let sample = process.simulate(n, 1)?;

    let class = FunctionClass::Holder { s: 2.0, d: 1, kappa: 2.0 };
    let consts = CalibrationConstants {
        c_l: 0.3,
        ..CalibrationConstants::default()
    };
    let loss = LossSpec::Huber { delta: 10.0 };
    let calib = calibrate(
        &TuningParams::exponential(5.0, 1e-4),
        &class,
        n,
        loss.lipschitz_const(),
        PenaltyFamily::ClippedL1,
        &consts,
    )?;
    println!(
        "depth {}, width {}, lambda {:.3e}, tau {:.3e}",
        calib.depth, calib.width, calib.penalty.lambda, calib.penalty.tau
    );

    let cfg = TrainConfig {
        epochs: 300,
        batch_size: BatchSize::Full,
        step_size: 0.5,
        restarts: 1,
        seed: 2,
        ..TrainConfig::default()
    };
    let (net, trace) = fit(&sample.data, &calib.arch, &loss, &calib.penalty, &cfg)?;
    let last = trace.final_record().expect("trace is never empty");
    println!(
        "objective {:.5} -> {:.5}, nonzero parameters {}",
        trace.records[0].objective, last.objective, last.l0
    );
    let err = estimate_l2_error(&net, &truth, &process, 50_000, 3)?;
    println!("squared L2 error {:.3e} ± {:.1e}", err.value, err.std_error);
    Ok(())
}
