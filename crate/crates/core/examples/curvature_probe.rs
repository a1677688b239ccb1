//! Fits the exponent of the excess risk under constant shifts of the truth.

use spdnn::harness::process::TruthConfig;
use spdnn::harness::{a4_probe, ProbeConfig, ProcessConfig};
use spdnn::processes::{BinaryArSpec, LabelLink, Noise, TargetSpec};
use spdnn::LossSpec;

fn main() -> spdnn::Result<()> {
    let shifts = vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    let regression = ProcessConfig::Ar {
        truth: TruthConfig::Target {
            spec: TargetSpec::Holder { s: 2.0, k: 1.0, d: 1 },
        },
        noise: Noise::Gaussian,
        burn_in: 1000,
        certificate: None,
    };
    for loss in [LossSpec::Huber { delta: 10.0 }, LossSpec::L1] {
        let r = a4_probe(&ProbeConfig {
            process: regression.clone(),
            loss,
            shifts: shifts.clone(),
            draws: 200_000,
            seed: 1,
        })?;
        println!("{loss}: kappa {:.3}", r.kappa);
    }
    let binary = ProcessConfig::Binary(BinaryArSpec::new(1, LabelLink::Linear { coefs: vec![0.6] }));
    let r = a4_probe(&ProbeConfig {
        process: binary,
        loss: LossSpec::Logistic,
        shifts,
        draws: 200_000,
        seed: 1,
    })?;
    println!("logistic: kappa {:.3}", r.kappa);
    Ok(())
}
