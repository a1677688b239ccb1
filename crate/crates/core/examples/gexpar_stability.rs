//! Characteristic-root check for GEXPAR models and a simulated path.

use spdnn::processes::{gexpar_stability, simulate_gexpar, GexparParams, Noise};

fn main() -> spdnn::Result<()> {
    let stable = GexparParams {
        c0: 0.0,
        c: vec![0.3, 0.2],
        pi: vec![0.1, 0.1],
        lambda: -1.0,
        z: vec![0.0, 0.0],
    };
    let report = gexpar_stability(&stable);
    println!(
        "stable: {}, spectral radius {:.4}, roots {:?}",
        report.stable, report.spectral_radius, report.roots
    );

    let path = simulate_gexpar(&stable, 10_000, Noise::Gaussian, 1000, 7, false)?;
    let y = path.responses();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    println!("sample mean over {} steps: {mean:.4}", y.len());

    let unstable = GexparParams {
        c: vec![0.8, 0.3],
        ..stable
    };
    match simulate_gexpar(&unstable, 100, Noise::Gaussian, 100, 7, false) {
        Ok(_) => println!("unexpectedly simulated"),
        Err(e) => println!("refused: {e}"),
    }
    Ok(())
}
