//! Draws short paths from each data-generating process and writes one as CSV.

use spdnn::processes::{
    simulate_ar, simulate_binary, ArSpec, BinaryArSpec, LabelLink, Noise, Truth,
};

fn main() -> spdnn::Result<()> {
    let ar = ArSpec::new(
        Truth::Linear {
            intercept: 0.1,
            coefs: vec![0.5, -0.2],
        },
        Noise::Laplace,
    );
    let series = simulate_ar(&ar, 5, 3)?;
    series.data.write_csv(std::io::stdout())?;

    let binary = BinaryArSpec::new(1, LabelLink::Linear { coefs: vec![0.4] });
    let s = simulate_binary(&binary, 10_000, 3)?;
    let ones = s.data.ys().iter().filter(|y| **y == 1.0).count();
    println!("binary: {ones} ones in {} labels", s.data.len());
    Ok(())
}
