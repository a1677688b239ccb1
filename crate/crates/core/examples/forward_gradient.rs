//! Builds a small network, evaluates it and checks one backprop component
//! against a central difference.

use spdnn::{Architecture, Dataset, LossSpec, Network, ParameterVector};

fn main() -> spdnn::Result<()> {
    let arch = Architecture::new(vec![2, 3, 3, 1], 1.0, 1.0)?;
    let theta: Vec<f64> = (0..arch.num_params())
        .map(|k| ((k * 7 % 11) as f64 - 5.0) / 10.0)
        .collect();
    let net = Network::new(arch.clone(), ParameterVector::new(theta.clone()))?;

    let data = Dataset::from_rows(&[
        (vec![0.1, 0.9], 0.3),
        (vec![0.5, 0.5], -0.2),
        (vec![0.8, 0.2], 0.7),
    ])?;
    println!("h(0.5, 0.5) = {:.6}", net.forward(&[0.5, 0.5], true)?);

    let loss = LossSpec::Huber { delta: 0.5 };
    let g = net.gradient(&loss, &data, None)?;
    println!("mean loss {:.6}, {} partials", g.mean_loss, g.grad.len());

    let j = 4;
    let h = 1e-5;
    let risk_at = |delta: f64| -> spdnn::Result<f64> {
        let mut t = theta.clone();
        t[j] += delta;
        let n = Network::new(arch.clone(), ParameterVector::new(t))?;
        spdnn::losses::empirical_risk(&loss, &n, &data)
    };
    let fd = (risk_at(h)? - risk_at(-h)?) / (2.0 * h);
    println!("dR/dθ_{j}: backprop {:.8}, central difference {:.8}", g.grad[j], fd);
    Ok(())
}
