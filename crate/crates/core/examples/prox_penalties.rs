//! Penalty shapes and their exact proximal maps.

use spdnn::{PenaltyFamily, PenaltySpec};

fn main() -> spdnn::Result<()> {
    let families = [
        PenaltyFamily::ClippedL1,
        PenaltyFamily::Scad { a: 3.7 },
        PenaltyFamily::Mcp { gamma: 3.0 },
    ];
    for family in families {
        let spec = PenaltySpec::new(family, 0.5, 0.2)?;
        let pis: Vec<String> = [0.0, 0.05, 0.1, 0.2, 1.0]
            .iter()
            .map(|x| format!("{:.4}", spec.pi(*x).unwrap()))
            .collect();
        let proxes: Vec<String> = [-1.0, -0.1, 0.05, 0.3, 2.0]
            .iter()
            .map(|x| format!("{:.4}", spec.prox(*x, 0.1)))
            .collect();
        println!("{:<11} pi: {}", family.name(), pis.join(" "));
        println!("{:<11} prox(eta = 0.1): {}", "", proxes.join(" "));
    }
    let spec = PenaltySpec::clipped_l1(0.5, 0.2)?;
    println!("J(0, 0.1, -3) = {}", spec.total(&[0.0, 0.1, -3.0]));
    Ok(())
}
