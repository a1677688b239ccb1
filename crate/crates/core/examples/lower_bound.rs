//! Builds the hypercube of hypotheses behind the minimax lower bound and
//! audits its separation and KL budget.

use spdnn::theory::{build_hypercube, effective_smoothness, verify_lemma1, HypercubeOptions};

fn main() -> spdnn::Result<()> {
    let smooth = effective_smoothness(&[1.0], &[1])?;
    let c = build_hypercube(&smooth, 10_000, &HypercubeOptions::default())?;
    println!(
        "m = {}, rho = {}, {} words at Hamming >= {}",
        c.m,
        c.rho,
        c.packing.words.len(),
        c.packing.min_hamming
    );
    let r = verify_lemma1(&c);
    println!(
        "separation: min {:.4e} vs required {:.4e} -> {}",
        r.min_pair_l2, r.separation_required, r.pass_i
    );
    println!(
        "KL budget: {:.4e} vs log(M)/9 = {:.4e} -> {} (squared-norm budget {:.4e})",
        r.kl_budget, r.log_m_over_9, r.pass_ii, r.kl_budget_squared
    );
    Ok(())
}
