//! Sparse penalties that are linear-ish near zero and flat at `λ` beyond `τ`,
//! their exact proximal maps, and the `(λ, τ)` tuning rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PenaltyFamily {
    ClippedL1,
    /// SCAD rescaled so its flat part starts at `τ` with height `λ`; `a > 2`.
    Scad { a: f64 },
    /// MCP rescaled the same way. After rescaling the curve is
    /// `λ(1 - (1 - x/τ)^2)` whatever `gamma` is; it is kept for bookkeeping.
    Mcp { gamma: f64 },
}

impl Default for PenaltyFamily {
    fn default() -> Self {
        PenaltyFamily::ClippedL1
    }
}

impl PenaltyFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyFamily::ClippedL1 => "clipped_l1",
            PenaltyFamily::Scad { .. } => "scad",
            PenaltyFamily::Mcp { .. } => "mcp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub tau: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, tau: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite and > 0, got {tau}")));
        }
        match family {
            PenaltyFamily::Scad { a } if !(a > 2.0) => {
                return Err(Error::Config(format!("scad needs a > 2, got {a}")))
            }
            PenaltyFamily::Mcp { gamma } if !(gamma > 1.0) => {
                return Err(Error::Config(format!("mcp needs gamma > 1, got {gamma}")))
            }
            _ => {}
        }
        Ok(Self { family, lambda, tau })
    }

    pub fn clipped_l1(lambda: f64, tau: f64) -> Result<Self> {
        Self::new(PenaltyFamily::ClippedL1, lambda, tau)
    }

    /// `π(x)` for `x >= 0`.
    pub fn pi(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("penalty argument must be >= 0, got {x}")));
        }
        Ok(self.pi_unchecked(x))
    }

    #[inline]
    fn pi_unchecked(&self, x: f64) -> f64 {
        let (lambda, tau) = (self.lambda, self.tau);
        if x > tau {
            return lambda;
        }
        match self.family {
            PenaltyFamily::ClippedL1 => lambda * (x / tau),
            PenaltyFamily::Mcp { .. } => {
                let r = 1.0 - x / tau;
                lambda * (1.0 - r * r)
            }
            PenaltyFamily::Scad { a } => {
                let knot = tau / a;
                if x <= knot {
                    lambda * 2.0 * a * x / (tau * (a + 1.0))
                } else {
                    let v = lambda * a * a * (2.0 * tau * x - x * x - knot * knot)
                        / ((a * a - 1.0) * tau * tau);
                    v.min(lambda)
                }
            }
        }
    }

    /// `J(θ) = Σ_j π(|θ_j|)`.
    pub fn total(&self, theta: &[f64]) -> f64 {
        theta.iter().map(|v| self.pi_unchecked(v.abs())).sum()
    }

    /// Audits `π(0) = 0`, monotonicity on a `10^4`-point grid over `[0, 2τ]`
    /// and `π(x) = λ` at `x ∈ {τ(1 + 1e-9), 2τ, 100τ}`.
    pub fn conditions_hold(&self) -> bool {
        if self.pi_unchecked(0.0) != 0.0 {
            return false;
        }
        let steps = 10_000;
        let mut prev = 0.0;
        for k in 1..=steps {
            let v = self.pi_unchecked(2.0 * self.tau * k as f64 / steps as f64);
            if v < prev {
                return false;
            }
            prev = v;
        }
        [self.tau * (1.0 + 1e-9), 2.0 * self.tau, 100.0 * self.tau]
            .iter()
            .all(|&x| self.pi_unchecked(x) == self.lambda)
    }

    /// Global minimizer of `½(z - x)^2 + η π(|z|)`.
    pub fn prox(&self, x: f64, eta: f64) -> f64 {
        self.prox_bounded(x, eta, f64::INFINITY)
    }

    /// Global minimizer of `½(z - x)^2 + η π(|z|)` subject to `|z| <= bound`.
    /// Ties go to the smaller `|z|`.
    pub fn prox_bounded(&self, x: f64, eta: f64, bound: f64) -> f64 {
        debug_assert!(eta > 0.0);
        let v = x.abs();
        if v == 0.0 || bound <= 0.0 {
            return 0.0;
        }
        let (lambda, tau) = (self.lambda, self.tau);
        let mut cands: Vec<f64> = Vec::with_capacity(8);
        cands.push(0.0);
        cands.push(tau);
        cands.push(v);
        match self.family {
            PenaltyFamily::ClippedL1 => {
                let u = v - eta * lambda / tau;
                if (0.0..=tau).contains(&u) {
                    cands.push(u);
                }
            }
            PenaltyFamily::Mcp { .. } => {
                let curv = 1.0 - 2.0 * eta * lambda / (tau * tau);
                if curv > 0.0 {
                    let u = (v - 2.0 * eta * lambda / tau) / curv;
                    if (0.0..=tau).contains(&u) {
                        cands.push(u);
                    }
                }
            }
            PenaltyFamily::Scad { a } => {
                let knot = tau / a;
                cands.push(knot);
                let slope = 2.0 * lambda * a / (tau * (a + 1.0));
                let u = v - eta * slope;
                if (0.0..=knot).contains(&u) {
                    cands.push(u);
                }
                let k = 2.0 * eta * lambda * a * a / ((a * a - 1.0) * tau * tau);
                if k < 1.0 {
                    let u = (v - k * tau) / (1.0 - k);
                    if (knot..=tau).contains(&u) {
                        cands.push(u);
                    }
                }
            }
        }
        if bound.is_finite() {
            cands.push(bound);
        }
        for c in &mut cands {
            *c = c.min(bound);
        }
        cands.sort_by(f64::total_cmp);

        let objective = |u: f64| 0.5 * (u - v) * (u - v) + eta * self.pi_unchecked(u);
        let mut best = cands[0];
        let mut best_val = objective(best);
        for &u in &cands[1..] {
            let val = objective(u);
            if val < best_val {
                best = u;
                best_val = val;
            }
        }
        if best == 0.0 {
            0.0
        } else {
            best.copysign(x)
        }
    }

    /// Applies [`PenaltySpec::prox_bounded`] componentwise.
    pub fn prox_in_place(&self, theta: &mut [f64], eta: f64, bound: f64) {
        for t in theta {
            *t = self.prox_bounded(*t, eta, bound);
        }
    }
}

pub fn pi(spec: &PenaltySpec, x: f64) -> Result<f64> {
    spec.pi(x)
}

pub fn penalty_total(spec: &PenaltySpec, theta: &[f64]) -> f64 {
    spec.total(theta)
}

pub fn prox(spec: &PenaltySpec, x: f64, eta: f64) -> f64 {
    spec.prox(x, eta)
}

/// Mixing regime of the data: `α(j) <= ᾱ exp(-c j^γ)` with `γ` finite
/// (subexponential) or geometric decay (exponential).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subexponential,
    Exponential,
}

impl Regime {
    /// Smallest admissible `ν3` (exclusive).
    pub fn nu3_floor(&self) -> f64 {
        match self {
            Regime::Subexponential => 2.0,
            Regime::Exponential => 4.0,
        }
    }
}

/// Effective sample size `⌊n / ⌈(8n/c)^{1/(γ+1)}⌉⌋`.
pub fn n_alpha(n: usize, c: f64, gamma: f64) -> Result<usize> {
    if n == 0 || !(c > 0.0) || !(gamma > 0.0) {
        return Err(Error::Config(format!(
            "n_alpha needs n >= 1, c > 0, gamma > 0 (got n={n}, c={c}, gamma={gamma})"
        )));
    }
    let root = (8.0 * n as f64 / c).powf(1.0 / (gamma + 1.0));
    let divisor = snapped_ceil(root).max(1.0) as usize;
    let m = n / divisor;
    if m == 0 {
        return Err(Error::DegenerateSample(format!(
            "effective sample size is 0 for n={n}, c={c}, gamma={gamma}"
        )));
    }
    Ok(m)
}

/// `⌈x⌉`, treating values within a few ulps of an integer as that integer.
pub(crate) fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `lambda_scale · (ln m)^{ν3} / m`.
pub fn lambda_order(m: f64, nu3: f64, lambda_scale: f64) -> f64 {
    lambda_scale * m.ln().max(0.0).powf(nu3) / m
}

/// `ln` of `1 / (16 K (L+1) ((N+1)B)^{L+1} m)`.
pub fn log_tau_bound(k_ell: f64, arch: &Architecture, m: usize) -> f64 {
    let l = arch.depth() as f64;
    let n = arch.max_width() as f64;
    let b = arch.weight_bound();
    -(16f64.ln()
        + k_ell.ln()
        + (l + 1.0).ln()
        + (l + 1.0) * ((n + 1.0) * b).ln()
        + (m as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    pub regime: Regime,
    /// Mixing constant `c` in `exp(-c j^γ)`.
    pub c: f64,
    pub gamma: f64,
    pub nu3: f64,
    pub lambda_scale: f64,
}

impl TuningParams {
    pub fn exponential(nu3: f64, lambda_scale: f64) -> Self {
        Self {
            regime: Regime::Exponential,
            c: 1.0,
            gamma: 1.0,
            nu3,
            lambda_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let floor = self.regime.nu3_floor();
        if !(self.nu3 > floor) {
            return Err(Error::Config(format!(
                "nu3 must exceed {floor} in the {:?} regime, got {}",
                self.regime, self.nu3
            )));
        }
        if !(self.lambda_scale > 0.0) {
            return Err(Error::Config(format!(
                "lambda_scale must be positive, got {}",
                self.lambda_scale
            )));
        }
        Ok(())
    }

    /// Sample size entering the rates: `n^(α)` or `n`.
    pub fn effective_n(&self, n: usize) -> Result<usize> {
        match self.regime {
            Regime::Subexponential => n_alpha(n, self.c, self.gamma),
            Regime::Exponential if n == 0 => {
                Err(Error::DegenerateSample("n must be positive".into()))
            }
            Regime::Exponential => Ok(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub lambda: f64,
    pub tau: f64,
    pub log_tau: f64,
    pub m: usize,
    pub nu3: f64,
}

/// `(λ, τ)` for a sample of size `n` and architecture `arch`.
pub fn tune(params: &TuningParams, n: usize, k_ell: f64, arch: &Architecture) -> Result<Tuning> {
    params.validate()?;
    let m = params.effective_n(n)?;
    let lambda = lambda_order(m as f64, params.nu3, params.lambda_scale);
    let log_tau = log_tau_bound(k_ell, arch, m);
    let tau = log_tau.exp().max(f64::MIN_POSITIVE);
    Ok(Tuning {
        lambda,
        tau,
        log_tau,
        m,
        nu3: params.nu3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_min(spec: &PenaltySpec, x: f64, eta: f64) -> f64 {
        let r = x.abs() + 3.0;
        let steps = (2.0 * r / 1e-5) as i64;
        let mut best = f64::INFINITY;
        for k in 0..=steps {
            let z = -r + k as f64 * 1e-5;
            let v = 0.5 * (z - x) * (z - x) + eta * spec.pi(z.abs()).unwrap();
            best = best.min(v);
        }
        best
    }

    fn obj(spec: &PenaltySpec, x: f64, eta: f64, z: f64) -> f64 {
        0.5 * (z - x) * (z - x) + eta * spec.pi(z.abs()).unwrap()
    }

    #[test]
    fn pi_examples() {
        let p = PenaltySpec::clipped_l1(0.4, 0.1).unwrap();
        assert_eq!(p.pi(0.0).unwrap(), 0.0);
        assert!((p.pi(0.05).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(p.pi(1.0).unwrap(), 0.4);
        assert!(matches!(p.pi(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn totals() {
        let p = PenaltySpec::clipped_l1(0.7, 0.2).unwrap();
        assert_eq!(p.total(&[0.0; 5]), 0.0);
        assert!((p.total(&[0.0, 1.0, -3.0, 0.0, 0.5]) - 3.0 * 0.7).abs() < 1e-15);
        assert!((p.total(&[0.1, 0.4]) - (0.35 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn prox_examples() {
        let p = PenaltySpec::clipped_l1(1.0, 0.5).unwrap();
        assert_eq!(p.prox(0.0, 0.1), 0.0);
        assert_eq!(p.prox(0.1, 0.1), 0.0);
        assert_eq!(p.prox(2.0, 0.1), 2.0);
        assert_eq!(p.prox(-2.0, 0.1), -2.0);
        for &x in &[0.1, 2.0, 0.45, -0.7] {
            let z = p.prox(x, 0.1);
            assert!(obj(&p, x, 0.1, z) <= grid_min(&p, x, 0.1) + 1e-8);
        }
    }

    #[test]
    fn prox_matches_grid_for_each_family() {
        let fams = [
            PenaltyFamily::ClippedL1,
            PenaltyFamily::Scad { a: 3.7 },
            PenaltyFamily::Mcp { gamma: 3.0 },
        ];
        for fam in fams {
            for &(lambda, tau, eta, x) in &[
                (1.0, 0.5, 0.1, 0.3),
                (2.0, 0.3, 0.5, -0.9),
                (0.05, 1.0, 1.0, 0.7),
                (5.0, 0.01, 0.01, 1.2),
            ] {
                let p = PenaltySpec::new(fam, lambda, tau).unwrap();
                let z = p.prox(x, eta);
                assert!(
                    obj(&p, x, eta, z) <= grid_min(&p, x, eta) + 1e-8,
                    "{fam:?} {lambda} {tau} {eta} {x} -> {z}"
                );
            }
        }
    }

    #[test]
    fn bounded_prox_stays_in_box() {
        let p = PenaltySpec::clipped_l1(0.01, 0.1).unwrap();
        assert_eq!(p.prox_bounded(3.0, 0.1, 1.0), 1.0);
        assert_eq!(p.prox_bounded(-3.0, 0.1, 1.0), -1.0);
    }

    #[test]
    fn saturation_for_every_family() {
        for fam in [
            PenaltyFamily::ClippedL1,
            PenaltyFamily::Scad { a: 3.7 },
            PenaltyFamily::Mcp { gamma: 3.0 },
        ] {
            let p = PenaltySpec::new(fam, 0.3, 0.2).unwrap();
            for x in [0.2 * (1.0 + 1e-9), 0.4, 20.0] {
                assert_eq!(p.pi(x).unwrap(), 0.3);
            }
            assert!((p.pi(0.2).unwrap() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn n_alpha_examples() {
        assert_eq!(n_alpha(100, 1.0, 1.0).unwrap(), 3);
        assert_eq!(n_alpha(1000, 8.0, 1.0).unwrap(), 31);
        assert!(matches!(n_alpha(1, 1e-6, 1.0), Err(Error::DegenerateSample(_))));
        for n in 1..500 {
            if let Ok(m) = n_alpha(n, 1.0, 2.0) {
                assert!(m <= n);
            }
        }
    }

    #[test]
    fn lambda_at_e_to_the_e() {
        let m = std::f64::consts::E.exp();
        let lambda = lambda_order(m, 5.0, 1.0);
        let expected = (5.0 - std::f64::consts::E).exp();
        assert!((lambda - expected).abs() < 1e-12);
        assert!((lambda - 9.80).abs() < 0.01);
    }

    #[test]
    fn tau_decreases_with_depth() {
        let params = TuningParams::exponential(5.0, 1.0);
        let shallow = Architecture::uniform(1, 2, 4, 1.0, 1.0).unwrap();
        let deep = Architecture::uniform(1, 3, 4, 1.0, 1.0).unwrap();
        let a = tune(&params, 1000, 1.0, &shallow).unwrap();
        let b = tune(&params, 1000, 1.0, &deep).unwrap();
        assert!(b.tau < a.tau);
        let expected = 1.0 / (16.0 * 3.0 * 5f64.powi(3) * 1000.0);
        assert!((a.tau - expected).abs() < 1e-15);
    }

    #[test]
    fn tune_regimes() {
        let arch = Architecture::uniform(1, 1, 2, 1.0, 1.0).unwrap();
        let sub = TuningParams {
            regime: Regime::Subexponential,
            c: 1.0,
            gamma: 1.0,
            nu3: 3.0,
            lambda_scale: 1.0,
        };
        assert_eq!(tune(&sub, 100, 1.0, &arch).unwrap().m, 3);
        let bad = TuningParams { nu3: 2.0, ..sub };
        assert!(matches!(tune(&bad, 100, 1.0, &arch), Err(Error::Config(_))));
        let bad_exp = TuningParams::exponential(4.0, 1.0);
        assert!(matches!(tune(&bad_exp, 100, 1.0, &arch), Err(Error::Config(_))));
    }

    #[test]
    fn tau_floor_on_huge_architectures() {
        let arch = Architecture::uniform(1, 200, 1000, 1e6, 1.0).unwrap();
        let t = tune(&TuningParams::exponential(5.0, 1.0), 1000, 10.0, &arch).unwrap();
        assert_eq!(t.tau, f64::MIN_POSITIVE);
        assert!(t.log_tau < -700.0);
    }
}
