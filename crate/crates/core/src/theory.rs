//! Rate exponents, architecture calibration and the hypercube construction
//! behind the minimax lower bound, with a numerical verifier.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Architecture;
use crate::penalty::{snapped_ceil, tune, PenaltyFamily, PenaltySpec, Tuning, TuningParams};
use crate::rng::rng_from_seed;

// ---------------------------------------------------------------------------
// Smoothness and rates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionSmoothness {
    pub beta: Vec<f64>,
    pub t: Vec<usize>,
    /// `β*_i = β_i Π_{j>i} (β_j ∧ 1)`.
    pub beta_star: Vec<f64>,
    /// Binding index `i*`.
    pub binding: usize,
    /// `β** = β*_{i*}`.
    pub beta_ss: f64,
    /// `t* = t_{i*}`.
    pub t_star: usize,
}

impl CompositionSmoothness {
    pub fn q(&self) -> usize {
        self.beta.len() - 1
    }

    /// `2β*_i / (2β*_i + t_i)` for every layer.
    pub fn exponents(&self) -> Vec<f64> {
        self.beta_star
            .iter()
            .zip(&self.t)
            .map(|(b, t)| 2.0 * b / (2.0 * b + *t as f64))
            .collect()
    }

    /// Exponent `e` of `φ_n = n^{-e}`.
    pub fn rate_exponent(&self) -> f64 {
        2.0 * self.beta_ss / (2.0 * self.beta_ss + self.t_star as f64)
    }

    /// `Π_{ℓ > i*} (β_ℓ ∧ 1)`, the power applied to the bumps.
    pub fn bump_power(&self) -> f64 {
        self.beta[self.binding + 1..].iter().map(|b| b.min(1.0)).product()
    }
}

pub fn effective_smoothness(beta: &[f64], t: &[usize]) -> Result<CompositionSmoothness> {
    if beta.is_empty() || beta.len() != t.len() {
        return Err(Error::Config(format!(
            "beta and t must be nonempty and of equal length ({} vs {})",
            beta.len(),
            t.len()
        )));
    }
    if beta.iter().any(|b| !(*b > 0.0)) || t.contains(&0) {
        return Err(Error::Config("beta must be positive and t at least 1".into()));
    }
    let q1 = beta.len();
    let mut beta_star = vec![0.0; q1];
    let mut tail = 1.0;
    for i in (0..q1).rev() {
        beta_star[i] = beta[i] * tail;
        tail *= beta[i].min(1.0);
    }
    let mut binding = 0;
    let ratio = |i: usize| beta_star[i] / (2.0 * beta_star[i] + t[i] as f64);
    for i in 1..q1 {
        if ratio(i) < ratio(binding) {
            binding = i;
        }
    }
    Ok(CompositionSmoothness {
        beta: beta.to_vec(),
        t: t.to_vec(),
        beta_ss: beta_star[binding],
        t_star: t[binding],
        beta_star,
        binding,
    })
}

/// `n^{-e}` evaluated as `2^{-e log2 n}`, exact for powers of two.
fn power_rate(n: f64, e: f64) -> f64 {
    (-e * n.log2()).exp2()
}

/// `φ_n = max_i n^{-2β*_i/(2β*_i + t_i)}`.
pub fn phi(n: f64, smooth: &CompositionSmoothness) -> f64 {
    power_rate(n, smooth.rate_exponent())
}

/// `n^{-κs/(κs + d)}`.
pub fn holder_rate(kappa: f64, s: f64, d: usize, n: f64) -> f64 {
    power_rate(n, kappa * s / (kappa * s + d as f64))
}

// ---------------------------------------------------------------------------
// Calibration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum FunctionClass {
    Holder {
        s: f64,
        d: usize,
        kappa: f64,
    },
    Composition {
        smoothness: CompositionSmoothness,
        d: usize,
        kappa: f64,
    },
}

impl FunctionClass {
    pub fn input_dim(&self) -> usize {
        match self {
            FunctionClass::Holder { d, .. } | FunctionClass::Composition { d, .. } => *d,
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            FunctionClass::Holder { kappa, .. } | FunctionClass::Composition { kappa, .. } => *kappa,
        }
    }

    /// Exponent of the excess-risk rate in the effective sample size.
    pub fn rate_exponent(&self) -> f64 {
        match self {
            FunctionClass::Holder { s, d, kappa } => kappa * s / (kappa * s + *d as f64),
            FunctionClass::Composition {
                smoothness, kappa, ..
            } => {
                let e = smoothness.rate_exponent();
                (e * kappa / 2.0).min(e)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConstants {
    pub c_l: f64,
    pub c_n: f64,
    pub c_b: f64,
    /// Weight bound for composition classes.
    pub b_fixed: f64,
    /// Output bound `F`.
    pub output_bound: f64,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self {
            c_l: 1.0,
            c_n: 1.0,
            c_b: 1.0,
            b_fixed: 1.0,
            output_bound: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub arch: Architecture,
    pub penalty: PenaltySpec,
    pub tuning: Tuning,
    /// Depth `L`, width `N` and weight bound `B`.
    pub depth: usize,
    pub width: usize,
    pub weight_bound: f64,
}

/// Architecture and penalty for a sample of size `n`.
pub fn calibrate(
    params: &TuningParams,
    class: &FunctionClass,
    n: usize,
    k_ell: f64,
    family: PenaltyFamily,
    consts: &CalibrationConstants,
) -> Result<Calibration> {
    params.validate()?;
    let m = params.effective_n(n)?;
    if m < 2 {
        return Err(Error::DegenerateSample(format!(
            "effective sample size {m} is too small to calibrate"
        )));
    }
    let mf = m as f64;
    let depth = (snapped_ceil(consts.c_l * mf.ln()) as usize).max(1);
    let (width, weight_bound) = match class {
        FunctionClass::Holder { s, d, kappa } => {
            let denom = kappa * s + *d as f64;
            let w = snapped_ceil(consts.c_n * (mf.log2() * *d as f64 / denom).exp2());
            let b = consts.c_b * (mf.log2() * 4.0 * (s + *d as f64) / denom).exp2();
            (w, b.max(1.0))
        }
        FunctionClass::Composition { smoothness, .. } => {
            let w = snapped_ceil(consts.c_n * mf * phi(mf, smoothness));
            if !(consts.b_fixed >= 1.0) {
                return Err(Error::Config(format!(
                    "composition weight bound must be >= 1, got {}",
                    consts.b_fixed
                )));
            }
            (w, consts.b_fixed)
        }
    };
    let width = (width as usize).max(1);
    let arch = Architecture::uniform(
        class.input_dim(),
        depth,
        width,
        weight_bound,
        consts.output_bound,
    )?;
    let tuning = tune(params, n, k_ell, &arch)?;
    let penalty = PenaltySpec::new(family, tuning.lambda, tuning.tau)?;
    Ok(Calibration {
        arch,
        penalty,
        tuning,
        depth,
        width,
        weight_bound,
    })
}

// ---------------------------------------------------------------------------
// Kernel

/// Polynomial in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }
}

/// Number of grid points used to audit the kernel's Hölder norm.
pub const KERNEL_AUDIT_POINTS: usize = 1000;

/// Bump `K(x) = c (x(1-x))^p` on `[0,1]`, zero elsewhere, with
/// `p = ⌈β⌉ + 1` and `c` set so its grid-audited `C^β` norm equals 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub smoothness: f64,
    pub power: u32,
    pub scale: f64,
    /// Derivatives `0..=⌊β⌋` of `(x(1-x))^p`.
    derivs: Vec<Poly>,
}

impl Kernel {
    pub fn new(smoothness: f64) -> Result<Self> {
        if !(smoothness > 0.0) || !smoothness.is_finite() {
            return Err(Error::Config(format!(
                "kernel smoothness must be positive, got {smoothness}"
            )));
        }
        let power = smoothness.ceil() as u32 + 1;
        let base = Poly(vec![0.0, 1.0, -1.0]);
        let mut poly = Poly(vec![1.0]);
        for _ in 0..power {
            poly = poly.mul(&base);
        }
        let top = smoothness.floor() as usize;
        let mut derivs = vec![poly];
        for k in 0..top {
            let next = derivs[k].derivative();
            derivs.push(next);
        }
        let mut kernel = Kernel {
            smoothness,
            power,
            scale: 1.0,
            derivs,
        };
        let norm = kernel.holder_norm_audit(KERNEL_AUDIT_POINTS);
        kernel.scale = 1.0 / norm;
        Ok(kernel)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            self.scale * self.derivs[0].eval(x)
        } else {
            0.0
        }
    }

    /// `k`-th derivative for `k <= ⌊β⌋`.
    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            self.scale * self.derivs[k].eval(x)
        } else {
            0.0
        }
    }

    /// Grid estimate of `Σ_{k<β} ‖K^{(k)}‖_∞ + sup |K^{(⌊β⌋)}(x) - K^{(⌊β⌋)}(y)| / |x-y|^{β-⌊β⌋}`.
    pub fn holder_norm_audit(&self, points: usize) -> f64 {
        let grid: Vec<f64> = (0..=points).map(|i| i as f64 / points as f64).collect();
        let beta = self.smoothness;
        let top = beta.floor() as usize;
        let r = beta - beta.floor();
        let mut norm = 0.0;
        for k in 0..=top {
            if (k as f64) < beta {
                norm += grid.iter().fold(0.0f64, |m, &x| m.max(self.derivative(k, x).abs()));
            }
        }
        let vals: Vec<f64> = grid.iter().map(|&x| self.derivative(top, x)).collect();
        let quotient = if r == 0.0 {
            let (lo, hi) = vals
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            hi - lo
        } else {
            let mut q = 0.0f64;
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    q = q.max((vals[i] - vals[j]).abs() / (grid[j] - grid[i]).powf(r));
                }
            }
            q
        };
        norm + quotient
    }

    /// `‖K^b‖_2` by composite Simpson.
    pub fn power_l2_norm(&self, b: f64) -> f64 {
        simpson(|x| self.eval(x).powf(2.0 * b), 0.0, 1.0, 4096).sqrt()
    }
}

/// Composite Simpson rule with `panels` panels (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Tensor Simpson over the box `[lo, hi]^dim`.
fn simpson_box(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], panels: usize) -> f64 {
    let dim = lo.len();
    let n = panels.max(2) + panels % 2;
    let weights: Vec<f64> = (0..=n)
        .map(|i| {
            if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            let h = (hi[k] - lo[k]) / n as f64;
            x[k] = lo[k] + idx[k] as f64 * h;
            w *= weights[idx[k]] * h / 3.0;
        }
        acc += w * f(&x);
        let mut k = 0;
        loop {
            if k == dim {
                return acc;
            }
            idx[k] += 1;
            if idx[k] <= n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Packing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub m_bits: usize,
    pub words: Vec<Vec<bool>>,
    /// Smallest pairwise Hamming distance actually achieved.
    pub min_hamming: usize,
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub const DEFAULT_PACKING_BUDGET: usize = 100_000;

/// `⌈2^{m/8}⌉` and `⌈m/8⌉`, the size and separation a packing must reach.
pub fn packing_requirements(m_bits: usize) -> (usize, usize) {
    let count = snapped_ceil((m_bits as f64 / 8.0).exp2());
    let count = if count > usize::MAX as f64 {
        usize::MAX
    } else {
        count as usize
    };
    (count, m_bits.div_ceil(8))
}

/// Word set containing the zero word, of size `>= min_count` and pairwise
/// Hamming distance `>= min_ham`, by seeded greedy random search with an
/// exhaustive lexicographic fallback for `m_bits <= 20`.
pub fn vg_packing(
    m_bits: usize,
    min_count: usize,
    min_ham: usize,
    budget: usize,
    seed: u64,
) -> Result<Packing> {
    if m_bits == 0 {
        return Err(Error::Config("m_bits must be at least 1".into()));
    }
    let mut words = vec![vec![false; m_bits]];
    let far_enough = |words: &[Vec<bool>], w: &[bool]| words.iter().all(|v| hamming(v, w) >= min_ham.max(1));
    let mut rng = rng_from_seed(seed);
    let mut tried = 0;
    while words.len() < min_count && tried < budget {
        tried += 1;
        let w: Vec<bool> = (0..m_bits).map(|_| rng.random::<bool>()).collect();
        if far_enough(&words, &w) {
            words.push(w);
        }
    }
    if words.len() < min_count && m_bits <= 20 {
        words.truncate(1);
        for code in 1u32..(1u32 << m_bits) {
            let w: Vec<bool> = (0..m_bits).map(|i| code >> i & 1 == 1).collect();
            if far_enough(&words, &w) {
                words.push(w);
                if words.len() >= min_count {
                    break;
                }
            }
        }
    }
    if words.len() < min_count {
        return Err(Error::PackingFailed {
            tried,
            found: words.len(),
            needed: min_count,
        });
    }
    let mut min_hamming = usize::MAX;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            min_hamming = min_hamming.min(hamming(&words[i], &words[j]));
        }
    }
    Ok(Packing {
        m_bits,
        words,
        min_hamming,
    })
}

// ---------------------------------------------------------------------------
// Hypercube construction

/// How the scale `ρ` in `m = ⌊ρ n^{1/(2β** + t*)}⌋` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum RhoPolicy {
    /// Largest `ρ ∈ {2^-k : k = 0..=40}` meeting the size condition;
    /// `ρ = 1` with the condition flagged unmet when none does.
    UnitGrid,
    Fixed { rho: f64 },
    /// Smallest `ρ ∈ {2^k : k = 0..=40}` meeting the size condition.
    SmallestSatisfying,
}

impl Default for RhoPolicy {
    fn default() -> Self {
        RhoPolicy::UnitGrid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypercubeOptions {
    pub rho: RhoPolicy,
    pub packing_budget: usize,
    pub seed: u64,
}

impl Default for HypercubeOptions {
    fn default() -> Self {
        Self {
            rho: RhoPolicy::UnitGrid,
            packing_budget: DEFAULT_PACKING_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercubeConstruction {
    pub kernel: Kernel,
    pub n: usize,
    pub rho: f64,
    /// Whether `n h^{β**+t*} <= log 2 / (72 ‖K^B‖_2^{t*})` holds.
    pub rho_condition_met: bool,
    pub m: usize,
    pub h: f64,
    pub t_star: usize,
    /// `β_{i*}`, the exponent of `h` in each bump.
    pub beta_bump: f64,
    pub beta_ss: f64,
    /// Power `B` applied to each bump.
    pub power: f64,
    /// `‖K^B‖_2`.
    pub kernel_power_norm: f64,
    pub packing: Packing,
}

fn size_condition(n: usize, h: f64, beta_ss: f64, t_star: usize, kb: f64) -> bool {
    n as f64 * h.powf(beta_ss + t_star as f64) <= 2f64.ln() / (72.0 * kb.powi(t_star as i32))
}

pub fn build_hypercube(
    smooth: &CompositionSmoothness,
    n: usize,
    opts: &HypercubeOptions,
) -> Result<HypercubeConstruction> {
    let t_star = smooth.t_star;
    let beta_ss = smooth.beta_ss;
    let beta_bump = smooth.beta[smooth.binding];
    let power = smooth.bump_power();
    let kernel = Kernel::new(beta_bump)?;
    let kb = kernel.power_l2_norm(power);
    let base = (n as f64).powf(1.0 / (2.0 * beta_ss + t_star as f64));
    let m_for = |rho: f64| (rho * base).floor() as usize;
    let ok = |rho: f64| {
        let m = m_for(rho);
        m >= 1 && size_condition(n, 1.0 / m as f64, beta_ss, t_star, kb)
    };
    let (rho, met) = match opts.rho {
        RhoPolicy::UnitGrid => (0..=40)
            .map(|k| (-(k as f64)).exp2())
            .find(|&r| ok(r))
            .map_or((1.0, false), |r| (r, true)),
        RhoPolicy::Fixed { rho } => {
            if !(rho > 0.0) {
                return Err(Error::Config(format!("rho must be positive, got {rho}")));
            }
            (rho, ok(rho))
        }
        RhoPolicy::SmallestSatisfying => (0..=40)
            .map(|k| (k as f64).exp2())
            .find(|&r| ok(r))
            .map_or((1.0, false), |r| (r, true)),
    };
    let m = m_for(rho);
    if m < 2 {
        return Err(Error::DegenerateConstruction(format!(
            "m = {m} < 2 for n = {n} and rho = {rho}"
        )));
    }
    let m_bits = m.checked_pow(t_star as u32).ok_or_else(|| {
        Error::DegenerateConstruction(format!("m^t* overflows for m = {m}, t* = {t_star}"))
    })?;
    let (count, ham) = packing_requirements(m_bits);
    let packing = vg_packing(m_bits, count, ham, opts.packing_budget, opts.seed)?;
    Ok(HypercubeConstruction {
        kernel,
        n,
        rho,
        rho_condition_met: met,
        m,
        h: 1.0 / m as f64,
        t_star,
        beta_bump,
        beta_ss,
        power,
        kernel_power_norm: kb,
        packing,
    })
}

impl HypercubeConstruction {
    pub fn num_cells(&self) -> usize {
        self.packing.m_bits
    }

    /// Grid multi-index of cell `cell`.
    pub fn cell_index(&self, cell: usize) -> Vec<usize> {
        let mut rest = cell;
        (0..self.t_star)
            .map(|_| {
                let k = rest % self.m;
                rest /= self.m;
                k
            })
            .collect()
    }

    /// Lower corner `u` of cell `cell`.
    pub fn corner(&self, cell: usize) -> Vec<f64> {
        self.cell_index(cell).iter().map(|&k| k as f64 * self.h).collect()
    }

    /// `ψ_u(x) = h^{β} Π_j K((x_j - u_j)/h)`.
    pub fn psi(&self, cell: usize, x: &[f64]) -> f64 {
        let u = self.corner(cell);
        let mut v = self.h.powf(self.beta_bump);
        for (xj, uj) in x.iter().zip(&u) {
            v *= self.kernel.eval((xj - uj) / self.h);
        }
        v
    }

    /// `h_W(x) = Σ_u ω_u ψ_u(x)^B`.
    pub fn h_w(&self, word: &[bool], x: &[f64]) -> f64 {
        let mut cell = 0;
        let mut stride = 1;
        for xj in x.iter().take(self.t_star) {
            let k = ((xj / self.h).floor() as usize).min(self.m - 1);
            cell += k * stride;
            stride *= self.m;
        }
        let mut total = 0.0;
        // Neighbouring cells share only boundary points, where K vanishes.
        if word[cell] {
            total += self.psi(cell, x).powf(self.power);
        }
        total
    }

    /// Closed form `h^{β**+t*/2} ‖K^B‖_2^{t*}` of `‖ψ_u^B‖_2`.
    pub fn bump_norm_closed_form(&self) -> f64 {
        self.h.powf(self.beta_ss + self.t_star as f64 / 2.0)
            * self.kernel_power_norm.powi(self.t_star as i32)
    }

    /// `‖ψ_u^B‖_2^2` by tensor Simpson over the cell.
    pub fn bump_sq_norm_quadrature(&self, cell: usize, panels: usize) -> f64 {
        let lo = self.corner(cell);
        let hi: Vec<f64> = lo.iter().map(|v| v + self.h).collect();
        let f = |x: &[f64]| self.psi(cell, x).powf(2.0 * self.power);
        simpson_box(&f, &lo, &hi, panels)
    }

    /// `∫ ψ_u ψ_v` over `[0,1]^{t*}` by tensor Simpson on the union of the
    /// two cells' bounding boxes.
    pub fn cross_integral(&self, a: usize, b: usize, panels: usize) -> f64 {
        let ca = self.corner(a);
        let cb = self.corner(b);
        let lo: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x.min(*y)).collect();
        let hi: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x.max(*y) + self.h).collect();
        let f = |x: &[f64]| self.psi(a, x) * self.psi(b, x);
        simpson_box(&f, &lo, &hi, panels)
    }

    /// `‖h_W - h_W'‖_2` by tensor Simpson over all of `[0,1]^{t*}`.
    pub fn l2_distance_full(&self, w: &[bool], v: &[bool], panels_per_cell: usize) -> f64 {
        let lo = vec![0.0; self.t_star];
        let hi = vec![1.0; self.t_star];
        let f = |x: &[f64]| {
            let d = self.h_w(w, x) - self.h_w(v, x);
            d * d
        };
        simpson_box(&f, &lo, &hi, panels_per_cell * self.m).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Verification

/// Panels per axis inside one bump's support.
pub const CELL_PANELS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub rho_condition_met: bool,
    /// Number of hypotheses besides the zero word.
    pub num_alternatives: usize,
    pub min_hamming: usize,
    pub kappa: f64,
    pub phi_n: f64,
    /// `κ sqrt(φ_n)`.
    pub separation_required: f64,
    pub min_pair_l2: f64,
    pub kl_budget: f64,
    #[serde(rename = "log_M_over_9")]
    pub log_m_over_9: f64,
    /// Same budget with squared distances, for reference.
    pub kl_budget_squared: f64,
    /// Exact Laplace location KL `n ∫ (|Δ| + e^{-|Δ|} - 1)`, averaged.
    pub kl_exact_laplace: f64,
    /// Largest relative error of quadrature bump norms against the closed form.
    pub bump_norm_rel_err: f64,
    /// Largest relative error of per-cell distances against `sqrt(Ham)` times
    /// the closed bump norm.
    pub hamming_identity_rel_err: f64,
    /// Largest relative gap between per-cell and full-domain quadrature on
    /// the sampled pairs.
    pub full_quadrature_rel_err: f64,
    /// Largest `|∫ ψ_u ψ_v|` over checked pairs of distinct cells.
    pub max_cross_integral: f64,
    pub pass_i: bool,
    pub pass_ii: bool,
}

impl Lemma1Report {
    pub fn passed(&self) -> bool {
        self.pass_i && self.pass_ii
    }
}

/// `κ = ‖K^B‖_2^{t*} / sqrt(8 ρ^{β**})`.
pub fn kappa(c: &HypercubeConstruction) -> f64 {
    c.kernel_power_norm.powi(c.t_star as i32) / (8.0 * c.rho.powf(c.beta_ss)).sqrt()
}

/// Number of pairs checked against full-domain quadrature.
const FULL_QUADRATURE_PAIRS: usize = 8;

pub fn verify_lemma1(c: &HypercubeConstruction) -> Lemma1Report {
    let cells = c.num_cells();
    let closed = c.bump_norm_closed_form();
    let sq: Vec<f64> = (0..cells).map(|u| c.bump_sq_norm_quadrature(u, CELL_PANELS)).collect();
    let bump_norm_rel_err = sq
        .iter()
        .map(|s| (s.sqrt() - closed).abs() / closed)
        .fold(0.0, f64::max);

    let words = &c.packing.words;
    let dist = |a: &[bool], b: &[bool]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&sq)
            .filter(|((x, y), _)| x != y)
            .map(|(_, s)| s)
            .sum::<f64>()
            .sqrt()
    };

    let mut min_pair = f64::INFINITY;
    let mut ham_err = 0.0f64;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let ham = hamming(&words[i], &words[j]);
            if ham == 0 {
                continue;
            }
            let d = dist(&words[i], &words[j]);
            min_pair = min_pair.min(d);
            let expected = (ham as f64).sqrt() * closed;
            ham_err = ham_err.max((d - expected).abs() / expected);
        }
    }

    let mut full_err = 0.0f64;
    let mut checked = 0;
    'outer: for i in 0..words.len() {
        for j in i + 1..words.len() {
            if checked >= FULL_QUADRATURE_PAIRS {
                break 'outer;
            }
            if hamming(&words[i], &words[j]) == 0 {
                continue;
            }
            let full = c.l2_distance_full(&words[i], &words[j], CELL_PANELS);
            let per_cell = dist(&words[i], &words[j]);
            full_err = full_err.max((full - per_cell).abs() / per_cell);
            checked += 1;
        }
    }

    let mut max_cross = 0.0f64;
    for a in 0..cells.min(4) {
        for b in 0..cells.min(4) {
            if a != b {
                max_cross = max_cross.max(c.cross_integral(a, b, CELL_PANELS).abs());
            }
        }
    }

    let k = kappa(c);
    let smooth_rate = 2.0 * c.beta_ss / (2.0 * c.beta_ss + c.t_star as f64);
    let phi_n = (-smooth_rate * (c.n as f64).log2()).exp2();
    let required = k * phi_n.sqrt();
    let budget = laplace_kl_budget(c);

    let nf = c.n as f64;
    let alternatives = &words[1..];
    let mf = alternatives.len().max(1) as f64;
    let kl_squared = alternatives
        .iter()
        .map(|w| {
            let d = dist(w, &words[0]);
            nf * d * d
        })
        .sum::<f64>()
        / mf;
    let kl_exact = alternatives
        .iter()
        .map(|w| nf * exact_laplace_kl(c, w))
        .sum::<f64>()
        / mf;

    Lemma1Report {
        n: c.n,
        m: c.m,
        rho: c.rho,
        rho_condition_met: c.rho_condition_met,
        num_alternatives: alternatives.len(),
        min_hamming: c.packing.min_hamming,
        kappa: k,
        phi_n,
        separation_required: required,
        min_pair_l2: min_pair,
        kl_budget: budget.budget,
        log_m_over_9: budget.log_m_over_9,
        kl_budget_squared: kl_squared,
        kl_exact_laplace: kl_exact,
        bump_norm_rel_err,
        hamming_identity_rel_err: ham_err,
        full_quadrature_rel_err: full_err,
        max_cross_integral: max_cross,
        pass_i: min_pair >= required,
        pass_ii: budget.passes,
    }
}

/// `∫ (|Δ| + e^{-|Δ|} - 1)` with `Δ = h_W - h_0`, the per-observation KL
/// between standard Laplace location models.
fn exact_laplace_kl(c: &HypercubeConstruction, word: &[bool]) -> f64 {
    let mut total = 0.0;
    for (cell, on) in word.iter().enumerate() {
        if !on {
            continue;
        }
        let lo = c.corner(cell);
        let hi: Vec<f64> = lo.iter().map(|v| v + c.h).collect();
        let f = |x: &[f64]| {
            let d = c.psi(cell, x).powf(c.power).abs();
            d + (-d).exp() - 1.0
        };
        total += simpson_box(&f, &lo, &hi, CELL_PANELS);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlBudget {
    /// `(1/M) Σ_j n ‖h_(j) - h_(0)‖_2`.
    pub budget: f64,
    pub log_m_over_9: f64,
    pub passes: bool,
}

/// KL surrogate for standard Laplace noise, compared against `log(M)/9`.
pub fn laplace_kl_budget(c: &HypercubeConstruction) -> KlBudget {
    let closed = c.bump_norm_closed_form();
    let words = &c.packing.words;
    let alternatives = &words[1..];
    let m = alternatives.len();
    let log_m_over_9 = if m == 0 { 0.0 } else { (m as f64).ln() / 9.0 };
    if m == 0 {
        return KlBudget {
            budget: 0.0,
            log_m_over_9,
            passes: true,
        };
    }
    let nf = c.n as f64;
    let budget = alternatives
        .iter()
        .map(|w| nf * (hamming(w, &words[0]) as f64).sqrt() * closed)
        .sum::<f64>()
        / m as f64;
    KlBudget {
        budget,
        log_m_over_9,
        passes: budget <= log_m_over_9,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::Regime;

    #[test]
    fn effective_smoothness_examples() {
        let s = effective_smoothness(&[2.0], &[1]).unwrap();
        assert_eq!(s.beta_star, vec![2.0]);
        assert_eq!(s.q(), 0);
        let s = effective_smoothness(&[0.5, 2.0], &[1, 1]).unwrap();
        assert_eq!(s.beta_star, vec![0.5, 2.0]);
        for beta in [0.5, 1.0, 2.0] {
            let d = 3;
            let s = effective_smoothness(&[beta, beta.max(1.0) * d as f64], &[1, d]).unwrap();
            assert!((s.rate_exponent() - 2.0 * beta / (2.0 * beta + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let s = effective_smoothness(&[2.0, 2.0], &[1, 1]).unwrap();
        // β* = (2, 2): equal ratios.
        assert_eq!(s.binding, 0);
    }

    #[test]
    fn rates_exact_at_powers_of_two() {
        let s = effective_smoothness(&[2.0], &[1]).unwrap();
        assert_eq!(phi(1024.0, &s), 0.00390625);
        assert_eq!(holder_rate(2.0, 2.0, 1, 1024.0), 0.00390625);
        let mut prev = f64::INFINITY;
        for n in (2..2000).step_by(17) {
            let v = phi(n as f64, &s);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn calibration_examples() {
        let params = TuningParams::exponential(5.0, 1.0);
        let smooth = effective_smoothness(&[2.0], &[1]).unwrap();
        let comp = FunctionClass::Composition {
            smoothness: smooth,
            d: 1,
            kappa: 2.0,
        };
        let c = calibrate(&params, &comp, 1024, 1.0, PenaltyFamily::ClippedL1, &Default::default()).unwrap();
        assert_eq!(c.width, 4);
        assert_eq!(c.depth, 7);

        let holder = FunctionClass::Holder {
            s: 2.0,
            d: 1,
            kappa: 2.0,
        };
        let c = calibrate(&params, &holder, 1024, 1.0, PenaltyFamily::ClippedL1, &Default::default()).unwrap();
        assert_eq!(c.width, 4);
        assert_eq!(c.arch.widths(), &[1, 4, 4, 4, 4, 4, 4, 4, 1]);

        let mut prev = (0, 0);
        for n in [64, 128, 256, 512, 1024, 2048, 4096] {
            let c = calibrate(&params, &holder, n, 1.0, PenaltyFamily::ClippedL1, &Default::default())
                .unwrap();
            assert!(c.width >= prev.0 && c.depth >= prev.1);
            if prev.1 > 0 {
                assert!(c.depth <= prev.1 + 1);
            }
            prev = (c.width, c.depth);
        }
    }

    #[test]
    fn calibration_subexponential_uses_n_alpha() {
        let params = TuningParams {
            regime: Regime::Subexponential,
            c: 1.0,
            gamma: 1.0,
            nu3: 3.0,
            lambda_scale: 1.0,
        };
        let holder = FunctionClass::Holder {
            s: 2.0,
            d: 1,
            kappa: 2.0,
        };
        let c = calibrate(&params, &holder, 100, 1.0, PenaltyFamily::ClippedL1, &Default::default()).unwrap();
        assert_eq!(c.tuning.m, 3);
    }

    #[test]
    fn kernel_scale_for_unit_smoothness() {
        let k = Kernel::new(1.0).unwrap();
        assert_eq!(k.power, 2);
        assert!((k.scale - 2.2347).abs() < 1e-3, "{}", k.scale);
        assert!((k.holder_norm_audit(KERNEL_AUDIT_POINTS) - 1.0).abs() < 1e-12);
        assert_eq!(k.eval(-0.1), 0.0);
        assert_eq!(k.eval(1.5), 0.0);
        for beta in [0.5, 1.5, 2.0, 2.7] {
            let k = Kernel::new(beta).unwrap();
            assert!((k.holder_norm_audit(KERNEL_AUDIT_POINTS) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 2);
        assert!((v - 0.0).abs() < 1e-14);
    }

    #[test]
    fn packing_examples() {
        let p = vg_packing(8, 2, 1, 100, 0).unwrap();
        assert!(p.words.len() >= 2);
        assert!(p.words[0].iter().all(|b| !b));
        let (count, ham) = packing_requirements(16);
        assert_eq!((count, ham), (4, 2));
        let p = vg_packing(16, count, ham, DEFAULT_PACKING_BUDGET, 1).unwrap();
        assert!(p.words.len() >= 4);
        for i in 0..p.words.len() {
            for j in i + 1..p.words.len() {
                assert!(hamming(&p.words[i], &p.words[j]) >= 2);
            }
        }
        // No random budget at all: the exhaustive fallback still succeeds.
        let p = vg_packing(12, 3, 2, 0, 1).unwrap();
        assert_eq!(p.words.len(), 3);
        assert!(matches!(
            vg_packing(40, 1000, 20, 50, 1),
            Err(Error::PackingFailed { .. })
        ));
    }

    fn unit_construction(n: usize) -> HypercubeConstruction {
        let s = effective_smoothness(&[1.0], &[1]).unwrap();
        build_hypercube(&s, n, &HypercubeOptions::default()).unwrap()
    }

    #[test]
    fn hypercube_disjoint_and_closed_forms() {
        let c = unit_construction(10_000);
        assert_eq!(c.m, 21);
        assert!(!c.rho_condition_met);
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert!(c.cross_integral(a, b, CELL_PANELS).abs() < 1e-10);
                }
            }
        }
        let closed = c.bump_norm_closed_form();
        let quad = c.bump_sq_norm_quadrature(5, CELL_PANELS).sqrt();
        assert!((quad - closed).abs() / closed < 1e-6);

        let zero = vec![false; c.num_cells()];
        let mut one = zero.clone();
        one[7] = true;
        let d = c.l2_distance_full(&one, &zero, CELL_PANELS);
        assert!((d - closed).abs() / closed < 1e-6);
        assert_eq!(c.l2_distance_full(&one, &one, CELL_PANELS), 0.0);
    }

    #[test]
    fn degenerate_construction() {
        let s = effective_smoothness(&[1.0], &[1]).unwrap();
        assert!(matches!(
            build_hypercube(&s, 3, &HypercubeOptions::default()),
            Err(Error::DegenerateConstruction(_))
        ));
    }

    #[test]
    fn budget_is_linear_in_n() {
        let mut c = unit_construction(10_000);
        let a = laplace_kl_budget(&c).budget;
        c.n *= 3;
        let b = laplace_kl_budget(&c).budget;
        assert!((b - 3.0 * a).abs() < 1e-9 * b);
    }

    #[test]
    fn single_word_budget_is_zero() {
        let mut c = unit_construction(10_000);
        c.packing.words.truncate(2);
        let zero = c.packing.words[0].clone();
        c.packing.words[1] = zero;
        assert_eq!(laplace_kl_budget(&c).budget, 0.0);
    }
}
