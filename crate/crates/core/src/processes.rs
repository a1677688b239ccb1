//! Simulators for nonlinear autoregressions, GEXPAR models and binary
//! autoregressions, plus a small library of truth functions with known
//! smoothness.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::theory::{effective_smoothness, CompositionSmoothness};

pub const DEFAULT_BURN_IN: usize = 1000;

/// States beyond this magnitude count as an explosion.
const EXPLOSION_LEVEL: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Standard normal.
    #[default]
    Gaussian,
    /// Standard Laplace, density `½ e^{-|y|}` (variance 2).
    Laplace,
}

impl Noise {
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Noise::Gaussian => StandardNormal.sample(rng),
            Noise::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Truth functions

/// Smooth truth with certified membership parameters, from [`make_target`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    /// `a sin(2π x̄)` with `x̄` the coordinate mean, scaled into the Hölder
    /// ball of smoothness `s` and radius `k` on `[0,1]^d`.
    Holder { s: f64, k: f64, d: usize },
    /// Layered composition of normalized sines; component `j` of layer `i`
    /// reads exactly `t[i]` coordinates.
    Composition {
        q: usize,
        dims: Vec<usize>,
        t: Vec<usize>,
        beta: Vec<f64>,
        bound: f64,
    },
    /// Constant function, recorded with a nominal smoothness `s`.
    Constant { value: f64, d: usize, s: f64 },
}

impl TargetSpec {
    /// The composition describing a `d`-lag GEXPAR truth with smoothness `beta`.
    pub fn gexpar_composition(d: usize, beta: f64) -> Self {
        TargetSpec::Composition {
            q: 1,
            dims: vec![d, d, 1],
            t: vec![1, d],
            beta: vec![beta, beta.max(1.0) * d as f64],
            bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMeta {
    /// Hölder smoothness for Hölder and constant targets.
    pub s: Option<f64>,
    pub composition: Option<CompositionSmoothness>,
    /// `e` in `φ_n = n^{-e}`.
    pub phi_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub spec: TargetSpec,
    /// Sine amplitude per layer (one entry for Hölder targets).
    amplitudes: Vec<f64>,
    pub meta: TargetMeta,
}

impl Target {
    pub fn dim(&self) -> usize {
        match &self.spec {
            TargetSpec::Holder { d, .. } | TargetSpec::Constant { d, .. } => *d,
            TargetSpec::Composition { dims, .. } => dims[0],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.spec {
            TargetSpec::Holder { d, .. } => {
                let mean = x.iter().sum::<f64>() / *d as f64;
                self.amplitudes[0] * (2.0 * PI * mean).sin()
            }
            TargetSpec::Constant { value, .. } => *value,
            TargetSpec::Composition { dims, t, .. } => {
                let mut cur = x.to_vec();
                for (i, amp) in self.amplitudes.iter().enumerate() {
                    let (din, dout, ti) = (dims[i], dims[i + 1], t[i]);
                    cur = (0..dout)
                        .map(|j| {
                            let s: f64 = (0..ti).map(|k| cur[(j + k) % din]).sum();
                            amp * (2.0 * PI * s / ti as f64).sin()
                        })
                        .collect();
                }
                cur[0]
            }
        }
    }

    /// Sine amplitude of the first (or only) layer.
    pub fn amplitude(&self) -> f64 {
        self.amplitudes.first().copied().unwrap_or(0.0)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Upper bound on the Hölder-`s` norm on `[0,1]^d` of `sin(2π x̄)`.
pub fn sine_holder_norm_bound(s: f64, d: usize) -> f64 {
    let w = 2.0 * PI / d as f64;
    let count = |k: usize| binomial(k + d - 1, k);
    let fl = s.floor();
    let r = s - fl;
    let top = fl as usize;
    let lower: f64 = (0..=top)
        .filter(|&k| (k as f64) < s)
        .map(|k| count(k) * w.powi(k as i32))
        .sum();
    let quotient = if r == 0.0 {
        2.0 * w.powi(top as i32)
    } else {
        let sup = w.powi(top as i32);
        let lip = sup * w * (d as f64).sqrt();
        lip.powf(r) * (2.0 * sup).powf(1.0 - r)
    };
    lower + count(top) * quotient
}

/// Builds an evaluable truth with its smoothness metadata.
pub fn make_target(spec: &TargetSpec) -> Result<Target> {
    match spec {
        TargetSpec::Holder { s, k, d } => {
            if *d == 0 || !(*s > 0.0) || !(*k > 0.0) {
                return Err(Error::Config(format!("invalid Hölder target {spec:?}")));
            }
            let a = k / sine_holder_norm_bound(*s, *d);
            Ok(Target {
                spec: spec.clone(),
                amplitudes: vec![a],
                meta: TargetMeta {
                    s: Some(*s),
                    composition: None,
                    phi_exponent: 2.0 * s / (2.0 * s + *d as f64),
                },
            })
        }
        TargetSpec::Constant { value, d, s } => {
            if *d == 0 || !(*s > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!("invalid constant target {spec:?}")));
            }
            Ok(Target {
                spec: spec.clone(),
                amplitudes: vec![],
                meta: TargetMeta {
                    s: Some(*s),
                    composition: None,
                    phi_exponent: 2.0 * s / (2.0 * s + *d as f64),
                },
            })
        }
        TargetSpec::Composition {
            q,
            dims,
            t,
            beta,
            bound,
        } => {
            let layers = q + 1;
            if dims.len() != layers + 1 || t.len() != layers || beta.len() != layers {
                return Err(Error::Config(format!(
                    "composition needs q+2 dims and q+1 entries of t and beta: {spec:?}"
                )));
            }
            if dims.iter().any(|&v| v == 0) || *dims.last().unwrap() != 1 {
                return Err(Error::Config(format!("invalid dims {dims:?}")));
            }
            for i in 0..layers {
                if t[i] == 0 || t[i] > dims[i] || !(beta[i] > 0.0) {
                    return Err(Error::Config(format!(
                        "layer {i}: need 1 <= t <= d and beta > 0 ({spec:?})"
                    )));
                }
            }
            if !(*bound > 0.0) {
                return Err(Error::Config("composition bound must be positive".into()));
            }
            let amplitudes = (0..layers)
                .map(|i| bound.min(1.0) / sine_holder_norm_bound(beta[i], t[i]))
                .collect();
            let smooth = effective_smoothness(beta, t)?;
            let phi_exponent = smooth.rate_exponent();
            Ok(Target {
                spec: spec.clone(),
                amplitudes,
                meta: TargetMeta {
                    s: None,
                    composition: Some(smooth),
                    phi_exponent,
                },
            })
        }
    }
}

/// GEXPAR coefficients:
/// `h(x) = c0 + Σ_i (c_i + π_i exp(λ (x_i - z_i)^2)) x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GexparParams {
    pub c0: f64,
    pub c: Vec<f64>,
    pub pi: Vec<f64>,
    pub lambda: f64,
    pub z: Vec<f64>,
}

impl GexparParams {
    pub fn d(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.c.len();
        if d == 0 || self.pi.len() != d || self.z.len() != d {
            return Err(Error::Config(format!(
                "GEXPAR vectors must share a positive length (c={}, pi={}, z={})",
                self.c.len(),
                self.pi.len(),
                self.z.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c0
            + (0..self.d())
                .map(|i| {
                    let dz = x[i] - self.z[i];
                    (self.c[i] + self.pi[i] * (self.lambda * dz * dz).exp()) * x[i]
                })
                .sum::<f64>()
    }

    /// `φ_i = |c_i| + |π_i|`.
    pub fn phis(&self) -> Vec<f64> {
        self.c.iter().zip(&self.pi).map(|(c, p)| c.abs() + p.abs()).collect()
    }
}

/// The regression function `h*` driving an autoregression.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Truth {
    Zero {
        d: usize,
    },
    Linear {
        intercept: f64,
        coefs: Vec<f64>,
    },
    Gexpar(GexparParams),
    Target(Target),
    #[serde(skip)]
    Custom {
        d: usize,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::Zero { d } => write!(f, "Zero {{ d: {d} }}"),
            Truth::Linear { intercept, coefs } => {
                write!(f, "Linear {{ intercept: {intercept}, coefs: {coefs:?} }}")
            }
            Truth::Gexpar(p) => write!(f, "Gexpar({p:?})"),
            Truth::Target(t) => write!(f, "Target({:?})", t.spec),
            Truth::Custom { d, .. } => write!(f, "Custom {{ d: {d} }}"),
        }
    }
}

impl Truth {
    pub fn custom(d: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Truth::Custom { d, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Truth::Zero { d } | Truth::Custom { d, .. } => *d,
            Truth::Linear { coefs, .. } => coefs.len(),
            Truth::Gexpar(p) => p.d(),
            Truth::Target(t) => t.dim(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Truth::Zero { .. } => 0.0,
            Truth::Linear { intercept, coefs } => {
                intercept + coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            }
            Truth::Gexpar(p) => p.eval(x),
            Truth::Target(t) => t.eval(x),
            Truth::Custom { f, .. } => f(x),
        }
    }
}

/// Declared Lipschitz coefficients `θ_i` with `|h(x) - h(y)| <= Σ θ_i |x_i - y_i|`
/// outside a compact set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub theta: Vec<f64>,
}

impl ContractionCertificate {
    pub fn sum(&self) -> f64 {
        self.theta.iter().sum()
    }

    pub fn holds(&self) -> bool {
        self.theta.iter().all(|t| *t >= 0.0) && self.sum() < 1.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArSpec {
    pub truth: Truth,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub certificate: Option<ContractionCertificate>,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl ArSpec {
    pub fn new(truth: Truth, noise: Noise) -> Self {
        Self {
            truth,
            noise,
            burn_in: DEFAULT_BURN_IN,
            certificate: None,
        }
    }

    pub fn lag_order(&self) -> usize {
        self.truth.dim()
    }

    fn certificate_note(&self) -> String {
        match &self.certificate {
            Some(c) if c.holds() => format!("contraction certificate holds (sum theta = {})", c.sum()),
            Some(c) => format!("contraction certificate fails (sum theta = {} >= 1)", c.sum()),
            None => "no contraction certificate declared".into(),
        }
    }
}

/// A simulated path and the lagged regression pairs built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    /// `Y` after burn-in: `d` initial lags followed by the `n` responses.
    pub values: Vec<f64>,
    /// Rows `X_t = (Y_{t-1}, ..., Y_{t-d})`, response `Y_t`.
    pub data: Dataset,
}

impl Series {
    /// The `n` responses.
    pub fn responses(&self) -> &[f64] {
        self.data.ys()
    }
}

fn run_recursion(
    d: usize,
    n: usize,
    burn_in: usize,
    rng: &mut Rng,
    mut step: impl FnMut(&[f64], &mut Rng) -> f64,
    note: impl Fn() -> String,
) -> Result<Series> {
    if d == 0 {
        return Err(Error::Config("lag order must be positive".into()));
    }
    if n == 0 {
        return Err(Error::DegenerateSample("n must be positive".into()));
    }
    let total = burn_in + d + n;
    // Most recent value first.
    let mut lags = vec![0.0; d];
    let mut values = Vec::with_capacity(d + n);
    let mut data = Dataset::new(d);
    for t in 0..total {
        let y = step(&lags, rng);
        if !y.is_finite() || y.abs() > EXPLOSION_LEVEL {
            return Err(Error::Explosion {
                t,
                reason: format!("state {y} ({})", note()),
            });
        }
        if t >= burn_in + d {
            data.push(&lags, y)?;
        }
        if t >= burn_in {
            values.push(y);
        }
        lags.rotate_right(1);
        lags[0] = y;
    }
    Ok(Series { values, data })
}

/// Simulates `Y_t = h*(Y_{t-1}, ..., Y_{t-d}) + ξ_t` from zero initial lags.
pub fn simulate_ar(spec: &ArSpec, n: usize, seed: u64) -> Result<Series> {
    let mut rng = rng_from_seed(seed);
    let noise = spec.noise;
    run_recursion(
        spec.lag_order(),
        n,
        spec.burn_in,
        &mut rng,
        |lags, rng| spec.truth.eval(lags) + noise.sample(rng),
        || spec.certificate_note(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub spectral_radius: f64,
    /// Roots of `z^d - φ_1 z^{d-1} - ... - φ_d`, as `(re, im)`.
    pub roots: Vec<(f64, f64)>,
    pub root_moduli: Vec<f64>,
}

/// Companion matrix of `z^d - φ_1 z^{d-1} - ... - φ_d`.
pub fn companion_matrix(phis: &[f64]) -> DMatrix<f64> {
    let d = phis.len();
    let mut m = DMatrix::zeros(d, d);
    for (j, p) in phis.iter().enumerate() {
        m[(0, j)] = *p;
    }
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    m
}

pub fn polynomial_roots(phis: &[f64]) -> Vec<Complex64> {
    if phis.is_empty() {
        return vec![];
    }
    companion_matrix(phis)
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect()
}

/// Checks that every root of the characteristic polynomial built from
/// `φ_i = |c_i| + |π_i|` lies strictly inside the unit circle.
pub fn gexpar_stability(params: &GexparParams) -> StabilityReport {
    stability_of_phis(&params.phis())
}

pub fn stability_of_phis(phis: &[f64]) -> StabilityReport {
    let roots = polynomial_roots(phis);
    let root_moduli: Vec<f64> = roots.iter().map(|r| r.norm()).collect();
    let spectral_radius = root_moduli.iter().fold(0.0f64, |m, v| m.max(*v));
    StabilityReport {
        stable: spectral_radius < 1.0 - 1e-12,
        spectral_radius,
        roots: roots.iter().map(|r| (r.re, r.im)).collect(),
        root_moduli,
    }
}

/// Number of roots inside the unit circle of `z^d - Σ φ_i z^{d-i}`, by the
/// winding number of the polynomial along `points` samples of the circle.
pub fn roots_inside_unit_circle(phis: &[f64], points: usize) -> usize {
    let eval = |z: Complex64| {
        let mut acc = Complex64::new(1.0, 0.0);
        for p in phis {
            acc = acc * z - *p;
        }
        acc
    };
    let mut total = 0.0;
    let mut prev = eval(Complex64::new(1.0, 0.0)).arg();
    for k in 1..=points {
        let theta = 2.0 * PI * k as f64 / points as f64;
        let a = eval(Complex64::from_polar(1.0, theta)).arg();
        let mut delta = a - prev;
        while delta > PI {
            delta -= 2.0 * PI;
        }
        while delta < -PI {
            delta += 2.0 * PI;
        }
        total += delta;
        prev = a;
    }
    (total / (2.0 * PI)).round().max(0.0) as usize
}

/// Simulates a GEXPAR path. Refuses unstable parameters and `λ > 0` unless
/// `allow_unstable` is set.
pub fn simulate_gexpar(
    params: &GexparParams,
    n: usize,
    noise: Noise,
    burn_in: usize,
    seed: u64,
    allow_unstable: bool,
) -> Result<Series> {
    params.validate()?;
    let report = gexpar_stability(params);
    if !allow_unstable {
        if params.lambda > 0.0 {
            return Err(Error::Config(format!(
                "GEXPAR with lambda = {} > 0 is unbounded; set the override to simulate it",
                params.lambda
            )));
        }
        if !report.stable {
            return Err(Error::Unstable {
                spectral_radius: report.spectral_radius,
            });
        }
    }
    let mut rng = rng_from_seed(seed);
    let radius = report.spectral_radius;
    run_recursion(
        params.d(),
        n,
        burn_in,
        &mut rng,
        |lags, rng| params.eval(lags) + noise.sample(rng),
        || format!("stability certificate spectral radius {radius:.6}"),
    )
}

// ---------------------------------------------------------------------------
// Binary autoregression

/// Function of the past labels `(y_{t-1}, ..., y_{t-p}) ∈ {-1, 1}^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LabelLink {
    Zero,
    Constant { value: f64 },
    /// `Σ_i coefs[i] · y_{t-1-i}`.
    Linear { coefs: Vec<f64> },
}

impl LabelLink {
    fn eval(&self, lags: &[f64]) -> f64 {
        match self {
            LabelLink::Zero => 0.0,
            LabelLink::Constant { value } => *value,
            LabelLink::Linear { coefs } => coefs.iter().zip(lags).map(|(c, y)| c * y).sum(),
        }
    }
}

/// Exogenous covariates, i.i.d. uniform on `[-1, 1]^dim`, entering through
/// `g(x) = Σ coefs[i] x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exogenous {
    pub coefs: Vec<f64>,
}

impl Exogenous {
    pub fn dim(&self) -> usize {
        self.coefs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryArSpec {
    /// Lag order `p`.
    pub p: usize,
    pub f: LabelLink,
    #[serde(default)]
    pub exogenous: Option<Exogenous>,
    /// Recode the lagged labels of the windows into `{0, 1}`.
    #[serde(default)]
    pub encode01: bool,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl BinaryArSpec {
    pub fn new(p: usize, f: LabelLink) -> Self {
        Self {
            p,
            f,
            exogenous: None,
            encode01: false,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    /// Width of the windows: `p` lags plus the covariates.
    pub fn input_dim(&self) -> usize {
        self.p + self.exogenous.as_ref().map_or(0, Exogenous::dim)
    }

    /// `η = (1 + f(lags) + g(x)) / 2` from a window as emitted in the dataset.
    pub fn eta_of_window(&self, window: &[f64]) -> f64 {
        let lags: Vec<f64> = window[..self.p]
            .iter()
            .map(|v| if self.encode01 { 2.0 * v - 1.0 } else { *v })
            .collect();
        let g = self.exogenous.as_ref().map_or(0.0, |e| {
            e.coefs.iter().zip(&window[self.p..]).map(|(c, x)| c * x).sum()
        });
        0.5 * (1.0 + self.f.eval(&lags) + g)
    }

    /// Checks `η ∈ [0, 1]` on every lag configuration and covariate corner.
    pub fn check_range(&self) -> Result<()> {
        let dx = self.exogenous.as_ref().map_or(0, Exogenous::dim);
        if self.p > 20 || dx > 12 {
            return Ok(());
        }
        for mask in 0..(1usize << self.p) {
            for corner in 0..(1usize << dx) {
                let mut w: Vec<f64> = (0..self.p)
                    .map(|i| {
                        let y = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                        if self.encode01 {
                            (y + 1.0) / 2.0
                        } else {
                            y
                        }
                    })
                    .collect();
                w.extend((0..dx).map(|i| if corner >> i & 1 == 1 { 1.0 } else { -1.0 }));
                let eta = self.eta_of_window(&w);
                if !(-1e-12..=1.0 + 1e-12).contains(&eta) {
                    return Err(Error::ModelContract(format!(
                        "eta = {eta} outside [0, 1] at window {w:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySeries {
    /// Windows and labels in `{-1, 1}`.
    pub data: Dataset,
    /// Conditional probability `P(Y_t = 1 | past)` of each row.
    pub eta: Vec<f64>,
}

pub fn simulate_binary(spec: &BinaryArSpec, n: usize, seed: u64) -> Result<BinarySeries> {
    if spec.p == 0 {
        return Err(Error::Config("binary lag order must be positive".into()));
    }
    if n == 0 {
        return Err(Error::DegenerateSample("n must be positive".into()));
    }
    spec.check_range()?;
    let mut rng = rng_from_seed(seed);
    let dx = spec.exogenous.as_ref().map_or(0, Exogenous::dim);
    let mut lags = vec![1.0; spec.p];
    let mut data = Dataset::new(spec.input_dim());
    let mut etas = Vec::with_capacity(n);
    let mut window = vec![0.0; spec.input_dim()];
    for t in 0..spec.burn_in + n {
        for (w, y) in window.iter_mut().zip(&lags) {
            *w = if spec.encode01 { (y + 1.0) / 2.0 } else { *y };
        }
        for i in 0..dx {
            window[spec.p + i] = rng.random_range(-1.0..=1.0);
        }
        let eta = spec.eta_of_window(&window);
        if !(-1e-12..=1.0 + 1e-12).contains(&eta) {
            return Err(Error::ModelContract(format!("eta = {eta} outside [0, 1] at t = {t}")));
        }
        let u: f64 = rng.random();
        let y = if u < eta { 1.0 } else { -1.0 };
        if t >= spec.burn_in {
            data.push(&window, y)?;
            etas.push(eta.clamp(0.0, 1.0));
        }
        lags.rotate_right(1);
        lags[0] = y;
    }
    Ok(BinarySeries { data, eta: etas })
}
