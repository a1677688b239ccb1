//! Bounded-parameter multilayer perceptrons.
//!
//! A network with widths `p = (p_0, ..., p_{L+1})` computes
//! `A_{L+1} ∘ σ ∘ A_L ∘ ... ∘ σ ∘ A_1` with `A_j(x) = W_j x + b_j`. All
//! parameters live in one flat vector ordered as
//! `(vec(W_1), b_1, ..., vec(W_{L+1}), b_{L+1})`, where `vec` stacks the
//! columns of `W_j`. Layer views index into that vector without copying.
//!
//! Subgradient conventions at kinks: `relu'(0) = 0` and the derivative of the
//! output clamp is zero at `±F` and beyond.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::PointLoss;
use crate::rng::Rng;

/// Default tolerance below which a parameter counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    weight_bound: f64,
    output_bound: f64,
    sparsity_budget: Option<usize>,
}

impl Architecture {
    /// `widths` is `(p_0, ..., p_{L+1})`; the last entry must be 1.
    pub fn new(widths: Vec<usize>, weight_bound: f64, output_bound: f64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Architecture(format!(
                "need at least input and output widths, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Architecture(format!("zero width in {widths:?}")));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::Architecture(format!(
                "output width must be 1, got {widths:?}"
            )));
        }
        if !(weight_bound >= 0.0) {
            return Err(Error::Architecture(format!(
                "weight bound must be nonnegative, got {weight_bound}"
            )));
        }
        if !(output_bound > 0.0) {
            return Err(Error::Architecture(format!(
                "output bound must be positive, got {output_bound}"
            )));
        }
        Ok(Self {
            widths,
            weight_bound,
            output_bound,
            sparsity_budget: None,
        })
    }

    /// Input dimension `d`, `depth` hidden layers of equal `width`.
    pub fn uniform(
        input_dim: usize,
        depth: usize,
        width: usize,
        weight_bound: f64,
        output_bound: f64,
    ) -> Result<Self> {
        let mut widths = vec![input_dim];
        widths.extend(std::iter::repeat(width).take(depth));
        widths.push(1);
        Self::new(widths, weight_bound, output_bound)
    }

    pub fn with_sparsity_budget(mut self, budget: usize) -> Self {
        self.sparsity_budget = Some(budget);
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// `max_{1 <= j <= L} p_j`, or 0 for a network without hidden layers.
    pub fn max_width(&self) -> usize {
        self.widths[1..self.widths.len() - 1]
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn weight_bound(&self) -> f64 {
        self.weight_bound
    }

    pub fn output_bound(&self) -> f64 {
        self.output_bound
    }

    pub fn sparsity_budget(&self) -> Option<usize> {
        self.sparsity_budget
    }

    /// Total parameter count `P = Σ_j (p_j p_{j-1} + p_j)`.
    pub fn num_params(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.widths.len());
        let mut acc = 0;
        for w in self.widths.windows(2) {
            offsets.push(acc);
            acc += w[1] * w[0] + w[1];
        }
        offsets.push(acc);
        offsets
    }
}

/// The flattened parameter vector of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of entries with `|θ_j| > zero_tol`.
    pub fn sparsity(&self, zero_tol: f64) -> usize {
        sparsity(&self.0, zero_tol)
    }

    pub fn project(&mut self, bound: f64) {
        for v in &mut self.0 {
            *v = v.clamp(-bound, bound);
        }
    }
}

/// Componentwise clamp into `[-bound, bound]`.
pub fn project_params(theta: &[f64], bound: f64) -> Vec<f64> {
    theta.iter().map(|v| v.clamp(-bound, bound)).collect()
}

pub fn sparsity(theta: &[f64], zero_tol: f64) -> usize {
    theta.iter().filter(|v| v.abs() > zero_tol).count()
}

/// Borrowed view of one affine layer `A_j`.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub rows: usize,
    pub cols: usize,
    /// Column-major `rows x cols` weights.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl LayerView<'_> {
    #[inline]
    pub fn w(&self, row: usize, col: usize) -> f64 {
        self.weights[col * self.rows + row]
    }
}

/// Element-wise activation; Lipschitz by construction.
#[derive(Debug, Clone, Copy)]
pub enum Activation {
    Relu,
    Custom {
        f: fn(f64) -> f64,
        df: fn(f64) -> f64,
        lipschitz: f64,
    },
}

impl Activation {
    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Custom { f, .. } => f(z),
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Custom { df, .. } => df(z),
        }
    }

    pub fn lipschitz_const(&self) -> f64 {
        match self {
            Activation::Relu => 1.0,
            Activation::Custom { lipschitz, .. } => *lipschitz,
        }
    }
}

/// Gradient of a mean loss with the mean loss value itself.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub grad: Vec<f64>,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct Network {
    arch: Architecture,
    params: ParameterVector,
    activation: Activation,
    offsets: Vec<usize>,
}

impl Network {
    pub fn new(arch: Architecture, params: ParameterVector) -> Result<Self> {
        Self::with_activation(arch, params, Activation::Relu)
    }

    pub fn with_activation(
        arch: Architecture,
        params: ParameterVector,
        activation: Activation,
    ) -> Result<Self> {
        if params.len() != arch.num_params() {
            return Err(Error::Shape {
                expected: arch.num_params(),
                got: params.len(),
            });
        }
        let offsets = arch.layer_offsets();
        Ok(Self {
            arch,
            params,
            activation,
            offsets,
        })
    }

    pub fn zeros(arch: Architecture) -> Self {
        let p = arch.num_params();
        Self::new(arch, ParameterVector::zeros(p)).expect("length matches by construction")
    }

    /// Every parameter uniform on `±min(B, 1/sqrt(fan_in))` of its layer.
    pub fn init_uniform(arch: Architecture, rng: &mut Rng) -> Self {
        let mut theta = Vec::with_capacity(arch.num_params());
        for w in arch.widths.windows(2) {
            let limit = arch.weight_bound.min(1.0 / (w[0] as f64).sqrt());
            for _ in 0..(w[1] * w[0] + w[1]) {
                let u: f64 = rng.random();
                theta.push(limit * (2.0 * u - 1.0));
            }
        }
        Self::new(arch, ParameterVector::new(theta)).expect("length matches by construction")
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &ParameterVector {
        &self.params
    }

    /// The flat parameter vector (a copy).
    pub fn flatten(&self) -> ParameterVector {
        self.params.clone()
    }

    pub fn set_params(&mut self, params: ParameterVector) -> Result<()> {
        if params.len() != self.arch.num_params() {
            return Err(Error::Shape {
                expected: self.arch.num_params(),
                got: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParameterVector {
        &mut self.params
    }

    /// View of layer `j` for `j = 1..=L+1`.
    pub fn layer(&self, j: usize) -> LayerView<'_> {
        assert!(
            j >= 1 && j < self.arch.widths.len(),
            "layer index {j} out of range"
        );
        let rows = self.arch.widths[j];
        let cols = self.arch.widths[j - 1];
        let start = self.offsets[j - 1];
        let theta = self.params.as_slice();
        LayerView {
            rows,
            cols,
            weights: &theta[start..start + rows * cols],
            bias: &theta[start + rows * cols..start + rows * cols + rows],
        }
    }

    pub fn layers(&self) -> impl Iterator<Item = LayerView<'_>> {
        (1..self.arch.widths.len()).map(move |j| self.layer(j))
    }

    /// Evaluates the network; with `clamp` the output is truncated to `[-F, F]`.
    pub fn forward(&self, x: &[f64], clamp: bool) -> Result<f64> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::Shape {
                expected: self.arch.input_dim(),
                got: x.len(),
            });
        }
        let raw = self.forward_raw(x);
        Ok(if clamp { self.clamp_output(raw) } else { raw })
    }

    #[inline]
    pub(crate) fn clamp_output(&self, raw: f64) -> f64 {
        let f = self.arch.output_bound;
        raw.clamp(-f, f)
    }

    pub(crate) fn forward_raw(&self, x: &[f64]) -> f64 {
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.arch.widths.len() - 1;
        for j in 1..=last {
            let layer = self.layer(j);
            affine(&layer, &current, &mut next);
            if j < last {
                for z in &mut next {
                    *z = self.activation.apply(*z);
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        current[0]
    }

    /// Gradient of `(1/|I|) Σ_{i∈I} ℓ(clamp(h(x_i)), y_i)` with respect to θ,
    /// over `indices` or the whole dataset when `None`.
    pub fn gradient<L: PointLoss + ?Sized>(
        &self,
        loss: &L,
        data: &Dataset,
        indices: Option<&[usize]>,
    ) -> Result<Gradient> {
        if data.dim() != self.arch.input_dim() {
            return Err(Error::Shape {
                expected: self.arch.input_dim(),
                got: data.dim(),
            });
        }
        let count = indices.map_or(data.len(), |idx| idx.len());
        if count == 0 {
            return Err(Error::DegenerateSample("empty batch".into()));
        }
        let mut ws = Workspace::new(&self.arch);
        let mut grad = vec![0.0; self.arch.num_params()];
        let mut total = 0.0;
        let mut visit = |i: usize| -> Result<()> {
            let y = data.y(i);
            loss.validate(y)?;
            total += self.accumulate(loss, data.x(i), y, &mut ws, &mut grad);
            Ok(())
        };
        match indices {
            Some(idx) => idx.iter().try_for_each(|&i| visit(i))?,
            None => (0..data.len()).try_for_each(visit)?,
        }
        let scale = 1.0 / count as f64;
        for g in &mut grad {
            *g *= scale;
        }
        Ok(Gradient {
            grad,
            mean_loss: total * scale,
        })
    }

    /// One forward/backward pass; adds `∂ℓ/∂θ` into `grad` and returns `ℓ`.
    fn accumulate<L: PointLoss + ?Sized>(
        &self,
        loss: &L,
        x: &[f64],
        y: f64,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        let last = self.arch.widths.len() - 1;
        ws.post[0].copy_from_slice(x);
        for j in 1..=last {
            let layer = self.layer(j);
            let (before, after) = ws.post.split_at_mut(j);
            let input = &before[j - 1];
            let pre = &mut ws.pre[j];
            affine(&layer, input, pre);
            let out = &mut after[0];
            if j < last {
                for (o, z) in out.iter_mut().zip(pre.iter()) {
                    *o = self.activation.apply(*z);
                }
            } else {
                out.copy_from_slice(pre);
            }
        }
        let raw = ws.pre[last][0];
        let pred = self.clamp_output(raw);
        let value = loss.value(pred, y);
        let f = self.arch.output_bound;
        let clamp_slope = if raw.abs() < f { 1.0 } else { 0.0 };
        let top = loss.derivative(pred, y) * clamp_slope;
        if top == 0.0 {
            return value;
        }

        ws.delta[last][0] = top;
        for j in (1..=last).rev() {
            let rows = self.arch.widths[j];
            let cols = self.arch.widths[j - 1];
            let start = self.offsets[j - 1];
            let input = &ws.post[j - 1];
            let (lower, upper) = ws.delta.split_at_mut(j);
            let delta = &upper[0];
            {
                let gw = &mut grad[start..start + rows * cols + rows];
                for (c, &a) in input.iter().enumerate() {
                    if a != 0.0 {
                        let col = &mut gw[c * rows..(c + 1) * rows];
                        for (g, &d) in col.iter_mut().zip(delta.iter()) {
                            *g += d * a;
                        }
                    }
                }
                for (g, &d) in gw[rows * cols..].iter_mut().zip(delta.iter()) {
                    *g += d;
                }
            }
            if j > 1 {
                let weights = &self.params.as_slice()[start..start + rows * cols];
                let prev = &mut lower[j - 1];
                let pre_prev = &ws.pre[j - 1];
                for c in 0..cols {
                    let slope = self.activation.derivative(pre_prev[c]);
                    prev[c] = if slope == 0.0 {
                        0.0
                    } else {
                        let col = &weights[c * rows..(c + 1) * rows];
                        slope * col.iter().zip(delta.iter()).map(|(w, d)| w * d).sum::<f64>()
                    };
                }
            }
        }
        value
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            widths: self.arch.widths.clone(),
            weight_bound: self.arch.weight_bound,
            output_bound: self.arch.output_bound,
            theta: self.params.as_slice().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        doc.into_network()
    }
}

/// Rebuilds the layer views of `flat` for `arch`.
pub fn unflatten<'a>(arch: &Architecture, flat: &'a [f64]) -> Result<Vec<LayerView<'a>>> {
    if flat.len() != arch.num_params() {
        return Err(Error::Shape {
            expected: arch.num_params(),
            got: flat.len(),
        });
    }
    let offsets = arch.layer_offsets();
    Ok(arch
        .widths
        .windows(2)
        .zip(offsets.iter())
        .map(|(w, &start)| {
            let (rows, cols) = (w[1], w[0]);
            LayerView {
                rows,
                cols,
                weights: &flat[start..start + rows * cols],
                bias: &flat[start + rows * cols..start + rows * cols + rows],
            }
        })
        .collect())
}

/// Concatenates layer views back into `(vec(W_1), b_1, ..., vec(W_{L+1}), b_{L+1})`.
pub fn flatten_layers(layers: &[LayerView<'_>]) -> ParameterVector {
    let mut out = Vec::new();
    for layer in layers {
        out.extend_from_slice(layer.weights);
        out.extend_from_slice(layer.bias);
    }
    ParameterVector::new(out)
}

/// JSON checkpoint: `{"widths", "B", "F", "theta"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub widths: Vec<usize>,
    #[serde(rename = "B")]
    pub weight_bound: f64,
    #[serde(rename = "F")]
    pub output_bound: f64,
    pub theta: Vec<f64>,
}

impl NetworkDocument {
    pub fn into_network(self) -> Result<Network> {
        let arch = Architecture::new(self.widths, self.weight_bound, self.output_bound)?;
        Network::new(arch, ParameterVector::new(self.theta))
    }
}

struct Workspace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(arch: &Architecture) -> Self {
        let bufs = || arch.widths.iter().map(|&w| vec![0.0; w]).collect::<Vec<_>>();
        Self {
            pre: bufs(),
            post: bufs(),
            delta: bufs(),
        }
    }
}

#[inline]
fn affine(layer: &LayerView<'_>, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(layer.bias);
    for (c, &a) in input.iter().enumerate() {
        if a != 0.0 {
            let col = &layer.weights[c * layer.rows..(c + 1) * layer.rows];
            for (o, &w) in out.iter_mut().zip(col) {
                *o += w * a;
            }
        }
    }
}
