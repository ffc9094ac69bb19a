//! Dense fully-connected networks: construction, forward evaluation with
//! traces, output sensitivities with respect to biases, and loss gradients.
//!
//! Layer `l` computes `z = act(W z_prev + b)`; weights are stored row-major
//! with shape `(n_l, n_{l-1})`. The last layer is always `Identity`.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::matrix::Matrix;
use crate::pruning::MaskSet;
use crate::training::LossKind;
use crate::{Error, Result};

/// Initial negative-side slope of a PReLU layer.
pub const PRELU_INIT_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    ReLU,
    Tanh,
    /// Parametric ReLU with one trainable slope shared by the whole layer.
    PReLU(f64),
}

impl Activation {
    pub fn prelu() -> Self {
        Activation::PReLU(PRELU_INIT_SLOPE)
    }

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Identity => a,
            Activation::ReLU => {
                if a >= 0.0 {
                    a
                } else {
                    0.0
                }
            }
            Activation::Tanh => a.tanh(),
            Activation::PReLU(slope) => {
                if a >= 0.0 {
                    a
                } else {
                    slope * a
                }
            }
        }
    }

    /// Derivative with respect to the preactivation. At the kink of
    /// ReLU/PReLU the right derivative (1) is used.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::ReLU => {
                if a >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = a.tanh();
                1.0 - t * t
            }
            Activation::PReLU(slope) => {
                if a >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }

    /// Derivative with respect to the PReLU slope; zero for other kinds.
    #[inline]
    pub fn slope_derivative(self, a: f64) -> f64 {
        match self {
            Activation::PReLU(_) if a < 0.0 => a,
            _ => 0.0,
        }
    }

    pub fn slope(self) -> Option<f64> {
        match self {
            Activation::PReLU(s) => Some(s),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::ReLU => "relu",
            Activation::Tanh => "tanh",
            Activation::PReLU(_) => "prelu",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::Dimension(format!(
                "weights have {} rows but bias has {} entries",
                weights.rows(),
                bias.len()
            )));
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Dimension("layer dimensions must be positive".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    #[inline]
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    #[inline]
    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    #[inline]
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Sets the PReLU slope. No-op for other activations.
    pub fn set_slope(&mut self, slope: f64) {
        if let Activation::PReLU(s) = &mut self.activation {
            *s = slope;
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn is_finite(&self) -> bool {
        self.weights.is_finite()
            && self.bias.iter().all(|b| b.is_finite())
            && self.activation.slope().map_or(true, f64::is_finite)
    }

    /// `act(W z + b)` written into `pre`/`post`. `keep`, when given, masks
    /// weights entrywise; a masked entry contributes exactly as a zero weight.
    #[inline]
    pub(crate) fn eval_into(
        &self,
        z: &[f64],
        keep: Option<&[bool]>,
        pre: &mut Vec<f64>,
        post: &mut Vec<f64>,
    ) {
        pre.clear();
        post.clear();
        let cols = self.weights.cols();
        for (i, row) in self.weights.iter_rows().enumerate() {
            let a = match keep {
                None => row_dot(row, z) + self.bias[i],
                Some(keep) => {
                    let keep = &keep[i * cols..(i + 1) * cols];
                    let mut s = 0.0;
                    for ((&w, &k), &zj) in row.iter().zip(keep).zip(z) {
                        let w = if k { w } else { 0.0 };
                        s += w * zj;
                    }
                    s + self.bias[i]
                }
            };
            pre.push(a);
            post.push(self.activation.apply(a));
        }
    }
}

/// Sequential dot product; the summation order is part of the contract so
/// that independent evaluators can reproduce results bit-for-bit.
#[inline]
pub(crate) fn row_dot(row: &[f64], z: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&w, &zj) in row.iter().zip(z) {
        s += w * zj;
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    /// Random network with Kaiming-uniform weights `U(-sqrt(6/fan_in), +sqrt(6/fan_in))`,
    /// zero biases, `hidden` activation on every layer but the last.
    pub fn random(arch: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if arch.len() < 2 {
            return Err(Error::Config(format!(
                "architecture needs at least input and output widths, got {arch:?}"
            )));
        }
        if arch.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {arch:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(arch.len() - 1);
        for (l, dims) in arch.windows(2).enumerate() {
            let (fan_in, fan_out) = (dims[0], dims[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            let activation = if l + 2 == arch.len() {
                Activation::Identity
            } else {
                hidden
            };
            layers.push(Layer::new(
                Matrix::new(fan_out, fan_in, data)?,
                vec![0.0; fan_out],
                activation,
            )?);
        }
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::Dimension("network has no layers".into()));
        };
        if last.activation != Activation::Identity {
            return Err(Error::Config(
                "last layer activation must be Identity".into(),
            ));
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::Dimension(format!(
                    "layer {} expects {} inputs but layer {} produces {}",
                    l + 1,
                    pair[1].in_dim(),
                    l,
                    pair[0].out_dim()
                )));
            }
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if !layer.is_finite() {
                return Err(Error::NonFinite {
                    layer: l,
                    what: "parameters".into(),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    #[inline]
    pub fn layer(&self, l: usize) -> &Layer {
        &self.layers[l]
    }

    /// Mutable layer access. Shapes cannot change through this handle.
    #[inline]
    pub fn layer_mut(&mut self, l: usize) -> &mut Layer {
        &mut self.layers[l]
    }

    #[inline]
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer widths, input first.
    pub fn architecture(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    /// `|W|`: number of weight-matrix entries.
    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    /// `|theta|`: weights, biases and PReLU slopes.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len() + usize::from(l.activation.slope().is_some()))
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.trace(None, x)
    }

    /// Forward pass with `M ⊙ W` in place of every weight matrix.
    pub fn masked_forward(&self, mask: &MaskSet, x: &[f64]) -> Result<ForwardTrace> {
        mask.check_shapes(self)?;
        self.trace(Some(mask), x)
    }

    pub(crate) fn trace(&self, mask: Option<&MaskSet>, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut preactivations = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::with_capacity(layer.out_dim());
            let mut post = Vec::with_capacity(layer.out_dim());
            let keep = mask.map(|m| m.layer(l).as_slice());
            layer.eval_into(&activations[l], keep, &mut pre, &mut post);
            if post.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: l,
                    what: "activation".into(),
                });
            }
            preactivations.push(pre);
            activations.push(post);
        }
        Ok(ForwardTrace {
            preactivations,
            activations,
        })
    }

    /// Output only, without keeping the trace.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_masked(None, x)
    }

    pub(crate) fn predict_masked(&self, mask: Option<&MaskSet>, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut z = x.to_vec();
        let mut pre = Vec::new();
        let mut post = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let keep = mask.map(|m| m.layer(l).as_slice());
            layer.eval_into(&z, keep, &mut pre, &mut post);
            if post.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: l,
                    what: "activation".into(),
                });
            }
            std::mem::swap(&mut z, &mut post);
        }
        Ok(z)
    }

    /// `∂y_k/∂b^l_i` for every output `k`, layer `l` and unit `i` at `x`.
    pub fn output_bias_jacobian(&self, x: &[f64]) -> Result<BiasSensitivities> {
        let trace = self.forward(x)?;
        self.bias_sensitivities(&trace)
    }

    /// Reverse sweeps for all output components sharing one trace.
    pub fn bias_sensitivities(&self, trace: &ForwardTrace) -> Result<BiasSensitivities> {
        let n_out = self.output_dim();
        let num_layers = self.layers.len();
        let mut per_layer: Vec<Matrix> = Vec::with_capacity(num_layers);
        // Identity output layer: ∂y_k/∂b^L_i = δ_ki.
        let mut current = Matrix::zeros(n_out, n_out);
        for k in 0..n_out {
            current.set(k, k, 1.0);
        }
        per_layer.push(current.clone());
        for l in (1..num_layers).rev() {
            let w = &self.layers[l].weights;
            let act = self.layers[l - 1].activation;
            let pre = &trace.preactivations[l - 1];
            let n_prev = w.cols();
            let mut next = Matrix::zeros(n_out, n_prev);
            for k in 0..n_out {
                let g = current.row(k);
                let out = next.row_mut(k);
                for (i, &gi) in g.iter().enumerate() {
                    if gi == 0.0 {
                        continue;
                    }
                    for (o, &wij) in out.iter_mut().zip(w.row(i)) {
                        *o += gi * wij;
                    }
                }
                for (o, &a) in out.iter_mut().zip(pre) {
                    *o *= act.derivative(a);
                }
            }
            if !next.is_finite() {
                return Err(Error::NonFinite {
                    layer: l - 1,
                    what: "output sensitivity".into(),
                });
            }
            per_layer.push(next.clone());
            current = next;
        }
        per_layer.reverse();
        Ok(BiasSensitivities { per_layer })
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `a^l = W^l z^{l-1} + b^l`, one vector per layer.
    pub preactivations: Vec<Vec<f64>>,
    /// `z^0 = x, z^1, …, z^L = y`; one more entry than there are layers.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has the input at least")
    }

    /// Input to layer `l` (zero-based), i.e. `z^{l-1}` in one-based notation.
    pub fn layer_input(&self, l: usize) -> &[f64] {
        &self.activations[l]
    }

    /// The signal `W_ij z_j` carried by one connection of layer `l`.
    pub fn signal(&self, net: &Network, l: usize, i: usize, j: usize) -> f64 {
        net.layers[l].weights.get(i, j) * self.activations[l][j]
    }
}

/// `g[l][k, i] = ∂y_k/∂b^l_i`, stored per layer as an `n_out × n_l` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasSensitivities {
    per_layer: Vec<Matrix>,
}

impl BiasSensitivities {
    pub fn layer(&self, l: usize) -> &Matrix {
        &self.per_layer[l]
    }

    pub fn num_layers(&self) -> usize {
        self.per_layer.len()
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize, i: usize) -> f64 {
        self.per_layer[l].get(k, i)
    }

    /// `∂y_k/∂W^l_ij = g[l][k, i] · z^{l-1}_j`.
    #[inline]
    pub fn weight_sensitivity(&self, trace: &ForwardTrace, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.per_layer[l].get(k, i) * trace.activations[l][j]
    }
}

/// Per-layer buffers shaped like the trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    /// Zero for layers without a trainable slope.
    pub slope: f64,
}

impl ParamSet {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerParams {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                    slope: 0.0,
                })
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
            l.bias.iter_mut().for_each(|v| *v *= factor);
            l.slope *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.is_finite() && l.bias.iter().all(|v| v.is_finite()) && l.slope.is_finite()
        })
    }
}

/// Mean loss and its gradient over the whole dataset.
pub fn loss_gradient(
    net: &Network,
    mask: Option<&MaskSet>,
    data: &Dataset,
    kind: LossKind,
) -> Result<(f64, ParamSet)> {
    let rows: Vec<usize> = (0..data.len()).collect();
    loss_gradient_rows(net, mask, data, &rows, kind)
}

/// Mean loss and gradient over `rows` of `data`. Gradient entries of masked
/// weights are exactly zero.
pub fn loss_gradient_rows(
    net: &Network,
    mask: Option<&MaskSet>,
    data: &Dataset,
    rows: &[usize],
    kind: LossKind,
) -> Result<(f64, ParamSet)> {
    if rows.is_empty() {
        return Err(Error::Empty("loss gradient needs a nonempty batch".into()));
    }
    kind.check_task(data.task())?;
    if let Some(mask) = mask {
        mask.check_shapes(net)?;
    }
    let mut grads = ParamSet::zeros_like(net);
    let mut total = 0.0;
    for &r in rows {
        let trace = net.trace(mask, data.input(r))?;
        let (loss, mut delta) = kind.sample_loss_and_grad(trace.output(), data.target(r))?;
        total += loss;
        for l in (0..net.layers.len()).rev() {
            let layer = &net.layers[l];
            let z_prev = &trace.activations[l];
            let g = &mut grads.layers[l];
            for (i, &d) in delta.iter().enumerate() {
                g.bias[i] += d;
                if d == 0.0 {
                    continue;
                }
                for (gw, &zj) in g.weights.row_mut(i).iter_mut().zip(z_prev) {
                    *gw += d * zj;
                }
            }
            if l == 0 {
                break;
            }
            let below = &net.layers[l - 1];
            let pre = &trace.preactivations[l - 1];
            let keep = mask.map(|m| m.layer(l).as_slice());
            let cols = layer.in_dim();
            let mut dz = vec![0.0; cols];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = layer.weights.row(i);
                match keep {
                    None => {
                        for (o, &w) in dz.iter_mut().zip(row) {
                            *o += d * w;
                        }
                    }
                    Some(keep) => {
                        let keep = &keep[i * cols..(i + 1) * cols];
                        for ((o, &w), &k) in dz.iter_mut().zip(row).zip(keep) {
                            if k {
                                *o += d * w;
                            }
                        }
                    }
                }
            }
            let act = below.activation;
            let gb = &mut grads.layers[l - 1];
            delta = dz
                .iter()
                .zip(pre)
                .map(|(&dzi, &a)| {
                    gb.slope += dzi * act.slope_derivative(a);
                    dzi * act.derivative(a)
                })
                .collect();
        }
    }
    let n = rows.len() as f64;
    grads.scale(1.0 / n);
    if let Some(mask) = mask {
        for (g, m) in grads.layers.iter_mut().zip(mask.layers()) {
            for (gw, &k) in g.weights.as_mut_slice().iter_mut().zip(m.as_slice()) {
                if !k {
                    *gw = 0.0;
                }
            }
        }
    }
    Ok((total / n, grads))
}
