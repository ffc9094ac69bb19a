//! Slow reference computations used to check the fast paths: central finite
//! differences, a naive forward evaluator, literal network surgery for the
//! pruning discrepancy and the per-weight compensation formula.
//!
//! Nothing here calls the library's forward or backward code. The naive
//! evaluator sums each row left to right and adds the bias last, the same
//! order as the library, so discrepancies agree to the last bit where the
//! library reuses cached prefixes.

use crate::data::{Dataset, Target};
use crate::matrix::Matrix;
use crate::network::{Activation, Network};
use crate::training::LossKind;
use crate::{Error, Result};

/// Parameter-count guard for finite-difference Jacobians.
pub const FD_MAX_PARAMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSpec {
    pub step: f64,
}

impl Default for FdSpec {
    fn default() -> Self {
        Self { step: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdTarget {
    Weights,
    Biases,
    Slopes,
}

/// One trainable scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRef {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, row: usize },
    Slope { layer: usize },
}

fn naive_act(act: Activation, a: f64) -> f64 {
    match act {
        Activation::Identity => a,
        Activation::ReLU => {
            if a >= 0.0 {
                a
            } else {
                0.0
            }
        }
        Activation::Tanh => a.tanh(),
        Activation::PReLU(s) => {
            if a >= 0.0 {
                a
            } else {
                s * a
            }
        }
    }
}

/// Straight loop evaluation of the network output.
pub fn naive_forward(net: &Network, x: &[f64]) -> Vec<f64> {
    let mut z = x.to_vec();
    for layer in net.layers() {
        let w = layer.weights();
        let mut out = Vec::with_capacity(w.rows());
        for i in 0..w.rows() {
            let mut s = 0.0;
            for j in 0..w.cols() {
                s += w.get(i, j) * z[j];
            }
            out.push(naive_act(layer.activation(), s + layer.bias()[i]));
        }
        z = out;
    }
    z
}

/// Naive mean loss; independent of `training::loss`.
pub fn naive_loss(net: &Network, data: &Dataset, kind: LossKind) -> f64 {
    let mut total = 0.0;
    for s in 0..data.len() {
        let y = naive_forward(net, data.input(s));
        total += match (kind, data.target(s)) {
            (LossKind::MeanSquaredError, Target::Values(t)) => {
                y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
            }
            (LossKind::SoftmaxCrossEntropy, Target::Class(c)) => {
                let z: f64 = y.iter().map(|v| v.exp()).sum();
                -(y[c].exp() / z).ln()
            }
            _ => f64::NAN,
        };
    }
    total / data.len() as f64
}

fn perturbed(net: &Network, p: ParamRef, delta: f64) -> Network {
    let mut n = net.clone();
    match p {
        ParamRef::Weight { layer, row, col } => {
            let w = n.layer_mut(layer).weights_mut();
            let v = w.get(row, col);
            w.set(row, col, v + delta);
        }
        ParamRef::Bias { layer, row } => n.layer_mut(layer).bias_mut()[row] += delta,
        ParamRef::Slope { layer } => {
            if let Some(s) = n.layer(layer).activation().slope() {
                n.layer_mut(layer).set_slope(s + delta);
            }
        }
    }
    n
}

/// Central difference of every output component with respect to one parameter.
pub fn fd_output_derivative(net: &Network, x: &[f64], p: ParamRef, spec: FdSpec) -> Vec<f64> {
    let h = spec.step;
    let plus = naive_forward(&perturbed(net, p, h), x);
    let minus = naive_forward(&perturbed(net, p, -h), x);
    plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// Central difference of the naive mean loss with respect to one parameter.
pub fn fd_loss_derivative(net: &Network, data: &Dataset, kind: LossKind, p: ParamRef, spec: FdSpec) -> f64 {
    let h = spec.step;
    (naive_loss(&perturbed(net, p, h), data, kind) - naive_loss(&perturbed(net, p, -h), data, kind)) / (2.0 * h)
}

/// Every parameter of one kind, in layer then row-major order.
pub fn param_refs(net: &Network, target: FdTarget) -> Vec<ParamRef> {
    let mut out = Vec::new();
    for (layer, l) in net.layers().iter().enumerate() {
        match target {
            FdTarget::Weights => {
                for row in 0..l.out_dim() {
                    for col in 0..l.in_dim() {
                        out.push(ParamRef::Weight { layer, row, col });
                    }
                }
            }
            FdTarget::Biases => out.extend((0..l.out_dim()).map(|row| ParamRef::Bias { layer, row })),
            FdTarget::Slopes => {
                if l.activation().slope().is_some() {
                    out.push(ParamRef::Slope { layer });
                }
            }
        }
    }
    out
}

/// Finite-difference Jacobian `∂y_k/∂p`, indexed `[k][layer][flat index]`.
/// Layers without a slope get an empty slope vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FdJacobian {
    pub per_output: Vec<Vec<Vec<f64>>>,
}

pub fn fd_jacobian(net: &Network, x: &[f64], target: FdTarget, spec: FdSpec) -> Result<FdJacobian> {
    if net.param_count() > FD_MAX_PARAMS {
        return Err(Error::Config(format!(
            "finite-difference Jacobian limited to {FD_MAX_PARAMS} parameters, network has {}",
            net.param_count()
        )));
    }
    if !(spec.step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    if x.len() != net.input_dim() {
        return Err(Error::Dimension("input width".into()));
    }
    let n_out = net.output_dim();
    let mut per_output: Vec<Vec<Vec<f64>>> = (0..n_out)
        .map(|_| net.layers().iter().map(|_| Vec::new()).collect())
        .collect();
    for p in param_refs(net, target) {
        let layer = match p {
            ParamRef::Weight { layer, .. } | ParamRef::Bias { layer, .. } | ParamRef::Slope { layer } => layer,
        };
        for (k, d) in fd_output_derivative(net, x, p, spec).into_iter().enumerate() {
            per_output[k][layer].push(d);
        }
    }
    Ok(FdJacobian { per_output })
}

/// `E_x ‖y(x; θ) − y(x; θ')‖²` where `θ'` has `W_ij = 0` and `b_i += δb`,
/// by literal surgery on a copy of the network.
pub fn brute_discrepancy(
    net: &Network,
    data: &Dataset,
    layer: usize,
    row: usize,
    col: usize,
    delta_b: f64,
) -> Result<f64> {
    if layer >= net.num_layers()
        || row >= net.layer(layer).out_dim()
        || col >= net.layer(layer).in_dim()
    {
        return Err(Error::Dimension(format!("no weight ({layer}, {row}, {col})")));
    }
    let mut pruned = net.clone();
    pruned.layer_mut(layer).weights_mut().set(row, col, 0.0);
    pruned.layer_mut(layer).bias_mut()[row] += delta_b;
    let mut total = 0.0;
    for s in 0..data.len() {
        let y = naive_forward(net, data.input(s));
        let yp = naive_forward(&pruned, data.input(s));
        let mut sq = 0.0;
        for k in 0..y.len() {
            let d = y[k] - yp[k];
            sq += d * d;
        }
        total += sq;
    }
    Ok(total / data.len() as f64)
}

/// Literal per-weight optimal compensation and importance from
/// finite-difference derivatives:
/// `δb = W Σ_k E[∂_W y_k ∂_b y_k] / Σ_k E[(∂_b y_k)²]`,
/// `I = E[Σ_k (∂_W y_k W − ∂_b y_k δb)²]`.
pub fn literal_ec(
    net: &Network,
    data: &Dataset,
    layer: usize,
    row: usize,
    col: usize,
    spec: FdSpec,
) -> (f64, f64) {
    let w = net.layer(layer).weights().get(row, col);
    let mut dw = Vec::with_capacity(data.len());
    let mut db = Vec::with_capacity(data.len());
    for s in 0..data.len() {
        let x = data.input(s);
        dw.push(fd_output_derivative(net, x, ParamRef::Weight { layer, row, col }, spec));
        db.push(fd_output_derivative(net, x, ParamRef::Bias { layer, row }, spec));
    }
    let n = data.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in dw.iter().zip(&db) {
        for (x, y) in a.iter().zip(b) {
            num += x * y;
            den += y * y;
        }
    }
    num /= n;
    den /= n;
    let delta = if den == 0.0 { 0.0 } else { w * num / den };
    let mut importance = 0.0;
    for (a, b) in dw.iter().zip(&db) {
        for (x, y) in a.iter().zip(b) {
            let r = x * w - y * delta;
            importance += r * r;
        }
    }
    (delta, importance / n)
}

/// Relative error `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Gradient of the naive mean loss for every parameter, laid out like
/// [`crate::network::ParamSet`]: per layer `(weights, biases, slope)`.
pub fn fd_loss_gradient(
    net: &Network,
    data: &Dataset,
    kind: LossKind,
    spec: FdSpec,
) -> Vec<(Matrix, Vec<f64>, f64)> {
    net.layers()
        .iter()
        .enumerate()
        .map(|(layer, l)| {
            let mut w = Matrix::zeros(l.out_dim(), l.in_dim());
            for row in 0..l.out_dim() {
                for col in 0..l.in_dim() {
                    w.set(row, col, fd_loss_derivative(net, data, kind, ParamRef::Weight { layer, row, col }, spec));
                }
            }
            let b = (0..l.out_dim())
                .map(|row| fd_loss_derivative(net, data, kind, ParamRef::Bias { layer, row }, spec))
                .collect();
            let s = if l.activation().slope().is_some() {
                fd_loss_derivative(net, data, kind, ParamRef::Slope { layer }, spec)
            } else {
                0.0
            };
            (w, b, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;

    #[test]
    fn identity_layer_bias_jacobian() {
        let w = Matrix::from_rows(&[[0.3, -1.0], [2.0, 0.5]]).unwrap();
        let net = Network::new(vec![Layer::new(w, vec![0.1, 0.2], Activation::Identity).unwrap()]).unwrap();
        let j = fd_jacobian(&net, &[0.7, -0.2], FdTarget::Biases, FdSpec::default()).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                let expect = if k == i { 1.0 } else { 0.0 };
                assert!((j.per_output[k][0][i] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn guard() {
        let net = Network::random(&[200, 60, 1], Activation::Tanh, 0).unwrap();
        assert!(fd_jacobian(&net, &[0.0; 200], FdTarget::Biases, FdSpec::default()).is_err());
    }

    #[test]
    fn exact_cancellation_on_one_sample() {
        let w = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let net = Network::new(vec![Layer::new(w, vec![0.0], Activation::Identity).unwrap()]).unwrap();
        let data = Dataset::regression("s", Matrix::from_rows(&[[3.0, 4.0]]).unwrap(), Matrix::zeros(1, 1)).unwrap();
        assert_eq!(brute_discrepancy(&net, &data, 0, 0, 0, 3.0).unwrap(), 0.0);
        assert_eq!(brute_discrepancy(&net, &data, 0, 0, 0, 0.0).unwrap(), 9.0);
        assert!(brute_discrepancy(&net, &data, 0, 1, 0, 0.0).is_err());
    }

    #[test]
    fn naive_forward_matches_hand_value() {
        let w = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let net = Network::new(vec![Layer::new(w, vec![0.5], Activation::Identity).unwrap()]).unwrap();
        assert_eq!(naive_forward(&net, &[3.0, 4.0]), vec![11.5]);
    }
}
