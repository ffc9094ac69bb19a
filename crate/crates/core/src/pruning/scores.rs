//! Importance measures.
//!
//! With `g_ki = ∂y_k/∂b_i` and `z_j` the layer input, `∂y_k/∂W_ij = g_ki z_j`.
//! The elimination-compensation score minimizes over `δb` the linearized
//! discrepancy `Σ_k E_x[(g_ki z_j W_ij − g_ki δb)²]`. Writing
//! `D_i = Σ_k E[g_ki²]`, `B_ij = Σ_k E[g_ki² z_j]`, `A_ij = Σ_k E[g_ki² z_j²]`,
//! the minimizer is `δb = W_ij B_ij / D_i` and the minimum is
//! `W_ij² (A_ij − B_ij² / D_i)`. All three moments accumulate as one rank-1
//! update per sample and layer, so the cost is a few backward sweeps per
//! sample rather than one network evaluation per weight.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CompensationSet, PruneConfig, ScoreSet};
use crate::data::Dataset;
use crate::matrix::Matrix;
use crate::network::{loss_gradient, ForwardTrace, Network};
use crate::training::LossKind;
use crate::{Error, Result};

fn check_data(net: &Network, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("scoring needs at least one sample".into()));
    }
    if data.input_dim() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "dataset has {} inputs, network expects {}",
            data.input_dim(),
            net.input_dim()
        )));
    }
    Ok(())
}

/// Empirical sensitivity moments behind the elimination-compensation score.
#[derive(Debug, Clone, PartialEq)]
pub struct EcMoments {
    /// `D_i` per layer.
    pub d: Vec<Vec<f64>>,
    /// `B_ij` per layer.
    pub b: Vec<Matrix>,
    /// `A_ij` per layer.
    pub a: Vec<Matrix>,
    pub samples: usize,
}

impl EcMoments {
    pub fn accumulate(net: &Network, data: &Dataset) -> Result<Self> {
        check_data(net, data)?;
        let layers = net.layers();
        let mut d: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.out_dim()]).collect();
        let mut b: Vec<Matrix> = layers.iter().map(|l| Matrix::zeros(l.out_dim(), l.in_dim())).collect();
        let mut a = b.clone();
        let mut z_sq = Vec::new();
        for s in 0..data.len() {
            let trace = net.forward(data.input(s))?;
            let sens = net.bias_sensitivities(&trace)?;
            for l in 0..layers.len() {
                let z = trace.layer_input(l);
                z_sq.clear();
                z_sq.extend(z.iter().map(|v| v * v));
                let g = sens.layer(l);
                for i in 0..layers[l].out_dim() {
                    let mut di = 0.0;
                    for k in 0..g.rows() {
                        let v = g.get(k, i);
                        di += v * v;
                    }
                    d[l][i] += di;
                    if di == 0.0 {
                        continue;
                    }
                    for (bij, &zj) in b[l].row_mut(i).iter_mut().zip(z) {
                        *bij += di * zj;
                    }
                    for (aij, &zj2) in a[l].row_mut(i).iter_mut().zip(&z_sq) {
                        *aij += di * zj2;
                    }
                }
            }
        }
        let inv = 1.0 / data.len() as f64;
        for l in 0..layers.len() {
            d[l].iter_mut().for_each(|v| *v *= inv);
            b[l].as_mut_slice().iter_mut().for_each(|v| *v *= inv);
            a[l].as_mut_slice().iter_mut().for_each(|v| *v *= inv);
            if !(d[l].iter().all(|v| v.is_finite()) && a[l].is_finite() && b[l].is_finite()) {
                return Err(Error::NonFinite {
                    layer: l,
                    what: "sensitivity moments".into(),
                });
            }
        }
        Ok(Self {
            d,
            b,
            a,
            samples: data.len(),
        })
    }

    /// Closed-form compensation and importance for every weight.
    pub fn finalize(&self, net: &Network, dead_neuron_eps: f64) -> (ScoreSet, CompensationSet) {
        let mut scores = ScoreSet::zeros_like(net);
        let mut comp = CompensationSet::zeros_like(net);
        for (l, layer) in net.layers().iter().enumerate() {
            let w = layer.weights();
            for i in 0..layer.out_dim() {
                let di = self.d[l][i];
                if di < dead_neuron_eps {
                    continue;
                }
                let (s_row, c_row) = (scores.layer_mut(l).row_mut(i), comp.layer_mut(l).row_mut(i));
                for j in 0..layer.in_dim() {
                    let wij = w.get(i, j);
                    let bij = self.b[l].get(i, j);
                    let aij = self.a[l].get(i, j);
                    c_row[j] = wij * bij / di;
                    // Cauchy-Schwarz makes this non-negative up to rounding.
                    s_row[j] = (wij * wij * (aij - bij * bij / di)).max(0.0);
                }
            }
        }
        (scores, comp)
    }
}

/// Elimination-compensation importance and optimal compensations.
pub fn ec_scores(net: &Network, data: &Dataset, cfg: &PruneConfig) -> Result<(ScoreSet, CompensationSet)> {
    check_data(net, data)?;
    let data = cfg.expectation_data(data)?;
    let moments = EcMoments::accumulate(net, &data)?;
    Ok(moments.finalize(net, cfg.dead_neuron_eps))
}

/// Direct non-linear importance: each weight in turn is removed, its bias is
/// shifted by the mean removed signal `W_ij E[z_j]`, and the mean squared
/// output change is measured by re-evaluating the network. Costs one partial
/// forward pass per weight and sample.
pub fn nonlinear_scores(
    net: &Network,
    data: &Dataset,
    cfg: &PruneConfig,
) -> Result<(ScoreSet, CompensationSet)> {
    check_data(net, data)?;
    let data = cfg.expectation_data(data)?;
    let n = data.len();
    let traces: Vec<ForwardTrace> = (0..n).map(|s| net.forward(data.input(s))).collect::<Result<_>>()?;

    let layers = net.layers();
    let mut scores = ScoreSet::zeros_like(net);
    let mut comp = CompensationSet::zeros_like(net);
    let mut z_buf = Vec::new();
    let mut next = Vec::new();
    let mut pre = Vec::new();

    for (l, layer) in layers.iter().enumerate() {
        let in_dim = layer.in_dim();
        let mut mean_input = vec![0.0; in_dim];
        for t in &traces {
            for (m, &z) in mean_input.iter_mut().zip(t.layer_input(l)) {
                *m += z;
            }
        }
        mean_input.iter_mut().for_each(|m| *m /= n as f64);

        for i in 0..layer.out_dim() {
            let row = layer.weights().row(i);
            for j in 0..in_dim {
                let wij = row[j];
                let delta = wij * mean_input[j];
                comp.layer_mut(l).set(i, j, delta);
                if wij == 0.0 {
                    continue;
                }
                let shifted_bias = layer.bias()[i] + delta;
                let mut total = 0.0;
                for t in &traces {
                    let z_prev = t.layer_input(l);
                    let mut acc = 0.0;
                    for (jj, (&w, &z)) in row.iter().zip(z_prev).enumerate() {
                        let w = if jj == j { 0.0 } else { w };
                        acc += w * z;
                    }
                    let a = acc + shifted_bias;
                    z_buf.clear();
                    z_buf.extend_from_slice(t.layer_input(l + 1));
                    z_buf[i] = layer.activation().apply(a);
                    for upper in &layers[l + 1..] {
                        upper.eval_into(&z_buf, None, &mut pre, &mut next);
                        std::mem::swap(&mut z_buf, &mut next);
                    }
                    let mut sq = 0.0;
                    for (&y, &yp) in t.output().iter().zip(&z_buf) {
                        let diff = y - yp;
                        sq += diff * diff;
                    }
                    total += sq;
                }
                let importance = total / n as f64;
                if !importance.is_finite() {
                    return Err(Error::NonFinite {
                        layer: l,
                        what: format!("non-linear importance of weight ({i}, {j})"),
                    });
                }
                scores.layer_mut(l).set(i, j, importance);
            }
        }
    }
    Ok((scores, comp))
}

/// `|W_ij|`.
pub fn magnitude_scores(net: &Network) -> ScoreSet {
    ScoreSet::new(
        net.layers()
            .iter()
            .map(|l| {
                let mut m = l.weights().clone();
                m.as_mut_slice().iter_mut().for_each(|w| *w = w.abs());
                m
            })
            .collect(),
    )
}

/// `|W_ij · ∂L/∂W_ij|` with the mean loss gradient over `data`.
pub fn gradient_magnitude_scores(net: &Network, data: &Dataset, kind: LossKind) -> Result<ScoreSet> {
    check_data(net, data)?;
    let (_, grads) = loss_gradient(net, None, data, kind)?;
    Ok(ScoreSet::new(
        net.layers()
            .iter()
            .zip(&grads.layers)
            .map(|(l, g)| {
                let mut m = l.weights().clone();
                for (w, &gw) in m.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
                    *w = (*w * gw).abs();
                }
                m
            })
            .collect(),
    ))
}

/// I.i.d. `U[0, 1)` scores, reproducible per seed.
pub fn random_scores(net: &Network, seed: u64) -> ScoreSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScoreSet::new(
        net.layers()
            .iter()
            .map(|l| {
                let mut m = Matrix::zeros(l.out_dim(), l.in_dim());
                m.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen());
                m
            })
            .collect(),
    )
}

/// `Σ_k E_x[(∂y_k/∂W_ij · W_ij − ∂y_k/∂b_i · δb)²]` evaluated sample by sample
/// from the analytic sensitivities, without the moment shortcut.
pub fn linearized_objective(
    net: &Network,
    data: &Dataset,
    layer: usize,
    row: usize,
    col: usize,
    delta_b: f64,
) -> Result<f64> {
    check_data(net, data)?;
    let wij = net.layer(layer).weights().get(row, col);
    let mut total = 0.0;
    for s in 0..data.len() {
        let trace = net.forward(data.input(s))?;
        let sens = net.bias_sensitivities(&trace)?;
        for k in 0..net.output_dim() {
            let dw = sens.weight_sensitivity(&trace, k, layer, row, col);
            let db = sens.get(k, layer, row);
            let r = dw * wij - db * delta_b;
            total += r * r;
        }
    }
    Ok(total / data.len() as f64)
}
