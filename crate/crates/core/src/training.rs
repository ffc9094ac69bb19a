//! Losses, the Adam optimizer and (masked) mini-batch training loops.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Target, Task};
use crate::network::{loss_gradient_rows, Network, ParamSet};
use crate::pruning::MaskSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax over the (identity) network output followed by negative log-likelihood.
    SoftmaxCrossEntropy,
    /// Mean over output components of the squared error.
    MeanSquaredError,
}

impl LossKind {
    /// The loss matching a task.
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification { .. } => LossKind::SoftmaxCrossEntropy,
            Task::Regression => LossKind::MeanSquaredError,
        }
    }

    pub fn check_task(self, task: Task) -> Result<()> {
        match (self, task) {
            (LossKind::SoftmaxCrossEntropy, Task::Classification { .. })
            | (LossKind::MeanSquaredError, Task::Regression) => Ok(()),
            _ => Err(Error::TaskMismatch(format!("{self:?} cannot be used for {task:?}"))),
        }
    }

    /// Per-sample loss and its gradient with respect to the network output.
    pub fn sample_loss_and_grad(self, output: &[f64], target: Target<'_>) -> Result<(f64, Vec<f64>)> {
        match (self, target) {
            (LossKind::MeanSquaredError, Target::Values(t)) => {
                if t.len() != output.len() {
                    return Err(Error::Dimension(format!(
                        "output width {} vs target width {}",
                        output.len(),
                        t.len()
                    )));
                }
                let n = output.len() as f64;
                let mut loss = 0.0;
                let grad = output
                    .iter()
                    .zip(t)
                    .map(|(&y, &t)| {
                        let r = y - t;
                        loss += r * r;
                        2.0 * r / n
                    })
                    .collect();
                Ok((loss / n, grad))
            }
            (LossKind::SoftmaxCrossEntropy, Target::Class(c)) => {
                if c >= output.len() {
                    return Err(Error::Dimension(format!(
                        "class {c} but only {} logits",
                        output.len()
                    )));
                }
                let max = output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = output.iter().map(|&y| (y - max).exp()).sum();
                let log_z = max + sum.ln();
                let grad = output
                    .iter()
                    .enumerate()
                    .map(|(k, &y)| (y - log_z).exp() - if k == c { 1.0 } else { 0.0 })
                    .collect();
                Ok((log_z - output[c], grad))
            }
            (kind, _) => Err(Error::TaskMismatch(format!("{kind:?} does not match the target kind"))),
        }
    }
}

/// Mean per-sample loss of `net` (optionally masked) on `data`.
pub fn loss(net: &Network, mask: Option<&MaskSet>, data: &Dataset, kind: LossKind) -> Result<f64> {
    kind.check_task(data.task())?;
    if let Some(mask) = mask {
        mask.check_shapes(net)?;
    }
    let mut total = 0.0;
    for i in 0..data.len() {
        let y = net.predict_masked(mask, data.input(i))?;
        total += kind.sample_loss_and_grad(&y, data.target(i))?.0;
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.learning_rate.is_finite() && self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config("learning rate and epsilon must be finite".into()));
        }
        Ok(())
    }
}

/// Adam moment accumulators, shaped like the network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: ParamSet,
    pub second_moment: ParamSet,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        Self {
            first_moment: ParamSet::zeros_like(net),
            second_moment: ParamSet::zeros_like(net),
            step: 0,
        }
    }

    /// Zeroes both moments of every masked weight.
    pub fn reset_masked(&mut self, mask: &MaskSet) {
        for moments in [&mut self.first_moment, &mut self.second_moment] {
            for (layer, keep) in moments.layers.iter_mut().zip(mask.layers()) {
                for (m, &k) in layer.weights.as_mut_slice().iter_mut().zip(keep.as_slice()) {
                    if !k {
                        *m = 0.0;
                    }
                }
            }
        }
    }
}

fn adam_update(p: &mut f64, m: &mut f64, v: &mut f64, g: f64, cfg: &TrainConfig, c1: f64, c2: f64) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
}

/// One bias-corrected Adam update of every trainable parameter.
pub fn adam_step(
    state: &mut OptimizerState,
    net: &mut Network,
    grads: &ParamSet,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.layers.len() != net.num_layers() || state.first_moment.layers.len() != net.num_layers() {
        return Err(Error::Dimension("gradient/optimizer layer count differs from network".into()));
    }
    for (l, g) in grads.layers.iter().enumerate() {
        let layer = net.layer(l);
        if g.weights.shape() != layer.weights().shape()
            || g.bias.len() != layer.bias().len()
            || state.first_moment.layers[l].weights.shape() != layer.weights().shape()
        {
            return Err(Error::Dimension(format!("gradient shape mismatch in layer {l}")));
        }
    }
    if !grads.is_finite() {
        let layer = grads
            .layers
            .iter()
            .position(|g| !(g.weights.is_finite() && g.bias.iter().all(|b| b.is_finite()) && g.slope.is_finite()))
            .unwrap_or(0);
        return Err(Error::NonFinite {
            layer,
            what: "gradient".into(),
        });
    }

    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (l, g) in grads.layers.iter().enumerate() {
        let m = &mut state.first_moment.layers[l];
        let v = &mut state.second_moment.layers[l];
        let layer = net.layer_mut(l);
        for (((p, &gw), mw), vw) in layer
            .weights_mut()
            .as_mut_slice()
            .iter_mut()
            .zip(g.weights.as_slice())
            .zip(m.weights.as_mut_slice())
            .zip(v.weights.as_mut_slice())
        {
            adam_update(p, mw, vw, gw, cfg, c1, c2);
        }
        for (((p, &gb), mb), vb) in layer
            .bias_mut()
            .iter_mut()
            .zip(&g.bias)
            .zip(m.bias.iter_mut())
            .zip(v.bias.iter_mut())
        {
            adam_update(p, mb, vb, gb, cfg, c1, c2);
        }
        if let Some(mut slope) = layer.activation().slope() {
            adam_update(&mut slope, &mut m.slope, &mut v.slope, g.slope, cfg, c1, c2);
            layer.set_slope(slope);
        }
    }
    Ok(())
}

/// Trains from a fresh optimizer state. Returns the trained network and the
/// mean training loss of every epoch.
pub fn train(
    net: &Network,
    mask: Option<&MaskSet>,
    data: &Dataset,
    cfg: &TrainConfig,
    kind: LossKind,
) -> Result<(Network, Vec<f64>)> {
    let mut state = OptimizerState::new(net);
    train_with_state(net, mask, data, cfg, kind, &mut state)
}

/// Like [`train`], continuing from `state`. With a mask, masked weights are
/// zeroed and their moments reset before the first step, and both stay zero
/// throughout.
pub fn train_with_state(
    net: &Network,
    mask: Option<&MaskSet>,
    data: &Dataset,
    cfg: &TrainConfig,
    kind: LossKind,
    state: &mut OptimizerState,
) -> Result<(Network, Vec<f64>)> {
    cfg.validate()?;
    kind.check_task(data.task())?;
    let mut net = net.clone();
    if cfg.epochs == 0 {
        return Ok((net, Vec::new()));
    }
    if let Some(mask) = mask {
        mask.check_shapes(&net)?;
        mask.zero_masked(&mut net);
        state.reset_masked(mask);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (batch_loss, grads) = loss_gradient_rows(&net, mask, data, batch, kind)?;
            epoch_loss += batch_loss * batch.len() as f64;
            adam_step(state, &mut net, &grads, cfg)?;
            if let Some(mask) = mask {
                mask.zero_masked(&mut net);
            }
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::network::{Activation, Layer};

    #[test]
    fn mse_zero_at_targets() {
        let (l, g) = LossKind::MeanSquaredError
            .sample_loss_and_grad(&[1.0, 2.0], Target::Values(&[1.0, 2.0]))
            .unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_softmax() {
        let (l, g) = LossKind::SoftmaxCrossEntropy
            .sample_loss_and_grad(&[0.0, 0.0], Target::Class(0))
            .unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, vec![-0.5, 0.5]);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let (l, _) = LossKind::SoftmaxCrossEntropy
            .sample_loss_and_grad(&[1000.0, 0.0], Target::Class(0))
            .unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn loss_kind_task_mismatch() {
        let x = Matrix::zeros(2, 1);
        let d = Dataset::classification("c", x, vec![0, 1], 2).unwrap();
        let net = Network::random(&[1, 2], Activation::Identity, 0).unwrap();
        assert!(matches!(
            loss(&net, None, &d, LossKind::MeanSquaredError),
            Err(Error::TaskMismatch(_))
        ));
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = Network::random(&[2, 3, 1], Activation::prelu(), 1).unwrap();
        let before = net.clone();
        let mut st = OptimizerState::new(&net);
        let zeros = ParamSet::zeros_like(&net);
        adam_step(&mut st, &mut net, &zeros, &TrainConfig::default()).unwrap();
        assert_eq!(net, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = Network::random(&[2, 3, 1], Activation::prelu(), 1).unwrap();
        let before = net.clone();
        let mut grads = ParamSet::zeros_like(&net);
        for (k, g) in grads.layers[0].weights.as_mut_slice().iter_mut().enumerate() {
            *g = if k % 2 == 0 { 0.7 } else { -3.0 };
        }
        let cfg = TrainConfig::default();
        let mut st = OptimizerState::new(&net);
        adam_step(&mut st, &mut net, &grads, &cfg).unwrap();
        let w0 = before.layer(0).weights().as_slice();
        let w1 = net.layer(0).weights().as_slice();
        for (k, (a, b)) in w0.iter().zip(w1).enumerate() {
            let g = grads.layers[0].weights.as_slice()[k];
            let update = b - a;
            assert!((update + cfg.learning_rate * g.signum()).abs() < cfg.learning_rate * 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut net = Network::random(&[1, 1], Activation::Identity, 0).unwrap();
        let mut grads = ParamSet::zeros_like(&net);
        grads.layers[0].bias[0] = f64::NAN;
        let mut st = OptimizerState::new(&net);
        assert!(adam_step(&mut st, &mut net, &grads, &TrainConfig::default()).is_err());
    }

    #[test]
    fn zero_epochs_is_identity() {
        let net = Network::random(&[1, 1], Activation::Identity, 0).unwrap();
        let d = Dataset::regression("d", Matrix::filled(1, 1, 1.0), Matrix::filled(1, 1, 2.0)).unwrap();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let (out, hist) = train(&net, None, &d, &cfg, LossKind::MeanSquaredError).unwrap();
        assert_eq!(out, net);
        assert!(hist.is_empty());
    }

    #[test]
    fn bad_config() {
        let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { beta2: 1.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scalar_regression_converges() {
        let layer = Layer::new(Matrix::filled(1, 1, 0.0), vec![0.0], Activation::Identity).unwrap();
        let net = Network::new(vec![layer]).unwrap();
        let d = Dataset::regression("d", Matrix::filled(1, 1, 1.0), Matrix::filled(1, 1, 2.0)).unwrap();
        // y = w x + b with one sample: the minimum set is w + b = 2
        let cfg = TrainConfig { epochs: 3000, learning_rate: 1e-2, ..TrainConfig::default() };
        let (out, hist) = train(&net, None, &d, &cfg, LossKind::MeanSquaredError).unwrap();
        let pred = out.predict(&[1.0]).unwrap()[0];
        assert!((pred - 2.0).abs() < 1e-3, "{pred}");
        assert!(hist.last().unwrap() < &hist[0]);
    }
}
