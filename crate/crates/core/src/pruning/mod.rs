//! Weight importance, bias compensation, global order-statistics mask
//! selection and construction of pruned networks.
//!
//! Only weight-matrix entries are pruning candidates; biases and PReLU slopes
//! are never removed.

mod scores;

pub use scores::{
    ec_scores, gradient_magnitude_scores, linearized_objective, magnitude_scores,
    nonlinear_scores, random_scores, EcMoments,
};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::matrix::Matrix;
use crate::network::Network;
use crate::training::LossKind;
use crate::{Error, Result};

/// Keep (`true`) / prune (`false`) flags of one weight matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskLayer {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl MaskLayer {
    pub fn new(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(keep.len()) {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} mask needs {} entries, got {}",
                rows.saturating_mul(cols),
                keep.len()
            )));
        }
        Ok(Self { rows, cols, keep })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.keep
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.keep[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, keep: bool) {
        self.keep[i * self.cols + j] = keep;
    }

    pub fn nonzero_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

/// Binary masks `M^l`, one per layer, aligned with the weight matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSet {
    layers: Vec<MaskLayer>,
}

impl MaskSet {
    pub fn new(layers: Vec<MaskLayer>) -> Self {
        Self { layers }
    }

    pub fn ones(net: &Network) -> Self {
        Self::filled(net, true)
    }

    pub fn zeros(net: &Network) -> Self {
        Self::filled(net, false)
    }

    fn filled(net: &Network, keep: bool) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| MaskLayer {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    keep: vec![keep; l.weights().len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[MaskLayer] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &MaskLayer {
        &self.layers[l]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut MaskLayer {
        &mut self.layers[l]
    }

    /// `Σ_l |M^l|`: number of kept weights.
    pub fn nonzero_count(&self) -> usize {
        self.layers.iter().map(MaskLayer::nonzero_count).sum()
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(|l| l.keep.len()).sum()
    }

    pub fn pruned_count(&self) -> usize {
        self.total() - self.nonzero_count()
    }

    pub fn check_shapes(&self, net: &Network) -> Result<()> {
        if self.layers.len() != net.num_layers() {
            return Err(Error::Dimension(format!(
                "mask has {} layers, network {}",
                self.layers.len(),
                net.num_layers()
            )));
        }
        for (l, (m, layer)) in self.layers.iter().zip(net.layers()).enumerate() {
            if m.shape() != layer.weights().shape() {
                return Err(Error::Dimension(format!(
                    "mask layer {l} is {:?}, weights are {:?}",
                    m.shape(),
                    layer.weights().shape()
                )));
            }
        }
        Ok(())
    }

    /// Sets every masked weight of `net` to zero. Shapes must already match.
    pub(crate) fn zero_masked(&self, net: &mut Network) {
        for (l, m) in self.layers.iter().enumerate() {
            let w = net.layer_mut(l).weights_mut().as_mut_slice();
            for (w, &k) in w.iter_mut().zip(&m.keep) {
                if !k {
                    *w = 0.0;
                }
            }
        }
    }
}

macro_rules! layer_matrices {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            layers: Vec<Matrix>,
        }

        impl $name {
            pub fn new(layers: Vec<Matrix>) -> Self {
                Self { layers }
            }

            pub fn zeros_like(net: &Network) -> Self {
                Self {
                    layers: net
                        .layers()
                        .iter()
                        .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                        .collect(),
                }
            }

            pub fn layers(&self) -> &[Matrix] {
                &self.layers
            }

            pub fn layer(&self, l: usize) -> &Matrix {
                &self.layers[l]
            }

            pub fn layer_mut(&mut self, l: usize) -> &mut Matrix {
                &mut self.layers[l]
            }

            #[inline]
            pub fn get(&self, l: usize, i: usize, j: usize) -> f64 {
                self.layers[l].get(i, j)
            }

            pub fn total(&self) -> usize {
                self.layers.iter().map(Matrix::len).sum()
            }

            pub fn is_finite(&self) -> bool {
                self.layers.iter().all(Matrix::is_finite)
            }

            pub fn check_shapes(&self, net: &Network) -> Result<()> {
                if self.layers.len() != net.num_layers()
                    || self
                        .layers
                        .iter()
                        .zip(net.layers())
                        .any(|(m, l)| m.shape() != l.weights().shape())
                {
                    return Err(Error::Dimension(format!(
                        "{} shapes do not match the network",
                        stringify!($name)
                    )));
                }
                Ok(())
            }

            /// Entrywise product with a positive factor.
            pub fn scaled(&self, factor: f64) -> Self {
                Self {
                    layers: self
                        .layers
                        .iter()
                        .map(|m| {
                            let mut m = m.clone();
                            m.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
                            m
                        })
                        .collect(),
                }
            }
        }
    };
}

layer_matrices!(
    /// Importance `I^l_ij` of every weight; smaller means prune first.
    ScoreSet
);
layer_matrices!(
    /// Bias perturbation `δb^l_ij` attached to weight `W^l_ij`; it is added to
    /// `b^l_i` when that weight is pruned.
    CompensationSet
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Linearized output discrepancy minimized over the adjacent bias.
    #[serde(rename = "ec")]
    ElimCompensation,
    /// Literal re-evaluation with mean-signal compensation, one weight at a time.
    #[serde(rename = "nonlinear")]
    NonLinearDirect,
    Magnitude,
    GradientMagnitude,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::ElimCompensation,
        Strategy::NonLinearDirect,
        Strategy::Magnitude,
        Strategy::GradientMagnitude,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ElimCompensation => "ec",
            Strategy::NonLinearDirect => "nonlinear",
            Strategy::Magnitude => "magnitude",
            Strategy::GradientMagnitude => "gradient_magnitude",
            Strategy::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Whether the strategy produces bias compensations.
    pub fn compensates(self) -> bool {
        matches!(self, Strategy::ElimCompensation | Strategy::NonLinearDirect)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Fraction of weights to remove, in `[0, 1]`.
    pub ratio: f64,
    pub strategy: Strategy,
    /// Number of training samples for expectations; `None` uses all.
    pub expectation_subset: Option<usize>,
    /// Units whose summed squared output sensitivity falls below this are dead.
    pub dead_neuron_eps: f64,
    /// Seeds the random strategy and the expectation subsample.
    pub seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            ratio: 0.5,
            strategy: Strategy::ElimCompensation,
            expectation_subset: None,
            dead_neuron_eps: 1e-12,
            seed: 0,
        }
    }
}

impl PruneConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub(crate) fn expectation_data(&self, data: &Dataset) -> Result<Dataset> {
        match self.expectation_subset {
            Some(0) => Err(Error::Config("expectation subset must be positive".into())),
            Some(n) => data.sample_rows(n, self.seed),
            None => Ok(data.clone()),
        }
    }
}

/// Scores and compensations of the configured strategy. Strategies without
/// compensation return all zeros.
pub fn compute_scores(
    net: &Network,
    data: &Dataset,
    cfg: &PruneConfig,
    kind: LossKind,
) -> Result<(ScoreSet, CompensationSet)> {
    match cfg.strategy {
        Strategy::ElimCompensation => ec_scores(net, data, cfg),
        Strategy::NonLinearDirect => nonlinear_scores(net, data, cfg),
        Strategy::Magnitude => Ok((magnitude_scores(net), CompensationSet::zeros_like(net))),
        Strategy::GradientMagnitude => Ok((
            gradient_magnitude_scores(net, data, kind)?,
            CompensationSet::zeros_like(net),
        )),
        Strategy::Random => Ok((random_scores(net, cfg.seed), CompensationSet::zeros_like(net))),
    }
}

/// `round(r·|W|)` with ties to even.
pub fn prune_count(ratio: f64, total: usize) -> usize {
    ((ratio * total as f64).round_ties_even() as usize).min(total)
}

/// Masks the `round(r·|W|)` globally smallest scores. Ties are broken by
/// ascending `(layer, row, column)`.
pub fn select_mask(scores: &ScoreSet, ratio: f64) -> Result<MaskSet> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!("pruning ratio must lie in [0, 1], got {ratio}")));
    }
    let total = scores.total();
    let n_prune = prune_count(ratio, total);
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (l, m) in scores.layers().iter().enumerate() {
        entries.extend(m.as_slice().iter().enumerate().map(|(flat, &s)| (s, l, flat)));
    }
    let order = |a: &(f64, usize, usize), b: &(f64, usize, usize)| -> Ordering {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    if n_prune > 0 && n_prune < total {
        entries.select_nth_unstable_by(n_prune - 1, order);
    }
    let mut layers: Vec<MaskLayer> = scores
        .layers()
        .iter()
        .map(|m| MaskLayer {
            rows: m.rows(),
            cols: m.cols(),
            keep: vec![true; m.len()],
        })
        .collect();
    for &(_, l, flat) in &entries[..n_prune] {
        layers[l].keep[flat] = false;
    }
    Ok(MaskSet { layers })
}

/// Copy of `net` with `W ← M ⊙ W` and, when `comp` is given,
/// `b_i ← b_i + Σ_{j pruned} δb_ij` (summed in column order).
pub fn apply_prune(net: &Network, mask: &MaskSet, comp: Option<&CompensationSet>) -> Result<Network> {
    mask.check_shapes(net)?;
    if let Some(c) = comp {
        c.check_shapes(net)?;
    }
    let mut out = net.clone();
    for (l, m) in mask.layers.iter().enumerate() {
        let layer = out.layer_mut(l);
        let cols = m.cols;
        for i in 0..m.rows {
            let keep = &m.keep[i * cols..(i + 1) * cols];
            if keep.iter().all(|&k| k) {
                continue;
            }
            let row = layer.weights_mut().row_mut(i);
            for (w, &k) in row.iter_mut().zip(keep) {
                if !k {
                    *w = 0.0;
                }
            }
            if let Some(c) = comp {
                let deltas = c.layer(l).row(i);
                let mut shift = 0.0;
                for (&d, &k) in deltas.iter().zip(keep) {
                    if !k {
                        shift += d;
                    }
                }
                layer.bias_mut()[i] += shift;
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// `r = 1 − |W| / |W_original|`.
pub fn pruning_ratio(mask: &MaskSet, original_count: usize) -> f64 {
    if original_count == 0 {
        return 0.0;
    }
    1.0 - mask.nonzero_count() as f64 / original_count as f64
}
