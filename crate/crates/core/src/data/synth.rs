//! Seeded synthetic regression data.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Initial-condition samples per row of the diffusion surrogate.
pub const DIFFUSION_GRID_POINTS: usize = 65;
/// `(mu, t, x)` followed by the sampled initial condition.
pub const DIFFUSION_INPUT_DIM: usize = 3 + DIFFUSION_GRID_POINTS;

const MODES: usize = 3;
const TIME_LEVELS: usize = 10;
const QUERY_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Parametric diffusion on `[0, 1]`:
    /// `u(t, x) = 1/2 + Σ_m c_m exp(-mu m² π² t) sin(m π x)` with `Σ|c_m| ≤ 1/2`,
    /// so `u ∈ [0, 1]`. Inputs are `(mu, t, x, u_0(x_0), …, u_0(x_64))` on a
    /// uniform grid; `t` takes one of ten levels and `x` one of 64 grid points.
    #[default]
    DiffusionSorption,
    /// `y = 1/2 + 0.4 sin(2πx)` for `x ~ U(0, 1)`; one input, one output.
    Sine1d,
}

impl SynthKind {
    pub fn input_dim(self) -> usize {
        match self {
            SynthKind::DiffusionSorption => DIFFUSION_INPUT_DIM,
            SynthKind::Sine1d => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::DiffusionSorption => "synth-diffusion",
            SynthKind::Sine1d => "synth-sine",
        }
    }
}

pub fn synth_regression(kind: SynthKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Empty("synthetic dataset needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = kind.input_dim();
    let mut inputs = Vec::with_capacity(n * n_in);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        match kind {
            SynthKind::DiffusionSorption => {
                let mu: f64 = rng.gen_range(0.02..0.2);
                let budget = 0.5 / MODES as f64;
                let c: [f64; MODES] = std::array::from_fn(|_| rng.gen_range(-budget..=budget));
                let t = rng.gen_range(1..=TIME_LEVELS) as f64 / TIME_LEVELS as f64;
                let x = rng.gen_range(0..QUERY_POINTS) as f64 / (QUERY_POINTS - 1) as f64;
                let u = |t: f64, x: f64| {
                    0.5 + c
                        .iter()
                        .enumerate()
                        .map(|(m, cm)| {
                            let m = (m + 1) as f64;
                            cm * (-mu * m * m * PI * PI * t).exp() * (m * PI * x).sin()
                        })
                        .sum::<f64>()
                };
                inputs.extend([mu, t, x]);
                let last = (DIFFUSION_GRID_POINTS - 1) as f64;
                inputs.extend((0..DIFFUSION_GRID_POINTS).map(|g| u(0.0, g as f64 / last)));
                targets.push(u(t, x));
            }
            SynthKind::Sine1d => {
                let x: f64 = rng.gen();
                inputs.push(x);
                targets.push(0.5 + 0.4 * (2.0 * PI * x).sin());
            }
        }
    }
    Dataset::regression(
        kind.name(),
        Matrix::new(n, n_in, inputs)?,
        Matrix::new(n, 1, targets)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;

    #[test]
    fn deterministic() {
        let a = synth_regression(SynthKind::DiffusionSorption, 20, 5).unwrap();
        assert_eq!(a, synth_regression(SynthKind::DiffusionSorption, 20, 5).unwrap());
        assert_ne!(a, synth_regression(SynthKind::DiffusionSorption, 20, 6).unwrap());
        assert_eq!(a.input_dim(), 68);
    }

    #[test]
    fn zero_samples() {
        assert!(synth_regression(SynthKind::Sine1d, 0, 0).is_err());
    }

    #[test]
    fn default_kind_is_bounded() {
        let d = synth_regression(SynthKind::default(), 5000, 11).unwrap();
        let Targets::Values(v) = d.targets() else { unreachable!() };
        let (lo, hi) = v
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| (lo.min(u), hi.max(u)));
        assert!(lo >= 0.0 && hi <= 1.0, "range [{lo}, {hi}]");
        // and actually spread out
        assert!(hi - lo > 0.4, "range [{lo}, {hi}]");
    }
}
