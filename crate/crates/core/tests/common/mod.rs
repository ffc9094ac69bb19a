//! Builders shared by the integration tests.
#![allow(dead_code)]

use ecprune::data::Dataset;
use ecprune::matrix::Matrix;
use ecprune::network::{Activation, Layer, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random network whose hidden layers draw their activation from
/// PReLU (random slope), Tanh and Identity.
pub fn mixed_net(arch: &[usize], seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = arch.len() - 2;
    let layers = arch
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let (n_in, n_out) = (w[0], w[1]);
            let act = if l == last {
                Activation::Identity
            } else {
                match rng.gen_range(0..3) {
                    0 => Activation::PReLU(rng.gen_range(0.05..0.5)),
                    1 => Activation::Tanh,
                    _ => Activation::Identity,
                }
            };
            layer(&mut rng, n_in, n_out, act)
        })
        .collect();
    Network::new(layers).unwrap()
}

/// Random network with one activation for every hidden layer.
pub fn uniform_net(arch: &[usize], hidden: Activation, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = arch.len() - 2;
    let layers = arch
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let act = if l == last { Activation::Identity } else { hidden };
            layer(&mut rng, w[0], w[1], act)
        })
        .collect();
    Network::new(layers).unwrap()
}

fn layer(rng: &mut ChaCha8Rng, n_in: usize, n_out: usize, act: Activation) -> Layer {
    let scale = 1.5 / (n_in as f64).sqrt();
    let w = (0..n_in * n_out).map(|_| rng.gen_range(-scale..scale)).collect();
    let b = (0..n_out).map(|_| rng.gen_range(-0.3..0.3)).collect();
    Layer::new(Matrix::new(n_out, n_in, w).unwrap(), b, act).unwrap()
}

/// Gaussian-free random inputs in `[-1, 1]` with regression targets in `[-1, 1]`.
pub fn regression_data(n: usize, n_in: usize, n_out: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x = (0..n * n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = (0..n * n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Dataset::regression("random", Matrix::new(n, n_in, x).unwrap(), Matrix::new(n, n_out, y).unwrap()).unwrap()
}

pub fn classification_data(n: usize, n_in: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1a5);
    let x = (0..n * n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    Dataset::classification("random", Matrix::new(n, n_in, x).unwrap(), labels, classes).unwrap()
}

/// Architecture of 2–4 layers whose parameter count stays at or below `max_params`.
pub fn small_arch(rng: &mut ChaCha8Rng, max_params: usize) -> Vec<usize> {
    loop {
        let depth = rng.gen_range(2..=4);
        let arch: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=5)).collect();
        let params: usize = arch.windows(2).map(|w| w[0] * w[1] + w[1] + 1).sum();
        if params <= max_params {
            return arch;
        }
    }
}
