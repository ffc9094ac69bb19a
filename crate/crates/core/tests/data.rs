use std::path::PathBuf;

use ecprune::data::{
    add_noise, load_mnist, parse_tabular, split, split_allow_empty_test, split_indices, synth_regression,
    write_tabular, Dataset, NoiseSpec, SynthKind, Targets, Task,
};
use ecprune::matrix::Matrix;
use proptest::prelude::*;

fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn values(d: &Dataset) -> &Matrix {
    match d.targets() {
        Targets::Values(v) => v,
        Targets::Classes { .. } => panic!("classification"),
    }
}

#[test]
fn bundled_digits_load() {
    let dir = mnist_dir();
    let d = load_mnist(dir.join("digits-images-idx3-ubyte.gz"), dir.join("digits-labels-idx1-ubyte.gz")).unwrap();
    assert_eq!(d.len(), 10000);
    assert_eq!(d.input_dim(), 784);
    assert_eq!(d.task(), Task::Classification { num_classes: 10 });
    assert!(d.inputs().as_slice().iter().all(|&p| (0.0..=1.0).contains(&p)));
    let Targets::Classes { labels, .. } = d.targets() else { unreachable!() };
    for c in 0..10 {
        assert!(labels.iter().filter(|&&l| l == c).count() > 500);
    }
}

#[test]
fn noise_statistics() {
    let n = 100_000;
    let base = Dataset::regression("flat", Matrix::zeros(n, 1), Matrix::zeros(n, 1)).unwrap();
    let a = 0.01;
    let noisy = add_noise(&base, NoiseSpec { amplitude: a, seed: 42 }).unwrap();
    let v = values(&noisy).as_slice();
    assert!(v.iter().all(|d| d.abs() <= a));
    let mean = v.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 3.0 * a / (3.0 * n as f64).sqrt(), "mean {mean}");
    assert_eq!(noisy.inputs(), base.inputs());
}

#[test]
fn zero_noise_and_classification() {
    let d = synth_regression(SynthKind::Sine1d, 50, 1).unwrap();
    assert_eq!(add_noise(&d, NoiseSpec::none()).unwrap(), d);
    let c = Dataset::classification("c", Matrix::zeros(2, 1), vec![0, 1], 2).unwrap();
    assert!(add_noise(&c, NoiseSpec { amplitude: 0.1, seed: 0 }).is_err());
}

#[test]
fn noise_twice_is_not_idempotent() {
    let d = synth_regression(SynthKind::Sine1d, 20, 1).unwrap();
    let spec = NoiseSpec { amplitude: 0.1, seed: 5 };
    let once = add_noise(&d, spec).unwrap();
    assert_ne!(add_noise(&once, spec).unwrap(), once);
}

#[test]
fn split_sizes() {
    let d = synth_regression(SynthKind::Sine1d, 10, 0).unwrap();
    let (train, test) = split(&d, 0.8, 3).unwrap();
    assert_eq!((train.len(), test.len()), (8, 2));
    assert!(split(&d, 1.0, 3).is_err());
    let (all, none) = split_allow_empty_test(&d, 1.0, 3).unwrap();
    assert_eq!(all.len(), 10);
    assert!(none.is_none());
}

#[test]
fn tabular_round_trip_and_diffusion_width() {
    let d = synth_regression(SynthKind::DiffusionSorption, 25, 2).unwrap();
    assert_eq!(d.input_dim(), 68);
    let mut buf = Vec::new();
    write_tabular(&d, &mut buf).unwrap();
    let back = parse_tabular(buf.as_slice(), d.name()).unwrap();
    assert_eq!(back, d);
}

#[test]
fn tabular_example() {
    let text = "in:x,out:y\n1.5,2\n-3,4.25\n";
    let d = parse_tabular(text.as_bytes(), "t").unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(d.inputs().as_slice(), &[1.5, -3.0]);
    assert_eq!(values(&d).as_slice(), &[2.0, 4.25]);
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 1usize..300, f in 0.0f64..=1.0, seed in any::<u64>()) {
        let (train, test) = split_indices(n, f, seed).unwrap();
        prop_assert_eq!(train.len(), (f * n as f64).floor() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn synth_is_deterministic(seed in any::<u64>()) {
        let a = synth_regression(SynthKind::DiffusionSorption, 8, seed).unwrap();
        prop_assert_eq!(&a, &synth_regression(SynthKind::DiffusionSorption, 8, seed).unwrap());
        prop_assert!(values(&a).as_slice().iter().all(|u| (0.0..=1.0).contains(u)));
    }
}
