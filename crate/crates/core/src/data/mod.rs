//! Datasets: in-memory representation, loaders, synthetic generation,
//! target noise and train/test splits.

mod idx;
mod synth;
mod tabular;

pub use idx::{load_mnist, parse_idx_images, parse_idx_labels, IdxImages};
pub use synth::{synth_regression, SynthKind, DIFFUSION_GRID_POINTS, DIFFUSION_INPUT_DIM};
pub use tabular::{load_tabular, parse_tabular, write_tabular};

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Classification { num_classes: usize },
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Classes { labels: Vec<usize>, num_classes: usize },
    Values(Matrix),
}

/// Borrowed target of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    Class(usize),
    Values(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    inputs: Matrix,
    targets: Targets,
}

impl Dataset {
    pub fn new(name: impl Into<String>, inputs: Matrix, targets: Targets) -> Result<Self> {
        let name = name.into();
        if inputs.rows() == 0 {
            return Err(Error::Empty(format!("dataset {name:?} has no samples")));
        }
        if inputs.cols() == 0 {
            return Err(Error::Dimension(format!("dataset {name:?} has no input columns")));
        }
        if !inputs.is_finite() {
            return Err(Error::Config(format!("dataset {name:?} has non-finite inputs")));
        }
        match &targets {
            Targets::Classes { labels, num_classes } => {
                if labels.len() != inputs.rows() {
                    return Err(Error::Dimension(format!(
                        "{} inputs but {} labels",
                        inputs.rows(),
                        labels.len()
                    )));
                }
                if let Some(bad) = labels.iter().find(|&&c| c >= *num_classes) {
                    return Err(Error::Config(format!(
                        "label {bad} outside [0, {num_classes})"
                    )));
                }
            }
            Targets::Values(values) => {
                if values.rows() != inputs.rows() {
                    return Err(Error::Dimension(format!(
                        "{} inputs but {} target rows",
                        inputs.rows(),
                        values.rows()
                    )));
                }
                if values.cols() == 0 {
                    return Err(Error::Dimension("regression targets need a column".into()));
                }
                if !values.is_finite() {
                    return Err(Error::Config(format!("dataset {name:?} has non-finite targets")));
                }
            }
        }
        Ok(Self {
            name,
            inputs,
            targets,
        })
    }

    pub fn regression(name: impl Into<String>, inputs: Matrix, targets: Matrix) -> Result<Self> {
        Self::new(name, inputs, Targets::Values(targets))
    }

    pub fn classification(
        name: impl Into<String>,
        inputs: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        Self::new(name, inputs, Targets::Classes { labels, num_classes })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Width of the network output this dataset expects.
    pub fn output_dim(&self) -> usize {
        match &self.targets {
            Targets::Classes { num_classes, .. } => *num_classes,
            Targets::Values(v) => v.cols(),
        }
    }

    pub fn task(&self) -> Task {
        match &self.targets {
            Targets::Classes { num_classes, .. } => Task::Classification {
                num_classes: *num_classes,
            },
            Targets::Values(_) => Task::Regression,
        }
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    #[inline]
    pub fn input(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    #[inline]
    pub fn target(&self, i: usize) -> Target<'_> {
        match &self.targets {
            Targets::Classes { labels, .. } => Target::Class(labels[i]),
            Targets::Values(v) => Target::Values(v.row(i)),
        }
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Dimension(format!(
                "row {bad} out of range for {} samples",
                self.len()
            )));
        }
        let targets = match &self.targets {
            Targets::Classes { labels, num_classes } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                num_classes: *num_classes,
            },
            Targets::Values(v) => Targets::Values(v.select_rows(indices)),
        };
        Self::new(self.name.clone(), self.inputs.select_rows(indices), targets)
    }

    /// First `n` rows (or all, if fewer).
    pub fn take(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Seeded subsample of `n` distinct rows, in ascending row order. Returns
    /// a clone when `n >= len`.
    pub fn sample_rows(&self, n: usize, seed: u64) -> Result<Self> {
        if n >= self.len() {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.len(), n).into_vec();
        idx.sort_unstable();
        self.subset(&idx)
    }
}

/// Uniform target noise `d ~ U(-amplitude, amplitude)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            amplitude: 0.0,
            seed: 0,
        }
    }
}

/// Adds i.i.d. uniform noise to every regression target. Inputs are left
/// untouched. Applying twice adds two independent draws; callers apply it once.
pub fn add_noise(data: &Dataset, spec: NoiseSpec) -> Result<Dataset> {
    if !(spec.amplitude >= 0.0 && spec.amplitude.is_finite()) {
        return Err(Error::Config(format!(
            "noise amplitude must be finite and non-negative, got {}",
            spec.amplitude
        )));
    }
    let Targets::Values(values) = &data.targets else {
        return Err(Error::TaskMismatch(
            "noise can only be added to regression targets".into(),
        ));
    };
    if spec.amplitude == 0.0 {
        return Ok(data.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dist = Uniform::new_inclusive(-spec.amplitude, spec.amplitude);
    let mut noisy = values.clone();
    for v in noisy.as_mut_slice() {
        *v += dist.sample(&mut rng);
    }
    Dataset::new(data.name.clone(), data.inputs.clone(), Targets::Values(noisy))
}

/// Seeded shuffle split into `floor(f·N)` training and the remaining test
/// samples. Both parts must be nonempty; see [`split_allow_empty_test`].
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    match split_allow_empty_test(data, train_fraction, seed)? {
        (train, Some(test)) => Ok((train, test)),
        (_, None) => Err(Error::Config(format!(
            "train fraction {train_fraction} leaves no test samples out of {}",
            data.len()
        ))),
    }
}

pub fn split_allow_empty_test(
    data: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Option<Dataset>)> {
    let (train_idx, test_idx) = split_indices(data.len(), train_fraction, seed)?;
    if train_idx.is_empty() {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} leaves no training samples out of {}",
            data.len()
        )));
    }
    let train = data.subset(&train_idx)?;
    let test = if test_idx.is_empty() {
        None
    } else {
        Some(data.subset(&test_idx)?)
    };
    Ok((train, test))
}

/// The index partition behind [`split`].
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config(format!(
            "train fraction must lie in [0, 1], got {train_fraction}"
        )));
    }
    let n_train = ((train_fraction * n as f64).floor() as usize).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let y = Matrix::new(n, 1, (0..n).map(|i| 2.0 * i as f64).collect()).unwrap();
        Dataset::regression("toy", x, y).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let d = toy(5);
        assert_eq!(add_noise(&d, NoiseSpec { amplitude: 0.0, seed: 9 }).unwrap(), d);
    }

    #[test]
    fn noise_is_bounded_and_leaves_inputs() {
        let d = toy(1000);
        let a = 0.01;
        let n = add_noise(&d, NoiseSpec { amplitude: a, seed: 1 }).unwrap();
        assert_eq!(n.inputs(), d.inputs());
        let (Targets::Values(orig), Targets::Values(noisy)) = (d.targets(), n.targets()) else {
            unreachable!()
        };
        for (o, v) in orig.as_slice().iter().zip(noisy.as_slice()) {
            assert!((v - o).abs() <= a);
        }
        // two applications draw twice
        let twice = add_noise(&n, NoiseSpec { amplitude: a, seed: 1 }).unwrap();
        assert_ne!(twice, n);
    }

    #[test]
    fn noise_rejects_classification() {
        let x = Matrix::zeros(2, 1);
        let d = Dataset::classification("c", x, vec![0, 1], 2).unwrap();
        assert!(matches!(
            add_noise(&d, NoiseSpec { amplitude: 0.1, seed: 0 }),
            Err(Error::TaskMismatch(_))
        ));
    }

    #[test]
    fn split_sizes_and_partition() {
        let d = toy(10);
        let (train, test) = split(&d, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<f64> = train
            .inputs()
            .as_slice()
            .iter()
            .chain(test.inputs().as_slice())
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn full_train_fraction_needs_flag() {
        let d = toy(4);
        assert!(split(&d, 1.0, 0).is_err());
        let (train, test) = split_allow_empty_test(&d, 1.0, 0).unwrap();
        assert_eq!(train.len(), 4);
        assert!(test.is_none());
        assert!(split(&d, 0.0, 0).is_err());
        assert!(split(&d, 1.5, 0).is_err());
    }

    #[test]
    fn rejects_bad_labels() {
        let x = Matrix::zeros(2, 1);
        assert!(Dataset::classification("c", x, vec![0, 2], 2).is_err());
    }

    #[test]
    fn sample_rows_is_seeded() {
        let d = toy(50);
        let a = d.sample_rows(10, 4).unwrap();
        assert_eq!(a, d.sample_rows(10, 4).unwrap());
        assert_eq!(a.len(), 10);
        assert_eq!(d.sample_rows(80, 4).unwrap(), d);
    }
}
