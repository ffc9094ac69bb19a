//! Experiment description files (TOML).
//!
//! ```toml
//! name = "diffusion-arch1"          # optional, defaults to the dataset name
//! strategies = ["ec", "nonlinear", "magnitude", "gradient_magnitude", "random", "fully_connected"]
//! ratios = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]   # default
//! seeds = [0, 1, 2, 3, 4]           # default
//! loss = "mean_squared_error"       # or "softmax_cross_entropy"; default follows the task
//! expectation_subset = 1000         # optional: samples used for expectations
//! apply_compensation = true         # default
//! record_timing = true              # default; false writes 0 for score_wall_ms
//! checkpoint_dir = "ckpt"           # optional
//!
//! [dataset]
//! source = "synthetic"              # "synthetic" | "tabular" | "mnist"
//! kind = "diffusion_sorption"       # synthetic: "diffusion_sorption" | "sine1d"
//! samples = 5000                    # synthetic
//! seed = 1                          # synthetic
//! # path = "data.csv"               # tabular
//! # images = "...", labels = "...", limit = 4000   # mnist
//!
//! [split]
//! train_fraction = 0.8
//! seed = 0
//!
//! [noise]
//! amplitude = 0.005
//! seed = 0
//!
//! [architecture]
//! layers = [68, 32, 32, 32, 1]
//! activation = "prelu"              # hidden layers; output is always identity
//!
//! [train]                           # any TrainConfig field; defaults are Adam's
//! epochs = 15
//! batch_size = 64
//!
//! [finetune]
//! epochs = 15
//! ```
//!
//! Relative paths resolve against the directory of the spec file.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SynthKind;
use crate::network::Activation;
use crate::pruning::Strategy;
use crate::training::{LossKind, TrainConfig};
use crate::{Error, Result};

/// A mask-producing strategy or the width-reduced dense baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RunStrategy {
    Prune(Strategy),
    FullyConnected,
}

impl RunStrategy {
    pub fn name(self) -> &'static str {
        match self {
            RunStrategy::Prune(s) => s.name(),
            RunStrategy::FullyConnected => "fully_connected",
        }
    }
}

impl fmt::Display for RunStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for RunStrategy {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "fully_connected" {
            return Ok(RunStrategy::FullyConnected);
        }
        Strategy::from_name(&s)
            .map(RunStrategy::Prune)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

impl From<RunStrategy> for String {
    fn from(s: RunStrategy) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic {
        #[serde(default)]
        kind: SynthKind,
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
    Tabular {
        path: PathBuf,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `limit` samples of the files.
        #[serde(default)]
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    #[default]
    Prelu,
    Relu,
    Tanh,
    Identity,
}

impl HiddenActivation {
    pub fn activation(self) -> Activation {
        match self {
            HiddenActivation::Prelu => Activation::prelu(),
            HiddenActivation::Relu => Activation::ReLU,
            HiddenActivation::Tanh => Activation::Tanh,
            HiddenActivation::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub layers: Vec<usize>,
    #[serde(default)]
    pub activation: HiddenActivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            seed: 0,
        }
    }
}

fn default_strategies() -> Vec<RunStrategy> {
    Strategy::ALL
        .into_iter()
        .map(RunStrategy::Prune)
        .chain([RunStrategy::FullyConnected])
        .collect()
}

/// `0.1, 0.2, …, 0.9`.
pub fn default_ratios() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<RunStrategy>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default)]
    pub expectation_subset: Option<usize>,
    #[serde(default = "yes")]
    pub apply_compensation: bool,
    #[serde(default = "yes")]
    pub record_timing: bool,
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub architecture: ArchitectureSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub finetune: TrainConfig,
}

impl ExperimentSpec {
    /// Parses and validates a spec. Relative paths stay relative.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec file and resolves its relative paths against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            spec.resolve_paths(base);
        }
        Ok(spec)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSpec::Tabular { path } => fix(path),
            DatasetSpec::Mnist { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DatasetSpec::Synthetic { .. } => {}
        }
        if let Some(dir) = &mut self.checkpoint_dir {
            fix(dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return bad(format!("ratio {r} outside [0, 1]"));
        }
        if self.architecture.layers.len() < 2 || self.architecture.layers.contains(&0) {
            return bad(format!("invalid architecture {:?}", self.architecture.layers));
        }
        if !(self.noise.amplitude >= 0.0 && self.noise.amplitude.is_finite()) {
            return bad(format!("noise amplitude {} must be finite and >= 0", self.noise.amplitude));
        }
        if self.expectation_subset == Some(0) {
            return bad("expectation_subset must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.split.train_fraction) {
            return bad(format!("train fraction {} outside [0, 1]", self.split.train_fraction));
        }
        if let DatasetSpec::Synthetic { samples: 0, .. } = self.dataset {
            return bad("synthetic dataset needs samples > 0".into());
        }
        self.train.validate().map_err(|e| Error::Spec(format!("train: {e}")))?;
        self.finetune.validate().map_err(|e| Error::Spec(format!("finetune: {e}")))?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Spec(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [dataset]
        source = "synthetic"
        samples = 100

        [architecture]
        layers = [68, 8, 1]
    "#;

    #[test]
    fn defaults() {
        let s = ExperimentSpec::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.ratios.len(), 9);
        assert_eq!(s.strategies.len(), 6);
        assert!(s.apply_compensation && s.record_timing);
        assert_eq!(s.train, TrainConfig::default());
        assert_eq!(s.architecture.activation, HiddenActivation::Prelu);
    }

    #[test]
    fn rejects_bad_values() {
        let with = |extra: &str| format!("{extra}\n{MINIMAL}");
        assert!(ExperimentSpec::from_toml_str(&with("seeds = []")).is_err());
        assert!(ExperimentSpec::from_toml_str(&with("ratios = [1.5]")).is_err());
        assert!(ExperimentSpec::from_toml_str(&with("strategies = [\"obd\"]")).is_err());
        assert!(ExperimentSpec::from_toml_str(&with("bogus = 1")).is_err());
        assert!(ExperimentSpec::from_toml_str("[dataset]\nsource = \"synthetic\"").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let s = ExperimentSpec::from_toml_str(MINIMAL).unwrap();
        let again = ExperimentSpec::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn resolves_relative_paths() {
        let mut s = ExperimentSpec::from_toml_str(
            "[dataset]\nsource = \"tabular\"\npath = \"d.csv\"\n[architecture]\nlayers = [1, 1]\n",
        )
        .unwrap();
        s.resolve_paths(Path::new("/tmp/x"));
        assert_eq!(s.dataset, DatasetSpec::Tabular { path: "/tmp/x/d.csv".into() });
    }
}
