//! Train → prune → fine-tune experiment matrix.
//!
//! For every seed a network is initialized and trained once; that checkpoint
//! is scored by each strategy, pruned at each ratio, evaluated on the test
//! split and fine-tuned with the mask held fixed. The width-reduced dense
//! baseline instead trains a narrower network from scratch for the same
//! total number of epochs.

mod arch;
mod report;
mod spec;

pub use arch::{count_weights, shrink_architecture};
pub use report::{write_report, ExperimentReport, ReportFormat, ReportRow, CSV_COLUMNS};
pub use spec::{
    default_ratios, ArchitectureSpec, DatasetSpec, ExperimentSpec, HiddenActivation, NoiseConfig,
    RunStrategy, SplitSpec,
};

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::data::{self, Dataset, NoiseSpec, Task};
use crate::network::{Activation, Network};
use crate::pruning::{self, apply_prune, select_mask, CompensationSet, MaskSet, PruneConfig, ScoreSet, Strategy};
use crate::training::{self, train_with_state, LossKind, OptimizerState, TrainConfig};
use crate::{Error, Result};

/// Execution knobs that do not change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; cells are independent and the report order is fixed.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1 }
    }
}

/// Train and test splits after noise injection, plus the loss they use.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub loss: LossKind,
}

pub fn prepare_data(spec: &ExperimentSpec) -> Result<PreparedData> {
    let full = match &spec.dataset {
        DatasetSpec::Synthetic { kind, samples, seed } => data::synth_regression(*kind, *samples, *seed)?,
        DatasetSpec::Tabular { path } => data::load_tabular(path)?,
        DatasetSpec::Mnist { images, labels, limit } => {
            let d = data::load_mnist(images, labels)?.with_name("mnist");
            match limit {
                Some(n) => d.take(*n)?,
                None => d,
            }
        }
    };
    let full = if spec.noise.amplitude > 0.0 {
        data::add_noise(
            &full,
            NoiseSpec {
                amplitude: spec.noise.amplitude,
                seed: spec.noise.seed,
            },
        )?
    } else {
        full
    };
    let loss = spec.loss.unwrap_or_else(|| LossKind::for_task(full.task()));
    loss.check_task(full.task())?;
    let (train, test) = data::split(&full, spec.split.train_fraction, spec.split.seed)?;
    Ok(PreparedData { train, test, loss })
}

fn arch_string(arch: &[usize]) -> String {
    arch.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

fn seeded(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: cfg.seed.wrapping_add(seed),
        ..*cfg
    }
}

struct SeedState {
    net: Network,
    optimizer: OptimizerState,
    baseline_loss: f64,
}

struct Scored {
    scores: ScoreSet,
    compensation: CompensationSet,
    wall_ms: f64,
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    data: &'a PreparedData,
    hidden: Activation,
}

impl Context<'_> {
    fn checkpoint_path(&self, name: String) -> Option<PathBuf> {
        self.spec.checkpoint_dir.as_ref().map(|d| d.join(name))
    }

    fn train_seed(&self, seed: u64) -> Result<SeedState> {
        let path = self.checkpoint_path(format!("seed-{seed}.ckpt"));
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            if let Checkpoint {
                network: Some(net),
                optimizer: Some(optimizer),
                ..
            } = Checkpoint::load(p)?
            {
                let baseline_loss = training::loss(&net, None, &self.data.test, self.data.loss)?;
                return Ok(SeedState {
                    net,
                    optimizer,
                    baseline_loss,
                });
            }
        }
        let init = Network::random(&self.spec.architecture.layers, self.hidden, seed)?;
        let mut optimizer = OptimizerState::new(&init);
        let (net, _) = train_with_state(
            &init,
            None,
            &self.data.train,
            &seeded(&self.spec.train, seed),
            self.data.loss,
            &mut optimizer,
        )?;
        if let Some(p) = path {
            let ck = Checkpoint {
                network: Some(net.clone()),
                optimizer: Some(optimizer.clone()),
                ..Checkpoint::default()
            };
            ck.save(p)?;
        }
        let baseline_loss = training::loss(&net, None, &self.data.test, self.data.loss)?;
        Ok(SeedState {
            net,
            optimizer,
            baseline_loss,
        })
    }

    fn score(&self, state: &SeedState, strategy: Strategy, seed: u64) -> Result<Scored> {
        let cfg = PruneConfig {
            strategy,
            expectation_subset: self.spec.expectation_subset,
            seed,
            ..PruneConfig::default()
        };
        let start = Instant::now();
        let (scores, compensation) = pruning::compute_scores(&state.net, &self.data.train, &cfg, self.data.loss)?;
        let wall_ms = if self.spec.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        if let Some(p) = self.checkpoint_path(format!("seed-{seed}-{}.ckpt", strategy.name())) {
            Checkpoint {
                network: Some(state.net.clone()),
                scores: Some(scores.clone()),
                compensation: Some(compensation.clone()),
                ..Checkpoint::default()
            }
            .save(p)?;
        }
        Ok(Scored {
            scores,
            compensation,
            wall_ms,
        })
    }

    /// `(loss_after_prune, loss_after_finetune)` for one pruning cell.
    fn prune_cell(&self, state: &SeedState, scored: &Scored, strategy: Strategy, ratio: f64, seed: u64) -> Result<(f64, f64)> {
        let mask = select_mask(&scored.scores, ratio)?;
        let comp = (self.spec.apply_compensation && strategy.compensates()).then_some(&scored.compensation);
        let pruned = apply_prune(&state.net, &mask, comp)?;
        let after_prune = training::loss(&pruned, None, &self.data.test, self.data.loss)?;
        let mut optimizer = state.optimizer.clone();
        let (tuned, _) = train_with_state(
            &pruned,
            Some(&mask),
            &self.data.train,
            &seeded(&self.spec.finetune, seed),
            self.data.loss,
            &mut optimizer,
        )?;
        let after_finetune = training::loss(&tuned, Some(&mask), &self.data.test, self.data.loss)?;
        Ok((after_prune, after_finetune))
    }

    /// Dense baseline: `(loss after the train phase, loss after train + finetune)`
    /// of a narrower network, and its architecture.
    fn dense_cell(&self, ratio: f64, seed: u64) -> Result<(f64, f64, Vec<usize>)> {
        let arch = shrink_architecture(&self.spec.architecture.layers, ratio)?;
        let init = Network::random(&arch, self.hidden, seed)?;
        let mut optimizer = OptimizerState::new(&init);
        let (net, _) = train_with_state(
            &init,
            None,
            &self.data.train,
            &seeded(&self.spec.train, seed),
            self.data.loss,
            &mut optimizer,
        )?;
        let first = training::loss(&net, None, &self.data.test, self.data.loss)?;
        let (net, _) = train_with_state(
            &net,
            None,
            &self.data.train,
            &seeded(&self.spec.finetune, seed),
            self.data.loss,
            &mut optimizer,
        )?;
        let second = training::loss(&net, None, &self.data.test, self.data.loss)?;
        Ok((first, second, arch))
    }
}

/// Runs the full matrix on one worker.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_experiment_with(spec, RunOptions::default())
}

/// Runs the full matrix. Setup problems (data, architecture) are errors;
/// failures inside a cell are recorded on its row and the run continues.
pub fn run_experiment_with(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentReport> {
    spec.validate()?;
    let data = prepare_data(spec)?;
    let arch = &spec.architecture.layers;
    if arch[0] != data.train.input_dim() || arch[arch.len() - 1] != data.train.output_dim() {
        return Err(Error::Spec(format!(
            "architecture {arch:?} does not fit data with {} inputs and {} outputs",
            data.train.input_dim(),
            data.train.output_dim()
        )));
    }
    if matches!(data.train.task(), Task::Classification { .. }) && spec.noise.amplitude > 0.0 {
        return Err(Error::Spec("noise applies to regression targets only".into()));
    }
    if let Some(dir) = &spec.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let ctx = Context {
        spec,
        data: &data,
        hidden: spec.architecture.activation.activation(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;

    pool.install(|| {
        let seed_states: Vec<std::result::Result<SeedState, String>> = spec
            .seeds
            .par_iter()
            .map(|&s| ctx.train_seed(s).map_err(|e| e.to_string()))
            .collect();

        let score_jobs: Vec<(usize, usize, Strategy)> = spec
            .strategies
            .iter()
            .enumerate()
            .filter_map(|(si, s)| match s {
                RunStrategy::Prune(p) => Some((si, *p)),
                RunStrategy::FullyConnected => None,
            })
            .flat_map(|(si, p)| (0..spec.seeds.len()).map(move |k| (si, k, p)))
            .collect();
        let scored: Vec<std::result::Result<Scored, String>> = score_jobs
            .par_iter()
            .map(|&(_, k, p)| match &seed_states[k] {
                Ok(state) => ctx.score(state, p, spec.seeds[k]).map_err(|e| e.to_string()),
                Err(e) => Err(format!("training failed: {e}")),
            })
            .collect();
        let scored_for = |si: usize, k: usize| {
            score_jobs
                .iter()
                .position(|&(s, kk, _)| s == si && kk == k)
                .map(|pos| &scored[pos])
        };

        let cells: Vec<(usize, usize, f64)> = (0..spec.strategies.len())
            .flat_map(|si| {
                (0..spec.seeds.len()).flat_map(move |k| spec.ratios.iter().map(move |&r| (si, k, r)))
            })
            .collect();
        let rows: Vec<ReportRow> = cells
            .par_iter()
            .map(|&(si, k, ratio)| {
                let strategy = spec.strategies[si];
                let seed = spec.seeds[k];
                let mut row = ReportRow {
                    dataset: spec.name.clone().unwrap_or_else(|| data.train.name().to_string()),
                    noise: spec.noise.amplitude,
                    arch: arch_string(arch),
                    strategy: strategy.name().to_string(),
                    seed,
                    ratio,
                    baseline_loss: None,
                    loss_after_prune: None,
                    loss_after_finetune: None,
                    score_wall_ms: 0.0,
                    effective_arch: None,
                    error: None,
                };
                let state = match &seed_states[k] {
                    Ok(s) => s,
                    Err(e) => {
                        row.error = Some(format!("training failed: {e}"));
                        return row;
                    }
                };
                row.baseline_loss = Some(state.baseline_loss);
                let outcome = match strategy {
                    RunStrategy::Prune(p) => match scored_for(si, k).expect("scored every prune strategy") {
                        Ok(sc) => {
                            row.score_wall_ms = sc.wall_ms;
                            ctx.prune_cell(state, sc, p, ratio, seed).map_err(|e| e.to_string())
                        }
                        Err(e) => Err(format!("scoring failed: {e}")),
                    },
                    RunStrategy::FullyConnected => match ctx.dense_cell(ratio, seed) {
                        Ok((a, b, eff)) => {
                            row.effective_arch = Some(arch_string(&eff));
                            Ok((a, b))
                        }
                        Err(e) => Err(e.to_string()),
                    },
                };
                match outcome {
                    Ok((a, b)) => {
                        row.loss_after_prune = Some(a);
                        row.loss_after_finetune = Some(b);
                    }
                    Err(e) => row.error = Some(e),
                }
                row
            })
            .collect();
        Ok(ExperimentReport { rows })
    })
}

/// Keep-all mask for `net`; convenience for callers building reports by hand.
pub fn full_mask(net: &Network) -> MaskSet {
    MaskSet::ones(net)
}
