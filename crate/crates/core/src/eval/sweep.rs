use rayon::prelude::*;

use super::metrics::{mae, rmse};
use super::report::{summarize, EvalReport};
use crate::augment::{augment_dataset, AugmentedDataset};
use crate::engine::{train_with_neighborhood, Hyperparams, Neighborhood, TrainedModel, Variant};
use crate::linker::SimilarityMatrix;
use crate::ratings::{split_per_user, RatingsDataset, TrainTestSplit};
use crate::{Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 9] = [0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80];

/// What to sweep. Repetition `r` uses seed `base_seed + r` for both the
/// split and model initialisation.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    /// Variants compared against the baseline; the baseline is always run.
    pub variants: Vec<Variant>,
    pub repetitions: usize,
    pub alpha: f64,
    pub base_seed: u64,
    /// Upper bound on concurrently running cells; 0 means rayon's default.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            variants: Variant::ALL.to_vec(),
            repetitions: 5,
            alpha: 0.05,
            base_seed: 1,
            workers: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::Argument("sweep needs at least one fraction".into()));
        }
        if self.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Argument("fractions must lie in (0, 1)".into()));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("fractions must be strictly increasing".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Argument("repetitions must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Baseline first, then the requested variants in order, without repeats.
    pub fn run_order(&self) -> Vec<Variant> {
        let mut order = vec![Variant::Baseline];
        for v in &self.variants {
            if !order.contains(v) {
                order.push(*v);
            }
        }
        order
    }
}

/// Test-set metrics of one variant on one split, or why it failed.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CellOutcome {
    pub variant: Variant,
    pub result: std::result::Result<(f64, f64), String>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Cell {
    pub fraction: f64,
    pub seed: u64,
    pub sparsity: f64,
    pub split_checksum: u64,
    pub outcomes: Vec<CellOutcome>,
}

fn evaluate(model: &TrainedModel, test: &RatingsDataset, hood: &Neighborhood<'_>) -> Result<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = test
        .records()
        .iter()
        .map(|r| crate::engine::predict(model, r.user, r.item, hood).map(|p| (p, r.value)))
        .collect::<Result<_>>()?;
    Ok((rmse(&pairs)?, mae(&pairs)?))
}

type AugBuilder<'a> = dyn Fn(&TrainTestSplit) -> Result<AugmentedDataset> + Sync + 'a;

fn run_cell(
    dataset: &RatingsDataset,
    sim: Option<&SimilarityMatrix>,
    config: &SweepConfig,
    hyper: &Hyperparams,
    aug_builder: &AugBuilder<'_>,
    fraction: f64,
    seed: u64,
) -> Result<Cell> {
    let split = split_per_user(dataset, fraction, seed)?;
    let order = config.run_order();
    let aug = if order.iter().any(|v| v.uses_artificial()) {
        Some(aug_builder(&split)?)
    } else {
        None
    };
    let hood = Neighborhood::new(&split.train, sim)?;
    let hyper = Hyperparams { seed, ..*hyper };
    let outcomes = order
        .iter()
        .map(|&variant| {
            let result = train_with_neighborhood(variant, &hood, aug.as_ref(), &hyper)
                .and_then(|model| evaluate(&model, &split.test, &hood))
                .map_err(|e| e.to_string());
            if let Err(e) = &result {
                log::warn!("fraction {fraction} seed {seed} variant {variant}: {e}");
            }
            CellOutcome { variant, result }
        })
        .collect();
    log::info!("finished cell fraction={fraction} seed={seed}");
    Ok(Cell {
        fraction,
        seed,
        sparsity: split.train.sparsity(),
        split_checksum: split.checksum(),
        outcomes,
    })
}

/// Runs every (fraction, repetition) cell with artificial ratings from
/// [`augment_dataset`] and aggregates the results.
pub fn run_sweep(
    dataset: &RatingsDataset,
    sim: Option<&SimilarityMatrix>,
    config: &SweepConfig,
    hyper: &Hyperparams,
) -> Result<EvalReport> {
    let builder = |split: &TrainTestSplit| match sim {
        Some(s) => augment_dataset(&split.train, s),
        None => augment_dataset(&split.train, &SimilarityMatrix::empty(split.train.n_items())),
    };
    run_sweep_with(dataset, sim, config, hyper, &builder)
}

/// [`run_sweep`] with a caller-supplied artificial-ratings builder.
///
/// Every variant in a cell trains on the very split object its baseline
/// used. Cells run concurrently on up to `config.workers` threads; a cell
/// whose split or augmentation fails aborts the sweep, while a variant that
/// fails to train is recorded in the report and the sweep goes on.
pub fn run_sweep_with(
    dataset: &RatingsDataset,
    sim: Option<&SimilarityMatrix>,
    config: &SweepConfig,
    hyper: &Hyperparams,
    aug_builder: &AugBuilder<'_>,
) -> Result<EvalReport> {
    config.validate()?;
    hyper.validate()?;
    if config.run_order().iter().any(|v| v.uses_similarity()) && sim.is_none() {
        return Err(Error::Argument(
            "similarity variants requested without a similarity matrix".into(),
        ));
    }
    let jobs: Vec<(f64, u64)> = config
        .fractions
        .iter()
        .flat_map(|&f| (0..config.repetitions as u64).map(move |r| (f, config.base_seed + r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(f, seed)| run_cell(dataset, sim, config, hyper, aug_builder, f, seed))
            .collect::<Result<_>>()
    })?;
    Ok(summarize(&cells, dataset, sim, config, hyper))
}
