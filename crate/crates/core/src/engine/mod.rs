//! Biased-SVD training by stochastic gradient descent, with the six ways of
//! folding category similarity into the model.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

mod model;
mod neighborhood;
mod params;
mod sgd;
mod train;

pub use model::{predict, TrainedModel};
pub use neighborhood::{Neighborhood, NeighborTerm};
pub use params::{init_model, FactorBlock, Matrix, ModelParams};
pub use sgd::{sgd_step, training_score};
pub use train::{train, train_on_stream, train_with_neighborhood, Sample};

/// Which model is trained. Each variant decides the parameter blocks it owns
/// and the rating stream it sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// `mu + b_u + b_i + q_i . p_u` on true ratings.
    Baseline,
    /// Baseline form on true + artificial ratings, artificial ones stepped
    /// with the smaller learning rate.
    StepSize,
    /// A second parameter block fitted only to artificial ratings; the
    /// prediction is the sum of both blocks.
    DualParams,
    /// Two independent baseline models (true / artificial) averaged.
    Mixture,
    /// Per-item scalar weighting the similarity-based neighbour rating.
    ItemAssist,
    /// Per-(user, item) scalar weighting the same neighbour rating.
    UserItemAssist,
    /// Per-item latent vectors of similar rated items added to `q_i`.
    SimLatent,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Baseline,
        Variant::StepSize,
        Variant::DualParams,
        Variant::Mixture,
        Variant::ItemAssist,
        Variant::UserItemAssist,
        Variant::SimLatent,
    ];

    /// Short tag used on the command line and in reports.
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::StepSize => "A",
            Variant::DualParams => "B",
            Variant::Mixture => "C",
            Variant::ItemAssist => "D",
            Variant::UserItemAssist => "E",
            Variant::SimLatent => "F",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Variant::Baseline => "Baseline SVD",
            Variant::StepSize => "Diff. Step Size",
            Variant::DualParams => "Additional Parameters",
            Variant::Mixture => "Two Separate Models",
            Variant::ItemAssist => "Item Similarity Vector",
            Variant::UserItemAssist => "User-Item Similarity Vector",
            Variant::SimLatent => "Latent Factors",
        }
    }

    pub fn uses_artificial(self) -> bool {
        matches!(self, Variant::StepSize | Variant::DualParams | Variant::Mixture)
    }

    pub fn uses_similarity(self) -> bool {
        matches!(
            self,
            Variant::ItemAssist | Variant::UserItemAssist | Variant::SimLatent
        )
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Variant::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = match s.trim().to_ascii_lowercase().as_str() {
            "baseline" | "svd" => Variant::Baseline,
            "a" | "step-size" => Variant::StepSize,
            "b" | "dual-params" => Variant::DualParams,
            "c" | "mixture" => Variant::Mixture,
            "d" | "item-assist" => Variant::ItemAssist,
            "e" | "user-item-assist" => Variant::UserItemAssist,
            "f" | "sim-latent" => Variant::SimLatent,
            other => return Err(Error::Argument(format!("unknown variant {other:?}"))),
        };
        Ok(v)
    }
}

/// Training and prediction settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    /// Latent dimensionality.
    pub factors: usize,
    /// Learning rate for true ratings.
    pub gamma: f64,
    /// Learning rate for artificial ratings (step-size variant).
    pub gamma_art: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the true-ratings model in the mixture variant.
    pub mixture_weight: f64,
    /// Clip predictions to [1, 5] outside of training.
    pub clamp: bool,
    /// Use `r_uj - mu` instead of raw ratings in the neighbour terms.
    pub center_neighbors: bool,
    /// Predict with the base block only for the dual-parameter variant.
    pub dual_base_only: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            factors: 50,
            gamma: 0.005,
            gamma_art: 0.00005,
            lambda: 0.02,
            epochs: 30,
            seed: 1,
            mixture_weight: 0.5,
            clamp: true,
            center_neighbors: false,
            dual_base_only: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.factors == 0 {
            return bad("factors must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.gamma_art > 0.0 && self.gamma_art <= self.gamma) {
            return bad(format!(
                "gamma-art must lie in (0, gamma={}], got {}",
                self.gamma, self.gamma_art
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.mixture_weight) {
            return bad(format!(
                "mixture weight must lie in [0, 1], got {}",
                self.mixture_weight
            ));
        }
        Ok(())
    }
}
