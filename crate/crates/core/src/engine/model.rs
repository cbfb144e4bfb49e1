use super::neighborhood::{NeighborTerm, Neighborhood};
use super::params::{dot, ModelParams};
use super::{Hyperparams, Variant};
use crate::{Error, Result};

/// A fitted model. The mixture variant carries its artificial-ratings
/// component in `mixture_partner`; every other variant leaves it empty.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub variant: Variant,
    pub hyper: Hyperparams,
    pub params: ModelParams,
    pub mixture_partner: Option<ModelParams>,
    /// Fingerprint of the similarity matrix used in training (0 if none).
    pub sim_ref: u64,
    /// Fingerprint of the true training ratings.
    pub train_ref: u64,
    /// Training RMSE over the true ratings after each epoch.
    pub loss_trace: Vec<f64>,
}

impl TrainedModel {
    pub fn n_users(&self) -> usize {
        self.params.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.params.n_items()
    }

    /// Unclamped score.
    pub fn score(&self, u: u32, i: u32, hood: &Neighborhood<'_>) -> Result<f64> {
        self.check_ids(u, i)?;
        let mut scratch = Scratch::default();
        Ok(self.score_with(u, i, hood, &mut scratch))
    }

    pub(crate) fn score_with(
        &self,
        u: u32,
        i: u32,
        hood: &Neighborhood<'_>,
        scratch: &mut Scratch,
    ) -> f64 {
        let full_dual = !self.hyper.dual_base_only;
        let own = raw_score(&self.params, self.variant, &self.hyper, hood, u, i, full_dual, scratch);
        match (&self.mixture_partner, self.variant) {
            (Some(partner), Variant::Mixture) => {
                let other = raw_score(partner, Variant::Mixture, &self.hyper, hood, u, i, true, scratch);
                let w = self.hyper.mixture_weight;
                w * own + (1.0 - w) * other
            }
            _ => own,
        }
    }

    fn check_ids(&self, u: u32, i: u32) -> Result<()> {
        if u as usize >= self.n_users() || i as usize >= self.n_items() {
            return Err(Error::Argument(format!(
                "(user {u}, item {i}) outside the {}x{} model",
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(())
    }

    pub(crate) fn finish(&self, raw: f64) -> f64 {
        if self.hyper.clamp {
            raw.clamp(1.0, 5.0)
        } else {
            raw
        }
    }
}

/// Predicted rating for `(u, i)`; clipped to [1, 5] when `hyper.clamp` is set.
///
/// `hood` must wrap the training ratings (and similarity matrix, for the
/// similarity variants) the model was fitted on.
pub fn predict(model: &TrainedModel, u: u32, i: u32, hood: &Neighborhood<'_>) -> Result<f64> {
    model.score(u, i, hood).map(|raw| model.finish(raw))
}

#[derive(Default)]
pub(crate) struct Scratch {
    pub terms: Vec<NeighborTerm>,
    pub total_sim: f64,
    /// `z(u, i)` for the similarity-latent variant.
    pub z: Vec<f64>,
    /// `q_i + z(u, i)`.
    pub qz: Vec<f64>,
}

pub(crate) fn neighbor_offset(params: &ModelParams, hyper: &Hyperparams) -> f64 {
    if hyper.center_neighbors {
        params.mu
    } else {
        0.0
    }
}

/// Fills `scratch.z` and `scratch.qz`; `scratch.terms` holds `K(u, i)`.
pub(crate) fn fill_latent_neighbors(
    params: &ModelParams,
    hyper: &Hyperparams,
    hood: &Neighborhood<'_>,
    u: u32,
    i: u32,
    scratch: &mut Scratch,
) {
    let k = params.factors();
    let y = params
        .neighbor_factors
        .as_ref()
        .expect("similarity-latent variant without y_j block");
    scratch.total_sim = hood.terms(u, i, &mut scratch.terms);
    scratch.z.clear();
    scratch.z.resize(k, 0.0);
    if scratch.total_sim > 0.0 {
        let off = neighbor_offset(params, hyper);
        for t in &scratch.terms {
            let c = t.sim * (t.rating - off) / scratch.total_sim;
            for (zf, yf) in scratch.z.iter_mut().zip(y.row(t.item as usize)) {
                *zf += c * yf;
            }
        }
    }
    let q = params.base.item_factors.row(i as usize);
    scratch.qz.clear();
    scratch.qz.extend(q.iter().zip(&scratch.z).map(|(a, b)| a + b));
}

/// Unclamped score of a single parameter set under `variant`'s model form.
#[allow(clippy::too_many_arguments)]
pub(crate) fn raw_score(
    params: &ModelParams,
    variant: Variant,
    hyper: &Hyperparams,
    hood: &Neighborhood<'_>,
    u: u32,
    i: u32,
    full_dual: bool,
    scratch: &mut Scratch,
) -> f64 {
    let (ui, ii) = (u as usize, i as usize);
    match variant {
        Variant::Baseline | Variant::StepSize | Variant::Mixture => params.mu + params.base.score(ui, ii),
        Variant::DualParams => {
            let base = params.mu + params.base.score(ui, ii);
            match (&params.shadow, full_dual) {
                (Some(shadow), true) => base + shadow.score(ui, ii),
                _ => base,
            }
        }
        Variant::ItemAssist => {
            let y = params.item_assist.as_ref().map_or(0.0, |y| y[ii]);
            let s = hood.assist(u, i, neighbor_offset(params, hyper));
            params.mu + params.base.score(ui, ii) + y * s
        }
        Variant::UserItemAssist => {
            let y = params.pair_assist_value(u, i);
            let s = hood.assist(u, i, neighbor_offset(params, hyper));
            params.mu + params.base.score(ui, ii) + y * s
        }
        Variant::SimLatent => {
            fill_latent_neighbors(params, hyper, hood, u, i, scratch);
            let b = &params.base;
            params.mu + (b.user_bias[ui] + b.item_bias[ii] + dot(b.user_factors.row(ui), &scratch.qz))
        }
    }
}
