use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Scratch, TrainedModel};
use super::neighborhood::Neighborhood;
use super::params::{init_model, ModelParams};
use super::sgd::step;
use super::{Hyperparams, Variant};
use crate::augment::AugmentedDataset;
use crate::linker::SimilarityMatrix;
use crate::ratings::RatingsDataset;
use crate::{Error, Result};

/// Seed offset for the artificial-ratings component of the mixture variant.
const MIXTURE_PARTNER_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// One element of a training stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub user: u32,
    pub item: u32,
    pub value: f64,
    pub artificial: bool,
}

fn true_samples(train: &RatingsDataset) -> impl Iterator<Item = Sample> + '_ {
    train.records().iter().map(|r| Sample {
        user: r.user,
        item: r.item,
        value: r.value,
        artificial: false,
    })
}

fn artificial_samples(aug: &AugmentedDataset) -> impl Iterator<Item = Sample> + '_ {
    aug.artificial().iter().map(|r| Sample {
        user: r.user,
        item: r.item,
        value: r.value,
        artificial: true,
    })
}

/// SGD state for one parameter set over one stream.
struct Fitter<'s> {
    variant: Variant,
    params: ModelParams,
    stream: &'s [Sample],
    order: Vec<u32>,
    seed: u64,
    /// `s(u, i)` per stream position, for the assistance variants.
    assist: Option<Vec<f64>>,
}

impl<'s> Fitter<'s> {
    fn new(
        variant: Variant,
        stream: &'s [Sample],
        hood: &Neighborhood<'_>,
        hyper: &Hyperparams,
        seed: u64,
    ) -> Result<Self> {
        let mut mu_from: Vec<f64> = stream
            .iter()
            .filter(|s| variant != Variant::DualParams || !s.artificial)
            .map(|s| s.value)
            .collect();
        if mu_from.is_empty() {
            mu_from.extend(stream.iter().map(|s| s.value));
        }
        let train = hood.train();
        let params = init_model(
            &Hyperparams { seed, ..*hyper },
            variant,
            train.n_users(),
            train.n_items(),
            &mu_from,
        )?;
        let assist = matches!(variant, Variant::ItemAssist | Variant::UserItemAssist).then(|| {
            let off = super::model::neighbor_offset(&params, hyper);
            stream.iter().map(|s| hood.assist(s.user, s.item, off)).collect()
        });
        Ok(Fitter {
            variant,
            params,
            stream,
            order: Vec::with_capacity(stream.len()),
            seed,
            assist,
        })
    }

    fn epoch(
        &mut self,
        epoch: usize,
        hood: &Neighborhood<'_>,
        hyper: &Hyperparams,
        scratch: &mut Scratch,
    ) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch as u64);
        self.order.clear();
        self.order.extend(0..self.stream.len() as u32);
        self.order.shuffle(&mut rng);
        for &k in &self.order {
            let s = self.stream[k as usize];
            let cached = self.assist.as_ref().map(|a| a[k as usize]);
            step(
                &mut self.params,
                self.variant,
                hyper,
                hood,
                s.user,
                s.item,
                s.value,
                s.artificial,
                cached,
                scratch,
            )?;
        }
        Ok(())
    }
}

fn training_rmse(model: &TrainedModel, hood: &Neighborhood<'_>, scratch: &mut Scratch) -> f64 {
    let train = hood.train();
    if train.is_empty() {
        return 0.0;
    }
    let sse: f64 = train
        .records()
        .iter()
        .map(|r| {
            let e = r.value - model.score_with(r.user, r.item, hood, scratch);
            e * e
        })
        .sum();
    (sse / train.len() as f64).sqrt()
}

/// Trains `variant` on an explicit stream. `hood` supplies the true training
/// ratings (used for neighbour terms and the loss trace) and the similarity
/// matrix. The mixture variant is not a single stream and is rejected here.
pub fn train_on_stream(
    variant: Variant,
    stream: &[Sample],
    hood: &Neighborhood<'_>,
    hyper: &Hyperparams,
) -> Result<TrainedModel> {
    if variant == Variant::Mixture {
        return Err(Error::Argument(
            "the mixture variant trains two streams; use `train`".into(),
        ));
    }
    hyper.validate()?;
    let mut fitter = Fitter::new(variant, stream, hood, hyper, hyper.seed)?;
    let mut model = TrainedModel {
        variant,
        hyper: *hyper,
        params: fitter.params.clone(),
        mixture_partner: None,
        sim_ref: sim_ref(variant, hood.similarity()),
        train_ref: hood.train().fingerprint(),
        loss_trace: Vec::with_capacity(hyper.epochs),
    };
    let mut scratch = Scratch::default();
    for epoch in 0..hyper.epochs {
        fitter.epoch(epoch, hood, hyper, &mut scratch)?;
        model.params.clone_from(&fitter.params);
        let loss = training_rmse(&model, hood, &mut scratch);
        model.loss_trace.push(loss);
    }
    model.params = fitter.params;
    Ok(model)
}

fn sim_ref(variant: Variant, sim: Option<&SimilarityMatrix>) -> u64 {
    match sim {
        Some(s) if variant.uses_similarity() => s.fingerprint(),
        _ => 0,
    }
}

/// Trains `variant` on `train`, with `aug` and/or `sim` as the variant needs.
///
/// Stream per epoch: true ratings for the baseline and similarity variants;
/// the union of true and artificial ratings for the step-size and
/// dual-parameter variants; two separate streams for the mixture.
pub fn train(
    variant: Variant,
    train: &RatingsDataset,
    aug: Option<&AugmentedDataset>,
    sim: Option<&SimilarityMatrix>,
    hyper: &Hyperparams,
) -> Result<TrainedModel> {
    if variant.uses_similarity() && sim.is_none() {
        return Err(Error::Argument(format!(
            "variant {variant} ({}) requires a similarity matrix",
            variant.description()
        )));
    }
    let sim = if variant.uses_similarity() { sim } else { None };
    let hood = Neighborhood::new(train, sim)?;
    train_with_neighborhood(variant, &hood, aug, hyper)
}

/// Like [`train`], reusing a prepared neighbourhood (and its dense
/// similarity table) across several models on the same split.
pub fn train_with_neighborhood(
    variant: Variant,
    hood: &Neighborhood<'_>,
    aug: Option<&AugmentedDataset>,
    hyper: &Hyperparams,
) -> Result<TrainedModel> {
    hyper.validate()?;
    let train = hood.train();
    if variant.uses_similarity() && hood.similarity().is_none() {
        return Err(Error::Argument(format!(
            "variant {variant} ({}) requires a similarity matrix",
            variant.description()
        )));
    }
    let aug = if variant.uses_artificial() {
        let aug = aug.ok_or_else(|| {
            Error::Argument(format!(
                "variant {variant} ({}) requires artificial ratings",
                variant.description()
            ))
        })?;
        if aug.true_ratings.len() != train.len()
            || aug.true_ratings.fingerprint() != train.fingerprint()
        {
            return Err(Error::Argument(
                "artificial ratings were generated from a different training set".into(),
            ));
        }
        Some(aug)
    } else {
        None
    };

    match (variant, aug) {
        (Variant::Mixture, Some(aug)) => train_mixture(train, aug, hood, hyper),
        (Variant::StepSize | Variant::DualParams, Some(aug)) => {
            let stream: Vec<Sample> = true_samples(train).chain(artificial_samples(aug)).collect();
            train_on_stream(variant, &stream, hood, hyper)
        }
        _ => {
            let stream: Vec<Sample> = true_samples(train).collect();
            train_on_stream(variant, &stream, hood, hyper)
        }
    }
}

fn train_mixture(
    train: &RatingsDataset,
    aug: &AugmentedDataset,
    hood: &Neighborhood<'_>,
    hyper: &Hyperparams,
) -> Result<TrainedModel> {
    if aug.artificial().is_empty() {
        return Err(Error::Argument(
            "mixture variant needs a non-empty artificial-ratings stream".into(),
        ));
    }
    let true_stream: Vec<Sample> = true_samples(train).collect();
    let art_stream: Vec<Sample> = artificial_samples(aug).collect();
    let mut on_true = Fitter::new(Variant::Mixture, &true_stream, hood, hyper, hyper.seed)?;
    let mut on_art = Fitter::new(
        Variant::Mixture,
        &art_stream,
        hood,
        hyper,
        hyper.seed ^ MIXTURE_PARTNER_SEED,
    )?;
    let mut model = TrainedModel {
        variant: Variant::Mixture,
        hyper: *hyper,
        params: on_true.params.clone(),
        mixture_partner: Some(on_art.params.clone()),
        sim_ref: 0,
        train_ref: train.fingerprint(),
        loss_trace: Vec::with_capacity(hyper.epochs),
    };
    let mut scratch = Scratch::default();
    for epoch in 0..hyper.epochs {
        on_true.epoch(epoch, hood, hyper, &mut scratch)?;
        on_art.epoch(epoch, hood, hyper, &mut scratch)?;
        model.params.clone_from(&on_true.params);
        model.mixture_partner = Some(on_art.params.clone());
        let loss = training_rmse(&model, hood, &mut scratch);
        model.loss_trace.push(loss);
    }
    model.params = on_true.params;
    model.mixture_partner = Some(on_art.params);
    Ok(model)
}
