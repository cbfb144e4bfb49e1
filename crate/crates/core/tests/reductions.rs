mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wikisvd::engine::{train_on_stream, Sample};
use wikisvd::*;

fn hyper(seed: u64) -> Hyperparams {
    Hyperparams {
        factors: 3,
        gamma: 0.02,
        gamma_art: 0.02,
        lambda: 0.05,
        epochs: 8,
        seed,
        ..Hyperparams::default()
    }
}

#[test]
fn step_size_variant_with_equal_rates_is_baseline_on_union() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = random_dataset(&mut rng, 7, 9, 0.3);
        let sim = random_similarity(&mut rng, 9, 0.5);
        let aug = augment_dataset(&train, &sim).unwrap();
        let h = hyper(seed);
        let a = wikisvd::train(Variant::StepSize, &train, Some(&aug), None, &h).unwrap();

        let union_records: Vec<Rating> = train.records().iter().chain(aug.artificial()).copied().collect();
        let union = RatingsDataset::new_unchecked_scale(union_records, train.users().clone(), train.items().clone()).unwrap();
        let base = wikisvd::train(Variant::Baseline, &union, None, None, &h).unwrap();

        assert_eq!(a.params, base.params, "seed {seed}");
        let hood_a = Neighborhood::new(&train, None).unwrap();
        let hood_b = Neighborhood::new(&union, None).unwrap();
        assert_eq!(collect_predictions(&a, &hood_a, 7, 9), collect_predictions(&base, &hood_b, 7, 9));
    }
}

#[test]
fn similarity_variants_with_empty_matrix_are_baseline() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nu, ni) = (rng.gen_range(2..10), rng.gen_range(2..10));
        let train = random_dataset(&mut rng, nu, ni, 0.4);
        let empty = SimilarityMatrix::empty(ni);
        let h = Hyperparams { center_neighbors: seed % 2 == 1, ..hyper(seed) };
        let hood = Neighborhood::new(&train, Some(&empty)).unwrap();
        let baseline = wikisvd::train(Variant::Baseline, &train, None, None, &h).unwrap();
        let expected = collect_predictions(&baseline, &hood, nu, ni);
        for v in [Variant::ItemAssist, Variant::UserItemAssist, Variant::SimLatent] {
            let m = wikisvd::train(v, &train, None, Some(&empty), &h).unwrap();
            assert_eq!(m.params.base, baseline.params.base, "{v} seed {seed}");
            assert_eq!(m.loss_trace, baseline.loss_trace, "{v} seed {seed}");
            assert_eq!(collect_predictions(&m, &hood, nu, ni), expected, "{v} seed {seed}");
        }
    }
}

#[test]
fn dual_parameter_routing_is_isolated() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let train = random_dataset(&mut rng, 6, 8, 0.4);
    let sim = random_similarity(&mut rng, 8, 0.5);
    let aug = augment_dataset(&train, &sim).unwrap();
    let hood = Neighborhood::new(&train, None).unwrap();
    let h = hyper(3);

    let artificial_only: Vec<Sample> = aug
        .artificial()
        .iter()
        .map(|r| Sample { user: r.user, item: r.item, value: r.value, artificial: true })
        .collect();
    let true_only: Vec<Sample> = train
        .records()
        .iter()
        .map(|r| Sample { user: r.user, item: r.item, value: r.value, artificial: false })
        .collect();
    assert!(!artificial_only.is_empty());

    let init = |stream: &[Sample]| {
        let vals: Vec<f64> = stream.iter().filter(|s| !s.artificial).map(|s| s.value).collect();
        let vals = if vals.is_empty() { stream.iter().map(|s| s.value).collect() } else { vals };
        init_model(&h, Variant::DualParams, 6, 8, &vals).unwrap()
    };

    let m = train_on_stream(Variant::DualParams, &artificial_only, &hood, &h).unwrap();
    let start = init(&artificial_only);
    assert_eq!(m.params.base, start.base);
    assert_ne!(m.params.shadow, start.shadow);

    let m = train_on_stream(Variant::DualParams, &true_only, &hood, &h).unwrap();
    let start = init(&true_only);
    assert_eq!(m.params.shadow, start.shadow);
    assert_ne!(m.params.base, start.base);

    for artificial in [true, false] {
        let mut p = init(&true_only);
        let before = p.clone();
        sgd_step(&mut p, Variant::DualParams, &h, &hood, 1, 2, 4.5, artificial).unwrap();
        if artificial {
            assert_eq!(p.base, before.base);
            assert_ne!(p.shadow, before.shadow);
        } else {
            assert_eq!(p.shadow, before.shadow);
            assert_ne!(p.base, before.base);
        }
    }
}

#[test]
fn mixture_prediction_lies_between_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let train = random_dataset(&mut rng, 8, 10, 0.3);
    let sim = random_similarity(&mut rng, 10, 0.5);
    let aug = augment_dataset(&train, &sim).unwrap();
    let hood = Neighborhood::new(&train, None).unwrap();
    let h = Hyperparams { mixture_weight: 0.3, clamp: false, ..hyper(9) };
    let m = wikisvd::train(Variant::Mixture, &train, Some(&aug), None, &h).unwrap();
    let partner = m.mixture_partner.clone().unwrap();
    let as_single = |params: ModelParams| TrainedModel {
        variant: Variant::Baseline,
        params,
        mixture_partner: None,
        ..m.clone()
    };
    let own = as_single(m.params.clone());
    let other = as_single(partner);
    for u in 0..8 {
        for i in 0..10 {
            let s1 = predict(&own, u, i, &hood).unwrap();
            let s2 = predict(&other, u, i, &hood).unwrap();
            let s = predict(&m, u, i, &hood).unwrap();
            assert!(s >= s1.min(s2) - 1e-12 && s <= s1.max(s2) + 1e-12);
            assert!((s - (0.3 * s1 + 0.7 * s2)).abs() < 1e-12);
        }
    }
    for (w, expect_own) in [(1.0, true), (0.0, false)] {
        let mut mw = m.clone();
        mw.hyper.mixture_weight = w;
        let reference = if expect_own { &own } else { &other };
        assert_eq!(predict(&mw, 2, 3, &hood).unwrap(), predict(reference, 2, 3, &hood).unwrap());
    }
}

#[test]
fn training_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let train = random_dataset(&mut rng, 6, 7, 0.4);
    let sim = random_similarity(&mut rng, 7, 0.5);
    let aug = augment_dataset(&train, &sim).unwrap();
    for v in Variant::ALL {
        let h = Hyperparams { gamma_art: 0.002, ..hyper(21) };
        let a = wikisvd::train(v, &train, Some(&aug), Some(&sim), &h).unwrap();
        let b = wikisvd::train(v, &train, Some(&aug), Some(&sim), &h).unwrap();
        assert_eq!(a, b, "{v}");
    }
}
