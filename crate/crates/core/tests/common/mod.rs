#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wikisvd::{
    init_model, sgd_step, Hyperparams, IdMap, ModelParams, Neighborhood, Rating, RatingsDataset,
    SimilarityMatrix, Variant,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn id_maps(n_users: usize, n_items: usize) -> (Arc<IdMap>, Arc<IdMap>) {
    (
        Arc::new(IdMap::from_external(1..=n_users as u32)),
        Arc::new(IdMap::from_external(1..=n_items as u32)),
    )
}

/// Integer ratings over an `n_users x n_items` grid; every user gets at
/// least one rating.
pub fn random_dataset(rng: &mut impl Rng, n_users: usize, n_items: usize, density: f64) -> RatingsDataset {
    let (users, items) = id_maps(n_users, n_items);
    let mut records = Vec::new();
    for u in 0..n_users as u32 {
        let forced = rng.gen_range(0..n_items as u32);
        for i in 0..n_items as u32 {
            if i == forced || rng.gen_bool(density) {
                records.push(Rating {
                    user: u,
                    item: i,
                    value: f64::from(rng.gen_range(1..=5u8)),
                });
            }
        }
    }
    RatingsDataset::new(records, users, items).unwrap()
}

pub fn random_similarity(rng: &mut impl Rng, n_items: usize, density: f64) -> SimilarityMatrix {
    let mut pairs = Vec::new();
    for i in 0..n_items as u32 {
        for j in i + 1..n_items as u32 {
            if rng.gen_bool(density) {
                pairs.push((i, j, rng.gen_range(1..=4)));
            }
        }
    }
    SimilarityMatrix::from_pairs(n_items, pairs).unwrap()
}

/// Dense `n x n` similarity table, diagonal zero.
pub fn dense_similarity(sim: &SimilarityMatrix) -> Vec<Vec<u32>> {
    let n = sim.n_items();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0 } else { sim.get(i as u32, j as u32) })
                .collect()
        })
        .collect()
}

/// Shared-category counts by direct set intersection over every pair.
pub fn brute_similarity(cats: &[Option<BTreeSet<String>>]) -> Vec<Vec<u32>> {
    let n = cats.len();
    let mut out = vec![vec![0u32; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if let (Some(a), Some(b)) = (&cats[i], &cats[j]) {
                out[i][j] = a.intersection(b).count() as u32;
            }
        }
    }
    out
}

/// Rating grid `[user][item]`, `None` where unrated.
pub fn rating_grid(train: &RatingsDataset) -> Vec<Vec<Option<f64>>> {
    let mut g = vec![vec![None; train.n_items()]; train.n_users()];
    for r in train.records() {
        g[r.user as usize][r.item as usize] = Some(r.value);
    }
    g
}

/// Artificial rating for one cell straight from the definition.
pub fn brute_artificial_cell(grid: &[Vec<Option<f64>>], sim: &[Vec<u32>], u: usize, i: usize) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, r) in grid[u].iter().enumerate() {
        if let (Some(r), true) = (r, j != i && sim[i][j] > 0) {
            num += r * f64::from(sim[i][j]);
            den += f64::from(sim[i][j]);
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Every unrated cell with a defined artificial rating, sorted by (user, item).
pub fn brute_artificial(grid: &[Vec<Option<f64>>], sim: &[Vec<u32>]) -> Vec<(u32, u32, f64)> {
    let mut out = Vec::new();
    for u in 0..grid.len() {
        for i in 0..grid[u].len() {
            if grid[u][i].is_none() {
                if let Some(v) = brute_artificial_cell(grid, sim, u, i) {
                    out.push((u as u32, i as u32, v));
                }
            }
        }
    }
    out
}

/// `(weight, rating)` pairs of K(u, i).
fn neighbor_weights(grid: &[Vec<Option<f64>>], sim: &[Vec<u32>], u: usize, i: usize) -> Vec<(usize, f64, f64)> {
    grid[u]
        .iter()
        .enumerate()
        .filter_map(|(j, r)| match r {
            Some(r) if j != i && sim[i][j] > 0 => Some((j, f64::from(sim[i][j]), *r)),
            _ => None,
        })
        .collect()
}

/// Flat view of the parameters one SGD step on (u, i) may touch.
#[derive(Clone, Debug)]
pub struct Touched {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

/// Which blocks a step trains, as the loss sees them.
pub fn touched(params: &ModelParams, variant: Variant, u: usize, i: usize, artificial: bool, neighbors: &[usize]) -> Touched {
    let mut t = Touched { names: Vec::new(), values: Vec::new() };
    let block = match (variant, artificial) {
        (Variant::DualParams, true) => params.shadow.as_ref().unwrap(),
        _ => &params.base,
    };
    let tag = if variant == Variant::DualParams && artificial { "shadow" } else { "base" };
    t.names.push(format!("{tag}.b_u"));
    t.values.push(block.user_bias[u]);
    t.names.push(format!("{tag}.b_i"));
    t.values.push(block.item_bias[i]);
    for (f, v) in block.user_factors.row(u).iter().enumerate() {
        t.names.push(format!("{tag}.p[{f}]"));
        t.values.push(*v);
    }
    for (f, v) in block.item_factors.row(i).iter().enumerate() {
        t.names.push(format!("{tag}.q[{f}]"));
        t.values.push(*v);
    }
    match variant {
        Variant::ItemAssist => {
            t.names.push("y_i".into());
            t.values.push(params.item_assist.as_ref().unwrap()[i]);
        }
        Variant::UserItemAssist => {
            t.names.push("y_ui".into());
            t.values.push(params.pair_assist_value(u as u32, i as u32));
        }
        Variant::SimLatent => {
            let y = params.neighbor_factors.as_ref().unwrap();
            for &j in neighbors {
                for (f, v) in y.row(j).iter().enumerate() {
                    t.names.push(format!("y_j[{j}][{f}]"));
                    t.values.push(*v);
                }
            }
        }
        _ => {}
    }
    t
}

fn write_back(params: &mut ModelParams, variant: Variant, u: usize, i: usize, artificial: bool, neighbors: &[usize], values: &[f64]) {
    let k = params.factors();
    let mut it = values.iter().copied();
    {
        let block = match (variant, artificial) {
            (Variant::DualParams, true) => params.shadow.as_mut().unwrap(),
            _ => &mut params.base,
        };
        block.user_bias[u] = it.next().unwrap();
        block.item_bias[i] = it.next().unwrap();
        for f in 0..k {
            block.user_factors.row_mut(u)[f] = it.next().unwrap();
        }
        for f in 0..k {
            block.item_factors.row_mut(i)[f] = it.next().unwrap();
        }
    }
    match variant {
        Variant::ItemAssist => params.item_assist.as_mut().unwrap()[i] = it.next().unwrap(),
        Variant::UserItemAssist => {
            params.pair_assist.as_mut().unwrap().insert((u as u32, i as u32), it.next().unwrap());
        }
        Variant::SimLatent => {
            let y = params.neighbor_factors.as_mut().unwrap();
            for &j in neighbors {
                for f in 0..k {
                    y.row_mut(j)[f] = it.next().unwrap();
                }
            }
        }
        _ => {}
    }
}

/// Model prediction written out from the model equations, independent of the
/// library's scoring code.
pub fn oracle_score(
    params: &ModelParams,
    variant: Variant,
    grid: &[Vec<Option<f64>>],
    sim: &[Vec<u32>],
    center: bool,
    u: usize,
    i: usize,
) -> f64 {
    let block_score = |b: &wikisvd::engine::FactorBlock| {
        let dot: f64 = b.user_factors.row(u).iter().zip(b.item_factors.row(i)).map(|(p, q)| p * q).sum();
        b.user_bias[u] + b.item_bias[i] + dot
    };
    let off = if center { params.mu } else { 0.0 };
    let k_set = neighbor_weights(grid, sim, u, i);
    let total: f64 = k_set.iter().map(|(_, w, _)| w).sum();
    let s = if total > 0.0 {
        k_set.iter().map(|(_, w, r)| w * (r - off)).sum::<f64>() / total
    } else {
        0.0
    };
    match variant {
        Variant::Baseline | Variant::StepSize | Variant::Mixture => params.mu + block_score(&params.base),
        Variant::DualParams => params.mu + block_score(&params.base) + block_score(params.shadow.as_ref().unwrap()),
        Variant::ItemAssist => params.mu + block_score(&params.base) + params.item_assist.as_ref().unwrap()[i] * s,
        Variant::UserItemAssist => {
            params.mu + block_score(&params.base) + params.pair_assist_value(u as u32, i as u32) * s
        }
        Variant::SimLatent => {
            let b = &params.base;
            let y = params.neighbor_factors.as_ref().unwrap();
            let mut qz: Vec<f64> = b.item_factors.row(i).to_vec();
            if total > 0.0 {
                for (j, w, r) in &k_set {
                    for (z, yf) in qz.iter_mut().zip(y.row(*j)) {
                        *z += w * (r - off) / total * yf;
                    }
                }
            }
            let dot: f64 = b.user_factors.row(u).iter().zip(&qz).map(|(p, q)| p * q).sum();
            params.mu + b.user_bias[u] + b.item_bias[i] + dot
        }
    }
}

/// Outcome of one finite-difference comparison.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub variant: Variant,
    pub artificial: bool,
    pub max_rel_error: f64,
    pub worst: String,
    pub blocks: BTreeSet<String>,
}

/// Compares one `sgd_step` against central differences of
/// `0.5 * (r - r_hat)^2 + 0.5 * lambda * |touched|^2`.
pub fn gradient_check(seed: u64, variant: Variant, artificial: bool) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = rng.gen_range(2..=6);
    let n_items = rng.gen_range(3..=8);
    let k = rng.gen_range(1..=5);
    let train = random_dataset(&mut rng, n_users, n_items, 0.6);
    let sim = random_similarity(&mut rng, n_items, 0.7);
    let center = rng.gen_bool(0.3) && matches!(variant, Variant::ItemAssist | Variant::UserItemAssist | Variant::SimLatent);
    let hyper = Hyperparams {
        factors: k,
        gamma: rng.gen_range(0.001..0.05),
        gamma_art: 0.0,
        lambda: rng.gen_range(0.0..0.2),
        seed: rng.gen(),
        center_neighbors: center,
        ..Hyperparams::default()
    };
    let hyper = Hyperparams { gamma_art: hyper.gamma * rng.gen_range(0.01..1.0), ..hyper };
    let values: Vec<f64> = train.records().iter().map(|r| r.value).collect();
    let mut params = init_model(&hyper, variant, n_users, n_items, &values).unwrap();
    // Move every block away from its initial value so all gradient terms are live.
    let mut jitter = |v: &mut f64, s: f64| *v += rng.gen_range(-s..s);
    for b in std::iter::once(&mut params.base).chain(params.shadow.as_mut()) {
        b.user_bias.iter_mut().for_each(|v| jitter(v, 0.5));
        b.item_bias.iter_mut().for_each(|v| jitter(v, 0.5));
        for u in 0..n_users {
            b.user_factors.row_mut(u).iter_mut().for_each(|v| jitter(v, 0.5));
        }
        for i in 0..n_items {
            b.item_factors.row_mut(i).iter_mut().for_each(|v| jitter(v, 0.5));
        }
    }
    if let Some(y) = params.item_assist.as_mut() {
        y.iter_mut().for_each(|v| jitter(v, 0.5));
    }
    if let Some(y) = params.neighbor_factors.as_mut() {
        for j in 0..n_items {
            y.row_mut(j).iter_mut().for_each(|v| jitter(v, 0.5));
        }
    }

    let u = rng.gen_range(0..n_users);
    let i = rng.gen_range(0..n_items);
    if let Some(m) = params.pair_assist.as_mut() {
        m.insert((u as u32, i as u32), rng.gen_range(-0.5..0.5));
    }
    let target = rng.gen_range(1.0..5.0);
    let grid = rating_grid(&train);
    let dense = dense_similarity(&sim);
    let neighbors: Vec<usize> = neighbor_weights(&grid, &dense, u, i).iter().map(|(j, _, _)| *j).collect();

    let before = touched(&params, variant, u, i, artificial, &neighbors);
    let loss = |vals: &[f64]| {
        let mut p = params.clone();
        write_back(&mut p, variant, u, i, artificial, &neighbors, vals);
        let e = target - oracle_score(&p, variant, &grid, &dense, center, u, i);
        0.5 * e * e + 0.5 * hyper.lambda * vals.iter().map(|v| v * v).sum::<f64>()
    };

    let hood = Neighborhood::new(&train, Some(&sim)).unwrap();
    let mut stepped = params.clone();
    sgd_step(&mut stepped, variant, &hyper, &hood, u as u32, i as u32, target, artificial).unwrap();
    let after = touched(&stepped, variant, u, i, artificial, &neighbors);
    let lr = if artificial && matches!(variant, Variant::StepSize | Variant::DualParams) {
        hyper.gamma_art
    } else {
        hyper.gamma
    };

    let h = 1e-5;
    let mut max_rel: f64 = 0.0;
    let mut worst = String::new();
    let mut blocks = BTreeSet::new();
    for k in 0..before.values.len() {
        let mut plus = before.values.clone();
        let mut minus = before.values.clone();
        plus[k] += h;
        minus[k] -= h;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let analytic = (before.values[k] - after.values[k]) / lr;
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-3);
        if rel > max_rel {
            max_rel = rel;
            worst = format!("{} numeric {numeric} step {analytic}", before.names[k]);
        }
        let name = &before.names[k];
        blocks.insert(name.split('[').next().unwrap_or(name).to_string());
    }
    // Nothing outside the touched set may move.
    let untouched_equal = {
        let mut a = params.clone();
        let mut b = stepped.clone();
        let zeros = vec![0.0; before.values.len()];
        write_back(&mut a, variant, u, i, artificial, &neighbors, &zeros);
        write_back(&mut b, variant, u, i, artificial, &neighbors, &zeros);
        a == b
    };
    if !untouched_equal {
        max_rel = f64::INFINITY;
        worst = "a parameter outside the touched set changed".into();
    }
    GradCheck {
        variant,
        artificial,
        max_rel_error: max_rel,
        worst,
        blocks,
    }
}

/// All variant/sample-kind combinations a step can see.
pub fn step_cases() -> Vec<(Variant, bool)> {
    let mut out = Vec::new();
    for v in Variant::ALL {
        out.push((v, false));
        if matches!(v, Variant::StepSize | Variant::DualParams) {
            out.push((v, true));
        }
    }
    out
}

pub fn collect_predictions(
    model: &wikisvd::TrainedModel,
    hood: &Neighborhood<'_>,
    n_users: usize,
    n_items: usize,
) -> HashMap<(u32, u32), u64> {
    let mut out = HashMap::new();
    for u in 0..n_users as u32 {
        for i in 0..n_items as u32 {
            out.insert((u, i), wikisvd::predict(model, u, i, hood).unwrap().to_bits());
        }
    }
    out
}
