//! In-browser playground for the recommenders: title matching, artificial
//! ratings on a small grid, and training curves on the bundled toy data.
//!
//! The functions here are plain Rust so they can be tested natively; the
//! `wasm32` build wraps them with `wasm-bindgen`.

use std::fmt::Write as _;
use std::path::Path;

use wikisvd::ratings::{parse_ratings, parse_titles};
use wikisvd::{
    artificial_rating, augment_dataset, build_item_category_map, build_similarity_matrix,
    generate_title_variants, match_item_to_page, predict, rmse, split_per_user, train,
    Hyperparams, IdMap, Neighborhood, Rating, RatingsDataset, SimilarityMatrix, TitleIndex, Variant,
};

const TOY_RATINGS: &str = include_str!("../../core/fixtures/u.data");
const TOY_TITLES: &str = include_str!("../../core/fixtures/u.item");
const TOY_INDEX: &str = include_str!("../../core/fixtures/wiki_index.tsv");

/// The bundled page index, for pre-filling the page.
pub fn toy_index() -> &'static str {
    TOY_INDEX
}

fn keyword_list(keywords: &str) -> Vec<String> {
    keywords
        .split([',', ' '])
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(String::from)
        .collect()
}

/// One block per title: the candidate page titles tried, then the chosen
/// page or `no exact match`.
pub fn describe_matches(titles: &str, index_tsv: &str, keywords: &str) -> Result<String, String> {
    let index = TitleIndex::parse(index_tsv, Path::new("index")).map_err(|e| e.to_string())?;
    let keywords = keyword_list(keywords);
    let mut out = String::new();
    for title in titles.lines().map(str::trim).filter(|t| !t.is_empty()) {
        let _ = writeln!(out, "{title}");
        let _ = writeln!(out, "  tried: {}", generate_title_variants(title).join(" | "));
        match match_item_to_page(title, &index, &keywords) {
            Some(m) => {
                let _ = writeln!(
                    out,
                    "  -> {} \"{}\" ({} keyword categories)",
                    m.page.page_id, m.page.title, m.score
                );
            }
            None => out.push_str("  -> no exact match\n"),
        }
    }
    Ok(out)
}

/// Parses a grid of `1`-`5` and `.` (missing), one user per line.
fn parse_grid(grid: &str) -> Result<(usize, usize, Vec<Rating>), String> {
    let rows: Vec<Vec<&str>> = grid
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|r| !r.is_empty())
        .collect();
    let width = rows.first().map_or(0, Vec::len);
    if width == 0 {
        return Err("the grid is empty".into());
    }
    let mut records = Vec::new();
    for (u, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(format!("row {} has {} cells, expected {width}", u + 1, row.len()));
        }
        for (i, cell) in row.iter().enumerate() {
            if matches!(*cell, "." | "-" | "_") {
                continue;
            }
            let value: u8 = cell
                .parse()
                .ok()
                .filter(|v| (1..=5).contains(v))
                .ok_or_else(|| format!("row {}, column {}: {cell:?} is not 1-5 or .", u + 1, i + 1))?;
            records.push(Rating { user: u as u32, item: i as u32, value: f64::from(value) });
        }
    }
    Ok((rows.len(), width, records))
}

/// Parses `i j count` lines with 1-based column numbers.
fn parse_pairs(pairs: &str, n_items: usize) -> Result<SimilarityMatrix, String> {
    let mut triples = Vec::new();
    for (n, line) in pairs.lines().enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let parsed = (f.len() == 3)
            .then(|| Some((f[0].parse::<u32>().ok()?, f[1].parse::<u32>().ok()?, f[2].parse::<u32>().ok()?)))
            .flatten()
            .filter(|(i, j, _)| *i >= 1 && *j >= 1);
        let (i, j, c) = parsed.ok_or_else(|| format!("similarity line {}: expected `i j count`", n + 1))?;
        triples.push((i - 1, j - 1, c));
    }
    SimilarityMatrix::from_pairs(n_items, triples).map_err(|e| e.to_string())
}

/// Fills the grid's missing cells with artificial ratings. Returns the grid
/// row-major; cells without any similar rated item stay NaN.
pub fn fill_grid(grid: &str, pairs: &str) -> Result<Vec<f64>, String> {
    let (n_users, n_items, records) = parse_grid(grid)?;
    let sim = parse_pairs(pairs, n_items)?;
    let users = IdMap::from_external(1..=n_users as u32);
    let items = IdMap::from_external(1..=n_items as u32);
    let train = RatingsDataset::new(records, users.into(), items.into()).map_err(|e| e.to_string())?;
    let mut out = vec![f64::NAN; n_users * n_items];
    for r in train.records() {
        out[r.user as usize * n_items + r.item as usize] = r.value;
    }
    for u in 0..n_users {
        for i in 0..n_items {
            let cell = &mut out[u * n_items + i];
            if cell.is_nan() {
                *cell = artificial_rating(u as u32, i as u32, &train, &sim).unwrap_or(f64::NAN);
            }
        }
    }
    Ok(out)
}

/// Settings for [`loss_curves`].
#[derive(Clone, Copy, Debug)]
pub struct CurveSettings {
    pub factors: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub gamma_art: f64,
    pub fraction: f64,
    pub seed: u64,
}

/// Trains each listed variant (`baseline`, `A`..`F`) on half of the toy
/// ratings. Per variant the result holds the training RMSE after every
/// epoch followed by the test RMSE.
pub fn loss_curves(variants: &str, s: CurveSettings) -> Result<Vec<f64>, String> {
    let err = |e: wikisvd::Error| e.to_string();
    let ratings = parse_ratings(TOY_RATINGS, Path::new("u.data")).map_err(err)?;
    let titles = parse_titles(TOY_TITLES, Path::new("u.item"));
    let index = TitleIndex::parse(TOY_INDEX, Path::new("wiki_index.tsv")).map_err(err)?;
    let map = build_item_category_map(&titles.titles, &index, &keyword_list("film movie"));
    let sim = build_similarity_matrix(&map, ratings.items());
    let split = split_per_user(&ratings, s.fraction, s.seed).map_err(err)?;
    let aug = augment_dataset(&split.train, &sim).map_err(err)?;
    let hood = Neighborhood::new(&split.train, Some(&sim)).map_err(err)?;
    let hyper = Hyperparams {
        factors: s.factors,
        epochs: s.epochs,
        gamma: s.gamma,
        gamma_art: s.gamma_art,
        seed: s.seed,
        ..Hyperparams::default()
    };
    let mut out = Vec::new();
    for tag in variants.split([',', ' ']).filter(|t| !t.is_empty()) {
        let variant: Variant = tag.parse().map_err(err)?;
        let model = train(variant, &split.train, Some(&aug), Some(&sim), &hyper).map_err(err)?;
        out.extend(&model.loss_trace);
        let pairs: Vec<(f64, f64)> = split
            .test
            .records()
            .iter()
            .map(|r| predict(&model, r.user, r.item, &hood).map(|p| (p, r.value)))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        out.push(rmse(&pairs).map_err(err)?);
    }
    Ok(out)
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn toy_index() -> String {
        super::toy_index().to_string()
    }

    #[wasm_bindgen]
    pub fn describe_matches(titles: &str, index_tsv: &str, keywords: &str) -> Result<String, JsError> {
        super::describe_matches(titles, index_tsv, keywords).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn fill_grid(grid: &str, pairs: &str) -> Result<Vec<f64>, JsError> {
        super::fill_grid(grid, pairs).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn loss_curves(
        variants: &str,
        factors: usize,
        epochs: usize,
        gamma: f64,
        gamma_art: f64,
        fraction: f64,
        seed: u32,
    ) -> Result<Vec<f64>, JsError> {
        let s = super::CurveSettings { factors, epochs, gamma, gamma_art, fraction, seed: u64::from(seed) };
        super::loss_curves(variants, s).map_err(|e| JsError::new(&e))
    }
}
