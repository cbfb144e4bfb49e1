use std::collections::HashMap;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Hyperparams, Variant};
use crate::{Error, Result};

const INIT_SPREAD: f64 = 0.005;
/// ChaCha stream reserved for parameter initialisation; epochs use 0, 1, ...
const INIT_STREAM: u64 = u64::MAX;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Format(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let dist = Uniform::new_inclusive(-INIT_SPREAD, INIT_SPREAD);
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Biases and latent factors of one `b_u + b_i + q_i . p_u` block.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorBlock {
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// Rows are `p_u`.
    pub user_factors: Matrix,
    /// Rows are `q_i`.
    pub item_factors: Matrix,
}

impl FactorBlock {
    fn init(n_users: usize, n_items: usize, k: usize, rng: &mut ChaCha8Rng) -> Self {
        let user_factors = Matrix::random(n_users, k, rng);
        let item_factors = Matrix::random(n_items, k, rng);
        FactorBlock {
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            user_factors,
            item_factors,
        }
    }

    /// `b_u + b_i + q_i . p_u`.
    pub fn score(&self, u: usize, i: usize) -> f64 {
        self.user_bias[u] + self.item_bias[i] + dot(self.user_factors.row(u), self.item_factors.row(i))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All learned parameters of one model. Optional blocks exist only for the
/// variants that use them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub base: FactorBlock,
    /// Block fitted to artificial ratings (dual-parameter variant).
    pub shadow: Option<FactorBlock>,
    /// `y_i` (item-assist variant).
    pub item_assist: Option<Vec<f64>>,
    /// `y_ui`, stored for pairs seen in training (user-item-assist variant).
    pub pair_assist: Option<HashMap<(u32, u32), f64>>,
    /// `y_j` rows (similarity-latent variant).
    pub neighbor_factors: Option<Matrix>,
}

impl ModelParams {
    pub fn n_users(&self) -> usize {
        self.base.user_bias.len()
    }

    pub fn n_items(&self) -> usize {
        self.base.item_bias.len()
    }

    pub fn factors(&self) -> usize {
        self.base.user_factors.cols()
    }

    pub fn pair_assist_value(&self, u: u32, i: u32) -> f64 {
        self.pair_assist
            .as_ref()
            .and_then(|m| m.get(&(u, i)).copied())
            .unwrap_or(0.0)
    }

    /// Name of the first block holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        let bad = |v: &[f64]| v.iter().any(|x| !x.is_finite());
        if !self.mu.is_finite() {
            return Some("mu");
        }
        for (name, block) in [("base", Some(&self.base)), ("shadow", self.shadow.as_ref())] {
            let Some(b) = block else { continue };
            if bad(&b.user_bias) || bad(&b.item_bias) {
                return Some(if name == "base" { "biases" } else { "shadow biases" });
            }
            if bad(b.user_factors.as_slice()) || bad(b.item_factors.as_slice()) {
                return Some(if name == "base" { "latent factors" } else { "shadow latent factors" });
            }
        }
        if self.item_assist.as_deref().is_some_and(bad) {
            return Some("y_i");
        }
        if let Some(m) = &self.pair_assist {
            if m.values().any(|x| !x.is_finite()) {
                return Some("y_ui");
            }
        }
        if self.neighbor_factors.as_ref().is_some_and(|m| bad(m.as_slice())) {
            return Some("y_j");
        }
        None
    }
}

/// Fresh parameters: `mu` from `ratings`, zero biases and assistance
/// scalars, latent entries uniform in [-0.005, 0.005].
///
/// Draw order is fixed (P, Q, shadow P, shadow Q, Y) so the blocks shared
/// with the baseline are bit-identical for a given seed.
pub fn init_model(
    hyper: &Hyperparams,
    variant: Variant,
    n_users: usize,
    n_items: usize,
    ratings: &[f64],
) -> Result<ModelParams> {
    if ratings.is_empty() {
        return Err(Error::Argument("cannot initialise from an empty training set".into()));
    }
    if n_users == 0 || n_items == 0 || hyper.factors == 0 {
        return Err(Error::Argument(format!(
            "model dimensions must be positive (users={n_users}, items={n_items}, factors={})",
            hyper.factors
        )));
    }
    let mu = ratings.iter().sum::<f64>() / ratings.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(INIT_STREAM);
    let k = hyper.factors;
    let base = FactorBlock::init(n_users, n_items, k, &mut rng);
    let shadow = (variant == Variant::DualParams).then(|| FactorBlock::init(n_users, n_items, k, &mut rng));
    let neighbor_factors = (variant == Variant::SimLatent).then(|| Matrix::random(n_items, k, &mut rng));
    Ok(ModelParams {
        mu,
        base,
        shadow,
        item_assist: (variant == Variant::ItemAssist).then(|| vec![0.0; n_items]),
        pair_assist: (variant == Variant::UserItemAssist).then(HashMap::new),
        neighbor_factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(k: usize) -> Hyperparams {
        Hyperparams {
            factors: k,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn mean_and_zero_biases() {
        let p = init_model(&hyper(3), Variant::Baseline, 2, 2, &[5.0, 3.0]).unwrap();
        assert_eq!(p.mu, 4.0);
        assert!(p.base.user_bias.iter().chain(&p.base.item_bias).all(|&b| b == 0.0));
        assert!(p
            .base
            .user_factors
            .as_slice()
            .iter()
            .all(|x| x.abs() <= INIT_SPREAD && *x != 0.0));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = init_model(&hyper(4), Variant::SimLatent, 5, 6, &[3.0]).unwrap();
        let b = init_model(&hyper(4), Variant::SimLatent, 5, 6, &[3.0]).unwrap();
        assert_eq!(a, b);
        let c = init_model(&Hyperparams { seed: 2, ..hyper(4) }, Variant::SimLatent, 5, 6, &[3.0]).unwrap();
        assert_ne!(a.base.user_factors, c.base.user_factors);
    }

    #[test]
    fn blocks_follow_variant() {
        let f = init_model(&hyper(2), Variant::SimLatent, 4, 3, &[1.0]).unwrap();
        let y = f.neighbor_factors.as_ref().unwrap();
        assert_eq!((y.rows(), y.cols()), (3, 2));
        assert!(f.shadow.is_none() && f.item_assist.is_none() && f.pair_assist.is_none());

        let b = init_model(&hyper(2), Variant::DualParams, 4, 3, &[1.0]).unwrap();
        assert!(b.shadow.is_some() && b.neighbor_factors.is_none());
        let d = init_model(&hyper(2), Variant::ItemAssist, 4, 3, &[1.0]).unwrap();
        assert_eq!(d.item_assist.as_deref(), Some(&[0.0, 0.0, 0.0][..]));
        let e = init_model(&hyper(2), Variant::UserItemAssist, 4, 3, &[1.0]).unwrap();
        assert!(e.pair_assist.as_ref().unwrap().is_empty());
    }

    #[test]
    fn shared_blocks_match_baseline() {
        let base = init_model(&hyper(3), Variant::Baseline, 4, 5, &[2.0]).unwrap();
        for v in Variant::ALL {
            let p = init_model(&hyper(3), v, 4, 5, &[2.0]).unwrap();
            assert_eq!(p.base, base.base, "{v}");
        }
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(matches!(
            init_model(&hyper(2), Variant::Baseline, 1, 1, &[]),
            Err(Error::Argument(_))
        ));
    }
}
