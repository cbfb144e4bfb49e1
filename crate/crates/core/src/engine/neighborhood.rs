use crate::linker::SimilarityMatrix;
use crate::ratings::RatingsDataset;
use crate::{Error, Result};

/// Above this many items the dense similarity table is not built.
const DENSE_LIMIT: usize = 4096;

/// One member of `K(u, i)`: an item the user rated that shares categories
/// with the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborTerm {
    pub item: u32,
    pub sim: f64,
    pub rating: f64,
}

/// The user's training ratings joined with item similarity, used by the
/// assistance and similarity-latent variants.
#[derive(Clone, Debug)]
pub struct Neighborhood<'a> {
    train: &'a RatingsDataset,
    sim: Option<&'a SimilarityMatrix>,
    dense: Option<Vec<u32>>,
}

impl<'a> Neighborhood<'a> {
    pub fn new(train: &'a RatingsDataset, sim: Option<&'a SimilarityMatrix>) -> Result<Self> {
        let n = train.n_items();
        if let Some(s) = sim {
            if s.n_items() != n {
                return Err(Error::Argument(format!(
                    "similarity matrix covers {} items but the ratings have {n}",
                    s.n_items()
                )));
            }
        }
        let dense = sim.filter(|_| n <= DENSE_LIMIT).map(|s| {
            let mut table = vec![0u32; n * n];
            for (i, j, c) in s.pairs() {
                table[i as usize * n + j as usize] = c;
                table[j as usize * n + i as usize] = c;
            }
            table
        });
        Ok(Neighborhood { train, sim, dense })
    }

    pub fn train(&self) -> &'a RatingsDataset {
        self.train
    }

    pub fn similarity(&self) -> Option<&'a SimilarityMatrix> {
        self.sim
    }

    fn lookup(&self, i: u32, j: u32) -> u32 {
        match (&self.dense, self.sim) {
            (Some(t), _) => t[i as usize * self.train.n_items() + j as usize],
            (None, Some(s)) => s.get(i, j),
            (None, None) => 0,
        }
    }

    /// Fills `out` with `K(u, i)` and returns the total similarity.
    pub fn terms(&self, u: u32, i: u32, out: &mut Vec<NeighborTerm>) -> f64 {
        out.clear();
        if self.sim.is_none() {
            return 0.0;
        }
        let mut total = 0.0;
        for r in self.train.user_ratings(u) {
            if r.item == i {
                continue;
            }
            let s = self.lookup(i, r.item);
            if s > 0 {
                let sim = f64::from(s);
                total += sim;
                out.push(NeighborTerm {
                    item: r.item,
                    sim,
                    rating: r.value,
                });
            }
        }
        total
    }

    /// `s(u, i)`: similarity-weighted mean of `r_uj - offset` over `K(u, i)`,
    /// zero when `K(u, i)` is empty.
    pub fn assist(&self, u: u32, i: u32, offset: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        if self.sim.is_some() {
            for r in self.train.user_ratings(u) {
                if r.item == i {
                    continue;
                }
                let s = self.lookup(i, r.item);
                if s > 0 {
                    num += f64::from(s) * (r.value - offset);
                    den += f64::from(s);
                }
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}
