//! Artificial ratings: a user's true ratings propagated to unrated items
//! through category similarity.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::linker::SimilarityMatrix;
use crate::ratings::{Rating, RatingsDataset};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    True,
    Artificial,
}

/// True training ratings plus the artificial ratings derived from them.
#[derive(Clone, Debug)]
pub struct AugmentedDataset {
    pub true_ratings: RatingsDataset,
    /// Sorted by (user, item); never overlaps `true_ratings`.
    artificial: Vec<Rating>,
}

impl AugmentedDataset {
    pub fn artificial(&self) -> &[Rating] {
        &self.artificial
    }

    pub fn artificial_value(&self, user: u32, item: u32) -> Option<f64> {
        self.artificial
            .binary_search_by_key(&(user, item), |r| (r.user, r.item))
            .ok()
            .map(|k| self.artificial[k].value)
    }

    pub fn provenance(&self, user: u32, item: u32) -> Option<Provenance> {
        if self.true_ratings.user_ratings(user).any(|r| r.item == item) {
            Some(Provenance::True)
        } else if self.artificial_value(user, item).is_some() {
            Some(Provenance::Artificial)
        } else {
            None
        }
    }

    /// Writes the cache file: a `#` header naming the split it came from,
    /// then `user \t item \t value` lines with external ids.
    pub fn write_cache(&self, path: impl AsRef<Path>, fraction: f64, seed: u64) -> Result<()> {
        let path = path.as_ref();
        let users = self.true_ratings.users();
        let items = self.true_ratings.items();
        let mut out = String::with_capacity(self.artificial.len() * 16);
        let _ = writeln!(
            out,
            "# seed={seed} fraction={fraction} train={:016x}",
            self.true_ratings.fingerprint()
        );
        for r in &self.artificial {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                users.to_external(r.user),
                items.to_external(r.item),
                r.value
            );
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a cache written for exactly this training set; a header naming
    /// another split is rejected as stale.
    pub fn read_cache(path: impl AsRef<Path>, train: &RatingsDataset) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let want = format!("train={:016x}", train.fingerprint());
        match lines.next() {
            Some((_, header)) if header.starts_with('#') => {
                if !header.split_whitespace().any(|f| f == want) {
                    return Err(Error::Validation(format!(
                        "{}: artificial-ratings cache is stale ({header}); expected {want}",
                        path.display()
                    )));
                }
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: "missing `# seed=.. fraction=.. train=..` header".into(),
                })
            }
        }
        let mut artificial = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "expected `user \\t item \\t value`".into(),
            };
            let mut f = line.split('\t');
            let u: u32 = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let i: u32 = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let value: f64 = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let (Some(user), Some(item)) = (train.users().to_internal(u), train.items().to_internal(i))
            else {
                return Err(bad());
            };
            artificial.push(Rating { user, item, value });
        }
        artificial.sort_unstable_by_key(|r| (r.user, r.item));
        Ok(AugmentedDataset {
            true_ratings: train.clone(),
            artificial,
        })
    }
}

/// Similarity-weighted mean of `user`'s training ratings over the items
/// similar to `item`, or `None` when no rated item is similar.
pub fn artificial_rating(
    user: u32,
    item: u32,
    train: &RatingsDataset,
    sim: &SimilarityMatrix,
) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in train.user_ratings(user) {
        if r.item == item {
            continue;
        }
        let s = sim.get(item, r.item);
        if s > 0 {
            num += r.value * f64::from(s);
            den += f64::from(s);
        }
    }
    (den > 0.0).then(|| num / den)
}

/// One user's artificial ratings, scattering from each rated item to its
/// similar neighbours rather than gathering per target cell.
fn user_artificial(user: u32, train: &RatingsDataset, sim: &SimilarityMatrix) -> Vec<Rating> {
    let n = train.n_items();
    let mut num = vec![0.0f64; n];
    let mut den = vec![0.0f64; n];
    let mut rated = vec![false; n];
    for r in train.user_ratings(user) {
        rated[r.item as usize] = true;
        for &(j, s) in sim.neighbors(r.item) {
            num[j as usize] += r.value * f64::from(s);
            den[j as usize] += f64::from(s);
        }
    }
    (0..n)
        .filter(|&i| !rated[i] && den[i] > 0.0)
        .map(|i| Rating {
            user,
            item: i as u32,
            value: num[i] / den[i],
        })
        .collect()
}

/// Artificial ratings for every unrated (user, item) cell with at least one
/// similar rated item. Users are processed in parallel.
pub fn augment_dataset(train: &RatingsDataset, sim: &SimilarityMatrix) -> Result<AugmentedDataset> {
    if sim.n_items() != train.n_items() {
        return Err(Error::Argument(format!(
            "similarity matrix covers {} items but the ratings have {}",
            sim.n_items(),
            train.n_items()
        )));
    }
    let per_user: Vec<Vec<Rating>> = (0..train.n_users() as u32)
        .into_par_iter()
        .map(|u| user_artificial(u, train, sim))
        .collect();
    Ok(AugmentedDataset {
        true_ratings: train.clone(),
        artificial: per_user.into_iter().flatten().collect(),
    })
}

/// `|artificial| / |true|`.
pub fn augmentation_ratio(aug: &AugmentedDataset) -> Result<f64> {
    if aug.true_ratings.is_empty() {
        return Err(Error::Argument(
            "augmentation ratio undefined without true ratings".into(),
        ));
    }
    Ok(aug.artificial.len() as f64 / aug.true_ratings.len() as f64)
}
