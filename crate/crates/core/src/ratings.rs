//! MovieLens ingestion, indexed rating storage and per-user train/test splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::util::{floor_fraction, Fingerprint};
use crate::{Error, Result};

/// One observed rating. Ids are internal, contiguous and 0-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// Bidirectional map between external (file) ids and internal indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<u32>,
    internal: HashMap<u32, u32>,
}

impl IdMap {
    pub fn from_external(ids: impl IntoIterator<Item = u32>) -> Self {
        let mut map = IdMap::default();
        for id in ids {
            map.intern(id);
        }
        map
    }

    fn intern(&mut self, external: u32) -> u32 {
        let next = self.external.len() as u32;
        *self.internal.entry(external).or_insert_with(|| {
            self.external.push(external);
            next
        })
    }

    pub fn to_internal(&self, external: u32) -> Option<u32> {
        self.internal.get(&external).copied()
    }

    pub fn to_external(&self, internal: u32) -> u32 {
        self.external[internal as usize]
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }
}

/// Sparse user-item rating matrix with per-user and per-item indexes.
///
/// Records are kept in insertion order; the indexes hold record positions in
/// CSR form so a user's (or item's) ratings are one contiguous slice.
#[derive(Clone, Debug)]
pub struct RatingsDataset {
    records: Vec<Rating>,
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    user_ptr: Vec<usize>,
    user_idx: Vec<u32>,
    item_ptr: Vec<usize>,
    item_idx: Vec<u32>,
}

impl RatingsDataset {
    /// Builds a dataset over an existing id universe. Fails if an id falls
    /// outside the universe, a value lies outside 1..=5, or a (user, item)
    /// pair repeats.
    pub fn new(records: Vec<Rating>, users: Arc<IdMap>, items: Arc<IdMap>) -> Result<Self> {
        Self::build(records, users, items, true)
    }

    /// Like [`RatingsDataset::new`] but accepts any finite value. Used for
    /// streams that mix in real-valued artificial ratings.
    pub fn new_unchecked_scale(
        records: Vec<Rating>,
        users: Arc<IdMap>,
        items: Arc<IdMap>,
    ) -> Result<Self> {
        Self::build(records, users, items, false)
    }

    fn build(
        records: Vec<Rating>,
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        integer_scale: bool,
    ) -> Result<Self> {
        let (n_users, n_items) = (users.len(), items.len());
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.user as usize >= n_users || r.item as usize >= n_items {
                return Err(Error::Validation(format!(
                    "rating ({}, {}) outside {}x{} universe",
                    r.user, r.item, n_users, n_items
                )));
            }
            let valid = if integer_scale {
                (1.0..=5.0).contains(&r.value) && r.value.fract() == 0.0
            } else {
                r.value.is_finite()
            };
            if !valid {
                return Err(Error::Validation(format!(
                    "rating value {} for ({}, {}) is outside 1..5",
                    r.value, r.user, r.item
                )));
            }
            if !seen.insert((r.user, r.item)) {
                return Err(Error::Validation(format!(
                    "duplicate rating for user {} item {}",
                    users.to_external(r.user),
                    items.to_external(r.item)
                )));
            }
        }
        let (user_ptr, user_idx) = csr(n_users, records.iter().map(|r| r.user));
        let (item_ptr, item_idx) = csr(n_items, records.iter().map(|r| r.item));
        Ok(RatingsDataset {
            records,
            users,
            items,
            user_ptr,
            user_idx,
            item_ptr,
            item_idx,
        })
    }

    pub fn records(&self) -> &[Rating] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    /// Record positions of one user's ratings, in record order.
    pub fn user_index(&self, user: u32) -> &[u32] {
        let u = user as usize;
        &self.user_idx[self.user_ptr[u]..self.user_ptr[u + 1]]
    }

    pub fn item_index(&self, item: u32) -> &[u32] {
        let i = item as usize;
        &self.item_idx[self.item_ptr[i]..self.item_ptr[i + 1]]
    }

    pub fn user_ratings(&self, user: u32) -> impl Iterator<Item = &Rating> + '_ {
        self.user_index(user)
            .iter()
            .map(move |&k| &self.records[k as usize])
    }

    pub fn item_ratings(&self, item: u32) -> impl Iterator<Item = &Rating> + '_ {
        self.item_index(item)
            .iter()
            .map(move |&k| &self.records[k as usize])
    }

    pub fn mean(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        Some(self.records.iter().map(|r| r.value).sum::<f64>() / self.records.len() as f64)
    }

    /// `1 - |records| / (n_users * n_items)`; 1.0 for an empty grid.
    pub fn sparsity(&self) -> f64 {
        let cells = self.n_users() as f64 * self.n_items() as f64;
        if cells == 0.0 {
            return 1.0;
        }
        1.0 - self.records.len() as f64 / cells
    }

    /// Order-sensitive fingerprint of the records and id universe.
    pub fn fingerprint(&self) -> u64 {
        let mut fp = Fingerprint::new();
        fp.u32(self.n_users() as u32);
        fp.u32(self.n_items() as u32);
        for r in &self.records {
            fp.u32(self.users.to_external(r.user));
            fp.u32(self.items.to_external(r.item));
            fp.f64(r.value);
        }
        fp.finish()
    }
}

fn csr(n: usize, keys: impl Iterator<Item = u32> + Clone) -> (Vec<usize>, Vec<u32>) {
    let mut ptr = vec![0usize; n + 1];
    for k in keys.clone() {
        ptr[k as usize + 1] += 1;
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    let mut fill = ptr.clone();
    let mut idx = vec![0u32; ptr[n]];
    for (pos, k) in keys.enumerate() {
        idx[fill[k as usize]] = pos as u32;
        fill[k as usize] += 1;
    }
    (ptr, idx)
}

/// Reads a MovieLens 100K `u.data` file: `user \t item \t rating \t timestamp`.
///
/// Internal ids follow first appearance in the file. Timestamps are parsed
/// for well-formedness and dropped.
pub fn load_movielens_ratings(path: impl AsRef<Path>) -> Result<RatingsDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(&text, path)
}

/// [`load_movielens_ratings`] on text already in memory; `path` only labels errors.
pub fn parse_ratings(text: &str, path: &Path) -> Result<RatingsDataset> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut raw = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(parse_err(
                line_no,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let user: u32 = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad user id {:?}", fields[0])))?;
        let item: u32 = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad item id {:?}", fields[1])))?;
        let value: i64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad rating {:?}", fields[2])))?;
        if let Some(ts) = fields.get(3) {
            ts.trim()
                .parse::<i64>()
                .map_err(|_| parse_err(line_no, format!("bad timestamp {ts:?}")))?;
        }
        if !(1..=5).contains(&value) {
            return Err(Error::Validation(format!(
                "{}:{line_no}: rating {value} outside 1..5",
                path.display()
            )));
        }
        raw.push((user, item, value as f64));
    }
    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let records = raw
        .into_iter()
        .map(|(u, i, value)| Rating {
            user: users.intern(u),
            item: items.intern(i),
            value,
        })
        .collect();
    RatingsDataset::new(records, Arc::new(users), Arc::new(items))
}

/// Titles read from a `u.item` file, keyed by external item id.
#[derive(Clone, Debug, Default)]
pub struct TitleTable {
    pub titles: BTreeMap<u32, String>,
    /// Items whose title field was present but empty.
    pub untitled: Vec<u32>,
    /// Lines that could not be parsed at all.
    pub skipped_lines: usize,
}

impl TitleTable {
    /// External ids of `dataset` items that have no usable title.
    pub fn missing_for(&self, dataset: &RatingsDataset) -> Vec<u32> {
        (0..dataset.n_items() as u32)
            .map(|i| dataset.items().to_external(i))
            .filter(|id| !self.titles.contains_key(id))
            .collect()
    }
}

/// Reads a pipe-separated MovieLens `u.item` file. Only the id and title
/// fields are used; the file is decoded lossily since the original is Latin-1.
pub fn load_movielens_titles(path: impl AsRef<Path>) -> Result<TitleTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_titles(&String::from_utf8_lossy(&bytes), path))
}

/// [`load_movielens_titles`] on text already in memory; `path` only labels warnings.
pub fn parse_titles(text: &str, path: &Path) -> TitleTable {
    let mut table = TitleTable::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '|');
        let id = fields.next().and_then(|s| s.trim().parse::<u32>().ok());
        let title = fields.next();
        match (id, title) {
            (Some(id), Some(title)) => {
                let title = title.trim();
                if title.is_empty() {
                    table.untitled.push(id);
                } else {
                    table.titles.insert(id, title.to_string());
                }
            }
            _ => {
                warn!("{}:{}: skipping unparseable title line", path.display(), n + 1);
                table.skipped_lines += 1;
            }
        }
    }
    table
}

/// A training sample and its complement over the same id universe.
#[derive(Clone, Debug)]
pub struct TrainTestSplit {
    pub train: RatingsDataset,
    pub test: RatingsDataset,
    pub fraction: f64,
    pub seed: u64,
}

impl TrainTestSplit {
    /// Fingerprint over both halves; identical splits give identical values.
    pub fn checksum(&self) -> u64 {
        let mut fp = Fingerprint::new();
        fp.bytes(&self.train.fingerprint().to_le_bytes());
        fp.bytes(&self.test.fingerprint().to_le_bytes());
        fp.finish()
    }
}

/// Samples `max(1, floor(fraction * n_u))` of each user's ratings for
/// training; the remainder is the test set.
///
/// A single seeded generator is advanced user by user in internal id order,
/// so the split is a pure function of `(dataset, fraction, seed)`.
pub fn split_per_user(dataset: &RatingsDataset, fraction: f64, seed: u64) -> Result<TrainTestSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!(
            "training fraction {fraction} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for u in 0..dataset.n_users() as u32 {
        let mut idx: Vec<u32> = dataset.user_index(u).to_vec();
        if idx.is_empty() {
            return Err(Error::Argument(format!(
                "user {} has no ratings",
                dataset.users().to_external(u)
            )));
        }
        idx.shuffle(&mut rng);
        let take = floor_fraction(fraction, idx.len()).max(1);
        let (head, tail) = idx.split_at(take);
        let mut head = head.to_vec();
        let mut tail = tail.to_vec();
        head.sort_unstable();
        tail.sort_unstable();
        train.extend(head.iter().map(|&k| dataset.records()[k as usize]));
        test.extend(tail.iter().map(|&k| dataset.records()[k as usize]));
    }
    let users = dataset.users().clone();
    let items = dataset.items().clone();
    Ok(TrainTestSplit {
        train: RatingsDataset::new(train, users.clone(), items.clone())?,
        test: RatingsDataset::new(test, users, items)?,
        fraction,
        seed,
    })
}

/// Sparsity of the training half over the full user x item grid.
pub fn sparsity_of(split: &TrainTestSplit) -> f64 {
    split.train.sparsity()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RatingsDataset> {
        parse_ratings(text, Path::new("mem"))
    }

    fn grid(counts: &[usize]) -> RatingsDataset {
        let mut text = String::new();
        for (u, &n) in counts.iter().enumerate() {
            for i in 0..n {
                text.push_str(&format!("{}\t{}\t{}\t0\n", u + 1, i + 1, 1 + (u + i) % 5));
            }
        }
        parse(&text).unwrap()
    }

    #[test]
    fn empty_file_gives_empty_dataset() {
        let ds = parse("").unwrap();
        assert_eq!(ds.n_users(), 0);
        assert_eq!(ds.n_items(), 0);
        assert!(ds.is_empty());
    }

    #[test]
    fn out_of_range_rating_rejected() {
        let err = parse("1\t5\t9\t0\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("1\t2\t3\t0\n1\tx\t3\t0\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_pair_rejected() {
        let err = parse("1\t2\t3\t0\n1\t2\t4\t5\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn ids_are_contiguous_and_mapped_back() {
        let ds = parse("10\t7\t3\t0\n42\t7\t4\t0\n10\t99\t5\t0\n").unwrap();
        assert_eq!((ds.n_users(), ds.n_items()), (2, 2));
        assert_eq!(ds.users().to_external(1), 42);
        assert_eq!(ds.items().to_internal(99), Some(1));
        assert_eq!(ds.user_index(0).len(), 2);
        assert_eq!(ds.item_index(0).len(), 2);
        assert!((ds.sparsity() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn indexes_partition_records() {
        let ds = grid(&[3, 5, 1, 4]);
        let by_user: usize = (0..ds.n_users() as u32).map(|u| ds.user_index(u).len()).sum();
        let by_item: usize = (0..ds.n_items() as u32).map(|i| ds.item_index(i).len()).sum();
        assert_eq!(by_user, ds.len());
        assert_eq!(by_item, ds.len());
        for u in 0..ds.n_users() as u32 {
            assert!(ds.user_ratings(u).all(|r| r.user == u));
        }
    }

    #[test]
    fn titles_extracted_and_untitled_reported() {
        let t = parse_titles(
            "1|Toy Story (1995)|01-Jan-1995||http://x|0|0\n2||x\ngarbage\n",
            Path::new("mem"),
        );
        assert_eq!(t.titles[&1], "Toy Story (1995)");
        assert_eq!(t.untitled, vec![2]);
        assert_eq!(t.skipped_lines, 1);
    }

    #[test]
    fn split_minimum_one_and_floor() {
        let ds = grid(&[20, 2]);
        let s = split_per_user(&ds, 0.05, 1).unwrap();
        assert_eq!(s.train.user_index(0).len(), 1);
        assert_eq!(s.test.user_index(0).len(), 19);
        let s = split_per_user(&ds, 0.5, 1).unwrap();
        assert_eq!(s.train.user_index(1).len(), 1);
        assert_eq!(s.test.user_index(1).len(), 1);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = grid(&[4]);
        for f in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(split_per_user(&ds, f, 0), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn sparsity_arithmetic() {
        // 5000 train records over the MovieLens 943 x 1682 grid.
        let cells: f64 = 943.0 * 1682.0;
        assert_eq!(cells, 1_586_126.0);
        assert!((1.0 - 5000.0 / cells - 0.996_847_6).abs() < 1e-6);
    }
}
