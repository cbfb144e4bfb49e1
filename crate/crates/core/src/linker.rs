//! Matching item titles to pages of an offline category index, and the
//! category-overlap similarity built from the matches.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::ratings::IdMap;
use crate::util::Fingerprint;
use crate::{Error, Result};

pub const DEFAULT_KEYWORDS: [&str; 2] = ["film", "movie"];

const ARTICLES: [&str; 3] = ["The", "A", "An"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageRecord {
    pub page_id: String,
    pub title: String,
    pub categories: BTreeSet<String>,
}

/// Pages addressable by case-insensitive, whitespace-trimmed title.
#[derive(Clone, Debug, Default)]
pub struct TitleIndex {
    pages: Vec<PageRecord>,
    by_normalized_title: HashMap<String, Vec<usize>>,
}

fn normalize(title: &str) -> String {
    title.trim().to_lowercase()
}

impl TitleIndex {
    pub fn new(pages: Vec<PageRecord>) -> Result<Self> {
        let mut by_normalized_title: HashMap<String, Vec<usize>> = HashMap::new();
        for (k, page) in pages.iter().enumerate() {
            if page.title.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "page {} has an empty title",
                    page.page_id
                )));
            }
            by_normalized_title
                .entry(normalize(&page.title))
                .or_default()
                .push(k);
        }
        Ok(TitleIndex {
            pages,
            by_normalized_title,
        })
    }

    /// Reads `page_id \t title \t cat1;cat2;...` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// [`TitleIndex::load`] on text already in memory; `path` only labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut pages = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let (Some(page_id), Some(title)) = (fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: "expected `page_id \\t title \\t categories`".into(),
                });
            };
            let categories = fields
                .next()
                .unwrap_or("")
                .split(';')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect();
            pages.push(PageRecord {
                page_id: page_id.trim().to_string(),
                title: title.trim().to_string(),
                categories,
            });
        }
        TitleIndex::new(pages)
    }

    pub fn pages(&self) -> &[PageRecord] {
        &self.pages
    }

    pub fn lookup(&self, title: &str) -> impl Iterator<Item = &PageRecord> + '_ {
        self.by_normalized_title
            .get(&normalize(title))
            .into_iter()
            .flatten()
            .map(move |&k| &self.pages[k])
    }
}

fn split_trailing_year(title: &str) -> (&str, Option<&str>) {
    let t = title.trim_end();
    if let Some(open) = t.rfind('(') {
        let inner = &t[open + 1..];
        if inner.len() == 5
            && inner.ends_with(')')
            && inner[..4].bytes().all(|b| b.is_ascii_digit())
        {
            return (t[..open].trim_end(), Some(&t[open + 1..open + 5]));
        }
    }
    (t, None)
}

fn rotate_article(title: &str) -> Option<String> {
    let (head, tail) = title.rsplit_once(", ")?;
    ARTICLES
        .iter()
        .find(|a| tail == **a)
        .map(|a| format!("{a} {head}"))
}

/// Candidate page titles for a MovieLens-style title, in match priority order.
///
/// The trailing `(YYYY)` is stripped and a trailing `, The`/`, A`/`, An` is
/// rotated to the front. Each base form (rotated first) is followed by its
/// `(film)` and `(YYYY film)` disambiguations; the untouched raw title comes
/// last. Duplicates are dropped keeping the first occurrence.
pub fn generate_title_variants(raw_title: &str) -> Vec<String> {
    let raw = raw_title.trim();
    let (stripped, year) = split_trailing_year(raw);
    let mut bases = Vec::new();
    if let Some(rotated) = rotate_article(stripped) {
        bases.push(rotated);
    }
    bases.push(stripped.to_string());

    let mut out: Vec<String> = Vec::new();
    let mut push = |s: String| {
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };
    for base in bases {
        push(base.clone());
        push(format!("{base} (film)"));
        if let Some(y) = year {
            push(format!("{base} ({y} film)"));
        }
    }
    push(raw.to_string());
    out
}

/// A chosen page together with how it was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PageMatch<'a> {
    pub page: &'a PageRecord,
    /// Categories containing at least one keyword.
    pub score: usize,
    /// Position in [`generate_title_variants`] of the first variant that hit.
    pub variant_rank: usize,
}

pub fn keyword_score(page: &PageRecord, keywords: &[String]) -> usize {
    page.categories
        .iter()
        .filter(|c| {
            let c = c.to_lowercase();
            keywords.iter().any(|k| c.contains(k.as_str()))
        })
        .count()
}

/// Picks the exact-match page whose categories best mention the keywords.
///
/// Ties go to the earliest variant, then the lexicographically smallest page
/// title, then page id. `None` means no variant matched any page exactly.
pub fn match_item_to_page<'a>(
    title: &str,
    index: &'a TitleIndex,
    keywords: &[String],
) -> Option<PageMatch<'a>> {
    let keywords: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    let mut candidates: Vec<PageMatch<'a>> = Vec::new();
    for (rank, variant) in generate_title_variants(title).iter().enumerate() {
        for page in index.lookup(variant) {
            if candidates.iter().any(|c| std::ptr::eq(c.page, page)) {
                continue;
            }
            candidates.push(PageMatch {
                page,
                score: keyword_score(page, &keywords),
                variant_rank: rank,
            });
        }
    }
    candidates.into_iter().min_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.variant_rank.cmp(&b.variant_rank))
            .then_with(|| a.page.title.cmp(&b.page.title))
            .then_with(|| a.page.page_id.cmp(&b.page.page_id))
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatchStatus {
    Matched { page_id: String, score: usize },
    NoExactMatch,
    Untitled,
}

impl MatchStatus {
    pub fn label(&self) -> &'static str {
        match self {
            MatchStatus::Matched { .. } => "matched",
            MatchStatus::NoExactMatch => "no-exact-match",
            MatchStatus::Untitled => "untitled",
        }
    }
}

/// Categories of every matched item (external ids) plus a status row for
/// every item considered.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ItemCategoryMap {
    pub entries: BTreeMap<u32, BTreeSet<String>>,
    pub match_report: BTreeMap<u32, MatchStatus>,
}

impl ItemCategoryMap {
    pub fn match_rate(&self) -> f64 {
        if self.match_report.is_empty() {
            return 0.0;
        }
        self.entries.len() as f64 / self.match_report.len() as f64
    }

    /// Marks items that exist in the ratings but had no title at all.
    pub fn record_untitled(&mut self, items: impl IntoIterator<Item = u32>) {
        for id in items {
            self.match_report.entry(id).or_insert(MatchStatus::Untitled);
        }
    }

    /// `item_id \t cat1;cat2;...`, one line per matched item.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, cats) in &self.entries {
            let cats: Vec<&str> = cats.iter().map(String::as_str).collect();
            let _ = writeln!(out, "{id}\t{}", cats.join(";"));
        }
        out
    }

    /// `item_id,status,page_id,score` with a header line.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("item_id,status,page_id,score\n");
        for (id, status) in &self.match_report {
            match status {
                MatchStatus::Matched { page_id, score } => {
                    let _ = writeln!(out, "{id},matched,{},{score}", csv_field(page_id));
                }
                other => {
                    let _ = writeln!(out, "{id},{},,", other.label());
                }
            }
        }
        out
    }

    /// Reads the `item_id \t categories` file back. The match report is
    /// reconstructed as all-matched with unknown page ids.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = ItemCategoryMap::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, cats) = line.split_once('\t').unwrap_or((line, ""));
            let id: u32 = id.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: format!("bad item id {id:?}"),
            })?;
            let cats: BTreeSet<String> = cats
                .split(';')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect();
            map.match_report.insert(
                id,
                MatchStatus::Matched {
                    page_id: String::new(),
                    score: 0,
                },
            );
            map.entries.insert(id, cats);
        }
        Ok(map)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs [`match_item_to_page`] over every titled item.
pub fn build_item_category_map(
    titles: &BTreeMap<u32, String>,
    index: &TitleIndex,
    keywords: &[String],
) -> ItemCategoryMap {
    let mut map = ItemCategoryMap::default();
    for (&id, title) in titles {
        match match_item_to_page(title, index, keywords) {
            Some(m) => {
                map.entries.insert(id, m.page.categories.clone());
                map.match_report.insert(
                    id,
                    MatchStatus::Matched {
                        page_id: m.page.page_id.clone(),
                        score: m.score,
                    },
                );
            }
            None => {
                map.match_report.insert(id, MatchStatus::NoExactMatch);
            }
        }
    }
    map
}

/// Number of categories two items share.
pub fn category_similarity(a: &BTreeSet<String>, b: &BTreeSet<String>) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter(|c| large.contains(*c)).count()
}

/// Sparse symmetric item-item overlap counts over an internal item universe.
///
/// Only pairs sharing at least one category are stored. Each row keeps its
/// neighbours sorted by item index, so `get` is a binary search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimilarityMatrix {
    rows: Vec<Vec<(u32, u32)>>,
    self_counts: Vec<u32>,
}

impl SimilarityMatrix {
    pub fn empty(n_items: usize) -> Self {
        SimilarityMatrix {
            rows: vec![Vec::new(); n_items],
            self_counts: vec![0; n_items],
        }
    }

    /// Builds from `(i, j, count)` triples in either orientation.
    pub fn from_pairs(
        n_items: usize,
        pairs: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Result<Self> {
        let mut m = SimilarityMatrix::empty(n_items);
        for (i, j, c) in pairs {
            if i as usize >= n_items || j as usize >= n_items {
                return Err(Error::Validation(format!(
                    "similarity pair ({i}, {j}) outside {n_items} items"
                )));
            }
            if i == j || c == 0 {
                continue;
            }
            m.rows[i as usize].push((j, c));
            m.rows[j as usize].push((i, c));
        }
        for row in &mut m.rows {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation("duplicate similarity pair".into()));
            }
        }
        Ok(m)
    }

    pub fn n_items(&self) -> usize {
        self.rows.len()
    }

    /// Overlap count; `sim(i, i)` is the item's own category count.
    pub fn get(&self, i: u32, j: u32) -> u32 {
        if i == j {
            return self.self_counts[i as usize];
        }
        let row = &self.rows[i as usize];
        match row.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => row[pos].1,
            Err(_) => 0,
        }
    }

    pub fn neighbors(&self, i: u32) -> &[(u32, u32)] {
        &self.rows[i as usize]
    }

    /// Stored pairs with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            let i = i as u32;
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, c)| (i, j, c))
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.rows.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    /// Fingerprint of the stored pairs, recorded in models and reports.
    pub fn fingerprint(&self) -> u64 {
        let mut fp = Fingerprint::new();
        fp.u32(self.n_items() as u32);
        for (i, j, c) in self.pairs() {
            fp.u32(i);
            fp.u32(j);
            fp.u32(c);
        }
        fp.finish()
    }

    /// `i \t j \t count` lines with external ids, `i < j` in external order.
    pub fn to_tsv(&self, items: &IdMap) -> String {
        let mut lines: Vec<(u32, u32, u32)> = self
            .pairs()
            .map(|(i, j, c)| {
                let (a, b) = (items.to_external(i), items.to_external(j));
                (a.min(b), a.max(b), c)
            })
            .collect();
        lines.sort_unstable();
        let mut out = String::new();
        for (i, j, c) in lines {
            let _ = writeln!(out, "{i}\t{j}\t{c}");
        }
        out
    }

    /// Reads a similarity file written by [`SimilarityMatrix::to_tsv`].
    /// Pairs naming items outside `items` are dropped.
    pub fn load_tsv(path: impl AsRef<Path>, items: &IdMap) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parsed = (fields.len() == 3)
                .then(|| {
                    Some((
                        fields[0].trim().parse::<u32>().ok()?,
                        fields[1].trim().parse::<u32>().ok()?,
                        fields[2].trim().parse::<u32>().ok()?,
                    ))
                })
                .flatten();
            let Some((a, b, c)) = parsed else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: "expected `i \\t j \\t count`".into(),
                });
            };
            if a >= b {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("pair ({a}, {b}) must satisfy i < j"),
                });
            }
            if let (Some(i), Some(j)) = (items.to_internal(a), items.to_internal(b)) {
                pairs.push((i, j, c));
            }
        }
        SimilarityMatrix::from_pairs(items.len(), pairs)
    }
}

/// Pairwise overlap counts for every matched item in `items`.
///
/// Works from a category → items inverted index; each row is counted
/// independently so rows are built in parallel.
pub fn build_similarity_matrix(map: &ItemCategoryMap, items: &IdMap) -> SimilarityMatrix {
    let n_items = items.len();
    let mut item_cats: Vec<Option<&BTreeSet<String>>> = vec![None; n_items];
    let mut postings: HashMap<&str, Vec<u32>> = HashMap::new();
    for (&ext, cats) in &map.entries {
        let Some(i) = items.to_internal(ext) else {
            continue;
        };
        item_cats[i as usize] = Some(cats);
        for c in cats {
            postings.entry(c.as_str()).or_default().push(i);
        }
    }
    let rows: Vec<Vec<(u32, u32)>> = (0..n_items)
        .into_par_iter()
        .map(|i| {
            let Some(cats) = item_cats[i] else {
                return Vec::new();
            };
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for c in cats {
                for &j in &postings[c.as_str()] {
                    if j as usize != i {
                        *counts.entry(j).or_default() += 1;
                    }
                }
            }
            counts.into_iter().collect()
        })
        .collect();
    let self_counts = item_cats
        .iter()
        .map(|c| c.map_or(0, |c| c.len() as u32))
        .collect();
    SimilarityMatrix { rows, self_counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn page(id: &str, title: &str, cats: &[&str]) -> PageRecord {
        PageRecord {
            page_id: id.into(),
            title: title.into(),
            categories: set(cats),
        }
    }

    fn kw() -> Vec<String> {
        DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn variants_rotate_article_and_strip_year() {
        let v = generate_title_variants("Usual Suspects, The (1995)");
        assert_eq!(
            &v[..4],
            [
                "The Usual Suspects",
                "The Usual Suspects (film)",
                "The Usual Suspects (1995 film)",
                "Usual Suspects, The",
            ]
        );
    }

    #[test]
    fn variants_for_plain_titles() {
        let v = generate_title_variants("Heat (1995)");
        for want in ["Heat", "Heat (film)", "Heat (1995 film)"] {
            assert!(v.iter().any(|s| s == want), "{want} missing from {v:?}");
        }
        assert_eq!(generate_title_variants("Alien"), ["Alien", "Alien (film)"]);
    }

    #[test]
    fn variants_keep_inner_parentheses() {
        let v = generate_title_variants("Shanghai Triad (Yao a yao yao dao waipo qiao) (1995)");
        assert_eq!(v[0], "Shanghai Triad (Yao a yao yao dao waipo qiao)");
    }

    #[test]
    fn highest_keyword_score_wins() {
        let index = TitleIndex::new(vec![
            page("1", "Heat", &["Thermodynamics", "Physical quantities", "Film studies"]),
            page("2", "Heat (1995 film)", &["1995 films", "Crime films", "Films by Michael Mann"]),
        ])
        .unwrap();
        let m = match_item_to_page("Heat (1995)", &index, &kw()).unwrap();
        assert_eq!(m.page.page_id, "2");
        assert_eq!(m.score, 3);
    }

    #[test]
    fn ties_go_to_earlier_variant_then_title() {
        let index = TitleIndex::new(vec![
            page("b", "Heat (film)", &["Films"]),
            page("a", "heat", &["Films"]),
        ])
        .unwrap();
        assert_eq!(match_item_to_page("Heat (1995)", &index, &kw()).unwrap().page.page_id, "a");

        let index = TitleIndex::new(vec![
            page("x", "Heat", &["Movies"]),
            page("y", "HEAT", &["Films"]),
        ])
        .unwrap();
        // Same variant, same score: "HEAT" < "Heat" byte-wise.
        assert_eq!(match_item_to_page("Heat", &index, &kw()).unwrap().page.page_id, "y");
    }

    #[test]
    fn no_candidate_means_no_match() {
        let index = TitleIndex::new(vec![page("1", "Alien", &["Films"])]).unwrap();
        assert!(match_item_to_page("Aliens (1986)", &index, &kw()).is_none());
    }

    #[test]
    fn lookup_is_case_insensitive_and_trimmed() {
        let index = TitleIndex::new(vec![page("1", "  The Usual Suspects ", &[])]).unwrap();
        assert_eq!(index.lookup("the usual suspects").count(), 1);
    }

    #[test]
    fn category_map_reports_every_item() {
        let index = TitleIndex::new(vec![
            page("1", "Alien", &["1979 films"]),
            page("2", "Heat (1995 film)", &["1995 films"]),
        ])
        .unwrap();
        let titles: BTreeMap<u32, String> = [(1, "Alien (1979)"), (2, "Heat (1995)"), (3, "Zzz (1990)")]
            .into_iter()
            .map(|(k, v)| (k, v.to_string()))
            .collect();
        let map = build_item_category_map(&titles, &index, &kw());
        assert_eq!(map.entries.len(), 2);
        assert_eq!(map.match_report[&3], MatchStatus::NoExactMatch);
        assert!((map.match_rate() - 2.0 / 3.0).abs() < 1e-12);
        let csv = map.report_csv();
        assert!(csv.contains("3,no-exact-match,,"));
        assert!(csv.contains("1,matched,1,1"));

        let empty = build_item_category_map(&BTreeMap::new(), &index, &kw());
        assert!(empty.entries.is_empty() && empty.match_report.is_empty());
    }

    #[test]
    fn overlap_counts() {
        assert_eq!(category_similarity(&set(&["A", "B", "C"]), &set(&["B", "C", "D"])), 2);
        let five = set(&["a", "b", "c", "d", "e"]);
        assert_eq!(category_similarity(&five, &five), 5);
        assert_eq!(category_similarity(&set(&["a"]), &set(&["b"])), 0);
    }

    #[test]
    fn matrix_from_map() {
        let items = IdMap::from_external([10, 20, 30]);
        let mut map = ItemCategoryMap::default();
        map.entries.insert(10, set(&["x", "y", "z"]));
        map.entries.insert(20, set(&["x", "y", "z", "w"]));
        let sim = build_similarity_matrix(&map, &items);
        assert_eq!(sim.pairs().collect::<Vec<_>>(), vec![(0, 1, 3)]);
        assert_eq!(sim.get(1, 0), 3);
        assert_eq!(sim.get(0, 2), 0);
        assert_eq!(sim.get(1, 1), 4);

        let mut single = ItemCategoryMap::default();
        single.entries.insert(10, set(&["x"]));
        assert!(build_similarity_matrix(&single, &items).is_empty());
    }

    #[test]
    fn similarity_file_round_trip() {
        let items = IdMap::from_external([7, 3, 5]);
        let sim = SimilarityMatrix::from_pairs(3, [(0, 1, 2), (2, 1, 1)]).unwrap();
        let text = sim.to_tsv(&items);
        assert_eq!(text, "3\t5\t1\n3\t7\t2\n");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.tsv");
        fs::write(&path, text).unwrap();
        assert_eq!(SimilarityMatrix::load_tsv(&path, &items).unwrap(), sim);
    }
}
