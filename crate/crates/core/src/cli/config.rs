//! Run configuration: a flat `key = value` file overlaid by command-line
//! flags, then defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;

use crate::engine::{Hyperparams, Variant};
use crate::eval::SweepConfig;
use crate::linker::DEFAULT_KEYWORDS;
use crate::{Error, Result};

/// Overrides the default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "WIKISVD_OUT_DIR";

/// Flags shared by all subcommands. Every one may also be set in the
/// `--config` file under the same name without the leading dashes.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// Flat `key = value` config file; flags given on the command line win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Ratings file (`user \t item \t rating \t timestamp`)
    #[arg(long, global = true, value_name = "FILE")]
    pub ratings: Option<PathBuf>,
    /// Titles file (`id|title|...`)
    #[arg(long, global = true, value_name = "FILE")]
    pub titles: Option<PathBuf>,
    /// Offline page index (`page_id \t title \t cat;cat;...`)
    #[arg(long = "wiki-index", global = true, value_name = "FILE")]
    pub wiki_index: Option<PathBuf>,
    /// Item category map written by `link`
    #[arg(long, global = true, value_name = "FILE")]
    pub categories: Option<PathBuf>,
    /// Similarity file (`i \t j \t count`)
    #[arg(long = "sim-file", global = true, value_name = "FILE")]
    pub sim_file: Option<PathBuf>,
    /// Artificial-ratings cache written by `augment`
    #[arg(long = "aug-file", global = true, value_name = "FILE")]
    pub aug_file: Option<PathBuf>,
    /// Saved model file
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// `user \t item` pairs to score (external ids); `-` reads stdin
    #[arg(long, global = true, value_name = "FILE")]
    pub pairs: Option<PathBuf>,
    /// Report CSV to re-render
    #[arg(long, global = true, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Model variant: baseline, A, B, C, D, E or F [default: baseline]
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Comma-separated variants for `sweep` [default: A,B,C,D,E,F]
    #[arg(long, global = true)]
    pub variants: Option<String>,
    /// Latent factors k [default: 50]
    #[arg(long, global = true)]
    pub factors: Option<usize>,
    /// Learning rate for true ratings [default: 0.005]
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Learning rate for artificial ratings [default: 0.00005]
    #[arg(long = "gamma-art", global = true)]
    pub gamma_art: Option<f64>,
    /// Set the artificial learning rate to gamma / RATIO instead
    #[arg(long = "gamma-art-ratio", global = true, value_name = "RATIO")]
    pub gamma_art_ratio: Option<f64>,
    /// Regularization lambda [default: 0.02]
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// SGD epochs [default: 30]
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Random seed for splits, initialisation and shuffling [default: 1]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Training fraction for `augment`/`train`/`predict` splits
    #[arg(long, global = true)]
    pub fraction: Option<f64>,
    /// Sweep training fractions [default: 0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8]
    #[arg(long, global = true)]
    pub fractions: Option<String>,
    /// Seeds per sweep cell [default: 5]
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Significance level of the paired t-test [default: 0.05]
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Weight of the true-ratings model in variant C [default: 0.5]
    #[arg(long = "mixture-weight", global = true)]
    pub mixture_weight: Option<f64>,
    /// Clamp predictions to [1, 5] when evaluating [default: true]
    #[arg(long, global = true, value_name = "BOOL")]
    pub clamp: Option<bool>,
    /// Mean-centre neighbour ratings in variants D/E/F [default: false]
    #[arg(long = "center-neighbors", global = true, value_name = "BOOL")]
    pub center_neighbors: Option<bool>,
    /// Variant B predicts from the base block only [default: false]
    #[arg(long = "dual-base-only", global = true, value_name = "BOOL")]
    pub dual_base_only: Option<bool>,
    /// Category keywords for page selection [default: film,movie]
    #[arg(long, global = true)]
    pub keywords: Option<String>,
    /// Sweep worker threads; 0 uses all cores [default: 0]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory [default: $WIKISVD_OUT_DIR or ./out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Reads a `key = value` file. `#` starts a comment; blank lines are skipped.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "expected `key = value`".into(),
            });
        };
        out.insert(k.trim().trim_start_matches("--").to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Fully resolved settings for one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub ratings: Option<PathBuf>,
    pub titles: Option<PathBuf>,
    pub wiki_index: Option<PathBuf>,
    pub categories: Option<PathBuf>,
    pub sim_file: Option<PathBuf>,
    pub aug_file: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub variant: Variant,
    pub fraction: Option<f64>,
    pub hyper: Hyperparams,
    pub sweep: SweepConfig,
    pub keywords: Vec<String>,
    pub out: PathBuf,
}

struct Layer<'a> {
    file: &'a BTreeMap<String, String>,
    base_dir: &'a Path,
}

impl Layer<'_> {
    fn value<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Argument(format!("config key {key}: cannot parse {raw:?}"))),
        }
    }

    fn path(&self, key: &str, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone()
            .or_else(|| self.file.get(key).map(|p| self.base_dir.join(p)))
    }
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Argument(format!("cannot parse {what} {s:?}")))
        })
        .collect()
}

impl RunConfig {
    /// Flags override the config file, which overrides defaults. Relative
    /// paths in the config file resolve against the file's directory.
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => parse_config_file(p)?,
            None => BTreeMap::new(),
        };
        let base_dir = flags
            .config
            .as_deref()
            .and_then(Path::parent)
            .unwrap_or(Path::new(""))
            .to_path_buf();
        let known = [
            "ratings", "titles", "wiki-index", "categories", "sim-file", "aug-file", "model",
            "pairs", "input", "variant", "variants", "factors", "gamma", "gamma-art",
            "gamma-art-ratio", "lambda", "epochs", "seed", "fraction", "fractions", "reps",
            "alpha", "mixture-weight", "clamp", "center-neighbors", "dual-base-only", "keywords",
            "workers", "out",
        ];
        if let Some(k) = file.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Argument(format!("unknown config key {k:?}")));
        }
        let l = Layer { file: &file, base_dir: &base_dir };

        let defaults = Hyperparams::default();
        let gamma = l.value("gamma", flags.gamma)?.unwrap_or(defaults.gamma);
        let gamma_art = match (
            l.value("gamma-art", flags.gamma_art)?,
            l.value("gamma-art-ratio", flags.gamma_art_ratio)?,
        ) {
            (Some(g), _) => g,
            (None, Some(ratio)) if ratio > 0.0 => gamma / ratio,
            (None, Some(ratio)) => {
                return Err(Error::Argument(format!("gamma-art-ratio must be positive, got {ratio}")))
            }
            (None, None) => defaults.gamma_art,
        };
        let seed = l.value("seed", flags.seed)?.unwrap_or(defaults.seed);
        let hyper = Hyperparams {
            factors: l.value("factors", flags.factors)?.unwrap_or(defaults.factors),
            gamma,
            gamma_art,
            lambda: l.value("lambda", flags.lambda)?.unwrap_or(defaults.lambda),
            epochs: l.value("epochs", flags.epochs)?.unwrap_or(defaults.epochs),
            seed,
            mixture_weight: l
                .value("mixture-weight", flags.mixture_weight)?
                .unwrap_or(defaults.mixture_weight),
            clamp: l.value("clamp", flags.clamp)?.unwrap_or(defaults.clamp),
            center_neighbors: l
                .value("center-neighbors", flags.center_neighbors)?
                .unwrap_or(defaults.center_neighbors),
            dual_base_only: l
                .value("dual-base-only", flags.dual_base_only)?
                .unwrap_or(defaults.dual_base_only),
        };
        hyper.validate()?;

        let sweep_defaults = SweepConfig::default();
        let fractions = match l.value::<String>("fractions", flags.fractions.clone())? {
            Some(raw) => parse_list(&raw, "fraction")?,
            None => sweep_defaults.fractions,
        };
        let variants = match l.value::<String>("variants", flags.variants.clone())? {
            Some(raw) => parse_list(&raw, "variant")?,
            None => Variant::ALL.into_iter().filter(|v| *v != Variant::Baseline).collect(),
        };
        let sweep = SweepConfig {
            fractions,
            variants,
            repetitions: l.value("reps", flags.reps)?.unwrap_or(sweep_defaults.repetitions),
            alpha: l.value("alpha", flags.alpha)?.unwrap_or(sweep_defaults.alpha),
            base_seed: seed,
            workers: l.value("workers", flags.workers)?.unwrap_or(sweep_defaults.workers),
        };
        let keywords = match l.value::<String>("keywords", flags.keywords.clone())? {
            Some(raw) => parse_list(&raw, "keyword")?,
            None => DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        };
        let variant = l
            .value::<String>("variant", flags.variant.clone())?
            .map(|v| v.parse())
            .transpose()?
            .unwrap_or(Variant::Baseline);
        let out = l
            .path("out", &flags.out)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(RunConfig {
            ratings: l.path("ratings", &flags.ratings),
            titles: l.path("titles", &flags.titles),
            wiki_index: l.path("wiki-index", &flags.wiki_index),
            categories: l.path("categories", &flags.categories),
            sim_file: l.path("sim-file", &flags.sim_file),
            aug_file: l.path("aug-file", &flags.aug_file),
            model: l.path("model", &flags.model),
            pairs: l.path("pairs", &flags.pairs),
            input: l.path("input", &flags.input),
            variant,
            fraction: l.value("fraction", flags.fraction)?,
            hyper,
            sweep,
            keywords,
            out,
        })
    }

    /// The named input, which must exist.
    pub fn input_path<'a>(&self, flag: &str, path: &'a Option<PathBuf>) -> Result<&'a Path> {
        let p = path
            .as_deref()
            .ok_or_else(|| Error::Argument(format!("--{flag} is required")))?;
        if !p.exists() {
            return Err(Error::Argument(format!("--{flag}: file not found: {}", p.display())));
        }
        Ok(p)
    }

    /// Optional input that must exist when given.
    pub fn optional_input<'a>(&self, flag: &str, path: &'a Option<PathBuf>) -> Result<Option<&'a Path>> {
        match path {
            Some(_) => self.input_path(flag, path).map(Some),
            None => Ok(None),
        }
    }

    /// Echo of every resolved setting, one `key=value` per line.
    pub fn echo(&self) -> String {
        let h = &self.hyper;
        let mut out = String::new();
        let _ = writeln!(out, "variant={}", self.variant);
        let _ = writeln!(out, "factors={}", h.factors);
        let _ = writeln!(out, "gamma={}", h.gamma);
        let _ = writeln!(out, "gamma-art={}", h.gamma_art);
        let _ = writeln!(out, "lambda={}", h.lambda);
        let _ = writeln!(out, "epochs={}", h.epochs);
        let _ = writeln!(out, "seed={}", h.seed);
        let _ = writeln!(out, "mixture-weight={}", h.mixture_weight);
        let _ = writeln!(out, "clamp={}", h.clamp);
        let _ = writeln!(out, "center-neighbors={}", h.center_neighbors);
        let _ = writeln!(out, "dual-base-only={}", h.dual_base_only);
        let fr: Vec<String> = self.sweep.fractions.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "fractions={}", fr.join(","));
        let _ = writeln!(out, "reps={}", self.sweep.repetitions);
        let _ = writeln!(out, "alpha={}", self.sweep.alpha);
        let _ = writeln!(out, "keywords={}", self.keywords.join(","));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# comment\nfactors = 8\nlambda=0.1\nratings = u.data\n").unwrap();
        let flags = Flags {
            config: Some(cfg),
            factors: Some(4),
            ..Flags::default()
        };
        let rc = RunConfig::resolve(&flags).unwrap();
        assert_eq!(rc.hyper.factors, 4);
        assert_eq!(rc.hyper.lambda, 0.1);
        assert_eq!(rc.hyper.epochs, 30);
        assert_eq!(rc.ratings.unwrap(), dir.path().join("u.data"));
    }

    #[test]
    fn ratio_sets_artificial_rate() {
        let flags = Flags {
            gamma: Some(0.01),
            gamma_art_ratio: Some(100.0),
            ..Flags::default()
        };
        let rc = RunConfig::resolve(&flags).unwrap();
        assert!((rc.hyper.gamma_art - 0.0001).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "learning_rate = 3\n").unwrap();
        let flags = Flags { config: Some(cfg), ..Flags::default() };
        assert!(RunConfig::resolve(&flags).is_err());
    }

    #[test]
    fn lists_parse() {
        let flags = Flags {
            fractions: Some("0.1, 0.5".into()),
            variants: Some("A,f".into()),
            ..Flags::default()
        };
        let rc = RunConfig::resolve(&flags).unwrap();
        assert_eq!(rc.sweep.fractions, vec![0.1, 0.5]);
        assert_eq!(rc.sweep.variants, vec![Variant::StepSize, Variant::SimLatent]);
    }
}
