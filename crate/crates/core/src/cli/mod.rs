//! The `wikisvd` command: linking, similarity, augmentation, training,
//! prediction and the sparsity sweep.

mod config;
mod persist;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{parse_config_file, Flags, RunConfig, OUT_DIR_ENV};
pub use persist::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION};

use crate::augment::{augment_dataset, augmentation_ratio, AugmentedDataset};
use crate::engine::{self, Neighborhood, TrainedModel};
use crate::eval::{self, EvalReport};
use crate::linker::{build_item_category_map, build_similarity_matrix, ItemCategoryMap, SimilarityMatrix, TitleIndex};
use crate::ratings::{self, IdMap, RatingsDataset};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "wikisvd", version, about = "SVD recommenders boosted with Wikipedia category similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Match item titles to index pages; writes item_categories.tsv and match_report.csv
    Link,
    /// Build the category-overlap similarity file similarity.tsv
    Sim,
    /// Build the artificial-ratings cache for one training split
    Augment,
    /// Train one model and save it as model.bin
    Train,
    /// Score `user \t item` pairs with a saved model
    Predict,
    /// Run the sparsity sweep; writes report.csv, report.txt and report_meta.txt
    Sweep,
    /// Re-render a saved report CSV as text tables
    Report,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status: 0 on success, 1 on a failed run, 2 on bad usage.
/// Failures print one `error: ...` line on stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid usage");
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    init_logging(cli.verbose);
    let mut stdout = io::stdout().lock();
    match dispatch(cli.command, &cli.flags, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn dispatch(command: Command, flags: &Flags, out: &mut dyn Write) -> Result<()> {
    let rc = RunConfig::resolve(flags)?;
    match command {
        Command::Link => cmd_link(&rc, out),
        Command::Sim => cmd_sim(&rc, out),
        Command::Augment => cmd_augment(&rc, out),
        Command::Train => cmd_train(&rc, out),
        Command::Predict => cmd_predict(&rc, out),
        Command::Sweep => cmd_sweep(&rc, out),
        Command::Report => cmd_report(&rc, out),
    }
}

fn write_out(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn load_ratings(rc: &RunConfig) -> Result<RatingsDataset> {
    ratings::load_movielens_ratings(rc.input_path("ratings", &rc.ratings)?)
}

fn link(rc: &RunConfig, items: Option<&IdMap>) -> Result<ItemCategoryMap> {
    let titles = ratings::load_movielens_titles(rc.input_path("titles", &rc.titles)?)?;
    let index = TitleIndex::load(rc.input_path("wiki-index", &rc.wiki_index)?)?;
    let mut map = build_item_category_map(&titles.titles, &index, &rc.keywords);
    map.record_untitled(titles.untitled.iter().copied());
    if let Some(items) = items {
        let missing = (0..items.len() as u32)
            .map(|i| items.to_external(i))
            .filter(|id| !titles.titles.contains_key(id));
        map.record_untitled(missing);
    }
    Ok(map)
}

fn cmd_link(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dataset = match rc.optional_input("ratings", &rc.ratings)? {
        Some(p) => Some(ratings::load_movielens_ratings(p)?),
        None => None,
    };
    let map = link(rc, dataset.as_ref().map(|d| d.items().as_ref()))?;
    let cats = write_out(&rc.out, "item_categories.tsv", map.to_tsv())?;
    let report = write_out(&rc.out, "match_report.csv", map.report_csv())?;
    emit(
        out,
        &format!(
            "matched {} of {} items ({:.1}%)\nwrote {}\nwrote {}\n",
            map.entries.len(),
            map.match_report.len(),
            100.0 * map.match_rate(),
            cats.display(),
            report.display()
        ),
    )
}

fn cmd_sim(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dataset = match rc.optional_input("ratings", &rc.ratings)? {
        Some(p) => Some(ratings::load_movielens_ratings(p)?),
        None => None,
    };
    let map = match rc.optional_input("categories", &rc.categories)? {
        Some(p) => ItemCategoryMap::load_tsv(p)?,
        None => link(rc, dataset.as_ref().map(|d| d.items().as_ref()))?,
    };
    let items = match &dataset {
        Some(d) => d.items().as_ref().clone(),
        None => IdMap::from_external(map.match_report.keys().copied()),
    };
    let sim = build_similarity_matrix(&map, &items);
    let path = write_out(&rc.out, "similarity.tsv", sim.to_tsv(&items))?;
    emit(
        out,
        &format!("{} similar pairs over {} items\nwrote {}\n", sim.n_pairs(), items.len(), path.display()),
    )
}

/// Similarity from `--sim-file`, else built from `--categories`, else from
/// `--titles` plus `--wiki-index`; `None` when none of these is given.
fn load_sim(rc: &RunConfig, dataset: &RatingsDataset) -> Result<Option<SimilarityMatrix>> {
    if let Some(p) = rc.optional_input("sim-file", &rc.sim_file)? {
        return SimilarityMatrix::load_tsv(p, dataset.items()).map(Some);
    }
    let map = match rc.optional_input("categories", &rc.categories)? {
        Some(p) => ItemCategoryMap::load_tsv(p)?,
        None if rc.titles.is_some() && rc.wiki_index.is_some() => link(rc, Some(dataset.items().as_ref()))?,
        None => return Ok(None),
    };
    Ok(Some(build_similarity_matrix(&map, dataset.items())))
}

/// Training ratings and, when `--fraction` is set, the held-out test set.
fn training_data(rc: &RunConfig, dataset: RatingsDataset) -> Result<(RatingsDataset, Option<RatingsDataset>)> {
    match rc.fraction {
        Some(f) => {
            let split = ratings::split_per_user(&dataset, f, rc.hyper.seed)?;
            Ok((split.train, Some(split.test)))
        }
        None => Ok((dataset, None)),
    }
}

fn cmd_augment(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dataset = load_ratings(rc)?;
    let fraction = rc
        .fraction
        .ok_or_else(|| Error::Argument("--fraction is required".into()))?;
    let sim = load_sim(rc, &dataset)?
        .ok_or_else(|| Error::Argument("--sim-file (or --categories, or --titles with --wiki-index) is required".into()))?;
    let split = ratings::split_per_user(&dataset, fraction, rc.hyper.seed)?;
    let aug = augment_dataset(&split.train, &sim)?;
    fs::create_dir_all(&rc.out).map_err(|e| Error::io(&rc.out, e))?;
    let path = rc.out.join("artificial.tsv");
    aug.write_cache(&path, fraction, rc.hyper.seed)?;
    emit(
        out,
        &format!(
            "{} true, {} artificial ratings (ratio {:.2})\nwrote {}\n",
            split.train.len(),
            aug.artificial().len(),
            augmentation_ratio(&aug)?,
            path.display()
        ),
    )
}

fn cmd_train(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dataset = load_ratings(rc)?;
    let sim = load_sim(rc, &dataset)?;
    let variant = rc.variant;
    if variant.uses_similarity() && sim.is_none() {
        return Err(Error::Argument(format!(
            "variant {variant} ({}) requires a similarity matrix (--sim-file, --categories or --titles with --wiki-index)",
            variant.description()
        )));
    }
    let (train, test) = training_data(rc, dataset)?;
    let aug = if variant.uses_artificial() {
        match (rc.optional_input("aug-file", &rc.aug_file)?, &sim) {
            (Some(p), _) => Some(AugmentedDataset::read_cache(p, &train)?),
            (None, Some(s)) => Some(augment_dataset(&train, s)?),
            (None, None) => {
                return Err(Error::Argument(format!(
                    "variant {variant} ({}) requires artificial ratings (--aug-file or --sim-file)",
                    variant.description()
                )))
            }
        }
    } else {
        None
    };
    let model = engine::train(variant, &train, aug.as_ref(), sim.as_ref(), &rc.hyper)?;
    fs::create_dir_all(&rc.out).map_err(|e| Error::io(&rc.out, e))?;
    let path = rc.out.join("model.bin");
    save_model(&model, &path)?;

    let mut text = String::new();
    let _ = writeln!(text, "variant {} ({})", variant, variant.description());
    for (epoch, loss) in model.loss_trace.iter().enumerate() {
        let _ = writeln!(text, "epoch {:>3}  train rmse {loss:.6}", epoch + 1);
    }
    if let Some(test) = test {
        let hood = Neighborhood::new(&train, sim.as_ref().filter(|_| variant.uses_similarity()))?;
        let pairs: Vec<(f64, f64)> = test
            .records()
            .iter()
            .map(|r| engine::predict(&model, r.user, r.item, &hood).map(|p| (p, r.value)))
            .collect::<Result<_>>()?;
        let _ = writeln!(
            text,
            "test rmse {:.6}  mae {:.6}  ({} ratings)",
            eval::rmse(&pairs)?,
            eval::mae(&pairs)?,
            pairs.len()
        );
    }
    let _ = writeln!(text, "wrote {}", path.display());
    emit(out, &text)
}

fn read_pairs(path: &Path) -> Result<Vec<(u32, u32)>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(io::BufReader::new(io::stdin()))
    } else {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Box::new(io::BufReader::new(f))
    };
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split_whitespace();
        let parsed = (|| Some((f.next()?.parse().ok()?, f.next()?.parse().ok()?)))();
        pairs.push(parsed.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg: "expected `user \\t item`".into(),
        })?);
    }
    Ok(pairs)
}

fn check_model_inputs(model: &TrainedModel, train: &RatingsDataset, sim: Option<&SimilarityMatrix>) -> Result<()> {
    if model.n_users() != train.n_users() || model.n_items() != train.n_items() {
        return Err(Error::Argument(format!(
            "model is {}x{} but the ratings are {}x{}",
            model.n_users(),
            model.n_items(),
            train.n_users(),
            train.n_items()
        )));
    }
    if model.variant.uses_similarity() {
        if model.train_ref != train.fingerprint() {
            return Err(Error::Argument(
                "training ratings differ from those the model was fitted on (check --fraction/--seed)".into(),
            ));
        }
        match sim {
            Some(s) if s.fingerprint() == model.sim_ref => {}
            Some(_) => return Err(Error::Argument("similarity file differs from the one used in training".into())),
            None => {
                return Err(Error::Argument(format!(
                    "variant {} requires --sim-file for prediction",
                    model.variant
                )))
            }
        }
    }
    Ok(())
}

fn cmd_predict(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let model = load_model(rc.input_path("model", &rc.model)?)?;
    let dataset = load_ratings(rc)?;
    let sim = load_sim(rc, &dataset)?;
    let pairs_path = rc
        .pairs
        .as_deref()
        .ok_or_else(|| Error::Argument("--pairs is required".into()))?;
    if pairs_path != Path::new("-") {
        rc.input_path("pairs", &rc.pairs)?;
    }
    let pairs = read_pairs(pairs_path)?;
    let rc_for_split = RunConfig {
        hyper: engine::Hyperparams { seed: model.hyper.seed, ..rc.hyper },
        ..rc.clone()
    };
    let (train, _) = training_data(&rc_for_split, dataset)?;
    check_model_inputs(&model, &train, sim.as_ref())?;
    let hood = Neighborhood::new(&train, sim.as_ref().filter(|_| model.variant.uses_similarity()))?;
    let mut text = String::new();
    for (u_ext, i_ext) in pairs {
        let u = train
            .users()
            .to_internal(u_ext)
            .ok_or_else(|| Error::Argument(format!("unknown user {u_ext}")))?;
        let i = train
            .items()
            .to_internal(i_ext)
            .ok_or_else(|| Error::Argument(format!("unknown item {i_ext}")))?;
        let _ = writeln!(text, "{u_ext}\t{i_ext}\t{}", engine::predict(&model, u, i, &hood)?);
    }
    emit(out, &text)
}

fn cmd_sweep(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dataset = load_ratings(rc)?;
    let sim = load_sim(rc, &dataset)?;
    let report = eval::run_sweep(&dataset, sim.as_ref(), &rc.sweep, &rc.hyper)?;
    write_out(&rc.out, "report.csv", report.to_csv())?;
    write_out(&rc.out, "report_meta.txt", report.metadata_text())?;
    let table = report.to_table();
    let path = write_out(&rc.out, "report.txt", &table)?;
    emit(out, &format!("{table}\nwrote {}\n", path.display()))
}

fn cmd_report(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let input = rc.input_path("input", &rc.input)?;
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mut report = EvalReport::from_csv(&text, rc.sweep.alpha)?;
    let meta = input.with_file_name("report_meta.txt");
    if let Ok(m) = fs::read_to_string(&meta) {
        report.metadata = EvalReport::parse_metadata(&m);
        if let Some(a) = report.metadata.iter().find(|(k, _)| k == "alpha").and_then(|(_, v)| v.parse().ok()) {
            report.alpha = a;
        }
    }
    emit(out, &report.to_table())
}
