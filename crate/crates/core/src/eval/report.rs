use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::metrics::improvement_pct;
use super::stats::paired_t_test;
use super::sweep::{Cell, SweepConfig};
use crate::engine::{Hyperparams, Variant};
use crate::linker::SimilarityMatrix;
use crate::ratings::RatingsDataset;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "sparsity,variant,seed,rmse,mae,improvement_rmse_pct,improvement_mae_pct,t,p,significant,status,split";

/// Aggregated results for one (sparsity level, variant).
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub sparsity: f64,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    /// Per-seed test metrics; NaN where the variant failed on that seed.
    pub rmse: Vec<f64>,
    pub mae: Vec<f64>,
    pub split_checksums: Vec<u64>,
    pub mean_rmse: f64,
    pub mean_mae: f64,
    pub improvement_rmse_pct: f64,
    pub improvement_mae_pct: f64,
    /// Paired test of baseline RMSE minus variant RMSE over seeds; NaN when
    /// fewer than two seeds pair up.
    pub t: f64,
    pub p: f64,
    pub significant: bool,
    /// `ok`, or the first failure message.
    pub status: String,
}

/// Sweep results ordered by sparsity (descending), baseline first in each
/// level, plus provenance metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub alpha: f64,
    pub metadata: Vec<(String, String)>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn summarize(
    cells: &[Cell],
    dataset: &RatingsDataset,
    sim: Option<&SimilarityMatrix>,
    config: &SweepConfig,
    hyper: &Hyperparams,
) -> EvalReport {
    let mut levels: Vec<f64> = config.fractions.clone();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rows = Vec::new();
    for &fraction in &levels {
        let level: Vec<&Cell> = cells.iter().filter(|c| c.fraction == fraction).collect();
        let sparsity = level.first().map_or(f64::NAN, |c| c.sparsity);
        let metrics_of = |variant: Variant| -> (Vec<f64>, Vec<f64>, Option<String>) {
            let mut r = Vec::new();
            let mut m = Vec::new();
            let mut failure = None;
            for cell in &level {
                match cell.outcomes.iter().find(|o| o.variant == variant).map(|o| &o.result) {
                    Some(Ok((a, b))) => {
                        r.push(*a);
                        m.push(*b);
                    }
                    Some(Err(e)) => {
                        failure.get_or_insert_with(|| e.clone());
                        r.push(f64::NAN);
                        m.push(f64::NAN);
                    }
                    None => {
                        r.push(f64::NAN);
                        m.push(f64::NAN);
                    }
                }
            }
            (r, m, failure)
        };
        let (base_rmse, base_mae, _) = metrics_of(Variant::Baseline);
        for variant in config.run_order() {
            let (rmse, mae, failure) = metrics_of(variant);
            let paired: Vec<usize> = (0..rmse.len())
                .filter(|&k| rmse[k].is_finite() && base_rmse[k].is_finite())
                .collect();
            let pick = |v: &[f64]| paired.iter().map(|&k| v[k]).collect::<Vec<f64>>();
            let (v_rmse, v_mae, b_rmse, b_mae) = (pick(&rmse), pick(&mae), pick(&base_rmse), pick(&base_mae));
            let (mean_rmse, mean_mae) = if paired.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (mean(&v_rmse), mean(&v_mae))
            };
            let improvement = |b: &[f64], v: f64| {
                if b.is_empty() {
                    f64::NAN
                } else {
                    improvement_pct(mean(b), v).unwrap_or(f64::NAN)
                }
            };
            let (t, p, significant) = if variant == Variant::Baseline {
                (0.0, 1.0, false)
            } else {
                match paired_t_test(&b_rmse, &v_rmse, config.alpha) {
                    Ok(r) => (r.t, r.p, r.significant),
                    Err(_) => (f64::NAN, f64::NAN, false),
                }
            };
            rows.push(ReportRow {
                sparsity,
                variant,
                seeds: level.iter().map(|c| c.seed).collect(),
                rmse,
                mae,
                split_checksums: level.iter().map(|c| c.split_checksum).collect(),
                mean_rmse,
                mean_mae,
                improvement_rmse_pct: if variant == Variant::Baseline { 0.0 } else { improvement(&b_rmse, mean_rmse) },
                improvement_mae_pct: if variant == Variant::Baseline { 0.0 } else { improvement(&b_mae, mean_mae) },
                t,
                p,
                significant,
                status: failure.map_or_else(|| "ok".to_string(), |e| format!("failed: {e}")),
            });
        }
    }
    EvalReport {
        rows,
        alpha: config.alpha,
        metadata: metadata(dataset, sim, config, hyper),
    }
}

fn metadata(
    dataset: &RatingsDataset,
    sim: Option<&SimilarityMatrix>,
    config: &SweepConfig,
    hyper: &Hyperparams,
) -> Vec<(String, String)> {
    let fractions: Vec<String> = config.fractions.iter().map(f64::to_string).collect();
    let variants: Vec<&str> = config.run_order().iter().map(|v| v.tag()).collect();
    [
        ("engine", format!("wikisvd {}", env!("CARGO_PKG_VERSION"))),
        ("dataset", format!("{:016x}", dataset.fingerprint())),
        ("users", dataset.n_users().to_string()),
        ("items", dataset.n_items().to_string()),
        ("ratings", dataset.len().to_string()),
        ("similarity", sim.map_or("none".into(), |s| format!("{:016x} ({} pairs)", s.fingerprint(), s.n_pairs()))),
        ("fractions", fractions.join(";")),
        ("variants", variants.join(";")),
        ("reps", config.repetitions.to_string()),
        ("seed", config.base_seed.to_string()),
        ("alpha", config.alpha.to_string()),
        ("factors", hyper.factors.to_string()),
        ("gamma", hyper.gamma.to_string()),
        ("gamma-art", hyper.gamma_art.to_string()),
        ("lambda", hyper.lambda.to_string()),
        ("epochs", hyper.epochs.to_string()),
        ("mixture-weight", hyper.mixture_weight.to_string()),
        ("clamp", hyper.clamp.to_string()),
        ("center-neighbors", hyper.center_neighbors.to_string()),
        ("dual-base-only", hyper.dual_base_only.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

impl EvalReport {
    pub fn row(&self, sparsity_rank: usize, variant: Variant) -> Option<&ReportRow> {
        let levels = self.levels();
        let s = *levels.get(sparsity_rank)?;
        self.rows.iter().find(|r| r.sparsity == s && r.variant == variant)
    }

    /// Distinct sparsity levels, most sparse first.
    pub fn levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.sparsity) {
                out.push(r.sparsity);
            }
        }
        out
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut out: Vec<Variant> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.variant) {
                out.push(r.variant);
            }
        }
        out
    }

    /// One line per seed, then a `mean` line carrying the t-test, for each
    /// (sparsity, variant).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let base = self
                .rows
                .iter()
                .find(|r| r.sparsity == row.sparsity && r.variant == Variant::Baseline);
            for (k, seed) in row.seeds.iter().enumerate() {
                let imp = |mine: f64, theirs: Option<f64>| match theirs {
                    Some(b) if mine.is_finite() => improvement_pct(b, mine).map(num).unwrap_or_default(),
                    _ => String::new(),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},,,,{},{:016x}",
                    row.sparsity,
                    row.variant.tag(),
                    seed,
                    num(row.rmse[k]),
                    num(row.mae[k]),
                    imp(row.rmse[k], base.map(|b| b.rmse[k])),
                    imp(row.mae[k], base.map(|b| b.mae[k])),
                    if row.rmse[k].is_finite() { "ok" } else { "failed" },
                    row.split_checksums[k],
                );
            }
            let _ = writeln!(
                out,
                "{},{},mean,{},{},{},{},{},{},{},{},",
                row.sparsity,
                row.variant.tag(),
                num(row.mean_rmse),
                num(row.mean_mae),
                num(row.improvement_rmse_pct),
                num(row.improvement_mae_pct),
                num(row.t),
                num(row.p),
                row.significant,
                row.status.replace([',', '\n'], ";"),
            );
        }
        out
    }

    /// Rebuilds a report from [`EvalReport::to_csv`] output.
    pub fn from_csv(text: &str, alpha: f64) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::Format("report CSV header mismatch".into()));
        }
        let parse_f = |s: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| Error::Format(format!("bad number {s:?}")))
            }
        };
        let mut rows: Vec<ReportRow> = Vec::new();
        let mut pending: BTreeMap<(u64, Variant), ReportRow> = BTreeMap::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 12 {
                return Err(Error::Format(format!("report line has {} fields: {line}", f.len())));
            }
            let sparsity = parse_f(f[0])?;
            let variant: Variant = f[1].parse()?;
            let key = (sparsity.to_bits(), variant);
            let row = pending.entry(key).or_insert_with(|| ReportRow {
                sparsity,
                variant,
                seeds: Vec::new(),
                rmse: Vec::new(),
                mae: Vec::new(),
                split_checksums: Vec::new(),
                mean_rmse: f64::NAN,
                mean_mae: f64::NAN,
                improvement_rmse_pct: f64::NAN,
                improvement_mae_pct: f64::NAN,
                t: f64::NAN,
                p: f64::NAN,
                significant: false,
                status: String::new(),
            });
            if f[2] == "mean" {
                row.mean_rmse = parse_f(f[3])?;
                row.mean_mae = parse_f(f[4])?;
                row.improvement_rmse_pct = parse_f(f[5])?;
                row.improvement_mae_pct = parse_f(f[6])?;
                row.t = parse_f(f[7])?;
                row.p = parse_f(f[8])?;
                row.significant = f[9] == "true";
                row.status = f[10].to_string();
                rows.push(pending.remove(&key).expect("inserted above"));
            } else {
                row.seeds.push(f[2].parse().map_err(|_| Error::Format(format!("bad seed {:?}", f[2])))?);
                row.rmse.push(parse_f(f[3])?);
                row.mae.push(parse_f(f[4])?);
                row.split_checksums.push(
                    u64::from_str_radix(f[11], 16).map_err(|_| Error::Format(format!("bad split id {:?}", f[11])))?,
                );
            }
        }
        if !pending.is_empty() {
            return Err(Error::Format("report CSV ends without summary lines".into()));
        }
        Ok(EvalReport { rows, alpha, metadata: Vec::new() })
    }

    /// `key=value` lines.
    pub fn metadata_text(&self) -> String {
        self.metadata.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse_metadata(text: &str) -> Vec<(String, String)> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect()
    }

    /// Text tables laid out like the published comparison: one row per
    /// sparsity level, one column per variant.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let variants: Vec<Variant> = self.variants().into_iter().filter(|v| *v != Variant::Baseline).collect();
        let levels = self.levels();
        let section = |out: &mut String, title: &str, cell: &dyn Fn(&ReportRow) -> String, with_base: bool| {
            let _ = writeln!(out, "\n{title}");
            let cols: Vec<Variant> = if with_base {
                std::iter::once(Variant::Baseline).chain(variants.iter().copied()).collect()
            } else {
                variants.clone()
            };
            let _ = write!(out, "{:<12}", "Sparsity");
            for v in &cols {
                let _ = write!(out, "{:>30}", v.description());
            }
            out.push('\n');
            for s in &levels {
                let _ = write!(out, "{:<12.6}", s);
                for v in &cols {
                    let text = self
                        .rows
                        .iter()
                        .find(|r| r.sparsity == *s && r.variant == *v)
                        .map_or_else(|| "-".to_string(), cell);
                    let _ = write!(out, "{text:>30}");
                }
                out.push('\n');
            }
        };
        let alpha = self.alpha;
        let imp_cell = move |r: &ReportRow, value: f64, star: bool| {
            if r.status != "ok" {
                return "failed".to_string();
            }
            let value = if value.abs() < 0.005 { 0.0 } else { value };
            format!("{value:.2}%{}", if star && r.significant { "*" } else { " " })
        };
        section(
            &mut out,
            &format!("Improvement in % of test RMSE over the baseline (* = paired t-test p < {alpha})"),
            &|r| imp_cell(r, r.improvement_rmse_pct, true),
            false,
        );
        section(
            &mut out,
            "Improvement in % of test MAE over the baseline",
            &|r| imp_cell(r, r.improvement_mae_pct, false),
            false,
        );
        section(&mut out, "Mean test RMSE", &|r| format!("{:.4}", r.mean_rmse), true);
        section(&mut out, "Mean test MAE", &|r| format!("{:.4}", r.mean_mae), true);
        out
    }
}
