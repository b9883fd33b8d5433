use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use imputebench::amputation::{ampute_mcar, AmputationMask};
use imputebench::dataset::{load_csv, minmax_scale, write_csv, write_csv_to, ColumnKind, Dataset, LoadOptions};
use imputebench::impute::{impute, ImputeParams, InterpolationOrder, Method};
use imputebench::metrics::{column_errors, imputation_error};
use imputebench::pipeline::{
    emit_report, read_records_csv, run_ordering, run_ranking, ExperimentConfig, ExperimentReport, ReportFormat,
};

/// Imputation benchmark toolkit: amputation, imputation, scoring and the
/// ranking and ordering studies.
#[derive(Parser, Debug)]
#[command(name = "imputebench", version)]
struct Cli {
    /// Experiment config (TOML); also supplies method parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for amputation and stochastic imputers. For `rank` and
    /// `ordering` it replaces the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (ampute, impute) or directory (rank, ordering, report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report and score format.
    #[arg(long, global = true, default_value = "json")]
    format: ReportFormat,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Binary target column; never amputed or used as a predictor.
    #[arg(long)]
    target: Option<String>,
    /// Cell texts read as missing (repeatable). Defaults to "", "NA", "?".
    #[arg(long = "missing-marker")]
    missing_markers: Vec<String>,
    /// Column kind override, NAME=KIND (repeatable).
    #[arg(long = "kind", value_parser = parse_kind)]
    kinds: Vec<(String, ColumnKind)>,
}

fn parse_kind(s: &str) -> std::result::Result<(String, ColumnKind), String> {
    let (name, kind) = s.split_once('=').ok_or("expected NAME=KIND")?;
    Ok((
        name.to_string(),
        kind.parse().map_err(|e: imputebench::Error| e.to_string())?,
    ))
}

impl DataArgs {
    fn load(&self, path: &Path) -> Result<Dataset> {
        let mut type_hints: HashMap<String, ColumnKind> = self.kinds.iter().cloned().collect();
        if let Some(t) = &self.target {
            type_hints.insert(t.clone(), ColumnKind::BinaryTarget);
        }
        let opts = LoadOptions {
            missing_markers: (!self.missing_markers.is_empty()).then(|| self.missing_markers.clone()),
            type_hints,
        };
        load_csv(path, &opts).with_context(|| format!("reading {}", path.display()))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Blank a fraction of feature cells completely at random.
    Ampute {
        #[arg(long = "in")]
        input: PathBuf,
        /// Fraction of feature cells to blank, in [0, 1).
        #[arg(long)]
        rate: f64,
        /// Mask sidecar path; defaults to <out stem>.mask.csv.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fill missing cells with one method.
    Impute {
        #[arg(long)]
        method: Method,
        #[arg(long = "in")]
        input: PathBuf,
        /// Interpolation order (linear, quadratic, cubic).
        #[arg(long)]
        order: Option<InterpolationOrder>,
        /// Neighbour count for knn.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Score an imputation against the original values of a mask.
    Evaluate {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        imputed: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run the imputer ranking study from --config.
    Rank,
    /// Run the selection/imputation ordering study from --config.
    Ordering,
    /// Recompute aggregates from report.json or records.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match e.downcast_ref::<imputebench::Error>() {
        Some(err) if err.is_usage_error() => 1,
        Some(_) => 2,
        None => 3,
    }
}

/// A command-line misuse that clap cannot catch.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    cli.config
        .as_deref()
        .map(|p| Ok(ExperimentConfig::load(p)?))
        .transpose()
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Ampute {
            input,
            rate,
            mask,
            data,
        } => {
            let out = cli.out.clone().ok_or_else(|| usage("ampute needs --out"))?;
            let ds = data.load(input)?;
            let (holey, m) = ampute_mcar(&ds, *rate, seed)?;
            write_csv(&holey, &out)?;
            let mask_path = mask.clone().unwrap_or_else(|| out.with_extension("mask.csv"));
            let file =
                std::fs::File::create(&mask_path).with_context(|| format!("creating {}", mask_path.display()))?;
            m.write_csv(&ds, file)?;
            eprintln!("blanked {} cells; mask written to {}", m.len(), mask_path.display());
        }
        Command::Impute {
            method,
            input,
            order,
            k,
            data,
        } => {
            let mut params: ImputeParams = config.map(|c| c.params).unwrap_or_default();
            if let Some(o) = order {
                params.interpolation_order = *o;
            }
            if let Some(k) = k {
                params.knn.k = *k;
            }
            let ds = data.load(input)?;
            let filled = impute_raw(&ds, *method, &params, seed)?;
            match &cli.out {
                Some(path) => write_csv(&filled, path)?,
                None => write_csv_to(&filled, std::io::stdout().lock())?,
            }
        }
        Command::Evaluate {
            original,
            imputed,
            mask,
            data,
        } => {
            let original = data.load(original)?;
            let imputed = data.load(imputed)?;
            let file = std::fs::File::open(mask).with_context(|| format!("opening {}", mask.display()))?;
            let mask = AmputationMask::read_csv(&original, file)?;
            print_scores(&original, &imputed, &mask, cli.format)?;
        }
        Command::Rank | Command::Ordering => {
            let mut config = config.ok_or_else(|| usage("this command needs --config"))?;
            if let Some(s) = cli.seed {
                config.seeds = vec![s];
            }
            let (report, default_dir) = if matches!(cli.command, Command::Rank) {
                (run_ranking(&config)?, "out/rank")
            } else {
                (run_ordering(&config)?, "out/ordering")
            };
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(default_dir));
            for f in emit_report(&report, cli.format, &dir)? {
                eprintln!("wrote {}", f.display());
            }
            print_summary(&report)?;
        }
        Command::Report { input } => {
            let report = if input.extension().is_some_and(|e| e == "csv") {
                read_records_csv(input)?
            } else {
                let mut r = ExperimentReport::load_json(input)?;
                r.summary = imputebench::pipeline::aggregate(&r);
                r
            };
            if let Some(dir) = &cli.out {
                for f in emit_report(&report, cli.format, dir)? {
                    eprintln!("wrote {}", f.display());
                }
            }
            print_summary(&report)?;
        }
    }
    Ok(())
}

/// Imputes in min–max scaled space and maps the result back to raw units.
/// Observed cells are copied from the input so they survive the round trip
/// bit for bit.
fn impute_raw(ds: &Dataset, method: Method, params: &ImputeParams, seed: u64) -> Result<Dataset> {
    let (scaled, scaling) = minmax_scale(ds);
    let (filled, _) = impute(&scaled, method, params, seed)?;
    let raw = scaling.invert(&filled)?;
    let p = ds.col_count();
    let mut cells = raw.cells().to_vec();
    for (i, cell) in ds.cells().iter().enumerate() {
        match cell {
            Some(v) => cells[i] = Some(*v),
            None => {
                let col = ds.column(i % p);
                cells[i] = cells[i].map(|v| col.snap(v));
            }
        }
    }
    Ok(Dataset::new(ds.name(), ds.columns().to_vec(), cells)?)
}

fn print_scores(original: &Dataset, imputed: &Dataset, mask: &AmputationMask, format: ReportFormat) -> Result<()> {
    if original.col_count() != imputed.col_count() || original.row_count() != imputed.row_count() {
        bail!(imputebench::Error::Shape(
            "original and imputed datasets differ in shape".into()
        ));
    }
    // scores are computed on the original's min–max scale
    let (scaled_original, scaling) = minmax_scale(original);
    let scaled_imputed = scaling.apply(imputed)?;
    let truth: Vec<f64> = mask
        .coords
        .iter()
        .map(|&(r, c)| {
            scaled_original.get(r, c).ok_or(imputebench::Error::Shape(format!(
                "original is missing masked cell ({r}, {c})"
            )))
        })
        .collect::<imputebench::Result<_>>()?;
    let scaled_mask = AmputationMask {
        originals: truth,
        ..mask.clone()
    };
    let scores = imputation_error(&scaled_original, &scaled_imputed, &scaled_mask)?;
    let per_column = column_errors(&scaled_original, &scaled_imputed, &scaled_mask)?;
    let mut out = std::io::stdout().lock();
    match format {
        ReportFormat::Json => {
            let doc = serde_json::json!({ "rmse": scores.rmse, "mae": scores.mae, "n_cells": scores.n_cells, "columns": per_column });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
        ReportFormat::Csv => {
            writeln!(out, "column,rmse,mae,n_cells")?;
            writeln!(out, "*,{},{},{}", scores.rmse, scores.mae, scores.n_cells)?;
            for c in per_column {
                writeln!(
                    out,
                    "{},{},{},{}",
                    c.column, c.scores.rmse, c.scores.mae, c.scores.n_cells
                )?;
            }
        }
    }
    Ok(())
}

fn print_summary(report: &ExperimentReport) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for o in &report.summary.orderings {
        let names: Vec<&str> = o.methods.iter().map(|m| m.as_str()).collect();
        writeln!(out, "{} rate={} {}: {}", o.dataset, o.rate, o.metric, names.join(" < "))?;
    }
    for r in &report.summary.ratings {
        writeln!(
            out,
            "{} rate={} {}: impute-first wins {}/4",
            r.dataset, r.rate, r.method, r.wins
        )?;
    }
    Ok(())
}
