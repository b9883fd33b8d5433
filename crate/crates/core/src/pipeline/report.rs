use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DatasetRecipe, ExperimentConfig, ExperimentKind};
use super::{ARM_IMPUTE_FIRST, ARM_SELECT_FIRST};
use crate::error::{Error, Result};
use crate::impute::Method;
use crate::metrics::ClassificationScores;

/// Bumped whenever a record or aggregate field changes meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub dataset: String,
    pub rate: f64,
    pub method: Method,
    pub seed: u64,
    pub rmse: f64,
    pub mae: f64,
    pub n_cells: usize,
    #[serde(default)]
    pub sweeps_returned: Option<usize>,
    #[serde(default)]
    pub ridge_fallbacks: usize,
    pub wall_ms: f64,
    pub params: serde_json::Value,
}

impl RankingRecord {
    pub(super) fn sort_key(&self) -> (&str, f64, Method, u64) {
        (&self.dataset, self.rate, self.method, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingRecord {
    pub dataset: String,
    pub rate: f64,
    pub method: Method,
    pub seed: u64,
    pub arm: String,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub selected: Vec<String>,
    pub wall_ms: f64,
}

impl OrderingRecord {
    #[allow(clippy::too_many_arguments)]
    pub(super) fn new(
        recipe: &DatasetRecipe,
        rate: f64,
        method: Method,
        seed: u64,
        arm: &str,
        scores: ClassificationScores,
        selected: Vec<String>,
        start: Instant,
    ) -> Self {
        OrderingRecord {
            dataset: recipe.name.clone(),
            rate,
            method,
            seed,
            arm: arm.to_string(),
            recall: scores.recall,
            precision: scores.precision,
            f1: scores.f1,
            accuracy: scores.accuracy,
            selected,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }

    pub(super) fn sort_key(&self) -> (&str, f64, Method, u64, &str) {
        (&self.dataset, self.rate, self.method, self.seed, &self.arm)
    }

    pub fn scores(&self) -> [f64; 4] {
        [self.recall, self.precision, self.f1, self.accuracy]
    }
}

/// Mean and sample standard deviation of one metric over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub rate: f64,
    pub method: Method,
    #[serde(default)]
    pub arm: Option<String>,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Methods sorted by ascending mean error for one (dataset, rate, metric).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOrdering {
    pub dataset: String,
    pub rate: f64,
    pub metric: String,
    pub methods: Vec<Method>,
}

/// How many of the four classification metrics the impute-first arm wins
/// (strictly higher seed mean) for one (dataset, rate, method).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmRating {
    pub dataset: String,
    pub rate: f64,
    pub method: Method,
    pub wins: usize,
    /// Seed-mean difference, impute-first minus select-first, per metric.
    pub deltas: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub aggregates: Vec<Aggregate>,
    pub orderings: Vec<MethodOrdering>,
    pub ratings: Vec<ArmRating>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub software_version: String,
    pub kind: ExperimentKind,
    pub config: serde_json::Value,
    /// Conventions that affect how the numbers should be read.
    pub conventions: Vec<String>,
    #[serde(default)]
    pub ranking: Vec<RankingRecord>,
    #[serde(default)]
    pub ordering: Vec<OrderingRecord>,
    pub summary: Summary,
}

const RANKING_CONVENTIONS: &[&str] = &[
    "errors are computed over the amputed cells on min-max scaled data",
    "categorical cells contribute a 0/1 mismatch distance",
    "mice is scored on the per-cell mean (mode for categorical) over chains",
];

const ORDERING_CONVENTIONS: &[&str] = &[
    "positive class is 1",
    "recall and precision are 0 when their denominator is 0; f1 is 0 when both are 0",
    "select-first runs feature selection on complete-case training rows",
    "classifier scores come from a single stratified train/test split per seed",
];

impl ExperimentReport {
    fn base(config: &ExperimentConfig, kind: ExperimentKind, conventions: &[&str]) -> Self {
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            kind,
            config: config.to_json(),
            conventions: conventions.iter().map(|s| s.to_string()).collect(),
            ranking: Vec::new(),
            ordering: Vec::new(),
            summary: Summary::default(),
        }
    }

    pub fn ranking(config: &ExperimentConfig, records: Vec<RankingRecord>) -> Self {
        let mut r = Self::base(config, ExperimentKind::Ranking, RANKING_CONVENTIONS);
        r.ranking = records;
        r.summary = aggregate(&r);
        r
    }

    pub fn ordering(config: &ExperimentConfig, records: Vec<OrderingRecord>) -> Self {
        let mut r = Self::base(config, ExperimentKind::Ordering, ORDERING_CONVENTIONS);
        r.ordering = records;
        r.summary = aggregate(&r);
        r
    }

    pub fn record_count(&self) -> usize {
        self.ranking.len() + self.ordering.len()
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Mean-over-seeds aggregate for a ranking or ordering cell.
    pub fn mean(
        &self,
        dataset: &str,
        rate: f64,
        method: Method,
        arm: Option<&str>,
        metric: &str,
    ) -> Option<&Aggregate> {
        self.summary.aggregates.iter().find(|a| {
            a.dataset == dataset
                && a.rate == rate
                && a.method == method
                && a.arm.as_deref() == arm
                && a.metric == metric
        })
    }

    pub fn ordering_for(&self, dataset: &str, rate: f64, metric: &str) -> Option<&MethodOrdering> {
        self.summary
            .orderings
            .iter()
            .find(|o| o.dataset == dataset && o.rate == rate && o.metric == metric)
    }

    pub fn rating_for(&self, dataset: &str, rate: f64, method: Method) -> Option<&ArmRating> {
        self.summary
            .ratings
            .iter()
            .find(|r| r.dataset == dataset && r.rate == rate && r.method == method)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

type ArmMeans = [Option<f64>; 2];

type GroupKey = (String, u64, Method, Option<String>, usize);

/// Recomputes every aggregate, ordering and rating from the report's records.
pub fn aggregate(report: &ExperimentReport) -> Summary {
    // rates are grouped by bit pattern; values are gathered in record order
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    const ERR: [&str; 2] = ["rmse", "mae"];
    for r in &report.ranking {
        for (m, v) in [r.rmse, r.mae].into_iter().enumerate() {
            groups
                .entry((r.dataset.clone(), r.rate.to_bits(), r.method, None, m))
                .or_default()
                .push(v);
        }
    }
    for r in &report.ordering {
        for (m, v) in r.scores().into_iter().enumerate() {
            groups
                .entry((r.dataset.clone(), r.rate.to_bits(), r.method, Some(r.arm.clone()), m))
                .or_default()
                .push(v);
        }
    }
    let mut aggregates: Vec<Aggregate> = groups
        .into_iter()
        .map(|((dataset, rate, method, arm, m), values)| {
            let (mean, sd) = mean_sd(&values);
            let metric = if arm.is_some() {
                ClassificationScores::METRICS[m]
            } else {
                ERR[m]
            };
            Aggregate {
                dataset,
                rate: f64::from_bits(rate),
                method,
                arm,
                metric: metric.to_string(),
                n: values.len(),
                mean,
                sd,
            }
        })
        .collect();
    aggregates.sort_by(|a, b| {
        (&a.dataset, a.rate, &a.arm, &a.metric, a.method)
            .partial_cmp(&(&b.dataset, b.rate, &b.arm, &b.metric, b.method))
            .expect("finite rates")
    });

    let mut by_cell: BTreeMap<(String, u64, String), Vec<(f64, Method)>> = BTreeMap::new();
    for a in aggregates.iter().filter(|a| a.arm.is_none()) {
        by_cell
            .entry((a.dataset.clone(), a.rate.to_bits(), a.metric.clone()))
            .or_default()
            .push((a.mean, a.method));
    }
    let orderings = by_cell
        .into_iter()
        .map(|((dataset, rate, metric), mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            MethodOrdering {
                dataset,
                rate: f64::from_bits(rate),
                metric,
                methods: v.into_iter().map(|(_, m)| m).collect(),
            }
        })
        .collect();

    // per (dataset, rate, method): metric -> [impute-first, select-first] means
    let mut arms: BTreeMap<(String, u64, Method), BTreeMap<String, ArmMeans>> = BTreeMap::new();
    for a in aggregates.iter() {
        let Some(arm) = &a.arm else { continue };
        let slot = match arm.as_str() {
            ARM_IMPUTE_FIRST => 0,
            ARM_SELECT_FIRST => 1,
            _ => continue,
        };
        arms.entry((a.dataset.clone(), a.rate.to_bits(), a.method))
            .or_default()
            .entry(a.metric.clone())
            .or_default()[slot] = Some(a.mean);
    }
    let ratings = arms
        .into_iter()
        .map(|((dataset, rate, method), metrics)| {
            let deltas: BTreeMap<String, f64> = metrics
                .into_iter()
                .filter_map(|(m, [a, b])| Some((m, a? - b?)))
                .collect();
            ArmRating {
                dataset,
                rate: f64::from_bits(rate),
                method,
                wins: deltas.values().filter(|&&d| d > 0.0).count(),
                deltas,
            }
        })
        .collect();
    Summary {
        aggregates,
        orderings,
        ratings,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown report format {other:?}"))),
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the report into directory `dir` and returns the files written.
///
/// Both formats write `long.csv` (dataset, rate, method, arm, seed, metric,
/// value), one row per record and metric. JSON adds `report.json` with
/// records, summary and config echo; CSV adds `records.csv` and
/// `aggregates.csv`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if report.record_count() == 0 {
        return Err(Error::Empty("report has no records".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    match format {
        ReportFormat::Json => {
            let path = dir.join("report.json");
            let text = serde_json::to_string_pretty(report)?;
            std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let path = dir.join("records.csv");
            write_records_csv(report, &path)?;
            written.push(path);
            let path = dir.join("aggregates.csv");
            let mut w = csv_writer(&path)?;
            w.write_record(["dataset", "rate", "method", "arm", "metric", "n", "mean", "sd"])?;
            for a in &report.summary.aggregates {
                w.write_record([
                    a.dataset.clone(),
                    a.rate.to_string(),
                    a.method.to_string(),
                    a.arm.clone().unwrap_or_default(),
                    a.metric.clone(),
                    a.n.to_string(),
                    a.mean.to_string(),
                    a.sd.to_string(),
                ])?;
            }
            finish(w, &path)?;
            written.push(path);
        }
    }

    let path = dir.join("long.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["dataset", "rate", "method", "arm", "seed", "metric", "value"])?;
    for r in &report.ranking {
        for (metric, v) in [("rmse", r.rmse), ("mae", r.mae)] {
            w.write_record([
                &r.dataset,
                &r.rate.to_string(),
                r.method.as_str(),
                "",
                &r.seed.to_string(),
                metric,
                &v.to_string(),
            ])?;
        }
    }
    for r in &report.ordering {
        for (metric, v) in ClassificationScores::METRICS.iter().zip(r.scores()) {
            w.write_record([
                &r.dataset,
                &r.rate.to_string(),
                r.method.as_str(),
                &r.arm,
                &r.seed.to_string(),
                metric,
                &v.to_string(),
            ])?;
        }
    }
    finish(w, &path)?;
    written.push(path);
    Ok(written)
}

const RANKING_HEADER: [&str; 11] = [
    "dataset",
    "rate",
    "method",
    "seed",
    "rmse",
    "mae",
    "n_cells",
    "sweeps_returned",
    "ridge_fallbacks",
    "wall_ms",
    "params",
];
const ORDERING_HEADER: [&str; 11] = [
    "dataset",
    "rate",
    "method",
    "seed",
    "arm",
    "recall",
    "precision",
    "f1",
    "accuracy",
    "selected",
    "wall_ms",
];

fn write_records_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    match report.kind {
        ExperimentKind::Ranking => {
            w.write_record(RANKING_HEADER)?;
            for r in &report.ranking {
                w.write_record([
                    r.dataset.clone(),
                    r.rate.to_string(),
                    r.method.to_string(),
                    r.seed.to_string(),
                    r.rmse.to_string(),
                    r.mae.to_string(),
                    r.n_cells.to_string(),
                    r.sweeps_returned.map(|s| s.to_string()).unwrap_or_default(),
                    r.ridge_fallbacks.to_string(),
                    r.wall_ms.to_string(),
                    r.params.to_string(),
                ])?;
            }
        }
        ExperimentKind::Ordering => {
            w.write_record(ORDERING_HEADER)?;
            for r in &report.ordering {
                w.write_record([
                    r.dataset.clone(),
                    r.rate.to_string(),
                    r.method.to_string(),
                    r.seed.to_string(),
                    r.arm.clone(),
                    r.recall.to_string(),
                    r.precision.to_string(),
                    r.f1.to_string(),
                    r.accuracy.to_string(),
                    r.selected.join(";"),
                    r.wall_ms.to_string(),
                ])?;
            }
        }
    }
    finish(w, path)
}

/// Reads a `records.csv` written by [`emit_report`] back into a report
/// whose summary is recomputed from the records. The config echo is not
/// part of the CSV and comes back as `null`.
pub fn read_records_csv(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let bad = |row: usize, column: &str, value: &str| Error::Unparseable {
        row,
        column: column.to_string(),
        value: value.to_string(),
    };
    fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, row: usize) -> Result<T> {
        let s = rec.get(i).unwrap_or("");
        s.parse().map_err(|_| Error::Unparseable {
            row,
            column: name.to_string(),
            value: s.to_string(),
        })
    }
    let mut report = if header == RANKING_HEADER {
        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let params_text = rec.get(10).unwrap_or("");
            records.push(RankingRecord {
                dataset: rec.get(0).unwrap_or("").to_string(),
                rate: field(&rec, 1, "rate", row)?,
                method: field(&rec, 2, "method", row)?,
                seed: field(&rec, 3, "seed", row)?,
                rmse: field(&rec, 4, "rmse", row)?,
                mae: field(&rec, 5, "mae", row)?,
                n_cells: field(&rec, 6, "n_cells", row)?,
                sweeps_returned: match rec.get(7).unwrap_or("") {
                    "" => None,
                    _ => Some(field(&rec, 7, "sweeps_returned", row)?),
                },
                ridge_fallbacks: field(&rec, 8, "ridge_fallbacks", row)?,
                wall_ms: field(&rec, 9, "wall_ms", row)?,
                params: serde_json::from_str(params_text).map_err(|_| bad(row, "params", params_text))?,
            });
        }
        let mut r = ExperimentReport::ranking(&ExperimentConfig::default(), records);
        r.config = serde_json::Value::Null;
        r
    } else if header == ORDERING_HEADER {
        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let selected = rec.get(9).unwrap_or("");
            records.push(OrderingRecord {
                dataset: rec.get(0).unwrap_or("").to_string(),
                rate: field(&rec, 1, "rate", row)?,
                method: field(&rec, 2, "method", row)?,
                seed: field(&rec, 3, "seed", row)?,
                arm: rec.get(4).unwrap_or("").to_string(),
                recall: field(&rec, 5, "recall", row)?,
                precision: field(&rec, 6, "precision", row)?,
                f1: field(&rec, 7, "f1", row)?,
                accuracy: field(&rec, 8, "accuracy", row)?,
                selected: selected
                    .split(';')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
                wall_ms: field(&rec, 10, "wall_ms", row)?,
            });
        }
        let mut r = ExperimentReport::ordering(&ExperimentConfig::default(), records);
        r.config = serde_json::Value::Null;
        r
    } else {
        return Err(Error::Shape(format!("{} is not a records file", path.display())));
    };
    report.summary = aggregate(&report);
    Ok(report)
}
