//! The two benchmark studies.
//!
//! The ranking study amputes each prepared dataset once per (rate, seed) and
//! scores every method against the same mask. The ordering study compares
//! imputing before feature selection (arm A) with selecting on complete cases
//! first and imputing only the selected columns (arm B); both arms share the
//! mask and the train/test split.

mod config;
mod report;

use std::time::Instant;

use rayon::prelude::*;

pub use config::{DatasetRecipe, ExperimentConfig, ExperimentKind, LoadedDataset, OrderingConfig};
pub use report::{
    aggregate, emit_report, read_records_csv, Aggregate, ArmRating, ExperimentReport, MethodOrdering, OrderingRecord,
    RankingRecord, ReportFormat, Summary, REPORT_SCHEMA_VERSION,
};

use crate::amputation::ampute_mcar;
use crate::dataset::{stratified_split_indices, Dataset};
use crate::error::{Error, Result};
use crate::forest::{train_forest, FeatureMatrix, ForestParams, Task};
use crate::impute::{impute, ImputeParams, Method};
use crate::metrics::{classification_scores, confusion, imputation_error, ClassificationScores};
use crate::rng;
use crate::selection::sfs;

/// Seed for one purpose within an experiment cell.
fn cell_seed(seed: u64, purpose: &str, rate: f64) -> u64 {
    rng::derive_seed(seed, &[rng::tag(purpose), rate.to_bits()])
}

fn load_all(config: &ExperimentConfig) -> Result<Vec<(DatasetRecipe, LoadedDataset)>> {
    if config.datasets.is_empty() {
        return Err(Error::Config("config lists no datasets".into()));
    }
    config
        .datasets
        .iter()
        .map(|r| {
            let loaded = r
                .load(&config.base_dir)
                .map_err(|e| e.context(format!("dataset {}", r.name)))?;
            Ok((r.clone(), loaded))
        })
        .collect()
}

pub fn run_ranking(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let datasets = load_all(config)?;
    let cells: Vec<(usize, f64, u64)> = (0..datasets.len())
        .flat_map(|d| {
            config
                .rates
                .iter()
                .flat_map(move |&r| config.seeds.iter().map(move |&s| (d, r, s)))
        })
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(d, rate, seed)| {
            let (recipe, loaded) = &datasets[d];
            ranking_cell(recipe, loaded, rate, seed, &config.methods, &config.params).map_err(|e| {
                e.context(format!(
                    "ranking cell (dataset {}, rate {rate}, seed {seed})",
                    recipe.name
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<RankingRecord> = per_cell.into_iter().flatten().collect();
    records.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).expect("finite rates"));
    Ok(ExperimentReport::ranking(config, records))
}

fn ranking_cell(
    recipe: &DatasetRecipe,
    loaded: &LoadedDataset,
    rate: f64,
    seed: u64,
    methods: &[Method],
    params: &ImputeParams,
) -> Result<Vec<RankingRecord>> {
    let prepared = recipe.prepare(loaded, seed)?;
    let (holey, mask) = ampute_mcar(&prepared, rate, cell_seed(seed, "ampute", rate))?;
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let (imputed, log) = impute(&holey, method, params, cell_seed(seed, method.as_str(), rate))
                .map_err(|e| e.context(format!("method {method}")))?;
            let scores = imputation_error(&prepared, &imputed, &mask)?;
            Ok(RankingRecord {
                dataset: recipe.name.clone(),
                rate,
                method,
                seed,
                rmse: scores.rmse,
                mae: scores.mae,
                n_cells: scores.n_cells,
                sweeps_returned: log.sweeps_returned,
                ridge_fallbacks: log.ridge_fallbacks,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                params: params.echo(method),
            })
        })
        .collect()
}

pub fn run_ordering(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    run_ordering_at(config, &config.ordering.rates)
}

/// Ordering study at explicit rates. Unlike [`run_ordering`], a rate of 0 is
/// accepted, which makes both arms see the same complete data.
pub fn run_ordering_at(config: &ExperimentConfig, rates: &[f64]) -> Result<ExperimentReport> {
    let datasets = load_all(config)?;
    let cells: Vec<(usize, f64, u64)> = (0..datasets.len())
        .flat_map(|d| {
            rates
                .iter()
                .flat_map(move |&r| config.seeds.iter().map(move |&s| (d, r, s)))
        })
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(d, rate, seed)| {
            let (recipe, loaded) = &datasets[d];
            ordering_cell(recipe, loaded, rate, seed, config).map_err(|e| {
                e.context(format!(
                    "ordering cell (dataset {}, rate {rate}, seed {seed})",
                    recipe.name
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<OrderingRecord> = per_cell.into_iter().flatten().collect();
    records.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).expect("finite rates"));
    Ok(ExperimentReport::ordering(config, records))
}

pub const ARM_IMPUTE_FIRST: &str = "impute-first";
pub const ARM_SELECT_FIRST: &str = "select-first";

fn ordering_cell(
    recipe: &DatasetRecipe,
    loaded: &LoadedDataset,
    rate: f64,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<Vec<OrderingRecord>> {
    let ord = &config.ordering;
    let prepared = recipe.prepare(loaded, seed)?;
    let (holey, _mask) = ampute_mcar(&prepared, rate, cell_seed(seed, "ampute", rate))?;
    let (train, test) = stratified_split_indices(&prepared, ord.test_fraction, cell_seed(seed, "split", rate))?;
    let sfs_seed = cell_seed(seed, "sfs", rate);
    let clf_seed = cell_seed(seed, "classifier", rate);
    let target = prepared.target_index().expect("recipes encode a target");

    let mut out = Vec::new();
    for &method in &ord.methods {
        let impute_seed = cell_seed(seed, method.as_str(), rate);
        let ctx = |arm: &str, e: Error| e.context(format!("method {method}, arm {arm}"));

        // arm A: impute every feature, then select on the completed training rows
        let start = Instant::now();
        let (completed, _) =
            impute(&holey, method, &config.params, impute_seed).map_err(|e| ctx(ARM_IMPUTE_FIRST, e))?;
        let selection =
            sfs(&completed.select_rows(&train), &ord.sfs, sfs_seed, false).map_err(|e| ctx(ARM_IMPUTE_FIRST, e))?;
        let scores = score_selected(
            &completed,
            &selection.selected_indices,
            &train,
            &test,
            &ord.classifier,
            clf_seed,
        )?;
        out.push(OrderingRecord::new(
            recipe,
            rate,
            method,
            seed,
            ARM_IMPUTE_FIRST,
            scores,
            selection.selected,
            start,
        ));

        // arm B: complete-case selection, then impute only the selected columns
        let start = Instant::now();
        let selection =
            sfs(&holey.select_rows(&train), &ord.sfs, sfs_seed, true).map_err(|e| ctx(ARM_SELECT_FIRST, e))?;
        let mut keep = selection.selected_indices.clone();
        keep.push(target);
        let (completed, _) = impute(&holey.select_columns(&keep), method, &config.params, impute_seed)
            .map_err(|e| ctx(ARM_SELECT_FIRST, e))?;
        let features: Vec<usize> = (0..selection.selected_indices.len()).collect();
        let scores = score_selected(&completed, &features, &train, &test, &ord.classifier, clf_seed)?;
        out.push(OrderingRecord::new(
            recipe,
            rate,
            method,
            seed,
            ARM_SELECT_FIRST,
            scores,
            selection.selected,
            start,
        ));
    }
    Ok(out)
}

/// Trains the classifier on `train` rows restricted to `features` and scores
/// it on `test` rows.
fn score_selected(
    ds: &Dataset,
    features: &[usize],
    train: &[usize],
    test: &[usize],
    classifier: &ForestParams,
    seed: u64,
) -> Result<ClassificationScores> {
    let labels = ds.target_labels()?;
    let matrix = |rows: &[usize]| {
        FeatureMatrix::from_columns(
            rows.len(),
            features
                .iter()
                .map(|&j| {
                    rows.iter()
                        .map(|&r| {
                            ds.get(r, j)
                                .ok_or(Error::Shape(format!("cell ({r}, {j}) is not filled")))
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?,
        )
    };
    let y: Vec<f64> = train.iter().map(|&r| labels[r] as f64).collect();
    let model = train_forest(
        &matrix(train)?,
        &y,
        Task::Classification { n_classes: 2 },
        &classifier.with_seed(seed),
    )?;
    let pred: Vec<usize> = model.predict(&matrix(test)?)?.into_iter().map(|p| p as usize).collect();
    let truth: Vec<usize> = test.iter().map(|&r| labels[r]).collect();
    Ok(classification_scores(&confusion(&truth, &pred)?))
}

/// Runs the study named by `config.kind`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.kind {
        ExperimentKind::Ranking => run_ranking(config),
        ExperimentKind::Ordering => run_ordering(config),
    }
}
