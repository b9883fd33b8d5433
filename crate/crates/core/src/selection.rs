//! Sequential forward selection around the forest classifier.
//!
//! Starting from no features, each step scores every unselected feature by
//! the cross-validated accuracy of a forest trained on the selected set plus
//! that feature, adds the best one (ties to the lower column index) and stops
//! once no candidate strictly improves on the current score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{train_forest, FeatureMatrix, ForestParams, Task};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfsParams {
    pub folds: usize,
    pub max_features: Option<usize>,
    pub forest: ForestParams,
}

impl Default for SfsParams {
    fn default() -> Self {
        SfsParams {
            folds: 5,
            max_features: None,
            forest: ForestParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfsStep {
    pub feature: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfsResult {
    /// Selected feature names in the order they were added.
    pub selected: Vec<String>,
    /// Column indices of `selected` in the input dataset.
    pub selected_indices: Vec<usize>,
    pub trajectory: Vec<SfsStep>,
    pub criterion: String,
}

/// Fold index for every row, stratified by label: each class is shuffled
/// and dealt round-robin over the folds.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    use rand::seq::SliceRandom;

    if folds < 2 {
        return Err(Error::InvalidParameter("sfs.folds must be at least 2".into()));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = rng::stream(seed, &[rng::tag("folds")]);
    let mut assignment = vec![0; labels.len()];
    for class in 0..classes {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < folds {
            return Err(Error::InvalidParameter(format!(
                "{folds} folds exceed the {} rows of class {class}",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for (i, r) in rows.into_iter().enumerate() {
            assignment[r] = i % folds;
        }
    }
    Ok(assignment)
}

/// Pooled cross-validated accuracy of a forest on `features`.
///
/// With `complete_case`, only rows observed on every one of `features` take
/// part, keeping their fold from `fold_of`; `None` is returned when no row
/// can be scored. Without it, missing cells are an error.
pub fn cv_accuracy(
    ds: &Dataset,
    features: &[usize],
    fold_of: &[usize],
    forest: &ForestParams,
    seed: u64,
    complete_case: bool,
) -> Result<Option<f64>> {
    let labels = ds.target_labels()?;
    let rows: Vec<usize> = (0..ds.row_count())
        .filter(|&r| features.iter().all(|&j| ds.get(r, j).is_some()))
        .collect();
    if !complete_case && rows.len() < ds.row_count() {
        return Err(Error::PreexistingMissing);
    }
    let folds = fold_of.iter().copied().max().map_or(0, |m| m + 1);
    let matrix = |rs: &[usize]| {
        FeatureMatrix::from_columns(
            rs.len(),
            features
                .iter()
                .map(|&j| rs.iter().map(|&r| ds.get(r, j).expect("complete row")).collect())
                .collect(),
        )
    };
    let (mut correct, mut total) = (0usize, 0usize);
    for k in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| fold_of[r] == k);
        if test.is_empty() || train.is_empty() {
            continue;
        }
        let y: Vec<f64> = train.iter().map(|&r| labels[r] as f64).collect();
        let params = forest.with_seed(rng::derive_seed(seed, &[rng::tag("sfs-fold"), k as u64]));
        let model = train_forest(&matrix(&train)?, &y, Task::Classification { n_classes: 2 }, &params)?;
        let pred = model.predict(&matrix(&test)?)?;
        correct += test.iter().zip(pred).filter(|&(&r, p)| p as usize == labels[r]).count();
        total += test.len();
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

pub fn sfs(ds: &Dataset, params: &SfsParams, seed: u64, complete_case: bool) -> Result<SfsResult> {
    let features = ds.feature_indices();
    if features.is_empty() {
        return Err(Error::Empty("no feature columns to select from".into()));
    }
    let labels = ds.target_labels()?;
    let fold_of = stratified_folds(&labels, params.folds, seed)?;
    let cap = params.max_features.unwrap_or(features.len()).min(features.len());

    let mut selected: Vec<usize> = Vec::new();
    let mut trajectory = Vec::new();
    let mut incumbent = f64::NEG_INFINITY;
    while selected.len() < cap {
        let candidates: Vec<usize> = features.iter().copied().filter(|j| !selected.contains(j)).collect();
        let scores = candidates
            .par_iter()
            .map(|&j| {
                let mut set = selected.clone();
                set.push(j);
                cv_accuracy(ds, &set, &fold_of, &params.forest, seed, complete_case)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best: Option<(usize, f64)> = None;
        for (&j, s) in candidates.iter().zip(scores) {
            if let Some(s) = s {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
        }
        match best {
            Some((j, s)) if s > incumbent => {
                incumbent = s;
                selected.push(j);
                trajectory.push(SfsStep {
                    feature: ds.column(j).name.clone(),
                    score: s,
                });
            }
            _ => break,
        }
    }
    Ok(SfsResult {
        selected: selected.iter().map(|&j| ds.column(j).name.clone()).collect(),
        selected_indices: selected,
        trajectory,
        criterion: "accuracy".into(),
    })
}
