//! Iterative random-forest imputation.
//!
//! Missing cells start at the column mean (mode for categorical columns).
//! Each sweep visits the incomplete columns in ascending order of missing
//! count, fits a forest on the rows where the column was observed using every
//! other feature column as predictors, and overwrites the originally missing
//! cells with its predictions. Sweeps stop at the first one whose change
//! statistic increases for every variable type that has missing cells; the
//! iterate from before that sweep is returned.

use serde::{Deserialize, Serialize};

use super::{fill_value, imputable_columns, require_observed, simple, ColumnStat};
use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::forest::{train_forest, FeatureMatrix, ForestParams, Task};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissForestParams {
    pub max_iter: usize,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for MissForestParams {
    fn default() -> Self {
        MissForestParams {
            max_iter: 10,
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

/// Change between successive iterates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStat {
    /// Normalized squared difference over numeric columns.
    pub numeric: Option<f64>,
    /// Fraction of changed categorical imputations.
    pub categorical: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissForestOutcome {
    pub completed: Dataset,
    /// One entry per sweep run, including a final rejected sweep.
    pub stats: Vec<SweepStat>,
    /// Scalar summary of `stats`: the numeric statistic, or the categorical
    /// one when no numeric cell was missing.
    pub sweep_stats: Vec<f64>,
    /// Number of sweeps that produced the returned iterate.
    pub sweeps_returned: usize,
}

pub fn impute_missforest(ds: &Dataset, params: &MissForestParams) -> Result<MissForestOutcome> {
    if params.max_iter == 0 {
        return Err(Error::InvalidParameter("missforest.max_iter must be at least 1".into()));
    }
    let mut order = imputable_columns(ds);
    if order.is_empty() {
        return Ok(MissForestOutcome {
            completed: ds.clone(),
            stats: Vec::new(),
            sweep_stats: Vec::new(),
            sweeps_returned: 0,
        });
    }
    require_observed(ds)?;
    order.sort_by_key(|&j| (ds.missing_count(j), j));

    let features = ds.feature_indices();
    let n = ds.row_count();
    let missing_rows: Vec<Vec<usize>> = (0..ds.col_count())
        .map(|j| (0..n).filter(|&r| ds.get(r, j).is_none()).collect())
        .collect();
    let observed_rows: Vec<Vec<usize>> = (0..ds.col_count())
        .map(|j| (0..n).filter(|&r| ds.get(r, j).is_some()).collect())
        .collect();

    let mut current = initial_fill(ds)?;
    let numeric_cols: Vec<usize> = features
        .iter()
        .copied()
        .filter(|&j| ds.column(j).kind != ColumnKind::Categorical)
        .collect();
    let has_numeric_missing = order.iter().any(|&j| ds.column(j).kind != ColumnKind::Categorical);
    let has_categorical_missing = order.iter().any(|&j| ds.column(j).kind == ColumnKind::Categorical);

    let mut stats: Vec<SweepStat> = Vec::new();
    let mut returned = 0;
    let mut previous = current.clone();
    for sweep in 0..params.max_iter {
        previous.clone_from(&current);
        for &c in &order {
            let predictors: Vec<usize> = features.iter().copied().filter(|&j| j != c).collect();
            let col = ds.column(c);
            let forest_params = params.forest.with_seed(rng::derive_seed(
                params.seed,
                &[rng::tag("missforest"), sweep as u64, c as u64],
            ));
            let task = match col.kind {
                ColumnKind::Categorical => Task::Classification {
                    n_classes: col.levels.len(),
                },
                _ => Task::Regression,
            };
            if predictors.is_empty() {
                continue;
            }
            let x_train = design(&current, &predictors, &observed_rows[c])?;
            let y: Vec<f64> = observed_rows[c]
                .iter()
                .map(|&r| ds.get(r, c).expect("observed"))
                .collect();
            let forest = train_forest(&x_train, &y, task, &forest_params)?;
            let x_miss = design(&current, &predictors, &missing_rows[c])?;
            let pred = forest.predict(&x_miss)?;
            for (&r, v) in missing_rows[c].iter().zip(pred) {
                current.set(r, c, Some(col.snap(v)));
            }
        }

        let stat = SweepStat {
            numeric: has_numeric_missing.then(|| numeric_change(&current, &previous, &numeric_cols)),
            categorical: has_categorical_missing
                .then(|| categorical_change(&current, &previous, &order, &missing_rows)),
        };
        let worsened = stats.last().is_some_and(|prev: &SweepStat| {
            let up = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(new), Some(old)) => new > old,
                _ => true,
            };
            up(stat.numeric, prev.numeric) && up(stat.categorical, prev.categorical)
        });
        stats.push(stat);
        if worsened {
            current = previous.clone();
            break;
        }
        returned = sweep + 1;
    }

    let sweep_stats = stats
        .iter()
        .map(|s| s.numeric.or(s.categorical).unwrap_or(0.0))
        .collect();
    Ok(MissForestOutcome {
        completed: current,
        stats,
        sweep_stats,
        sweeps_returned: returned,
    })
}

fn initial_fill(ds: &Dataset) -> Result<Dataset> {
    let mut out = ds.clone();
    for j in imputable_columns(ds) {
        let fill = fill_value(ds, j, ColumnStat::Mean)?;
        for r in 0..ds.row_count() {
            if ds.get(r, j).is_none() {
                out.set(r, j, Some(fill));
            }
        }
    }
    debug_assert_eq!(out, simple::impute_mean(ds)?);
    Ok(out)
}

pub(crate) fn design(ds: &Dataset, cols: &[usize], rows: &[usize]) -> Result<FeatureMatrix> {
    let columns = cols
        .iter()
        .map(|&j| {
            rows.iter()
                .map(|&r| {
                    ds.get(r, j)
                        .ok_or_else(|| Error::Shape(format!("cell ({r}, {j}) is not filled")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_columns(rows.len(), columns)
}

fn numeric_change(new: &Dataset, old: &Dataset, cols: &[usize]) -> f64 {
    let (mut diff, mut norm) = (0.0, 0.0);
    for &j in cols {
        for r in 0..new.row_count() {
            let (a, b) = (new.get(r, j).unwrap_or(0.0), old.get(r, j).unwrap_or(0.0));
            diff += (a - b) * (a - b);
            norm += a * a;
        }
    }
    if norm == 0.0 {
        0.0
    } else {
        diff / norm
    }
}

fn categorical_change(new: &Dataset, old: &Dataset, order: &[usize], missing_rows: &[Vec<usize>]) -> f64 {
    let (mut changed, mut total) = (0usize, 0usize);
    for &j in order {
        if new.column(j).kind != ColumnKind::Categorical {
            continue;
        }
        for &r in &missing_rows[j] {
            total += 1;
            if new.get(r, j) != old.get(r, j) {
                changed += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        changed as f64 / total as f64
    }
}
