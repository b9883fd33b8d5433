//! Imputation error over masked cells and binary classification scores.

use serde::{Deserialize, Serialize};

use crate::amputation::AmputationMask;
use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorScores {
    pub rmse: f64,
    pub mae: f64,
    pub n_cells: usize,
}

/// Error of one column in the column's raw units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnError {
    pub column: String,
    pub scores: ErrorScores,
}

fn cell_distance(ds: &Dataset, col: usize, truth: f64, imputed: f64) -> f64 {
    if ds.column(col).kind == ColumnKind::Categorical {
        if truth == imputed {
            0.0
        } else {
            1.0
        }
    } else {
        (truth - imputed).abs()
    }
}

fn accumulate(distances: impl Iterator<Item = f64>) -> ErrorScores {
    let (mut sq, mut abs, mut n) = (0.0, 0.0, 0usize);
    for d in distances {
        sq += d * d;
        abs += d;
        n += 1;
    }
    let nf = n as f64;
    ErrorScores {
        rmse: (sq / nf).sqrt(),
        mae: abs / nf,
        n_cells: n,
    }
}

fn imputed_at(imputed: &Dataset, r: usize, c: usize) -> Result<f64> {
    if r >= imputed.row_count() || c >= imputed.col_count() {
        return Err(Error::OutOfBounds { row: r, col: c });
    }
    imputed
        .get(r, c)
        .ok_or_else(|| Error::Shape(format!("imputed dataset is missing masked cell ({r}, {c})")))
}

/// RMSE and MAE over exactly the masked cells, comparing the mask's
/// original values with `imputed`. Categorical cells count as 0 when equal
/// and 1 otherwise. `original` supplies the column kinds.
pub fn imputation_error(original: &Dataset, imputed: &Dataset, mask: &AmputationMask) -> Result<ErrorScores> {
    if mask.is_empty() {
        return Err(Error::Empty("amputation mask has no cells".into()));
    }
    if original.col_count() != imputed.col_count() {
        return Err(Error::Shape("original and imputed column counts differ".into()));
    }
    let distances = mask
        .iter()
        .map(|((r, c), truth)| Ok(cell_distance(original, c, truth, imputed_at(imputed, r, c)?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(accumulate(distances.into_iter()))
}

/// Per-column errors in raw units (through each column's affine map).
/// Columns without masked cells are omitted.
pub fn column_errors(original: &Dataset, imputed: &Dataset, mask: &AmputationMask) -> Result<Vec<ColumnError>> {
    let mut per_col: Vec<Vec<f64>> = vec![Vec::new(); original.col_count()];
    for ((r, c), truth) in mask.iter() {
        let v = imputed_at(imputed, r, c)?;
        let col = original.column(c);
        let d = if col.kind == ColumnKind::Categorical {
            cell_distance(original, c, truth, v)
        } else {
            (col.affine.to_raw(truth) - col.affine.to_raw(v)).abs()
        };
        per_col[c].push(d);
    }
    Ok(per_col
        .into_iter()
        .enumerate()
        .filter(|(_, d)| !d.is_empty())
        .map(|(c, d)| ColumnError {
            column: original.column(c).name.clone(),
            scores: accumulate(d.into_iter()),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts with class 1 as the positive class.
pub fn confusion(y_true: &[usize], y_pred: &[usize]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("no labels to score".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fn_ += 1,
            _ => return Err(Error::Target(format!("non-binary label pair ({t}, {p})"))),
        }
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl ClassificationScores {
    pub const METRICS: [&'static str; 4] = ["recall", "precision", "f1", "accuracy"];

    pub fn values(&self) -> [f64; 4] {
        [self.recall, self.precision, self.f1, self.accuracy]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Recall, precision, F1 and accuracy. Ratios with a zero denominator are 0.
pub fn classification_scores(cm: &ConfusionMatrix) -> ClassificationScores {
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let f1 = if recall + precision > 0.0 {
        2.0 * recall * precision / (recall + precision)
    } else {
        0.0
    };
    ClassificationScores {
        recall,
        precision,
        f1,
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
    }
}
