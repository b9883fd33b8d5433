//! Single-pass deterministic imputers: mean, median, LOCF and interpolation.

use serde::{Deserialize, Serialize};

use super::{fill_value, imputable_columns, ColumnStat};
use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationOrder {
    #[default]
    Linear,
    Quadratic,
    Cubic,
}

impl InterpolationOrder {
    pub fn degree(self) -> usize {
        match self {
            InterpolationOrder::Linear => 1,
            InterpolationOrder::Quadratic => 2,
            InterpolationOrder::Cubic => 3,
        }
    }
}

impl std::str::FromStr for InterpolationOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(InterpolationOrder::Linear),
            "quadratic" => Ok(InterpolationOrder::Quadratic),
            "cubic" => Ok(InterpolationOrder::Cubic),
            other => Err(Error::InvalidParameter(format!(
                "unknown interpolation order {other:?}"
            ))),
        }
    }
}

fn impute_with_stat(ds: &Dataset, stat: ColumnStat) -> Result<Dataset> {
    let mut out = ds.clone();
    for j in imputable_columns(ds) {
        let fill = fill_value(ds, j, stat)?;
        for r in 0..ds.row_count() {
            if ds.get(r, j).is_none() {
                out.set(r, j, Some(fill));
            }
        }
    }
    Ok(out)
}

/// Fills each missing cell with its column's observed mean (rounded for
/// discrete columns, mode for categorical ones).
pub fn impute_mean(ds: &Dataset) -> Result<Dataset> {
    impute_with_stat(ds, ColumnStat::Mean)
}

/// Like [`impute_mean`] with the median; even counts average the middle two.
pub fn impute_median(ds: &Dataset) -> Result<Dataset> {
    impute_with_stat(ds, ColumnStat::Median)
}

/// Last observation carried forward down each column; a leading gap takes the
/// first observed value below it.
pub fn impute_locf(ds: &Dataset) -> Result<Dataset> {
    let mut out = ds.clone();
    for j in imputable_columns(ds) {
        let first = ds.column_values(j).flatten().next().ok_or_else(|| Error::AllMissing {
            column: ds.column(j).name.clone(),
        })?;
        let mut last = first;
        for r in 0..ds.row_count() {
            match ds.get(r, j) {
                Some(v) => last = v,
                None => out.set(r, j, Some(last)),
            }
        }
    }
    Ok(out)
}

/// Piecewise polynomial interpolation over row index. Each gap is filled
/// from the `order + 1` knots nearest to it (starting from the bracketing
/// pair); cells before the first or after the last knot take that knot's
/// value.
pub fn impute_interpolate(ds: &Dataset, order: InterpolationOrder) -> Result<Dataset> {
    let needed = order.degree() + 1;
    let mut out = ds.clone();
    for j in imputable_columns(ds) {
        let col = ds.column(j);
        let knots: Vec<(f64, f64)> = ds
            .column_values(j)
            .enumerate()
            .filter_map(|(r, v)| v.map(|v| (r as f64, v)))
            .collect();
        if knots.len() < needed {
            return Err(Error::TooFewKnots {
                column: col.name.clone(),
                needed,
                found: knots.len(),
            });
        }
        for r in 0..ds.row_count() {
            if ds.get(r, j).is_some() {
                continue;
            }
            let x = r as f64;
            let v = if col.kind == ColumnKind::Categorical {
                // no ordering between levels: carry the nearest knot
                let i = knots.partition_point(|k| k.0 < x);
                nearest_knot(&knots, i, x).1
            } else {
                interpolate_at(&knots, x, needed)
            };
            out.set(r, j, Some(col.snap(v)));
        }
    }
    Ok(out)
}

fn nearest_knot(knots: &[(f64, f64)], right: usize, x: f64) -> (f64, f64) {
    match (right.checked_sub(1).map(|i| knots[i]), knots.get(right)) {
        (Some(l), Some(&h)) => {
            if x - l.0 <= h.0 - x {
                l
            } else {
                h
            }
        }
        (Some(l), None) => l,
        (None, Some(&h)) => h,
        (None, None) => unreachable!("at least one knot"),
    }
}

fn interpolate_at(knots: &[(f64, f64)], x: f64, needed: usize) -> f64 {
    let right = knots.partition_point(|k| k.0 < x);
    if right == 0 {
        return knots[0].1;
    }
    if right == knots.len() {
        return knots[knots.len() - 1].1;
    }
    // grow the window [lo, hi) outward from the bracketing pair
    let (mut lo, mut hi) = (right - 1, right + 1);
    while hi - lo < needed {
        let left_gap = lo.checked_sub(1).map(|i| x - knots[i].0);
        let right_gap = knots.get(hi).map(|k| k.0 - x);
        match (left_gap, right_gap) {
            (Some(l), Some(r)) if l <= r => lo -= 1,
            (Some(_), Some(_)) => hi += 1,
            (Some(_), None) => lo -= 1,
            (None, Some(_)) => hi += 1,
            (None, None) => break,
        }
    }
    lagrange(&knots[lo..hi], x)
}

fn lagrange(points: &[(f64, f64)], x: f64) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, &(xi, yi))| {
            let basis: f64 = points
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &(xk, _))| (x - xk) / (xi - xk))
                .product();
            yi * basis
        })
        .sum()
}
