//! k-nearest-neighbour imputation under a missing-tolerant distance.
//!
//! The distance between two rows uses only the feature columns observed in
//! both, rescaled by `features / shared` (the nan-Euclidean convention).
//! Categorical columns contribute a 0/1 mismatch.

use serde::{Deserialize, Serialize};

use super::{fill_value, imputable_columns, require_observed, weighted_mode, ColumnStat};
use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distance {
    #[default]
    Euclidean,
    Manhattan,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

impl std::str::FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Distance::Euclidean),
            "manhattan" => Ok(Distance::Manhattan),
            other => Err(Error::InvalidParameter(format!("unknown distance {other:?}"))),
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "inverse-distance" | "distance" => Ok(Weighting::InverseDistance),
            other => Err(Error::InvalidParameter(format!("unknown weighting {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub distance: Distance,
    pub weighting: Weighting,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            distance: Distance::Euclidean,
            weighting: Weighting::Uniform,
        }
    }
}

/// Partial distance between rows `a` and `b` over `features`; `None` when
/// they share no observed feature.
pub fn partial_distance(ds: &Dataset, a: usize, b: usize, features: &[usize], distance: Distance) -> Option<f64> {
    let (ra, rb) = (ds.row(a), ds.row(b));
    let mut shared = 0usize;
    let mut acc = 0.0;
    for &j in features {
        let (Some(x), Some(y)) = (ra[j], rb[j]) else { continue };
        shared += 1;
        let d = if ds.column(j).kind == ColumnKind::Categorical {
            if x == y {
                0.0
            } else {
                1.0
            }
        } else {
            (x - y).abs()
        };
        acc += match distance {
            Distance::Euclidean => d * d,
            Distance::Manhattan => d,
        };
    }
    if shared == 0 {
        return None;
    }
    let scaled = acc * features.len() as f64 / shared as f64;
    Some(match distance {
        Distance::Euclidean => scaled.sqrt(),
        Distance::Manhattan => scaled,
    })
}

pub fn impute_knn(ds: &Dataset, params: &KnnParams) -> Result<Dataset> {
    if params.k == 0 {
        return Err(Error::InvalidParameter("knn.k must be at least 1".into()));
    }
    let n = ds.row_count();
    if params.k >= n && n > 1 {
        return Err(Error::InvalidParameter(format!(
            "knn.k = {} must be below the row count {n}",
            params.k
        )));
    }
    let cols = imputable_columns(ds);
    if cols.is_empty() {
        return Ok(ds.clone());
    }
    require_observed(ds)?;
    let features = ds.feature_indices();
    let fallback: Vec<Option<f64>> = (0..ds.col_count())
        .map(|j| fill_value(ds, j, ColumnStat::Mean).ok())
        .collect();

    let mut out = ds.clone();
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);
    for r in 0..n {
        let row = ds.row(r);
        if !features.iter().any(|&j| row[j].is_some()) {
            return Err(Error::EmptyRow { row: r });
        }
        let missing: Vec<usize> = cols.iter().copied().filter(|&j| row[j].is_none()).collect();
        if missing.is_empty() {
            continue;
        }
        let dist: Vec<Option<f64>> = (0..n)
            .map(|s| {
                if s == r {
                    None
                } else {
                    partial_distance(ds, r, s, &features, params.distance)
                }
            })
            .collect();
        for j in missing {
            candidates.clear();
            candidates.extend((0..n).filter_map(|s| match (dist[s], ds.get(s, j)) {
                (Some(d), Some(_)) => Some((d, s)),
                _ => None,
            }));
            let col = ds.column(j);
            let value = if candidates.is_empty() {
                fallback[j].expect("column has observed cells")
            } else {
                candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                candidates.truncate(params.k);
                let (values, weights) = neighbour_weights(ds, j, &candidates, params.weighting);
                if col.kind == ColumnKind::Categorical {
                    weighted_mode(&values, &weights).expect("nonempty")
                } else {
                    // offsets from the first value keep a unanimous vote exact
                    let total: f64 = weights.iter().sum();
                    let base = values[0];
                    base + values.iter().zip(&weights).map(|(v, w)| (v - base) * w).sum::<f64>() / total
                }
            };
            out.set(r, j, Some(col.snap(value)));
        }
    }
    Ok(out)
}

fn neighbour_weights(
    ds: &Dataset,
    j: usize,
    neighbours: &[(f64, usize)],
    weighting: Weighting,
) -> (Vec<f64>, Vec<f64>) {
    let values: Vec<f64> = neighbours
        .iter()
        .map(|&(_, s)| ds.get(s, j).expect("candidate observes column"))
        .collect();
    let weights = match weighting {
        Weighting::Uniform => vec![1.0; neighbours.len()],
        Weighting::InverseDistance if neighbours.iter().any(|&(d, _)| d == 0.0) => neighbours
            .iter()
            .map(|&(d, _)| if d == 0.0 { 1.0 } else { 0.0 })
            .collect(),
        Weighting::InverseDistance => neighbours.iter().map(|&(d, _)| 1.0 / d).collect(),
    };
    (values, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;

    fn two_col(rows: &[[Option<f64>; 2]]) -> Dataset {
        Dataset::new(
            "t",
            vec![
                Column::new("x", ColumnKind::Continuous),
                Column::new("y", ColumnKind::Continuous),
            ],
            rows.iter().flatten().copied().collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_nearest_rows_average() {
        let ds = two_col(&[
            [Some(0.0), Some(0.0)],
            [Some(0.0), Some(1.0)],
            [Some(10.0), Some(10.0)],
            [Some(0.0), None],
        ]);
        let params = KnnParams {
            k: 2,
            ..KnnParams::default()
        };
        let out = impute_knn(&ds, &params).unwrap();
        assert_eq!(out.get(3, 1), Some(0.5));
    }

    #[test]
    fn duplicate_row_wins_with_k1() {
        let ds = two_col(&[[Some(0.3), Some(0.7)], [Some(0.9), Some(0.1)], [Some(0.3), None]]);
        let params = KnnParams {
            k: 1,
            ..KnnParams::default()
        };
        assert_eq!(impute_knn(&ds, &params).unwrap().get(2, 1), Some(0.7));
    }

    #[test]
    fn unanimous_neighbours_for_any_k_and_weighting() {
        let ds = two_col(&[
            [Some(0.1), Some(0.4)],
            [Some(0.5), Some(0.4)],
            [Some(0.9), Some(0.4)],
            [Some(0.2), Some(0.4)],
            [Some(0.3), None],
        ]);
        for k in 1..4 {
            for weighting in [Weighting::Uniform, Weighting::InverseDistance] {
                for distance in [Distance::Euclidean, Distance::Manhattan] {
                    let p = KnnParams { k, distance, weighting };
                    assert_eq!(impute_knn(&ds, &p).unwrap().get(4, 1), Some(0.4));
                }
            }
        }
    }

    #[test]
    fn distance_rescales_by_shared_columns() {
        let ds = two_col(&[[Some(0.0), None], [Some(0.5), Some(1.0)]]);
        let d = partial_distance(&ds, 0, 1, &[0, 1], Distance::Euclidean).unwrap();
        assert!((d - (0.25f64 * 2.0).sqrt()).abs() < 1e-15);
        let none = two_col(&[[Some(0.0), None], [None, Some(1.0)]]);
        assert_eq!(partial_distance(&none, 0, 1, &[0, 1], Distance::Euclidean), None);
    }

    #[test]
    fn ties_break_by_lower_row() {
        // rows 0 and 1 are equidistant from row 3; k = 1 picks row 0
        let ds = two_col(&[
            [Some(0.25), Some(0.2)],
            [Some(0.75), Some(0.8)],
            [Some(1.0), Some(0.0)],
            [Some(0.5), None],
        ]);
        let p = KnnParams {
            k: 1,
            ..KnnParams::default()
        };
        assert_eq!(impute_knn(&ds, &p).unwrap().get(3, 1), Some(0.2));
    }

    #[test]
    fn zero_candidates_fall_back_to_column_mean() {
        // row 2 shares no observed column with any row observing y
        let ds = two_col(&[
            [None, Some(0.2)],
            [None, Some(0.6)],
            [Some(0.5), None],
            [Some(0.1), None],
        ]);
        let p = KnnParams {
            k: 1,
            ..KnnParams::default()
        };
        let out = impute_knn(&ds, &p).unwrap();
        assert!((out.get(2, 1).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_and_empty_rows() {
        let ds = two_col(&[[Some(0.0), Some(1.0)], [Some(1.0), None], [None, None]]);
        assert!(matches!(
            impute_knn(
                &ds,
                &KnnParams {
                    k: 0,
                    ..KnnParams::default()
                }
            ),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            impute_knn(
                &ds,
                &KnnParams {
                    k: 3,
                    ..KnnParams::default()
                }
            ),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            impute_knn(
                &ds,
                &KnnParams {
                    k: 1,
                    ..KnnParams::default()
                }
            ),
            Err(Error::EmptyRow { row: 2 })
        ));
    }

    #[test]
    fn categorical_column_takes_neighbour_mode() {
        let ds = Dataset::new(
            "t",
            vec![
                Column::new("x", ColumnKind::Continuous),
                Column::categorical("c", vec!["a".into(), "b".into()]),
            ],
            vec![
                Some(0.0),
                Some(1.0),
                Some(0.1),
                Some(1.0),
                Some(0.2),
                Some(0.0),
                Some(0.9),
                Some(0.0),
                Some(0.05),
                None,
            ],
        )
        .unwrap();
        let p = KnnParams {
            k: 3,
            ..KnnParams::default()
        };
        assert_eq!(impute_knn(&ds, &p).unwrap().get(4, 1), Some(1.0));
    }
}
