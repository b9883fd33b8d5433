//! The seven imputation methods behind one dispatch point.
//!
//! Every imputer works on feature columns only: the binary target is never
//! used as a predictor and never filled. Observed cells are copied through
//! unchanged, so the output differs from the input exactly on the missing
//! cells.

pub mod knn;
pub mod mice;
pub mod missforest;
pub mod simple;

use serde::{Deserialize, Serialize};

pub use knn::{impute_knn, Distance, KnnParams, Weighting};
pub use mice::{impute_mice, MiceOutcome, MiceParams, Regressor};
pub use missforest::{impute_missforest, MissForestOutcome, MissForestParams};
pub use simple::{impute_interpolate, impute_locf, impute_mean, impute_median, InterpolationOrder};

use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mean,
    Median,
    Locf,
    Interpolate,
    Knn,
    MissForest,
    Mice,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Mean,
        Method::Median,
        Method::Locf,
        Method::Interpolate,
        Method::Knn,
        Method::MissForest,
        Method::Mice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::Median => "median",
            Method::Locf => "locf",
            Method::Interpolate => "interpolate",
            Method::Knn => "knn",
            Method::MissForest => "missforest",
            Method::Mice => "mice",
        }
    }

    /// True for methods whose output depends on the seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::MissForest | Method::Mice)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .or(match s {
                "interp" | "interpolation" => Some(Method::Interpolate),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidParameter(format!("unknown imputation method {s:?}")))
    }
}

/// Method choice plus the interpolation order, which only applies to
/// [`Method::Interpolate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputerSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation_order: Option<InterpolationOrder>,
}

impl ImputerSpec {
    pub fn new(method: Method, interpolation_order: Option<InterpolationOrder>) -> Result<Self> {
        if interpolation_order.is_some() != (method == Method::Interpolate) {
            return Err(Error::InvalidParameter(
                "interpolation order is required for, and only for, interpolation".into(),
            ));
        }
        Ok(ImputerSpec {
            method,
            interpolation_order,
        })
    }
}

/// Parameters for every method; only the chosen method's block is read.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeParams {
    pub interpolation_order: InterpolationOrder,
    pub knn: KnnParams,
    pub missforest: MissForestParams,
    pub mice: MiceParams,
}

impl ImputeParams {
    /// JSON echo of the parameters that affect `method`.
    pub fn echo(&self, method: Method) -> serde_json::Value {
        match method {
            Method::Mean | Method::Median | Method::Locf => serde_json::json!({}),
            Method::Interpolate => serde_json::json!({ "order": self.interpolation_order }),
            Method::Knn => serde_json::to_value(&self.knn).expect("serializable"),
            Method::MissForest => serde_json::to_value(&self.missforest).expect("serializable"),
            Method::Mice => serde_json::to_value(&self.mice).expect("serializable"),
        }
    }
}

/// Diagnostics from an imputation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeLog {
    /// MissForest convergence statistics per completed sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_stats: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps_returned: Option<usize>,
    /// Least-squares solves that fell back to the ridge penalty.
    #[serde(default)]
    pub ridge_fallbacks: usize,
}

/// Imputes `ds` with `method`. `seed` only matters for stochastic methods
/// and overrides the seed stored in their parameter block.
pub fn impute(ds: &Dataset, method: Method, params: &ImputeParams, seed: u64) -> Result<(Dataset, ImputeLog)> {
    let plain = |d: Dataset| (d, ImputeLog::default());
    match method {
        Method::Mean => impute_mean(ds).map(plain),
        Method::Median => impute_median(ds).map(plain),
        Method::Locf => impute_locf(ds).map(plain),
        Method::Interpolate => impute_interpolate(ds, params.interpolation_order).map(plain),
        Method::Knn => impute_knn(ds, &params.knn).map(plain),
        Method::MissForest => {
            let p = MissForestParams {
                seed,
                ..params.missforest.clone()
            };
            let out = impute_missforest(ds, &p)?;
            let log = ImputeLog {
                sweep_stats: out.sweep_stats.clone(),
                sweeps_returned: Some(out.sweeps_returned),
                ridge_fallbacks: 0,
            };
            Ok((out.completed, log))
        }
        Method::Mice => {
            let p = MiceParams {
                seed,
                ..params.mice.clone()
            };
            let out = impute_mice(ds, &p)?;
            let log = ImputeLog {
                ridge_fallbacks: out.ridge_fallbacks,
                ..ImputeLog::default()
            };
            Ok((out.completed, log))
        }
    }
}

/// Feature columns that have at least one missing cell.
pub(crate) fn imputable_columns(ds: &Dataset) -> Vec<usize> {
    ds.feature_indices()
        .into_iter()
        .filter(|&j| ds.missing_count(j) > 0)
        .collect()
}

/// Checks that every feature column has an observed cell.
pub(crate) fn require_observed(ds: &Dataset) -> Result<()> {
    for j in ds.feature_indices() {
        if ds.missing_count(j) == ds.row_count() {
            return Err(Error::AllMissing {
                column: ds.column(j).name.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum ColumnStat {
    Mean,
    Median,
}

/// Most frequent value; ties go to the smaller value.
pub(crate) fn mode(values: &[f64]) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].partition_point(|&v| v == sorted[i]) + i;
        if best.is_none_or(|(_, n)| j - i > n) {
            best = Some((sorted[i], j - i));
        }
        i = j;
    }
    best.map(|(v, _)| v)
}

/// Weighted mode over level indices; ties go to the smaller level.
pub(crate) fn weighted_mode(values: &[f64], weights: &[f64]) -> Option<f64> {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < pairs.len() {
        let mut w = 0.0;
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            w += pairs[j].1;
            j += 1;
        }
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((pairs[i].0, w));
        }
        i = j;
    }
    best.map(|(v, _)| v)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// The value used to fill column `j`: the statistic of its observed cells,
/// snapped to the column's valid values; categorical columns use the mode.
pub(crate) fn fill_value(ds: &Dataset, j: usize, stat: ColumnStat) -> Result<f64> {
    let obs = ds.observed_values(j);
    if obs.is_empty() {
        return Err(Error::AllMissing {
            column: ds.column(j).name.clone(),
        });
    }
    let col = ds.column(j);
    let v = match (col.kind, stat) {
        (ColumnKind::Categorical | ColumnKind::BinaryTarget, _) => mode(&obs).expect("nonempty"),
        (_, ColumnStat::Mean) => mean(&obs),
        (_, ColumnStat::Median) => median(&obs),
    };
    Ok(col.snap(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_breaks_ties_low() {
        assert_eq!(mode(&[3.0, 1.0, 3.0, 1.0, 2.0]), Some(1.0));
        assert_eq!(mode(&[2.0, 2.0, 1.0]), Some(2.0));
        assert_eq!(mode(&[]), None);
        assert_eq!(weighted_mode(&[0.0, 1.0, 1.0], &[3.0, 1.0, 1.0]), Some(0.0));
        assert_eq!(weighted_mode(&[0.0, 1.0], &[1.0, 1.0]), Some(0.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn spec_requires_order_only_for_interpolation() {
        assert!(ImputerSpec::new(Method::Interpolate, Some(InterpolationOrder::Cubic)).is_ok());
        assert!(ImputerSpec::new(Method::Interpolate, None).is_err());
        assert!(ImputerSpec::new(Method::Mean, Some(InterpolationOrder::Linear)).is_err());
        assert!(ImputerSpec::new(Method::Locf, None).is_ok());
    }
}
