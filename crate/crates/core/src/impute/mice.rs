//! Multiple imputation by chained equations.
//!
//! Each of `n_chains` independent chains starts from random draws of the
//! observed values and then, for a number of iterations, regresses every
//! incomplete column on all other feature columns and redraws its missing
//! cells. Linear chains perturb predictions with predictive mean matching
//! (or Gaussian residual noise when PMM is off); forest chains use the
//! prediction of one randomly drawn tree. The chains are pooled into a single
//! completed dataset by the per-cell mean (mode for categorical columns).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::missforest::design;
use super::{imputable_columns, mean, mode, require_observed};
use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestParams, Task};
use crate::linalg::solve_least_squares;
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regressor {
    #[default]
    LinearLeastSquares,
    Forest,
}

impl std::str::FromStr for Regressor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "linear-least-squares" => Ok(Regressor::LinearLeastSquares),
            "forest" => Ok(Regressor::Forest),
            other => Err(Error::InvalidParameter(format!("unknown MICE regressor {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceParams {
    pub n_chains: usize,
    pub iterations: usize,
    pub regressor: Regressor,
    /// Donor pool size for predictive mean matching; 0 adds Gaussian
    /// residual noise instead.
    pub pmm_donors: usize,
    /// Forest settings for [`Regressor::Forest`].
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for MiceParams {
    fn default() -> Self {
        MiceParams {
            n_chains: 5,
            iterations: 10,
            regressor: Regressor::LinearLeastSquares,
            pmm_donors: 5,
            forest: ForestParams {
                n_trees: 10,
                ..ForestParams::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiceOutcome {
    /// Chains pooled by per-cell mean (mode for categorical columns).
    pub completed: Dataset,
    pub chains: Vec<Dataset>,
    /// Regressions solved through the ridge fallback, over all chains.
    pub ridge_fallbacks: usize,
}

pub fn impute_mice(ds: &Dataset, params: &MiceParams) -> Result<MiceOutcome> {
    if params.n_chains == 0 || params.iterations == 0 {
        return Err(Error::InvalidParameter(
            "mice.n_chains and mice.iterations must be at least 1".into(),
        ));
    }
    let mut order = imputable_columns(ds);
    if order.is_empty() {
        return Ok(MiceOutcome {
            completed: ds.clone(),
            chains: vec![ds.clone(); params.n_chains],
            ridge_fallbacks: 0,
        });
    }
    require_observed(ds)?;
    order.sort_by_key(|&j| (ds.missing_count(j), j));

    let ctx = ChainContext::new(ds, order);
    let results = (0..params.n_chains)
        .into_par_iter()
        .map(|chain| ctx.run(params, chain))
        .collect::<Result<Vec<_>>>()?;
    let ridge_fallbacks = results.iter().map(|r| r.1).sum();
    if ridge_fallbacks > 0 {
        log::info!("mice: {ridge_fallbacks} regression(s) used the ridge fallback");
    }
    let chains: Vec<Dataset> = results.into_iter().map(|r| r.0).collect();

    let mut completed = ds.clone();
    for &j in &ctx.order {
        let col = ds.column(j);
        for &r in &ctx.missing_rows[j] {
            let draws: Vec<f64> = chains.iter().map(|c| c.get(r, j).expect("chain complete")).collect();
            let v = if col.kind == ColumnKind::Categorical {
                mode(&draws).expect("at least one chain")
            } else {
                mean(&draws)
            };
            completed.set(r, j, Some(col.snap(v)));
        }
    }
    Ok(MiceOutcome {
        completed,
        chains,
        ridge_fallbacks,
    })
}

struct ChainContext<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    features: Vec<usize>,
    observed_rows: Vec<Vec<usize>>,
    missing_rows: Vec<Vec<usize>>,
}

impl<'a> ChainContext<'a> {
    fn new(ds: &'a Dataset, order: Vec<usize>) -> Self {
        let n = ds.row_count();
        ChainContext {
            ds,
            order,
            features: ds.feature_indices(),
            observed_rows: (0..ds.col_count())
                .map(|j| (0..n).filter(|&r| ds.get(r, j).is_some()).collect())
                .collect(),
            missing_rows: (0..ds.col_count())
                .map(|j| (0..n).filter(|&r| ds.get(r, j).is_none()).collect())
                .collect(),
        }
    }

    fn observed_y(&self, c: usize) -> Vec<f64> {
        self.observed_rows[c]
            .iter()
            .map(|&r| self.ds.get(r, c).expect("observed"))
            .collect()
    }

    fn run(&self, params: &MiceParams, chain: usize) -> Result<(Dataset, usize)> {
        let mut rng = rng::stream(params.seed, &[rng::tag("mice"), chain as u64]);
        let mut current = self.ds.clone();
        for &c in &self.order {
            let obs = self.observed_y(c);
            for &r in &self.missing_rows[c] {
                current.set(r, c, Some(obs[rng.random_range(0..obs.len())]));
            }
        }
        let mut fallbacks = 0;
        for it in 0..params.iterations {
            for &c in &self.order {
                let predictors: Vec<usize> = self.features.iter().copied().filter(|&j| j != c).collect();
                if predictors.is_empty() {
                    continue;
                }
                let draws = match params.regressor {
                    Regressor::LinearLeastSquares => {
                        let (d, ridge) = self.linear_draws(&current, c, &predictors, params.pmm_donors, &mut rng)?;
                        fallbacks += ridge as usize;
                        d
                    }
                    Regressor::Forest => {
                        let seed = rng::derive_seed(
                            params.seed,
                            &[rng::tag("mice-forest"), chain as u64, it as u64, c as u64],
                        );
                        self.forest_draws(&current, c, &predictors, &params.forest.with_seed(seed), &mut rng)?
                    }
                };
                let col = self.ds.column(c);
                for (&r, v) in self.missing_rows[c].iter().zip(draws) {
                    current.set(r, c, Some(col.snap(v)));
                }
            }
        }
        Ok((current, fallbacks))
    }

    fn linear_draws(
        &self,
        current: &Dataset,
        c: usize,
        predictors: &[usize],
        donors: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<f64>, bool)> {
        let obs_rows = &self.observed_rows[c];
        let miss_rows = &self.missing_rows[c];
        let x_obs = with_intercept(current, predictors, obs_rows);
        let y = DVector::from_vec(self.observed_y(c));
        let fit = solve_least_squares(&x_obs, &y);
        let fitted = &x_obs * &fit.coefficients;
        let pred = with_intercept(current, predictors, miss_rows) * &fit.coefficients;

        let draws = if donors > 0 {
            let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(obs_rows.len());
            pred.iter()
                .map(|&p| {
                    ranked.clear();
                    ranked.extend(fitted.iter().enumerate().map(|(i, &f)| ((f - p).abs(), i)));
                    let k = donors.min(ranked.len());
                    ranked.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let pool = &mut ranked[..k];
                    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    y[pool[rng.random_range(0..k)].1]
                })
                .collect()
        } else {
            let resid = &y - &fitted;
            let dof = (obs_rows.len() as f64 - x_obs.ncols() as f64).max(1.0);
            let sigma = (resid.norm_squared() / dof).sqrt();
            if sigma > 0.0 {
                let noise = Normal::new(0.0, sigma).expect("finite sigma");
                pred.iter().map(|&p| p + noise.sample(rng)).collect()
            } else {
                pred.iter().copied().collect()
            }
        };
        Ok((draws, fit.ridge))
    }

    fn forest_draws(
        &self,
        current: &Dataset,
        c: usize,
        predictors: &[usize],
        forest: &ForestParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        let col = self.ds.column(c);
        let task = match col.kind {
            ColumnKind::Categorical => Task::Classification {
                n_classes: col.levels.len(),
            },
            _ => Task::Regression,
        };
        let x = design(current, predictors, &self.observed_rows[c])?;
        let fitted = train_forest(&x, &self.observed_y(c), task, forest)?;
        let x_miss = design(current, predictors, &self.missing_rows[c])?;
        Ok((0..x_miss.rows())
            .map(|i| {
                let tree = &fitted.trees[rng.random_range(0..fitted.trees.len())];
                tree.predict(&x_miss.row(i))
            })
            .collect())
    }
}

/// Design matrix with an intercept column. Categorical predictors enter as
/// indicators for every level but the first.
fn with_intercept(ds: &Dataset, cols: &[usize], rows: &[usize]) -> DMatrix<f64> {
    let mut terms: Vec<(usize, Option<f64>)> = Vec::new();
    for &j in cols {
        let col = ds.column(j);
        if col.kind == ColumnKind::Categorical {
            terms.extend((1..col.levels.len()).map(|level| (j, Some(level as f64))));
        } else {
            terms.push((j, None));
        }
    }
    DMatrix::from_fn(rows.len(), terms.len() + 1, |i, k| {
        if k == 0 {
            return 1.0;
        }
        let (j, level) = terms[k - 1];
        let v = ds.get(rows[i], j).expect("chain cells are filled");
        match level {
            Some(l) => (v == l) as u8 as f64,
            None => v,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;

    fn linear_pair(n: usize, missing_row: usize) -> Dataset {
        let mut cells = Vec::new();
        for r in 0..n {
            let x = r as f64 / (n - 1) as f64;
            cells.push(Some(x));
            cells.push(if r == missing_row { None } else { Some(2.0 * x) });
        }
        Dataset::new(
            "t",
            vec![
                Column::new("x", ColumnKind::Continuous),
                Column::new("y", ColumnKind::Continuous),
            ],
            cells,
        )
        .unwrap()
    }

    #[test]
    fn exact_linear_relation_without_pmm() {
        let ds = linear_pair(10, 4);
        let params = MiceParams {
            pmm_donors: 0,
            ..MiceParams::default()
        };
        let out = impute_mice(&ds, &params).unwrap();
        let want = 2.0 * 4.0 / 9.0;
        assert!((out.completed.get(4, 1).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn pmm_draws_an_observed_value() {
        let ds = linear_pair(10, 7);
        let params = MiceParams {
            n_chains: 1,
            pmm_donors: 1,
            ..MiceParams::default()
        };
        let out = impute_mice(&ds, &params).unwrap();
        let v = out.completed.get(7, 1).unwrap();
        assert!(ds.observed_values(1).contains(&v));
        assert_eq!(out.chains.len(), 1);
    }

    #[test]
    fn complete_dataset_is_untouched() {
        let ds = linear_pair(5, usize::MAX);
        let out = impute_mice(&ds, &MiceParams::default()).unwrap();
        assert_eq!(out.completed, ds);
    }

    #[test]
    fn pooled_value_is_chain_mean() {
        let ds = linear_pair(12, 3);
        let params = MiceParams {
            n_chains: 4,
            ..MiceParams::default()
        };
        let out = impute_mice(&ds, &params).unwrap();
        let draws: Vec<f64> = out.chains.iter().map(|c| c.get(3, 1).unwrap()).collect();
        assert_eq!(out.completed.get(3, 1), Some(mean(&draws)));
    }

    #[test]
    fn forest_regressor_runs() {
        let ds = linear_pair(20, 5);
        let params = MiceParams {
            regressor: Regressor::Forest,
            n_chains: 2,
            iterations: 2,
            ..MiceParams::default()
        };
        let out = impute_mice(&ds, &params).unwrap();
        let v = out.completed.get(5, 1).unwrap();
        let obs = ds.observed_values(1);
        assert!(v >= obs.iter().copied().fold(f64::INFINITY, f64::min));
        assert!(v <= obs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn rank_deficient_design_falls_back_to_ridge() {
        // x2 duplicates x1, so the design for y is singular
        let mut cells = Vec::new();
        for r in 0..10 {
            let x = r as f64 / 9.0;
            cells.extend([Some(x), Some(x), if r == 2 { None } else { Some(1.0 - x) }]);
        }
        let ds = Dataset::new(
            "t",
            vec![
                Column::new("x1", ColumnKind::Continuous),
                Column::new("x2", ColumnKind::Continuous),
                Column::new("y", ColumnKind::Continuous),
            ],
            cells,
        )
        .unwrap();
        let out = impute_mice(
            &ds,
            &MiceParams {
                n_chains: 1,
                iterations: 1,
                ..MiceParams::default()
            },
        )
        .unwrap();
        assert_eq!(out.ridge_fallbacks, 1);
        assert!(out.completed.get(2, 2).is_some());
    }
}
