use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    encode_target, load_csv, minmax_scale, oversample_minority, ColumnKind, Dataset, LabelMapping, LoadOptions,
};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::impute::{ImputeParams, Method};
use crate::rng;
use crate::selection::SfsParams;

/// How to turn one CSV file into a benchmark-ready dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecipe {
    pub name: String,
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub target: String,
    /// Target level encoded as 1; defaults to the lexicographically later one.
    #[serde(default)]
    pub positive: Option<String>,
    #[serde(default)]
    pub missing_markers: Option<Vec<String>>,
    /// Column kind overrides; other columns are inferred.
    #[serde(default)]
    pub kinds: BTreeMap<String, ColumnKind>,
    /// Oversample the minority class until the dataset has this many rows.
    #[serde(default)]
    pub oversample_to: Option<usize>,
    /// Drop rows that already have missing cells before amputation.
    #[serde(default)]
    pub drop_incomplete: bool,
}

/// The encoded, unscaled dataset of a recipe.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub data: Dataset,
    pub mapping: LabelMapping,
}

impl DatasetRecipe {
    pub fn load(&self, base: &Path) -> Result<LoadedDataset> {
        let path = if self.path.is_absolute() {
            self.path.clone()
        } else {
            base.join(&self.path)
        };
        let mut type_hints: std::collections::HashMap<String, ColumnKind> =
            self.kinds.iter().map(|(k, v)| (k.clone(), *v)).collect();
        type_hints.remove(&self.target);
        let opts = LoadOptions {
            missing_markers: self.missing_markers.clone(),
            type_hints,
        };
        let raw = load_csv(&path, &opts)?.with_name(self.name.clone());
        let (mut data, mapping) = encode_target(&raw, &self.target, self.positive.as_deref())?;
        if self.drop_incomplete {
            data = data.drop_incomplete_rows();
        }
        Ok(LoadedDataset { data, mapping })
    }

    /// Oversampling (when configured) followed by min–max scaling.
    pub fn prepare(&self, loaded: &LoadedDataset, seed: u64) -> Result<Dataset> {
        let mut ds = loaded.data.clone();
        if let Some(total) = self.oversample_to {
            ds = oversample_minority(&ds, total, rng::derive_seed(seed, &[rng::tag("oversample")]))?;
        }
        Ok(minmax_scale(&ds).0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    #[default]
    Ranking,
    Ordering,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderingConfig {
    pub methods: Vec<Method>,
    pub rates: Vec<f64>,
    pub test_fraction: f64,
    pub sfs: SfsParams,
    /// Classifier trained on the selected features and scored on the test split.
    pub classifier: ForestParams,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        OrderingConfig {
            methods: vec![Method::MissForest, Method::Mice],
            rates: vec![0.15, 0.20],
            test_fraction: 0.2,
            sfs: SfsParams::default(),
            classifier: ForestParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub datasets: Vec<DatasetRecipe>,
    pub rates: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub params: ImputeParams,
    pub ordering: OrderingConfig,
    /// Directory that relative dataset paths resolve against. Set from the
    /// config file location when loading; never serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Ranking,
            datasets: Vec::new(),
            rates: vec![0.10, 0.15, 0.20, 0.25],
            methods: Method::ALL.to_vec(),
            seeds: (0..10).collect(),
            params: ImputeParams::default(),
            ordering: OrderingConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.context(format!("config {}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.methods.is_empty() || self.ordering.methods.is_empty() {
            return bad("method lists must be nonempty".into());
        }
        for &r in self.rates.iter().chain(&self.ordering.rates) {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("rate {r} outside (0, 1)"));
            }
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique".into());
        }
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetRecipe> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::Config(format!("no dataset named {name:?} in config")))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_unspecified_keys() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [[datasets]]
            name = "d"
            path = "d.csv"
            target = "y"
            kinds = { a = "categorical" }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.rates, vec![0.10, 0.15, 0.20, 0.25]);
        assert_eq!(cfg.methods.len(), 7);
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.ordering.methods, vec![Method::MissForest, Method::Mice]);
        assert_eq!(cfg.ordering.rates, vec![0.15, 0.20]);
        assert_eq!(cfg.ordering.sfs.folds, 5);
        assert_eq!(cfg.datasets[0].kinds["a"], ColumnKind::Categorical);
    }

    #[test]
    fn nested_parameter_blocks() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            methods = ["mean", "missforest"]
            [params.knn]
            k = 3
            [params.missforest.forest]
            n_trees = 7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.params.knn.k, 3);
        assert_eq!(cfg.params.missforest.forest.n_trees, 7);
        assert_eq!(cfg.methods, vec![Method::Mean, Method::MissForest]);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("rates = [0.0]").is_err());
        assert!(ExperimentConfig::from_toml("seeds = []").is_err());
        assert!(ExperimentConfig::from_toml("methods = []").is_err());
        assert!(ExperimentConfig::from_toml("unknown = 1").is_err());
        assert!(ExperimentConfig::from_toml("methods = [\"nope\"]").is_err());
    }
}
