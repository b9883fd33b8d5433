//! CART trees and random forests for regression and binary/multi-class
//! classification.
//!
//! Splits are greedy and axis-aligned. Regression maximizes the reduction in
//! summed squared error, classification the decrease in Gini impurity
//! (both weighted by node size). Thresholds are midpoints between adjacent
//! distinct values; among equally good splits the lowest column, then the
//! lowest threshold, wins. Every tree draws from its own stream derived from
//! the forest seed and the tree index, so training in parallel gives the same
//! forest as training sequentially.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until the other stopping rules fire.
    pub max_depth: Option<usize>,
    /// `None` uses 1 for classification and 5 for regression.
    pub min_leaf: Option<usize>,
    /// Features tried per split; `None` uses ceil(sqrt(p)) for
    /// classification and ceil(p/3) for regression.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: None,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_seed(&self, seed: u64) -> Self {
        ForestParams { seed, ..self.clone() }
    }

    pub fn resolved_min_leaf(&self, task: Task) -> usize {
        self.min_leaf
            .unwrap_or(match task {
                Task::Regression => 5,
                Task::Classification { .. } => 1,
            })
            .max(1)
    }

    /// Features tried per split for `p` features, clamped to `1..=p`.
    pub fn resolved_mtry(&self, task: Task, p: usize) -> usize {
        let default = match task {
            Task::Regression => p.div_ceil(3),
            Task::Classification { .. } => (p as f64).sqrt().ceil() as usize,
        };
        self.mtry.unwrap_or(default).clamp(1, p.max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("forest.n_trees must be at least 1".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::InvalidParameter("forest.mtry must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dense complete feature matrix, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_columns(rows: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for (j, c) in columns.into_iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Shape(format!(
                    "column {j} has {} rows, expected {rows}",
                    c.len()
                )));
            }
            data.extend(c);
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); cols];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!("row {i} has {} values, expected {cols}", r.len())));
            }
            for (j, &v) in r.iter().enumerate() {
                columns[j].push(v);
            }
        }
        FeatureMatrix::from_columns(rows.len(), columns)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(row, j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        column: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Mean response (regression) or majority class (classification).
        value: f64,
        /// Class counts; empty for regression leaves.
        counts: Vec<usize>,
        n: usize,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => node = if row[*column] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Leaf { .. } => vec![self],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

/// The best split found at a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub column: usize,
    pub threshold: f64,
    /// Impurity decrease, weighted by node size.
    pub gain: f64,
}

/// Size-weighted node impurity: summed squared error for regression,
/// `n * gini` for classification.
pub fn node_impurity(y: &[f64], task: Task) -> f64 {
    let n = y.len() as f64;
    if y.is_empty() {
        return 0.0;
    }
    match task {
        Task::Regression => {
            let mean = y.iter().sum::<f64>() / n;
            y.iter().map(|v| (v - mean).powi(2)).sum()
        }
        Task::Classification { n_classes } => {
            let mut counts = vec![0usize; n_classes];
            for &v in y {
                counts[v as usize] += 1;
            }
            n - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n
        }
    }
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    y: &'a [f64],
    task: Task,
    min_leaf: usize,
    mtry: usize,
    max_depth: Option<usize>,
    ranks: &'a Ranks,
    /// Multiplicity of each training row in the current node (scan path).
    counts: Vec<u32>,
    keys: Vec<u64>,
    sorted_ranks: Vec<u32>,
    sorted_y: Vec<f64>,
}

/// Dense per-column ranks of a feature matrix; equal values share a rank.
/// Sorting packed (rank, row) keys is much cheaper than sorting floats.
struct Ranks {
    ranks: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
    /// Row indices sorted by (rank, row) for each column.
    order: Vec<Vec<u32>>,
}

impl Ranks {
    fn new(x: &FeatureMatrix) -> Self {
        assert!(x.rows() < u32::MAX as usize, "row count exceeds rank key width");
        let mut out = Ranks {
            ranks: Vec::with_capacity(x.cols()),
            values: Vec::with_capacity(x.cols()),
            order: Vec::with_capacity(x.cols()),
        };
        for c in 0..x.cols() {
            let col = x.column(c);
            let mut values = col.to_vec();
            values.sort_unstable_by(f64::total_cmp);
            values.dedup();
            let ranks: Vec<u32> = col.iter().map(|v| values.partition_point(|u| u < v) as u32).collect();
            let mut order: Vec<u32> = (0..col.len() as u32).collect();
            order.sort_unstable_by_key(|&r| (ranks[r as usize], r));
            out.ranks.push(ranks);
            out.values.push(values);
            out.order.push(order);
        }
        out
    }
}

impl Grower<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let n = idx.len();
        match self.task {
            Task::Regression => TreeNode::Leaf {
                value: idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64,
                counts: Vec::new(),
                n,
            },
            Task::Classification { n_classes } => {
                let mut counts = vec![0usize; n_classes];
                for &i in idx {
                    counts[self.y[i] as usize] += 1;
                }
                TreeNode::Leaf {
                    value: argmax_low(&counts) as f64,
                    counts,
                    n,
                }
            }
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        let first = self.y[idx[0]];
        idx.iter().all(|&i| self.y[i] == first)
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let n = idx.len();
        if n < 2 * self.min_leaf || self.max_depth.is_some_and(|d| depth >= d) || self.is_pure(idx) {
            return self.leaf(idx);
        }
        let mut cols = index::sample(rng, self.x.cols(), self.mtry).into_vec();
        cols.sort_unstable();
        let Some(split) = self.best_split(idx, &cols) else {
            return self.leaf(idx);
        };
        let column = self.x.column(split.column);
        let mut lo = 0;
        for k in 0..n {
            if column[idx[k]] <= split.threshold {
                idx.swap(lo, k);
                lo += 1;
            }
        }
        let (l, r) = idx.split_at_mut(lo);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        TreeNode::Split {
            column: split.column,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&mut self, idx: &[usize], cols: &[usize]) -> Option<SplitChoice> {
        let mut best: Option<SplitChoice> = None;
        // large nodes walk the presorted column order; small ones sort
        let n = idx.len();
        let scan = n * (usize::BITS - n.leading_zeros()) as usize > self.x.rows();
        if scan {
            for &i in idx {
                self.counts[i] += 1;
            }
        }
        for &c in cols {
            let rank = &self.ranks.ranks[c];
            self.sorted_ranks.clear();
            self.sorted_y.clear();
            if scan {
                for &r in &self.ranks.order[c] {
                    let r = r as usize;
                    for _ in 0..self.counts[r] {
                        self.sorted_ranks.push(rank[r]);
                        self.sorted_y.push(self.y[r]);
                    }
                }
            } else {
                self.keys.clear();
                self.keys
                    .extend(idx.iter().map(|&i| ((rank[i] as u64) << 32) | i as u64));
                self.keys.sort_unstable();
                for &k in &self.keys {
                    self.sorted_ranks.push((k >> 32) as u32);
                    self.sorted_y.push(self.y[(k & 0xffff_ffff) as usize]);
                }
            }
            if let Some((at, gain)) = scan_splits(&self.sorted_ranks, &self.sorted_y, self.task, self.min_leaf) {
                if best.is_none_or(|b| gain > b.gain) {
                    let values = &self.ranks.values[c];
                    best = Some(SplitChoice {
                        column: c,
                        threshold: midpoint(
                            values[self.sorted_ranks[at - 1] as usize],
                            values[self.sorted_ranks[at] as usize],
                        ),
                        gain,
                    });
                }
            }
        }
        if scan {
            for &i in idx {
                self.counts[i] = 0;
            }
        }
        best
    }
}

fn argmax_low(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Best (split position, gain) over responses `y` sorted by feature rank,
/// keeping at least `min_leaf` rows per side. Position `i` puts the first
/// `i` rows on the left. The earliest position wins ties.
fn scan_splits(ranks: &[u32], y: &[f64], task: Task, min_leaf: usize) -> Option<(usize, f64)> {
    let n = y.len();
    if n < 2 * min_leaf || ranks[0] == ranks[n - 1] {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    let mut consider = |i: usize, score: f64| {
        if ranks[i - 1] < ranks[i] && best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    };
    match task {
        Task::Regression => {
            let total: f64 = y.iter().sum();
            let mut left = 0.0;
            for i in 1..n {
                left += y[i - 1];
                if i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let right = total - left;
                let score = left * left / i as f64 + right * right / (n - i) as f64;
                consider(i, score);
            }
            best.map(|(i, s)| (i, s - total * total / n as f64))
        }
        Task::Classification { n_classes } => {
            let mut right_counts = vec![0usize; n_classes];
            for &v in y {
                right_counts[v as usize] += 1;
            }
            let parent_sq: f64 = right_counts.iter().map(|&c| (c * c) as f64).sum();
            let mut left_counts = vec![0usize; n_classes];
            let (mut left_sq, mut right_sq) = (0.0, parent_sq);
            for i in 1..n {
                let k = y[i - 1] as usize;
                left_sq += (2 * left_counts[k] + 1) as f64;
                right_sq -= (2 * right_counts[k] - 1) as f64;
                left_counts[k] += 1;
                right_counts[k] -= 1;
                if i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let score = left_sq / i as f64 + right_sq / (n - i) as f64;
                consider(i, score);
            }
            best.map(|(i, s)| (i, s - parent_sq / n as f64))
        }
    }
}

fn check_training(x: &FeatureMatrix, y: &[f64], task: Task) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} responses",
            x.rows(),
            y.len()
        )));
    }
    if x.cols() == 0 {
        return Err(Error::Empty("training set has no features".into()));
    }
    if let Task::Classification { n_classes } = task {
        if y.iter()
            .any(|&v| v < 0.0 || v.fract() != 0.0 || v as usize >= n_classes)
        {
            return Err(Error::InvalidParameter(format!(
                "class labels must be integers in 0..{n_classes}"
            )));
        }
    }
    Ok(())
}

/// Grows a tree on the rows listed in `rows` (repeats allowed).
pub fn train_tree_on(
    x: &FeatureMatrix,
    y: &[f64],
    rows: &mut [usize],
    task: Task,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> Result<TreeNode> {
    check_training(x, y, task)?;
    grow_tree(x, y, rows, task, params, &Ranks::new(x), rng)
}

fn grow_tree(
    x: &FeatureMatrix,
    y: &[f64],
    rows: &mut [usize],
    task: Task,
    params: &ForestParams,
    ranks: &Ranks,
    rng: &mut ChaCha8Rng,
) -> Result<TreeNode> {
    if rows.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    let mut grower = Grower {
        x,
        y,
        task,
        min_leaf: params.resolved_min_leaf(task),
        mtry: params.resolved_mtry(task, x.cols()),
        max_depth: params.max_depth,
        ranks,
        counts: vec![0; x.rows()],
        keys: Vec::with_capacity(rows.len()),
        sorted_ranks: Vec::with_capacity(rows.len()),
        sorted_y: Vec::with_capacity(rows.len()),
    };
    Ok(grower.grow(rows, 0, rng))
}

pub fn train_tree(
    x: &FeatureMatrix,
    y: &[f64],
    task: Task,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> Result<TreeNode> {
    let mut rows: Vec<usize> = (0..y.len()).collect();
    train_tree_on(x, y, &mut rows, task, params, rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub task: Task,
    pub params: ForestParams,
    pub n_features: usize,
}

pub fn train_forest(x: &FeatureMatrix, y: &[f64], task: Task, params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    check_training(x, y, task)?;
    let n = y.len();
    let ranks = Ranks::new(x);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(params.seed, &[rng::tag("tree"), t as u64]);
            let mut rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, &mut rows, task, params, &ranks, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        task,
        params: params.clone(),
        n_features: x.cols(),
    })
}

impl Forest {
    fn check(&self, x: &FeatureMatrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::Shape(format!(
                "forest trained on {} features, got {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.task {
            Task::Regression => self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64,
            Task::Classification { n_classes } => {
                let mut votes = vec![0usize; n_classes];
                for t in &self.trees {
                    votes[t.predict(row) as usize] += 1;
                }
                argmax_low(&votes) as f64
            }
        }
    }

    /// Regression: mean of tree outputs. Classification: majority vote,
    /// ties to the lower class index.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok((0..x.rows())
            .into_par_iter()
            .map(|r| self.predict_row(&x.row(r)))
            .collect())
    }
}

/// Convenience wrapper over [`Forest::predict`].
pub fn predict(forest: &Forest, x: &FeatureMatrix) -> Result<Vec<f64>> {
    forest.predict(x)
}
