//! Shared fixtures for the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use imputebench::dataset::{Column, ColumnKind, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

/// A complete dataset with correlated continuous columns, one discrete
/// column, one three-level categorical column and a binary target. Values
/// are already on a [0, 1] scale.
pub fn synthetic(rows: usize, continuous: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Column> = (0..continuous)
        .map(|j| Column::new(format!("x{j}"), ColumnKind::Continuous))
        .collect();
    let mut discrete = Column::new("count", ColumnKind::DiscreteNumeric);
    discrete.affine.scale = 4.0;
    columns.push(discrete);
    columns.push(Column::categorical("grade", vec!["a".into(), "b".into(), "c".into()]));
    let mut target = Column::new("y", ColumnKind::BinaryTarget);
    target.levels = vec!["0".into(), "1".into()];
    columns.push(target);

    let mut cells = Vec::with_capacity(rows * columns.len());
    for _ in 0..rows {
        let latent: f64 = rng.random();
        for j in 0..continuous {
            let w = 0.3 + 0.6 * (j as f64 + 1.0) / continuous as f64;
            let v: f64 = w * latent + (1.0 - w) * rng.random::<f64>();
            cells.push(Some(v));
        }
        // stored units: raw = 4 * stored, raw in 0..=4
        cells.push(Some((latent * 4.0).round() / 4.0));
        cells.push(Some(((latent * 3.0).floor()).min(2.0)));
        cells.push(Some(if latent + 0.2 * rng.random::<f64>() > 0.6 {
            1.0
        } else {
            0.0
        }));
    }
    Dataset::new("synthetic", columns, cells).expect("valid synthetic dataset")
}

/// Straightforward reference scores, written without any of the library's
/// accumulation helpers.
pub mod oracle {
    pub fn rmse_mae(truth: &[f64], imputed: &[f64], categorical: &[bool]) -> (f64, f64) {
        let mut sq = Vec::new();
        let mut abs = Vec::new();
        for i in 0..truth.len() {
            let d = if categorical[i] {
                if truth[i] == imputed[i] {
                    0.0
                } else {
                    1.0
                }
            } else {
                (truth[i] - imputed[i]).abs()
            };
            sq.push(d * d);
            abs.push(d);
        }
        let n = truth.len() as f64;
        ((sq.iter().sum::<f64>() / n).sqrt(), abs.iter().sum::<f64>() / n)
    }

    /// (recall, precision, f1, accuracy) for positive class 1.
    pub fn classification(truth: &[usize], pred: &[usize]) -> [f64; 4] {
        let count = |t: usize, p: usize| truth.iter().zip(pred).filter(|&(&a, &b)| a == t && b == p).count() as f64;
        let (tp, fp, tn, fn_) = (count(1, 1), count(0, 1), count(0, 0), count(1, 0));
        let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        let recall = ratio(tp, tp + fn_);
        let precision = ratio(tp, tp + fp);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        [recall, precision, f1, (tp + tn) / truth.len() as f64]
    }
}
