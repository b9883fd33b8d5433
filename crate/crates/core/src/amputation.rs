//! MCAR amputation with retained ground truth.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

const MAX_DRAWS: usize = 10_000;

/// Blanked cells of an amputation and their original values. Coordinates
/// are unique and sorted by (row, column).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmputationMask {
    pub coords: Vec<(usize, usize)>,
    pub originals: Vec<f64>,
    pub rate: f64,
    pub seed: u64,
}

impl AmputationMask {
    pub fn empty() -> Self {
        AmputationMask {
            coords: Vec::new(),
            originals: Vec::new(),
            rate: 0.0,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.coords.iter().copied().zip(self.originals.iter().copied())
    }

    /// Keeps only entries whose column is in `cols`, renumbering columns to
    /// their position in `cols`.
    pub fn project_columns(&self, cols: &[usize]) -> AmputationMask {
        let pos: HashMap<usize, usize> = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut entries: Vec<((usize, usize), f64)> = self
            .iter()
            .filter_map(|((r, c), v)| pos.get(&c).map(|&i| ((r, i), v)))
            .collect();
        entries.sort_by_key(|e| e.0);
        let (coords, originals) = entries.into_iter().unzip();
        AmputationMask {
            coords,
            originals,
            ..self.clone()
        }
    }

    /// Writes the audit sidecar: `row,column,original_value`.
    pub fn write_csv<W: Write>(&self, ds: &Dataset, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row", "column", "original_value"])?;
        for ((r, c), v) in self.iter() {
            w.write_record([r.to_string(), ds.column(c).name.clone(), format!("{v}")])?;
        }
        w.flush().map_err(|e| Error::io("<mask writer>", e))?;
        Ok(())
    }

    /// Reads a sidecar written by [`AmputationMask::write_csv`], resolving
    /// column names against `ds`.
    pub fn read_csv<R: Read>(ds: &Dataset, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = |what: &str| Error::Unparseable {
                row: entries.len(),
                column: what.to_string(),
                value: rec.iter().collect::<Vec<_>>().join(","),
            };
            let row: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("row"))?;
            let col = ds.column_index(rec.get(1).ok_or_else(|| bad("column"))?)?;
            let v: f64 = rec
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("original_value"))?;
            entries.push(((row, col), v));
        }
        entries.sort_by_key(|e| e.0);
        let (coords, originals) = entries.into_iter().unzip();
        Ok(AmputationMask {
            coords,
            originals,
            rate: 0.0,
            seed: 0,
        })
    }
}

/// Blanks exactly `round(rate * eligible)` feature cells of a complete
/// dataset, uniformly without replacement, redrawing whenever a row would
/// lose every feature. The target column is never touched. A rate of 0
/// yields an empty mask.
pub fn ampute_mcar(ds: &Dataset, rate: f64, seed: u64) -> Result<(Dataset, AmputationMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("rate {rate} outside [0, 1)")));
    }
    if !ds.features_complete() {
        return Err(Error::PreexistingMissing);
    }
    let features = ds.feature_indices();
    let p = features.len();
    let n = ds.row_count();
    let eligible = n * p;
    let count = (rate * eligible as f64).round() as usize;
    if count > 0 && p < 2 || count > n * p.saturating_sub(1) {
        return Err(Error::Unsatisfiable(format!(
            "{count} of {eligible} cells cannot be blanked without emptying a row"
        )));
    }

    let mut rng = rng::stream(seed, &[rng::tag("ampute")]);
    let mut picked = None;
    for _ in 0..MAX_DRAWS {
        let mut cells = index::sample(&mut rng, eligible, count).into_vec();
        let mut per_row = vec![0usize; n];
        for &c in &cells {
            per_row[c / p] += 1;
        }
        if per_row.iter().all(|&k| k < p) {
            cells.sort_unstable();
            picked = Some(cells);
            break;
        }
    }
    let cells = picked.ok_or_else(|| {
        Error::Unsatisfiable(format!(
            "no draw of {count} cells left every row with an observed feature"
        ))
    })?;

    let mut out = ds.clone();
    let mut coords = Vec::with_capacity(count);
    let mut originals = Vec::with_capacity(count);
    for c in cells {
        let (r, j) = (c / p, features[c % p]);
        originals.push(ds.get(r, j).expect("features complete"));
        coords.push((r, j));
        out.set(r, j, None);
    }
    Ok((
        out,
        AmputationMask {
            coords,
            originals,
            rate,
            seed,
        },
    ))
}

/// Writes the mask's original values back into `ds`.
pub fn restore(ds: &Dataset, mask: &AmputationMask) -> Result<Dataset> {
    let mut out = ds.clone();
    for ((r, c), v) in mask.iter() {
        if r >= ds.row_count() || c >= ds.col_count() {
            return Err(Error::OutOfBounds { row: r, col: c });
        }
        out.set(r, c, Some(v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, ColumnKind};

    pub(crate) fn grid(rows: usize, cols: usize, with_target: bool) -> Dataset {
        let mut columns: Vec<Column> = (0..cols)
            .map(|j| Column::new(format!("f{j}"), ColumnKind::Continuous))
            .collect();
        if with_target {
            columns.push(Column {
                levels: vec!["0".into(), "1".into()],
                ..Column::new("y", ColumnKind::BinaryTarget)
            });
        }
        let mut cells = Vec::new();
        for r in 0..rows {
            for j in 0..cols {
                cells.push(Some((r * cols + j) as f64 * 0.5));
            }
            if with_target {
                cells.push(Some((r % 2) as f64));
            }
        }
        Dataset::new("grid", columns, cells).unwrap()
    }

    #[test]
    fn exact_count_and_determinism() {
        let ds = grid(10, 5, true);
        let (holey, mask) = ampute_mcar(&ds, 0.10, 11).unwrap();
        assert_eq!(mask.len(), 5);
        assert_eq!(holey.total_missing(), 5);
        assert!(mask.coords.iter().all(|&(_, c)| c != 5));
        let (_, again) = ampute_mcar(&ds, 0.10, 11).unwrap();
        assert_eq!(mask, again);
        let (_, other) = ampute_mcar(&ds, 0.10, 12).unwrap();
        assert_ne!(mask.coords, other.coords);
    }

    #[test]
    fn no_row_loses_all_features() {
        let ds = grid(30, 2, false);
        for seed in 0..50 {
            let (holey, mask) = ampute_mcar(&ds, 0.3, seed).unwrap();
            assert_eq!(mask.len(), 18);
            for r in 0..30 {
                assert!(holey.row(r).iter().any(Option::is_some));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = grid(4, 2, false);
        assert!(matches!(ampute_mcar(&ds, 1.0, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(ampute_mcar(&ds, 0.75, 0), Err(Error::Unsatisfiable(_))));
        let (holey, _) = ampute_mcar(&ds, 0.25, 0).unwrap();
        assert!(matches!(ampute_mcar(&holey, 0.25, 0), Err(Error::PreexistingMissing)));
        let one = grid(4, 1, true);
        assert!(matches!(ampute_mcar(&one, 0.25, 0), Err(Error::Unsatisfiable(_))));
    }

    #[test]
    fn restore_inverts_amputation() {
        let ds = grid(8, 4, true);
        let (holey, mask) = ampute_mcar(&ds, 0.2, 5).unwrap();
        assert_eq!(restore(&holey, &mask).unwrap(), ds);
        assert_eq!(restore(&ds, &AmputationMask::empty()).unwrap(), ds);
        let bad = AmputationMask {
            coords: vec![(8, 0)],
            originals: vec![1.0],
            ..AmputationMask::empty()
        };
        assert!(matches!(restore(&ds, &bad), Err(Error::OutOfBounds { row: 8, col: 0 })));
    }

    #[test]
    fn zero_rate_is_empty_mask() {
        let ds = grid(5, 3, true);
        let (same, mask) = ampute_mcar(&ds, 0.0, 1).unwrap();
        assert!(mask.is_empty());
        assert_eq!(same, ds);
    }

    #[test]
    fn sidecar_round_trip() {
        let ds = grid(6, 3, true);
        let (_, mask) = ampute_mcar(&ds, 0.3, 2).unwrap();
        let mut buf = Vec::new();
        mask.write_csv(&ds, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("row,column,original_value\n"));
        let back = AmputationMask::read_csv(&ds, buf.as_slice()).unwrap();
        assert_eq!(back.coords, mask.coords);
        assert_eq!(back.originals, mask.originals);
    }

    #[test]
    fn projection_renumbers_columns() {
        let mask = AmputationMask {
            coords: vec![(0, 0), (0, 2), (1, 3)],
            originals: vec![1.0, 2.0, 3.0],
            ..AmputationMask::empty()
        };
        let sub = mask.project_columns(&[3, 2]);
        assert_eq!(sub.coords, vec![(0, 1), (1, 0)]);
        assert_eq!(sub.originals, vec![2.0, 3.0]);
    }
}
