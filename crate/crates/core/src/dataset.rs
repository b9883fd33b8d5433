//! Column-typed tables with per-cell missingness.
//!
//! A [`Dataset`] stores every cell as an optional `f64`. Categorical cells
//! hold level indices, the binary target holds 0 or 1. Each numeric column
//! also carries an affine map back to raw units so that integer-valued
//! columns stay integer-valued after min–max scaling.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Continuous,
    DiscreteNumeric,
    Categorical,
    BinaryTarget,
}

impl ColumnKind {
    pub fn is_numeric_feature(self) -> bool {
        matches!(self, ColumnKind::Continuous | ColumnKind::DiscreteNumeric)
    }
}

impl std::str::FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(ColumnKind::Continuous),
            "discrete" | "discrete-numeric" => Ok(ColumnKind::DiscreteNumeric),
            "categorical" => Ok(ColumnKind::Categorical),
            "binary-target" | "target" => Ok(ColumnKind::BinaryTarget),
            other => Err(Error::InvalidParameter(format!("unknown column kind {other:?}"))),
        }
    }
}

/// Maps stored values back to raw units: `raw = offset + scale * stored`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub offset: f64,
    pub scale: f64,
}

impl Default for Affine {
    fn default() -> Self {
        Affine {
            offset: 0.0,
            scale: 1.0,
        }
    }
}

impl Affine {
    pub fn to_raw(&self, stored: f64) -> f64 {
        self.offset + self.scale * stored
    }

    pub fn from_raw(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Level texts for categorical columns; `[negative, positive]` for the target.
    #[serde(default)]
    pub levels: Vec<String>,
    #[serde(default)]
    pub affine: Affine,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
            levels: Vec::new(),
            affine: Affine::default(),
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Column {
            levels,
            ..Column::new(name, ColumnKind::Categorical)
        }
    }

    /// Projects a value onto the set of values valid for this column:
    /// integers (in raw units) for discrete columns, level indices for
    /// categorical and target columns.
    pub fn snap(&self, value: f64) -> f64 {
        match self.kind {
            ColumnKind::Continuous => value,
            ColumnKind::DiscreteNumeric => self.affine.from_raw(self.affine.to_raw(value).round()),
            ColumnKind::Categorical => {
                let top = self.levels.len().saturating_sub(1) as f64;
                value.round().clamp(0.0, top)
            }
            ColumnKind::BinaryTarget => value.round().clamp(0.0, 1.0),
        }
    }

    fn render(&self, value: f64) -> String {
        match self.kind {
            ColumnKind::Categorical | ColumnKind::BinaryTarget if !self.levels.is_empty() => {
                self.levels[value as usize].clone()
            }
            _ => format!("{value}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    columns: Vec<Column>,
    cells: Vec<Option<f64>>,
    rows: usize,
}

impl Dataset {
    /// Builds a dataset from row-major cells, checking the type invariants.
    pub fn new(name: impl Into<String>, columns: Vec<Column>, cells: Vec<Option<f64>>) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::Empty("dataset has no columns".into()));
        }
        if !cells.len().is_multiple_of(cols) {
            return Err(Error::Shape(format!(
                "{} cells do not fill rows of {cols} columns",
                cells.len()
            )));
        }
        let ds = Dataset {
            name: name.into(),
            rows: cells.len() / cols,
            columns,
            cells,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let targets = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::BinaryTarget)
            .count();
        if targets > 1 {
            return Err(Error::Target("more than one binary-target column".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Shape(format!("duplicate column name {:?}", c.name)));
            }
        }
        for r in 0..self.rows {
            for (j, col) in self.columns.iter().enumerate() {
                let Some(v) = self.get(r, j) else { continue };
                let valid = match col.kind {
                    ColumnKind::Continuous => v.is_finite(),
                    ColumnKind::DiscreteNumeric => {
                        let raw = col.affine.to_raw(v);
                        v.is_finite() && (raw - raw.round()).abs() <= 1e-9 * raw.abs().max(1.0)
                    }
                    ColumnKind::Categorical => v >= 0.0 && v.fract() == 0.0 && (v as usize) < col.levels.len(),
                    ColumnKind::BinaryTarget => v == 0.0 || v == 1.0,
                };
                if !valid {
                    return Err(Error::Unparseable {
                        row: r,
                        column: col.name.clone(),
                        value: format!("{v}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn col_count(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn target_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.kind == ColumnKind::BinaryTarget)
    }

    /// Indices of every column except the binary target.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.col_count())
            .filter(|&j| self.columns[j].kind != ColumnKind::BinaryTarget)
            .collect()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let p = self.columns.len();
        &self.cells[row * p..(row + 1) * p]
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    pub fn column_values(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.rows).map(move |r| self.get(r, col))
    }

    pub fn observed_values(&self, col: usize) -> Vec<f64> {
        self.column_values(col).flatten().collect()
    }

    pub fn missing_count(&self, col: usize) -> usize {
        self.column_values(col).filter(Option::is_none).count()
    }

    pub fn total_missing(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    /// True when no feature cell is missing.
    pub fn features_complete(&self) -> bool {
        self.feature_indices().into_iter().all(|j| self.missing_count(j) == 0)
    }

    pub fn target_labels(&self) -> Result<Vec<usize>> {
        let t = self
            .target_index()
            .ok_or_else(|| Error::Target("dataset has no binary-target column".into()))?;
        (0..self.rows)
            .map(|r| {
                self.get(r, t)
                    .map(|v| v as usize)
                    .ok_or_else(|| Error::Target(format!("missing target at row {r}")))
            })
            .collect()
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        let p = self.columns.len();
        self.cells[row * p + col] = value;
    }

    /// New dataset made of the given rows, in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut cells = Vec::with_capacity(rows.len() * self.col_count());
        for &r in rows {
            cells.extend_from_slice(self.row(r));
        }
        Dataset {
            name: self.name.clone(),
            columns: self.columns.clone(),
            cells,
            rows: rows.len(),
        }
    }

    /// New dataset made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let mut cells = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            cells.extend(cols.iter().map(|&j| self.get(r, j)));
        }
        Dataset {
            name: self.name.clone(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            cells,
            rows: self.rows,
        }
    }

    /// Drops every row that has a missing cell in any column.
    pub fn drop_incomplete_rows(&self) -> Dataset {
        let keep: Vec<usize> = (0..self.rows)
            .filter(|&r| self.row(r).iter().all(Option::is_some))
            .collect();
        self.select_rows(&keep)
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Cell texts treated as missing; `None` uses `{"", "NA", "?"}`.
    pub missing_markers: Option<Vec<String>>,
    pub type_hints: HashMap<String, ColumnKind>,
}

pub const DEFAULT_MISSING_MARKERS: [&str; 3] = ["", "NA", "?"];

pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, name, opts)
}

/// Parses a dataset from CSV text. Row numbers in errors are 0-based data rows.
pub fn read_csv<R: Read>(reader: R, name: impl Into<String>, opts: &LoadOptions) -> Result<Dataset> {
    let markers: HashSet<String> = match &opts.missing_markers {
        Some(m) => m.iter().cloned().collect(),
        None => DEFAULT_MISSING_MARKERS.iter().map(|s| s.to_string()).collect(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Empty("csv has no header".into()));
    }
    let p = header.len();
    let mut raw: Vec<Vec<Option<String>>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != p {
            return Err(Error::RaggedRow {
                row: r,
                expected: p,
                found: rec.len(),
            });
        }
        raw.push(
            rec.iter()
                .map(|s| (!markers.contains(s)).then(|| s.to_string()))
                .collect(),
        );
    }
    if raw.is_empty() {
        return Err(Error::Empty("csv has a header but no rows".into()));
    }

    let mut columns = Vec::with_capacity(p);
    let mut parsed: Vec<Vec<Option<f64>>> = Vec::with_capacity(p);
    for (j, col_name) in header.iter().enumerate() {
        let texts: Vec<Option<&str>> = raw.iter().map(|row| row[j].as_deref()).collect();
        let hint = opts.type_hints.get(col_name).copied();
        let (column, values) = type_column(col_name, &texts, hint)?;
        columns.push(column);
        parsed.push(values);
    }
    let mut cells = Vec::with_capacity(raw.len() * p);
    for r in 0..raw.len() {
        cells.extend(parsed.iter().map(|col| col[r]));
    }
    let ds = Dataset::new(name, columns, cells)?;
    match opts.type_hints.iter().find(|(_, k)| **k == ColumnKind::BinaryTarget) {
        Some((target, _)) => Ok(encode_target(&ds, target, None)?.0),
        None => Ok(ds),
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn type_column(name: &str, texts: &[Option<&str>], hint: Option<ColumnKind>) -> Result<(Column, Vec<Option<f64>>)> {
    let numeric: Option<Vec<Option<f64>>> = texts
        .iter()
        .map(|t| match t {
            None => Some(None),
            Some(s) => parse_number(s).map(Some),
        })
        .collect();
    let kind = match hint {
        Some(ColumnKind::BinaryTarget) | Some(ColumnKind::Categorical) => ColumnKind::Categorical,
        Some(k) => k,
        None => match &numeric {
            None => ColumnKind::Categorical,
            Some(vals) if vals.iter().flatten().all(|v| v.fract() == 0.0) => ColumnKind::DiscreteNumeric,
            Some(_) => ColumnKind::Continuous,
        },
    };
    match kind {
        ColumnKind::Categorical => {
            let distinct: BTreeSet<&str> = texts.iter().flatten().copied().collect();
            let mut levels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
            if levels.iter().all(|l| parse_number(l).is_some()) {
                levels.sort_by(|a, b| parse_number(a).unwrap().total_cmp(&parse_number(b).unwrap()));
            }
            let index: HashMap<&str, f64> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as f64)).collect();
            let values = texts.iter().map(|t| t.map(|s| index[s])).collect();
            Ok((Column::categorical(name, levels), values))
        }
        _ => {
            let mut values = Vec::with_capacity(texts.len());
            for (r, t) in texts.iter().enumerate() {
                let v = match t {
                    None => None,
                    Some(s) => {
                        let v = parse_number(s).filter(|v| kind != ColumnKind::DiscreteNumeric || v.fract() == 0.0);
                        Some(v.ok_or_else(|| Error::Unparseable {
                            row: r,
                            column: name.to_string(),
                            value: s.to_string(),
                        })?)
                    }
                };
                values.push(v);
            }
            Ok((Column::new(name, kind), values))
        }
    }
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file)
}

/// Writes the dataset as CSV; missing cells become empty fields.
pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.columns().iter().map(|c| c.name.as_str()))?;
    for r in 0..ds.row_count() {
        let rec: Vec<String> = ds
            .row(r)
            .iter()
            .zip(ds.columns())
            .map(|(v, c)| v.map(|v| c.render(v)).unwrap_or_default())
            .collect();
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Level-text assignment for the binary target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    pub column: String,
    pub negative: String,
    pub positive: String,
}

impl LabelMapping {
    pub fn encode(&self, level: &str) -> Option<u8> {
        if level == self.positive {
            Some(1)
        } else if level == self.negative {
            Some(0)
        } else {
            None
        }
    }
}

/// Turns a two-level column into the binary target. `positive` names the
/// level encoded as 1; by default the lexicographically later level.
pub fn encode_target(ds: &Dataset, column: &str, positive: Option<&str>) -> Result<(Dataset, LabelMapping)> {
    let j = ds.column_index(column)?;
    let col = ds.column(j);
    let text_of = |v: f64| -> String {
        match col.kind {
            ColumnKind::Categorical | ColumnKind::BinaryTarget if !col.levels.is_empty() => {
                col.levels[v as usize].clone()
            }
            _ => format!("{}", col.affine.to_raw(v)),
        }
    };
    let mut texts = Vec::with_capacity(ds.row_count());
    for r in 0..ds.row_count() {
        match ds.get(r, j) {
            Some(v) => texts.push(text_of(v)),
            None => return Err(Error::Target(format!("missing target value at row {r}"))),
        }
    }
    let distinct: BTreeSet<&str> = texts.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(Error::Target(format!(
            "column {column:?} has {} levels, expected 2",
            distinct.len()
        )));
    }
    let levels: Vec<&str> = distinct.into_iter().collect();
    let pos = match positive {
        Some(p) if levels.contains(&p) => p,
        Some(p) => {
            return Err(Error::Target(format!(
                "positive level {p:?} not present in column {column:?}"
            )))
        }
        None => levels[1],
    };
    let neg = if levels[0] == pos { levels[1] } else { levels[0] };
    let mapping = LabelMapping {
        column: column.to_string(),
        negative: neg.to_string(),
        positive: pos.to_string(),
    };

    let mut out = ds.clone();
    for (r, t) in texts.iter().enumerate() {
        out.set(r, j, Some(if t == pos { 1.0 } else { 0.0 }));
    }
    let other_target = out.target_index().filter(|&t| t != j);
    if let Some(t) = other_target {
        return Err(Error::Target(format!(
            "column {:?} is already the target",
            out.column(t).name
        )));
    }
    out.columns[j] = Column {
        name: col.name.clone(),
        kind: ColumnKind::BinaryTarget,
        levels: vec![neg.to_string(), pos.to_string()],
        affine: Affine::default(),
    };
    Ok((out, mapping))
}

/// Per-column observed bounds used by [`minmax_scale`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    /// `Some((min, max))` for every scaled column.
    pub bounds: Vec<Option<(f64, f64)>>,
}

impl ScalingParams {
    pub fn is_constant(&self, col: usize) -> bool {
        matches!(self.bounds[col], Some((lo, hi)) if lo == hi)
    }

    fn span(&self, col: usize) -> Option<(f64, f64)> {
        self.bounds[col].map(|(lo, hi)| (lo, if hi > lo { hi - lo } else { 1.0 }))
    }

    /// Width of the raw range for a scaled column (1 for constant columns).
    pub fn range(&self, col: usize) -> f64 {
        self.span(col).map(|(_, w)| w).unwrap_or(1.0)
    }

    /// Maps a dataset with the same schema into the scaled space defined by these params.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds)?;
        let mut out = ds.clone();
        for j in 0..ds.col_count() {
            let Some((lo, w)) = self.span(j) else { continue };
            for r in 0..ds.row_count() {
                if let Some(v) = ds.get(r, j) {
                    out.set(r, j, Some((v - lo) / w));
                }
            }
            let a = ds.columns[j].affine;
            out.columns[j].affine = Affine {
                offset: a.offset + a.scale * lo,
                scale: a.scale * w,
            };
        }
        Ok(out)
    }

    /// Inverse of [`ScalingParams::apply`].
    pub fn invert(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds)?;
        let mut out = ds.clone();
        for j in 0..ds.col_count() {
            let Some((lo, w)) = self.span(j) else { continue };
            for r in 0..ds.row_count() {
                if let Some(v) = ds.get(r, j) {
                    out.set(r, j, Some(lo + v * w));
                }
            }
            let a = ds.columns[j].affine;
            out.columns[j].affine = Affine {
                offset: a.offset - a.scale / w * lo,
                scale: a.scale / w,
            };
        }
        Ok(out)
    }

    fn check(&self, ds: &Dataset) -> Result<()> {
        if self.bounds.len() != ds.col_count() {
            return Err(Error::Shape(format!(
                "scaling params cover {} columns, dataset has {}",
                self.bounds.len(),
                ds.col_count()
            )));
        }
        Ok(())
    }
}

/// Min–max scales every continuous and discrete column onto [0, 1] using
/// its observed cells. Constant columns map to 0.
pub fn minmax_scale(ds: &Dataset) -> (Dataset, ScalingParams) {
    let bounds = (0..ds.col_count())
        .map(|j| {
            if !ds.column(j).kind.is_numeric_feature() {
                return None;
            }
            let obs = ds.observed_values(j);
            if obs.is_empty() {
                return None;
            }
            let lo = obs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = obs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some((lo, hi))
        })
        .collect();
    let params = ScalingParams { bounds };
    let scaled = params.apply(ds).expect("params built from this dataset");
    (scaled, params)
}

/// Row indices of a stratified train/test split, each sorted ascending.
pub fn stratified_split_indices(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let labels = ds.target_labels()?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(r);
    }
    let mut rng = rng::stream(seed, &[rng::tag("split")]);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut rows) in by_class {
        if rows.len() < 2 {
            return Err(Error::Target(format!(
                "class {class} has {} row(s); stratified split needs 2",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        let n_test = ((test_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(ds, test_fraction, seed)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

/// Appends uniformly drawn copies of minority-class rows until the dataset
/// has `target_total` rows.
pub fn oversample_minority(ds: &Dataset, target_total: usize, seed: u64) -> Result<Dataset> {
    if target_total < ds.row_count() {
        return Err(Error::InvalidParameter(format!(
            "target total {target_total} is below the current {} rows",
            ds.row_count()
        )));
    }
    let labels = ds.target_labels()?;
    let ones: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == 1).collect();
    let zeros: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == 0).collect();
    let minority = if ones.len() <= zeros.len() { ones } else { zeros };
    let extra = target_total - ds.row_count();
    if extra == 0 {
        return Ok(ds.clone());
    }
    if minority.is_empty() {
        return Err(Error::Target("minority class is empty".into()));
    }
    let mut rng = rng::stream(seed, &[rng::tag("oversample")]);
    let mut rows: Vec<usize> = (0..ds.row_count()).collect();
    rows.extend((0..extra).map(|_| minority[rng.random_range(0..minority.len())]));
    Ok(ds.select_rows(&rows))
}
