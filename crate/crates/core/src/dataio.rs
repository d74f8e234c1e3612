//! Tabular data ingestion and seeded stratified splitting.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Tokens treated as a missing cell (after trimming).
pub const MISSING_TOKENS: [&str; 2] = ["", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Distinct labels in first-appearance order; empty for numeric columns.
    pub categories: Vec<String>,
    pub missing_count: usize,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
            missing_count: 0,
        }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories,
            missing_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    /// Index into the column's `categories`.
    Cat(u32),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }
}

/// Group membership for fairness metrics. The column also stays a feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitive {
    pub column: String,
    pub labels: Vec<String>,
    pub groups: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularFrame {
    columns: Vec<ColumnSchema>,
    cells: Vec<Cell>,
    target: Vec<u8>,
    target_name: String,
    /// `[negative, positive]` labels as they appeared in the source.
    target_labels: [String; 2],
    sensitive: Option<Sensitive>,
}

impl TabularFrame {
    /// Builds a frame from row-major `cells`, checking the shape and label
    /// invariants.
    pub fn new(columns: Vec<ColumnSchema>, cells: Vec<Cell>, target: Vec<u8>) -> Result<Self> {
        let n_cols = columns.len();
        if n_cols == 0 && !cells.is_empty() {
            return Err(Error::data("cells given without columns"));
        }
        if n_cols > 0 && cells.len() != target.len() * n_cols {
            return Err(Error::data(format!(
                "{} cells do not form {} rows of {} columns",
                cells.len(),
                target.len(),
                n_cols
            )));
        }
        if let Some(bad) = target.iter().find(|&&y| y > 1) {
            return Err(Error::data(format!("target value {bad} is not 0/1")));
        }
        let mut columns = columns;
        for (j, col) in columns.iter_mut().enumerate() {
            let mut seen = std::collections::HashSet::new();
            if !col.categories.iter().all(|c| seen.insert(c)) {
                return Err(Error::data(format!("duplicate category in column {}", col.name)));
            }
            if col.kind == ColumnKind::Numeric && !col.categories.is_empty() {
                return Err(Error::data(format!("numeric column {} has categories", col.name)));
            }
            let mut missing = 0;
            for r in 0..target.len() {
                match cells[r * n_cols + j] {
                    Cell::Missing => missing += 1,
                    Cell::Num(v) if col.kind != ColumnKind::Numeric || !v.is_finite() => {
                        return Err(Error::data(format!("bad numeric cell in column {}", col.name)))
                    }
                    Cell::Cat(c)
                        if col.kind != ColumnKind::Categorical
                            || c as usize >= col.categories.len() =>
                    {
                        return Err(Error::data(format!(
                            "bad category cell in column {}",
                            col.name
                        )))
                    }
                    _ => {}
                }
            }
            col.missing_count = missing;
        }
        Ok(TabularFrame {
            columns,
            cells,
            target,
            target_name: "target".into(),
            target_labels: ["0".into(), "1".into()],
            sensitive: None,
        })
    }

    /// All-numeric frame from a list of rows; convenient for synthetic data.
    pub fn from_numeric_rows(names: &[&str], rows: &[Vec<f64>], target: Vec<u8>) -> Result<Self> {
        let columns = names.iter().map(|n| ColumnSchema::numeric(*n)).collect();
        let mut cells = Vec::with_capacity(rows.len() * names.len());
        for row in rows {
            if row.len() != names.len() {
                return Err(Error::data("ragged rows"));
            }
            cells.extend(row.iter().map(|&v| if v.is_nan() { Cell::Missing } else { Cell::Num(v) }));
        }
        TabularFrame::new(columns, cells, target)
    }

    pub fn with_target_labels(mut self, name: &str, negative: &str, positive: &str) -> Self {
        self.target_name = name.to_string();
        self.target_labels = [negative.to_string(), positive.to_string()];
        self
    }

    /// Marks feature column `name` as the sensitive attribute.
    pub fn with_sensitive(mut self, name: &str) -> Result<Self> {
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::data(format!("sensitive column {name:?} not found")))?;
        let col = &self.columns[j];
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut groups = Vec::with_capacity(self.n_rows());
        for r in 0..self.n_rows() {
            let label = match self.cell(r, j) {
                Cell::Missing => "missing".to_string(),
                Cell::Cat(c) => col.categories[c as usize].clone(),
                Cell::Num(v) => format!("{v}"),
            };
            let next = labels.len() as u32;
            let g = *index.entry(label.clone()).or_insert_with(|| {
                labels.push(label);
                next
            });
            groups.push(g);
        }
        self.sensitive = Some(Sensitive {
            column: name.to_string(),
            labels,
            groups,
        });
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Cell] {
        let n = self.columns.len();
        &self.cells[row * n..(row + 1) * n]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target_labels(&self) -> &[String; 2] {
        &self.target_labels
    }

    pub fn sensitive(&self) -> Option<&Sensitive> {
        self.sensitive.as_ref()
    }

    pub fn n_positive(&self) -> usize {
        self.target.iter().filter(|&&y| y == 1).count()
    }

    pub fn positive_rate(&self) -> f64 {
        self.n_positive() as f64 / self.n_rows() as f64
    }

    /// Row indices of each class, in row order.
    pub fn class_indices(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, &y) in self.target.iter().enumerate() {
            out[y as usize].push(i);
        }
        out
    }

    /// Frame restricted to `rows` (in the given order). Schemas, category
    /// indices and the sensitive label table are kept so cells stay comparable.
    pub fn select_rows(&self, rows: &[usize]) -> TabularFrame {
        let n = self.columns.len();
        let mut cells = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            cells.extend_from_slice(self.row(r));
        }
        let mut columns = self.columns.clone();
        for (j, col) in columns.iter_mut().enumerate() {
            col.missing_count = rows.iter().filter(|&&r| self.cell(r, j).is_missing()).count();
        }
        TabularFrame {
            columns,
            cells,
            target: rows.iter().map(|&r| self.target[r]).collect(),
            target_name: self.target_name.clone(),
            target_labels: self.target_labels.clone(),
            sensitive: self.sensitive.as_ref().map(|s| Sensitive {
                column: s.column.clone(),
                labels: s.labels.clone(),
                groups: rows.iter().map(|&r| s.groups[r]).collect(),
            }),
        }
    }

    /// Copy with numeric cells replaced by `f(row, col, value)`.
    pub fn map_numeric(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> TabularFrame {
        let n = self.columns.len();
        let mut out = self.clone();
        for (k, cell) in out.cells.iter_mut().enumerate() {
            if let Cell::Num(v) = *cell {
                *cell = Cell::Num(f(k / n, k % n, v));
            }
        }
        out
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Target label mapped to 1. Without it the lexicographically larger of
    /// exactly two labels is positive.
    pub positive_label: Option<String>,
    /// Forces the kind of named columns instead of inferring it.
    #[serde(default)]
    pub column_kinds: BTreeMap<String, ColumnKind>,
}

fn is_missing_token(s: &str) -> bool {
    MISSING_TOKENS.contains(&s)
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a header-first CSV file into a [`TabularFrame`].
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    sensitive_column: Option<&str>,
    options: &LoadOptions,
) -> Result<TabularFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::data(format!("{}: empty file", path.display())));
    }
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::data(format!("target column {target_column:?} not found")))?;
    let mut raw: Vec<csv::StringRecord> = Vec::new();
    for record in reader.records() {
        raw.push(record.map_err(csv_err)?);
    }
    if raw.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }

    // Target mapping.
    let mut distinct: Vec<&str> = Vec::new();
    for (r, rec) in raw.iter().enumerate() {
        let v = &rec[target_idx];
        if is_missing_token(v) {
            return Err(Error::data(format!("row {}: missing target", r + 1)));
        }
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    let positive = match &options.positive_label {
        Some(p) => {
            if !distinct.iter().any(|d| d == p) {
                return Err(Error::data(format!("positive label {p:?} not present in target")));
            }
            p.clone()
        }
        None => {
            if distinct.len() != 2 {
                return Err(Error::data(format!(
                    "target {target_column:?} has {} distinct values; name a positive label",
                    distinct.len()
                )));
            }
            distinct.iter().max().unwrap().to_string()
        }
    };
    let negative = if distinct.len() == 2 {
        distinct.iter().find(|d| **d != positive).unwrap().to_string()
    } else {
        format!("not {positive}")
    };
    let target: Vec<u8> = raw.iter().map(|rec| u8::from(rec[target_idx] == positive)).collect();

    // Feature columns.
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&j| j != target_idx).collect();
    let mut columns = Vec::with_capacity(feature_idx.len());
    for &j in &feature_idx {
        let name = headers[j].clone();
        let kind = match options.column_kinds.get(&name) {
            Some(k) => *k,
            None => {
                let numeric = raw
                    .iter()
                    .map(|rec| &rec[j])
                    .filter(|v| !is_missing_token(v))
                    .all(|v| parse_number(v).is_some());
                if numeric {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                }
            }
        };
        columns.push(ColumnSchema {
            name,
            kind,
            categories: Vec::new(),
            missing_count: 0,
        });
    }
    let n_cols = columns.len();
    let mut cells = Vec::with_capacity(raw.len() * n_cols);
    let mut lookups: Vec<HashMap<String, u32>> = vec![HashMap::new(); n_cols];
    for rec in &raw {
        for (k, &j) in feature_idx.iter().enumerate() {
            let v = &rec[j];
            let col = &mut columns[k];
            let cell = if is_missing_token(v) {
                Cell::Missing
            } else {
                match col.kind {
                    ColumnKind::Numeric => parse_number(v).map_or(Cell::Missing, Cell::Num),
                    ColumnKind::Categorical => {
                        let next = col.categories.len() as u32;
                        let idx = *lookups[k].entry(v.to_string()).or_insert_with(|| {
                            col.categories.push(v.to_string());
                            next
                        });
                        Cell::Cat(idx)
                    }
                }
            };
            cells.push(cell);
        }
    }
    let frame = TabularFrame::new(columns, cells, target)?.with_target_labels(
        target_column,
        &negative,
        &positive,
    );
    match sensitive_column {
        Some(s) => frame.with_sensitive(s),
        None => Ok(frame),
    }
}

fn format_cell(col: &ColumnSchema, cell: Cell) -> String {
    match cell {
        Cell::Missing => String::new(),
        Cell::Num(v) => format!("{v}"),
        Cell::Cat(c) => col.categories[c as usize].clone(),
    }
}

/// Writes features followed by the target column (as its original labels).
pub fn write_csv(frame: &TabularFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = frame.feature_names();
    header.push(frame.target_name.clone());
    writer.write_record(&header).map_err(csv_err)?;
    for r in 0..frame.n_rows() {
        let mut rec: Vec<String> = frame
            .columns
            .iter()
            .zip(frame.row(r))
            .map(|(col, &cell)| format_cell(col, cell))
            .collect();
        rec.push(frame.target_labels[frame.target[r] as usize].clone());
        writer.write_record(&rec).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub n_repeats: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, n_repeats: usize, seed: u64) -> Self {
        SplitSpec {
            test_fraction,
            n_repeats,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::arg(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        if self.n_repeats == 0 {
            return Err(Error::arg("n_repeats must be at least 1"));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::new(0.25, 3, 1337)
    }
}

/// One train/test partition; both index lists ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub repeat: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_test_count(n_class: usize, fraction: f64) -> usize {
    let k = (fraction * n_class as f64).round() as usize;
    k.clamp(1, n_class - 1)
}

/// Seeded stratified shuffle splits. Each class is shuffled with its own
/// stream derived from `(seed, repeat, class)` and its prefix becomes test.
pub fn stratified_splits(frame: &TabularFrame, spec: &SplitSpec) -> Result<Vec<Split>> {
    spec.validate()?;
    let classes = frame.class_indices();
    for (c, idx) in classes.iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::data(format!(
                "class {c} has {} rows; stratified splitting needs at least 2",
                idx.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(spec.n_repeats);
    for repeat in 0..spec.n_repeats {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (c, idx) in classes.iter().enumerate() {
            let mut shuffled = idx.clone();
            let mut rng = rng::stream(spec.seed, &[rng::TAG_SPLIT, repeat as u64, c as u64]);
            shuffled.shuffle(&mut rng);
            let k = class_test_count(idx.len(), spec.test_fraction);
            test.extend_from_slice(&shuffled[..k]);
            train.extend_from_slice(&shuffled[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        out.push(Split {
            repeat,
            train,
            test,
        });
    }
    Ok(out)
}

/// Single stratified partition of `rows` (a subset of the frame) into
/// `(fit, holdout)`, used for internal validation slices.
pub(crate) fn stratified_partition(
    target: &[u8],
    rows: &[usize],
    holdout_fraction: f64,
    seed: u64,
    tags: &[u64],
) -> (Vec<usize>, Vec<usize>) {
    let mut fit = Vec::new();
    let mut holdout = Vec::new();
    for c in 0..2u8 {
        let mut idx: Vec<usize> = rows.iter().copied().filter(|&r| target[r] == c).collect();
        let mut t = tags.to_vec();
        t.push(c as u64);
        idx.shuffle(&mut rng::stream(seed, &t));
        let k = if idx.len() >= 2 {
            class_test_count(idx.len(), holdout_fraction)
        } else {
            0
        };
        holdout.extend_from_slice(&idx[..k]);
        fit.extend_from_slice(&idx[k..]);
    }
    fit.sort_unstable();
    holdout.sort_unstable();
    (fit, holdout)
}

/// `n_labels` row indices whose class mix matches the frame's, drawn with a
/// seeded stream. Returned ascending.
pub fn stratified_label_subset(frame: &TabularFrame, n_labels: usize, seed: u64) -> Result<Vec<usize>> {
    subset_of_rows(frame.target(), &(0..frame.n_rows()).collect::<Vec<_>>(), n_labels, seed)
}

/// As [`stratified_label_subset`] but drawing only from `rows`.
pub fn subset_of_rows(target: &[u8], rows: &[usize], n_labels: usize, seed: u64) -> Result<Vec<usize>> {
    if n_labels < 2 {
        return Err(Error::arg("n_labels must be at least 2"));
    }
    if n_labels > rows.len() {
        return Err(Error::arg(format!(
            "n_labels {n_labels} exceeds the {} available rows",
            rows.len()
        )));
    }
    let pos: Vec<usize> = rows.iter().copied().filter(|&r| target[r] == 1).collect();
    let neg: Vec<usize> = rows.iter().copied().filter(|&r| target[r] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::data("label subset needs both classes present"));
    }
    let rate = pos.len() as f64 / rows.len() as f64;
    let n_pos = ((rate * n_labels as f64).round() as usize)
        .clamp(1, n_labels - 1)
        .clamp(n_labels.saturating_sub(neg.len()), pos.len());
    let n_neg = n_labels - n_pos;
    let mut out = Vec::with_capacity(n_labels);
    for (c, (mut idx, k)) in [(neg, n_neg), (pos, n_pos)].into_iter().enumerate() {
        idx.shuffle(&mut rng::stream(seed, &[rng::TAG_LABEL_SUBSET, c as u64]));
        out.extend_from_slice(&idx[..k]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Split manifest as written to disk: one object per repeat.
pub fn splits_to_json(splits: &[Split]) -> Result<String> {
    Ok(serde_json::to_string_pretty(splits)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn binary_frame(n: usize, n_pos: usize) -> TabularFrame {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let target = (0..n).map(|i| u8::from(i < n_pos)).collect();
        TabularFrame::from_numeric_rows(&["x"], &rows, target).unwrap()
    }

    #[test]
    fn numeric_column_and_binary_target() {
        let f = write_tmp("age,y\n30,a\n40,b\n50,a\n60,b\n");
        let frame = load_csv(f.path(), "y", None, &LoadOptions::default()).unwrap();
        assert_eq!(frame.n_cols(), 1);
        assert_eq!(frame.columns()[0].kind, ColumnKind::Numeric);
        assert_eq!(frame.target(), &[0, 1, 0, 1]);
        assert_eq!(frame.target_labels(), &["a".to_string(), "b".to_string()]);
        assert_eq!(frame.cell(2, 0), Cell::Num(50.0));
    }

    #[test]
    fn mixed_tokens_force_categorical() {
        let f = write_tmp("v,y\n1,0\nx,1\n3,0\n");
        let frame = load_csv(f.path(), "y", None, &LoadOptions::default()).unwrap();
        let col = &frame.columns()[0];
        assert_eq!(col.kind, ColumnKind::Categorical);
        assert_eq!(col.categories, vec!["1", "x", "3"]);
    }

    #[test]
    fn missing_tokens_and_overrides() {
        let f = write_tmp("a,b,y\n1, ?,0\n,2,1\n3,4,1\n");
        let mut opts = LoadOptions::default();
        opts.column_kinds.insert("b".into(), ColumnKind::Categorical);
        let frame = load_csv(f.path(), "y", None, &opts).unwrap();
        assert_eq!(frame.cell(1, 0), Cell::Missing);
        assert_eq!(frame.cell(0, 1), Cell::Missing);
        assert_eq!(frame.columns()[0].missing_count, 1);
        assert_eq!(frame.columns()[1].categories, vec!["2", "4"]);
    }

    #[test]
    fn target_errors() {
        let f = write_tmp("a,y\n1,x\n2,y\n3,z\n");
        let err = load_csv(f.path(), "y", None, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        let opts = LoadOptions {
            positive_label: Some("z".into()),
            ..Default::default()
        };
        let frame = load_csv(f.path(), "y", None, &opts).unwrap();
        assert_eq!(frame.target(), &[0, 0, 1]);

        assert!(load_csv(f.path(), "nope", None, &LoadOptions::default()).is_err());
        let empty = write_tmp("");
        assert!(load_csv(empty.path(), "y", None, &LoadOptions::default()).is_err());
        let header_only = write_tmp("a,y\n");
        assert!(load_csv(header_only.path(), "y", None, &LoadOptions::default()).is_err());
    }

    #[test]
    fn income_labels_map_larger_to_positive() {
        let f = write_tmp("sex,income\nMale,>50K\nFemale,<=50K\nFemale,<=50K\n");
        let frame = load_csv(f.path(), "income", Some("sex"), &LoadOptions::default()).unwrap();
        assert_eq!(frame.target(), &[1, 0, 0]);
        let s = frame.sensitive().unwrap();
        assert_eq!(s.labels, vec!["Male", "Female"]);
        assert_eq!(s.groups, vec![0, 1, 1]);
    }

    #[test]
    fn eight_rows_exact_stratification() {
        let frame = binary_frame(8, 4);
        let splits = stratified_splits(&frame, &SplitSpec::new(0.25, 1, 3)).unwrap();
        let test = &splits[0].test;
        assert_eq!(test.len(), 2);
        assert_eq!(test.iter().filter(|&&i| frame.target()[i] == 1).count(), 1);
    }

    #[test]
    fn repeats_differ_and_reproduce() {
        let frame = binary_frame(60, 25);
        let spec = SplitSpec::new(0.3, 3, 42);
        let a = stratified_splits(&frame, &spec).unwrap();
        let b = stratified_splits(&frame, &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].test, a[1].test);
        assert_ne!(a[1].test, a[2].test);
    }

    #[test]
    fn split_errors() {
        let frame = binary_frame(10, 1);
        assert!(stratified_splits(&frame, &SplitSpec::new(0.25, 1, 0)).is_err());
        let frame = binary_frame(10, 5);
        assert!(stratified_splits(&frame, &SplitSpec::new(1.0, 1, 0)).is_err());
        assert!(stratified_splits(&frame, &SplitSpec::new(0.2, 0, 0)).is_err());
    }

    #[test]
    fn label_subset_proportions() {
        let frame = binary_frame(100, 30);
        let s = stratified_label_subset(&frame, 10, 5).unwrap();
        assert_eq!(s.len(), 10);
        assert_eq!(s.iter().filter(|&&i| frame.target()[i] == 1).count(), 3);
        assert_eq!(s, stratified_label_subset(&frame, 10, 5).unwrap());
        let all = stratified_label_subset(&frame, 100, 9).unwrap();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(stratified_label_subset(&frame, 101, 9).is_err());
    }

    #[test]
    fn select_rows_keeps_schema() {
        let f = write_tmp("c,y\nq,0\nr,1\nq,1\n");
        let frame = load_csv(f.path(), "y", Some("c"), &LoadOptions::default()).unwrap();
        let sub = frame.select_rows(&[1]);
        assert_eq!(sub.columns()[0].categories, vec!["q", "r"]);
        assert_eq!(sub.cell(0, 0), Cell::Cat(1));
        assert_eq!(sub.sensitive().unwrap().groups, vec![1]);
    }
}
