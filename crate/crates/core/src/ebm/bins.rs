//! Feature discretization.
//!
//! Every feature gets a table laid out as `[missing, value bins...]`, so bin
//! 0 always holds missing cells. Numeric features are cut at empirical
//! quantiles of the training values; categorical features get one bin per
//! category, with the rarest categories pooled into an overflow bin when
//! there are more categories than `max_bins`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{Cell, ColumnKind, TabularFrame};
use crate::error::{Error, Result};

pub const MISSING_BIN: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDefinition {
    pub feature: String,
    pub kind: ColumnKind,
    /// Strictly ascending thresholds; a value `v` lands right of every cut `< v`.
    #[serde(default)]
    pub cut_points: Vec<f64>,
    /// Training categories in schema order.
    #[serde(default)]
    pub categories: Vec<String>,
    /// Bin assigned to each entry of `categories`.
    #[serde(default)]
    pub category_bins: Vec<usize>,
    /// Pooled bin for rare and unseen categories, when one exists.
    #[serde(default)]
    pub overflow_bin: Option<usize>,
    /// Whether missing cells were seen in training. Bin 0 is reserved for
    /// missing values either way.
    pub has_missing_bin: bool,
    /// Table length including the missing bin.
    pub n_bins: usize,
}

impl BinDefinition {
    /// Number of non-missing bins.
    pub fn value_bins(&self) -> usize {
        self.n_bins - 1
    }

    pub fn numeric_bin(&self, v: f64) -> usize {
        1 + self.cut_points.partition_point(|&c| c < v)
    }

    /// Bin for a category given by its index in the training schema.
    pub fn category_index_bin(&self, idx: usize) -> usize {
        self.category_bins
            .get(idx)
            .copied()
            .unwrap_or_else(|| self.overflow_bin.unwrap_or(MISSING_BIN))
    }

    pub fn category_label_bin(&self, label: &str) -> usize {
        match self.categories.iter().position(|c| c == label) {
            Some(i) => self.category_bins[i],
            None => self.overflow_bin.unwrap_or(MISSING_BIN),
        }
    }

    /// Bin for a cell whose category indices refer to the training schema.
    pub fn bin_of(&self, cell: Cell) -> usize {
        match (cell, self.kind) {
            (Cell::Missing, _) => MISSING_BIN,
            (Cell::Num(v), ColumnKind::Numeric) => self.numeric_bin(v),
            (Cell::Cat(c), ColumnKind::Categorical) => self.category_index_bin(c as usize),
            // Kind mismatch: nothing sensible to look up.
            _ => MISSING_BIN,
        }
    }

    /// Human-readable label for a categorical bin.
    pub fn category_bin_label(&self, bin: usize) -> String {
        if bin == MISSING_BIN {
            return "missing".into();
        }
        if Some(bin) == self.overflow_bin {
            return "other".into();
        }
        self.categories
            .iter()
            .zip(&self.category_bins)
            .filter(|(_, &b)| b == bin)
            .map(|(c, _)| c.as_str())
            .collect::<Vec<_>>()
            .join("|")
    }

    /// `(lower, upper)` edges of a numeric bin; `None` marks an open end.
    pub fn numeric_bin_edges(&self, bin: usize) -> (Option<f64>, Option<f64>) {
        if bin == MISSING_BIN {
            return (None, None);
        }
        let k = bin - 1;
        let lower = if k == 0 { None } else { Some(self.cut_points[k - 1]) };
        let upper = self.cut_points.get(k).copied();
        (lower, upper)
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Quantile cut points over `values` (already free of missing cells).
pub(crate) fn quantile_cuts(values: &mut [f64], max_bins: usize) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in values.iter() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= 1 {
        return Vec::new();
    }
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }
    let n = values.len() as f64;
    let mut cum = Vec::with_capacity(distinct.len());
    let mut acc = 0usize;
    for &(_, c) in &distinct {
        acc += c;
        cum.push(acc as f64);
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for k in 1..max_bins {
        let target = k as f64 * n / max_bins as f64;
        let j = cum.partition_point(|&c| c < target);
        if j + 1 >= distinct.len() {
            continue;
        }
        let cut = midpoint(distinct[j].0, distinct[j + 1].0);
        if cuts.last().is_none_or(|&last| cut > last) {
            cuts.push(cut);
        }
    }
    cuts
}

/// Bin definitions for every feature column of `frame`.
pub fn build_bins(frame: &TabularFrame, max_bins: usize) -> Result<Vec<BinDefinition>> {
    if max_bins < 2 {
        return Err(Error::arg("max_bins must be at least 2"));
    }
    let mut out = Vec::with_capacity(frame.n_cols());
    for (j, col) in frame.columns().iter().enumerate() {
        let column = (0..frame.n_rows()).map(|r| frame.cell(r, j));
        let has_missing = column.clone().any(|c| c.is_missing());
        let def = match col.kind {
            ColumnKind::Numeric => {
                let mut values: Vec<f64> = column.filter_map(|c| c.as_f64()).collect();
                let cut_points = quantile_cuts(&mut values, max_bins);
                BinDefinition {
                    feature: col.name.clone(),
                    kind: ColumnKind::Numeric,
                    n_bins: cut_points.len() + 2,
                    cut_points,
                    categories: Vec::new(),
                    category_bins: Vec::new(),
                    overflow_bin: None,
                    has_missing_bin: has_missing,
                }
            }
            ColumnKind::Categorical => {
                let n_cat = col.categories.len();
                let mut counts = vec![0usize; n_cat];
                for c in column {
                    if let Cell::Cat(i) = c {
                        counts[i as usize] += 1;
                    }
                }
                let mut category_bins = vec![0usize; n_cat];
                let overflow_bin;
                let n_value_bins;
                if n_cat <= max_bins {
                    for (i, b) in category_bins.iter_mut().enumerate() {
                        *b = i + 1;
                    }
                    overflow_bin = None;
                    n_value_bins = n_cat.max(1);
                } else {
                    let keep = max_bins - 1;
                    let mut by_freq: Vec<usize> = (0..n_cat).collect();
                    by_freq.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
                    let mut kept: Vec<usize> = by_freq[..keep].to_vec();
                    kept.sort_unstable();
                    let overflow = keep + 1;
                    category_bins.iter_mut().for_each(|b| *b = overflow);
                    for (slot, &i) in kept.iter().enumerate() {
                        category_bins[i] = slot + 1;
                    }
                    overflow_bin = Some(overflow);
                    n_value_bins = max_bins;
                }
                BinDefinition {
                    feature: col.name.clone(),
                    kind: ColumnKind::Categorical,
                    cut_points: Vec::new(),
                    categories: col.categories.clone(),
                    category_bins,
                    overflow_bin,
                    has_missing_bin: has_missing,
                    n_bins: n_value_bins + 1,
                }
            }
        };
        out.push(def);
    }
    Ok(out)
}

/// Column-major bin indices for a frame, aligned to a list of bin definitions.
#[derive(Debug, Clone)]
pub struct BinnedData {
    pub columns: Vec<Vec<u16>>,
    pub n_rows: usize,
}

impl BinnedData {
    pub fn bin(&self, feature: usize, row: usize) -> usize {
        self.columns[feature][row] as usize
    }
}

/// Bins `frame` against `bins`, matching columns by name and categories by
/// label so frames loaded from other files line up with the training schema.
pub fn bin_frame(bins: &[BinDefinition], frame: &TabularFrame) -> Result<BinnedData> {
    let mut columns = Vec::with_capacity(bins.len());
    for def in bins {
        let j = frame
            .column_index(&def.feature)
            .ok_or_else(|| Error::data(format!("feature {:?} missing from frame", def.feature)))?;
        let schema = &frame.columns()[j];
        let remap: Option<Vec<usize>> = match (def.kind, schema.kind) {
            (ColumnKind::Categorical, ColumnKind::Categorical) => {
                if schema.categories == def.categories {
                    None
                } else {
                    let lookup: HashMap<&str, usize> = def
                        .categories
                        .iter()
                        .zip(&def.category_bins)
                        .map(|(c, &b)| (c.as_str(), b))
                        .collect();
                    Some(
                        schema
                            .categories
                            .iter()
                            .map(|c| {
                                lookup
                                    .get(c.as_str())
                                    .copied()
                                    .unwrap_or(def.overflow_bin.unwrap_or(MISSING_BIN))
                            })
                            .collect(),
                    )
                }
            }
            (a, b) if a == b => None,
            _ => {
                return Err(Error::data(format!(
                    "feature {:?} is {:?} in the frame but {:?} in the model",
                    def.feature, schema.kind, def.kind
                )))
            }
        };
        let col: Vec<u16> = (0..frame.n_rows())
            .map(|r| {
                let cell = frame.cell(r, j);
                let b = match (&remap, cell) {
                    (Some(map), Cell::Cat(c)) => map[c as usize],
                    _ => def.bin_of(cell),
                };
                b as u16
            })
            .collect();
        columns.push(col);
    }
    Ok(BinnedData {
        columns,
        n_rows: frame.n_rows(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ColumnSchema;

    fn numeric(values: &[f64]) -> TabularFrame {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        let target = (0..values.len()).map(|i| (i % 2) as u8).collect();
        TabularFrame::from_numeric_rows(&["x"], &rows, target).unwrap()
    }

    #[test]
    fn median_cut_for_two_bins() {
        let bins = build_bins(&numeric(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(bins[0].cut_points, vec![2.5]);
        assert_eq!(bins[0].n_bins, 3);
        assert_eq!(bins[0].numeric_bin(2.5), 1);
        assert_eq!(bins[0].numeric_bin(2.6), 2);
    }

    #[test]
    fn constant_column_has_single_value_bin() {
        let bins = build_bins(&numeric(&[7.0; 5]), 16).unwrap();
        assert!(bins[0].cut_points.is_empty());
        assert_eq!(bins[0].value_bins(), 1);
    }

    #[test]
    fn missing_goes_to_bin_zero() {
        let frame = numeric(&[1.0, f64::NAN, 3.0, 4.0]);
        let bins = build_bins(&frame, 8).unwrap();
        assert!(bins[0].has_missing_bin);
        let binned = bin_frame(&bins, &frame).unwrap();
        assert_eq!(binned.bin(0, 1), MISSING_BIN);
        assert!(binned.columns[0].iter().enumerate().all(|(r, &b)| (b == 0) == (r == 1)));
    }

    #[test]
    fn quantile_cuts_respect_max_bins() {
        let mut v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let cuts = quantile_cuts(&mut v, 10);
        assert_eq!(cuts.len(), 9);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        // heavy ties collapse duplicate cuts
        let mut tied: Vec<f64> = (0..100).map(|i| if i < 90 { 0.0 } else { i as f64 }).collect();
        let cuts = quantile_cuts(&mut tied, 10);
        assert!(cuts.len() < 9);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn categorical_overflow_pools_rare_levels() {
        let cats: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let cells = [0u32, 0, 0, 1, 1, 2, 3]
            .iter()
            .map(|&c| Cell::Cat(c))
            .collect();
        let frame = TabularFrame::new(
            vec![ColumnSchema::categorical("c", cats)],
            cells,
            vec![0, 1, 0, 1, 0, 1, 0],
        )
        .unwrap();
        let bins = build_bins(&frame, 3).unwrap();
        let def = &bins[0];
        assert_eq!(def.n_bins, 4);
        assert_eq!(def.overflow_bin, Some(3));
        assert_eq!(def.category_bins, vec![1, 2, 3, 3]);
        assert_eq!(def.category_label_bin("zzz"), 3);
        assert_eq!(def.category_bin_label(1), "a");
    }
}
