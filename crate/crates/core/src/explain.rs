//! Exact explanations read straight off the model's lookup tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{Cell, ColumnKind, TabularFrame};
use crate::ebm::{BinDefinition, EbmModel, MISSING_BIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub term: String,
    pub importance: f64,
    /// 1-based; 1 is the most important term.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalExplanation {
    /// In term definition order (not sorted by rank).
    pub entries: Vec<ImportanceEntry>,
}

impl GlobalExplanation {
    pub fn get(&self, term: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| e.term == term)
    }

    /// Entries sorted by rank.
    pub fn ranked(&self) -> Vec<&ImportanceEntry> {
        let mut v: Vec<&ImportanceEntry> = self.entries.iter().collect();
        v.sort_by_key(|e| e.rank);
        v
    }
}

/// Assigns 1-based ranks by descending value; ties keep input order.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Mean absolute contribution of each term over `reference`.
pub fn explain_global(model: &EbmModel, reference: &TabularFrame) -> Result<GlobalExplanation> {
    let n = reference.n_rows();
    if n == 0 {
        return Err(Error::data("reference frame is empty"));
    }
    let bins = model.bin_frame(reference)?;
    let importances: Vec<f64> = (0..model.terms.len())
        .map(|t| {
            let scores = &model.terms[t].scores;
            let mut sum = 0.0;
            for r in 0..n {
                sum += scores[model.term_cell(t, &bins, r)].abs();
            }
            sum / n as f64
        })
        .collect();
    let ranks = rank_descending(&importances);
    Ok(GlobalExplanation {
        entries: model
            .terms
            .iter()
            .zip(importances)
            .zip(ranks)
            .map(|((t, importance), rank)| ImportanceEntry {
                term: t.name.clone(),
                importance,
                rank,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub intercept: f64,
    /// `(term name, log-odds contribution)` in term order.
    pub contributions: Vec<(String, f64)>,
    pub total: f64,
}

/// Per-term breakdown of one row (cells in training-schema order). `total`
/// is accumulated in the same order as the raw score, so the two agree
/// exactly.
pub fn explain_local(model: &EbmModel, row: &[Cell]) -> LocalExplanation {
    let values = model.contributions(row);
    let mut total = model.intercept;
    for v in &values {
        total += v;
    }
    LocalExplanation {
        intercept: model.intercept,
        contributions: model.terms.iter().map(|t| t.name.clone()).zip(values).collect(),
        total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    /// Bin index per term axis.
    pub bins: Vec<usize>,
    /// Numeric edges of main-effect bins, `None` for open ends,
    /// categorical bins and pairs.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub label: String,
    pub score: f64,
    pub density: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub term: String,
    pub features: Vec<String>,
    pub shape: Vec<usize>,
    pub rows: Vec<ShapeRow>,
}

fn fmt_edge(v: Option<f64>, open: &str) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| open.into())
}

/// Readable label of one bin, `(lo, hi]` for numeric bins.
pub fn bin_label(def: &BinDefinition, bin: usize) -> String {
    if bin == MISSING_BIN {
        return "missing".into();
    }
    match def.kind {
        ColumnKind::Categorical => def.category_bin_label(bin),
        ColumnKind::Numeric => {
            let (lo, hi) = def.numeric_bin_edges(bin);
            format!("({}, {}]", fmt_edge(lo, "-inf"), fmt_edge(hi, "inf"))
        }
    }
}

/// Plot-ready table of a term: one row per bin, or one per grid cell for
/// pairs (row-major). Densities are the training counts stored in the model.
pub fn export_shape_function(model: &EbmModel, term: &str) -> Result<ShapeFunction> {
    let t = model
        .term_index(term)
        .ok_or_else(|| Error::arg(format!("unknown term {term:?}")))?;
    let tm = &model.terms[t];
    let density = |cell: usize| {
        model
            .training_meta
            .term_density
            .get(t)
            .and_then(|d| d.get(cell))
            .copied()
            .unwrap_or(0)
    };
    let rows = match tm.features.as_slice() {
        [f] => {
            let def = &model.bins[*f];
            (0..tm.shape[0])
                .map(|b| {
                    let (lower, upper) = match def.kind {
                        ColumnKind::Numeric => def.numeric_bin_edges(b),
                        ColumnKind::Categorical => (None, None),
                    };
                    ShapeRow {
                        bins: vec![b],
                        lower,
                        upper,
                        label: bin_label(def, b),
                        score: tm.scores[b],
                        density: density(b),
                    }
                })
                .collect()
        }
        [a, b] => {
            let (da, db) = (&model.interaction_bins[*a], &model.interaction_bins[*b]);
            let mut rows = Vec::with_capacity(tm.scores.len());
            for i in 0..tm.shape[0] {
                for j in 0..tm.shape[1] {
                    let cell = i * tm.shape[1] + j;
                    rows.push(ShapeRow {
                        bins: vec![i, j],
                        lower: None,
                        upper: None,
                        label: format!("{} & {}", bin_label(da, i), bin_label(db, j)),
                        score: tm.scores[cell],
                        density: density(cell),
                    });
                }
            }
            rows
        }
        _ => unreachable!("terms are main effects or pairs"),
    };
    Ok(ShapeFunction {
        term: tm.name.clone(),
        features: tm.features.iter().map(|&f| model.feature_names[f].clone()).collect(),
        shape: tm.shape.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationExport {
    pub global: Vec<ImportanceEntry>,
    pub shapes: Vec<ShapeFunction>,
}

impl ExplanationExport {
    pub fn build(model: &EbmModel, reference: &TabularFrame) -> Result<Self> {
        let global = explain_global(model, reference)?.entries;
        let shapes = model
            .terms
            .iter()
            .map(|t| export_shape_function(model, &t.name))
            .collect::<Result<_>>()?;
        Ok(ExplanationExport { global, shapes })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flattens every shape row into one CSV table.
    pub fn write_shapes_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["term", "bins", "lower", "upper", "label", "score", "density"])
            .map_err(csv_err)?;
        for s in &self.shapes {
            for r in &s.rows {
                let bins = r.bins.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(":");
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                w.write_record([
                    s.term.clone(),
                    bins,
                    opt(r.lower),
                    opt(r.upper),
                    r.label.clone(),
                    r.score.to_string(),
                    r.density.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
