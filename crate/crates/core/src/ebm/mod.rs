//! Explainable Boosting Machine: an additive logistic model whose terms are
//! per-feature (and per-pair) score tables over discretized features.
//!
//! The raw score of a row is `intercept + sum_t table_t[bin_t(row)]`, and
//! the predicted probability is the sigmoid of that sum. Tables are learned
//! by cyclic gradient boosting of shallow trees, averaged over outer bags.

pub mod bins;
mod boost;
pub mod interactions;
mod tree;

use serde::{Deserialize, Serialize};

use crate::dataio::{Cell, TabularFrame};
use crate::error::{Error, Result};

pub use bins::{bin_frame, build_bins, BinDefinition, BinnedData, MISSING_BIN};
pub use boost::{fit, FitTrace, Trainer};
pub use interactions::{detect_interactions, InteractionPair};

pub const SCHEMA_VERSION: u32 = 1;
/// Raw scores are clamped to this magnitude before the sigmoid.
pub const RAW_SCORE_CLAMP: f64 = 30.0;

pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-RAW_SCORE_CLAMP, RAW_SCORE_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn default_validation_size() -> f64 {
    0.15
}
fn default_early_stopping_rounds() -> usize {
    50
}
fn default_early_stopping_tolerance() -> f64 {
    1e-5
}
fn default_min_samples_leaf() -> usize {
    1
}
fn default_max_interaction_bins() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmHyperparams {
    pub learning_rate: f64,
    pub max_bins: usize,
    pub max_leaves: usize,
    pub max_rounds: usize,
    pub interactions: usize,
    pub outer_bags: usize,
    pub inner_bags: usize,
    pub greedy_ratio: f64,
    pub random_state: u64,
    /// Fraction of each outer bag held out for early stopping; 0 trains
    /// every bag on all rows for exactly `max_rounds` epochs.
    #[serde(default = "default_validation_size")]
    pub validation_size: f64,
    #[serde(default = "default_early_stopping_rounds")]
    pub early_stopping_rounds: usize,
    /// Relative validation log-loss improvement that resets patience.
    #[serde(default = "default_early_stopping_tolerance")]
    pub early_stopping_tolerance: f64,
    #[serde(default = "default_min_samples_leaf")]
    pub min_samples_leaf: usize,
    #[serde(default = "default_max_interaction_bins")]
    pub max_interaction_bins: usize,
}

impl Default for EbmHyperparams {
    fn default() -> Self {
        EbmHyperparams {
            learning_rate: 0.01,
            max_bins: 256,
            max_leaves: 3,
            max_rounds: 1000,
            interactions: 10,
            outer_bags: 8,
            inner_bags: 0,
            greedy_ratio: 1.5,
            random_state: 1337,
            validation_size: default_validation_size(),
            early_stopping_rounds: default_early_stopping_rounds(),
            early_stopping_tolerance: default_early_stopping_tolerance(),
            min_samples_leaf: default_min_samples_leaf(),
            max_interaction_bins: default_max_interaction_bins(),
        }
    }
}

impl EbmHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::arg(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_bins < 2 || self.max_interaction_bins < 2 {
            return bad("max_bins and max_interaction_bins must be at least 2");
        }
        if self.max_bins > u16::MAX as usize - 2 {
            return bad("max_bins too large");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.outer_bags == 0 {
            return bad("outer_bags must be at least 1");
        }
        if !(self.greedy_ratio >= 0.0 && self.greedy_ratio.is_finite()) {
            return bad("greedy_ratio must be non-negative");
        }
        if !(0.0..1.0).contains(&self.validation_size) {
            return bad("validation_size must be in [0, 1)");
        }
        Ok(())
    }

    /// Number of greedy steps appended to each cyclic epoch.
    pub fn greedy_steps(&self) -> usize {
        self.greedy_ratio.floor() as usize
    }
}

/// Per-row log-odds offsets added to the raw score during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitScores {
    pub values: Vec<f64>,
}

impl InitScores {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("init scores must be finite"));
        }
        Ok(InitScores { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> InitScores {
        InitScores {
            values: rows.iter().map(|&r| self.values[r]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermModel {
    pub name: String,
    /// Indices into the model's feature list (one or two).
    pub features: Vec<usize>,
    /// `[bins]` for main effects, `[bins_a, bins_b]` for pairs.
    pub shape: Vec<usize>,
    /// Row-major log-odds table.
    pub scores: Vec<f64>,
}

impl TermModel {
    pub fn is_pair(&self) -> bool {
        self.features.len() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub fit_started_unix: f64,
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub n_rows: usize,
    pub warm_started: bool,
    /// Training row count per table cell, aligned with `terms`.
    pub term_density: Vec<Vec<u64>>,
    /// Population standard deviation of each numeric feature.
    pub feature_std: Vec<Option<f64>>,
    /// Epochs run per outer bag in the main-effect stage.
    pub main_epochs: Vec<usize>,
    pub pair_epochs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Timestamps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmModel {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub bins: Vec<BinDefinition>,
    /// Coarser bins indexing pair-term tables.
    #[serde(default)]
    pub interaction_bins: Vec<BinDefinition>,
    pub intercept: f64,
    pub terms: Vec<TermModel>,
    pub hyperparams: EbmHyperparams,
    pub training_meta: TrainingMeta,
}

/// Binned view of a frame against a model's main and pair bins.
#[derive(Debug, Clone)]
pub struct ModelBins {
    main: BinnedData,
    pair: Option<BinnedData>,
}

impl EbmModel {
    /// Assembles a model from explicit parts (handmade or imported models).
    pub fn from_parts(
        bins: Vec<BinDefinition>,
        interaction_bins: Vec<BinDefinition>,
        intercept: f64,
        terms: Vec<TermModel>,
    ) -> Result<Self> {
        let feature_names = bins.iter().map(|b| b.feature.clone()).collect();
        let model = EbmModel {
            schema_version: SCHEMA_VERSION,
            feature_names,
            bins,
            interaction_bins,
            intercept,
            terms,
            hyperparams: EbmHyperparams::default(),
            training_meta: TrainingMeta::default(),
        };
        model.check()?;
        Ok(model)
    }

    /// Verifies that every term's table matches its bin definitions.
    pub fn check(&self) -> Result<()> {
        if !self.intercept.is_finite() {
            return Err(Error::data("intercept is not finite"));
        }
        for t in &self.terms {
            let expected: Vec<usize> = match t.features.as_slice() {
                [f] => vec![self.bins.get(*f).map(|b| b.n_bins).unwrap_or(0)],
                [a, b] => vec![
                    self.interaction_bins.get(*a).map(|d| d.n_bins).unwrap_or(0),
                    self.interaction_bins.get(*b).map(|d| d.n_bins).unwrap_or(0),
                ],
                _ => return Err(Error::data(format!("term {} has bad arity", t.name))),
            };
            if t.shape != expected || t.scores.len() != expected.iter().product::<usize>() {
                return Err(Error::data(format!("term {} does not match its bins", t.name)));
            }
            if t.scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::data(format!("term {} has non-finite scores", t.name)));
            }
        }
        Ok(())
    }

    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn bin_frame(&self, frame: &TabularFrame) -> Result<ModelBins> {
        let main = bin_frame(&self.bins, frame)?;
        let pair = if self.terms.iter().any(TermModel::is_pair) {
            Some(bin_frame(&self.interaction_bins, frame)?)
        } else {
            None
        };
        Ok(ModelBins { main, pair })
    }

    /// Table cell of term `t` for binned row `row`.
    #[inline]
    pub fn term_cell(&self, t: usize, bins: &ModelBins, row: usize) -> usize {
        let term = &self.terms[t];
        match term.features.as_slice() {
            [f] => bins.main.bin(*f, row),
            [a, b] => {
                let pb = bins.pair.as_ref().expect("pair bins");
                pb.bin(*a, row) * term.shape[1] + pb.bin(*b, row)
            }
            _ => unreachable!(),
        }
    }

    /// Table cell of term `t` for a row of cells in training-schema order.
    pub fn term_cell_of_row(&self, t: usize, row: &[Cell]) -> usize {
        let term = &self.terms[t];
        match term.features.as_slice() {
            [f] => self.bins[*f].bin_of(row[*f]),
            [a, b] => {
                let ia = self.interaction_bins[*a].bin_of(row[*a]);
                let ib = self.interaction_bins[*b].bin_of(row[*b]);
                ia * term.shape[1] + ib
            }
            _ => unreachable!(),
        }
    }

    /// Per-term contributions for one row; the raw score is the intercept
    /// plus these values summed in order.
    pub fn contributions(&self, row: &[Cell]) -> Vec<f64> {
        (0..self.terms.len())
            .map(|t| self.terms[t].scores[self.term_cell_of_row(t, row)])
            .collect()
    }

    /// Log-odds score of a row whose cells follow the training schema.
    pub fn raw_score(&self, row: &[Cell]) -> f64 {
        let mut s = self.intercept;
        for t in 0..self.terms.len() {
            s += self.terms[t].scores[self.term_cell_of_row(t, row)];
        }
        s
    }

    pub fn raw_scores_binned(&self, bins: &ModelBins) -> Vec<f64> {
        (0..bins.main.n_rows)
            .map(|r| {
                let mut s = self.intercept;
                for t in 0..self.terms.len() {
                    s += self.terms[t].scores[self.term_cell(t, bins, r)];
                }
                s
            })
            .collect()
    }

    pub fn raw_scores(&self, frame: &TabularFrame) -> Result<Vec<f64>> {
        Ok(self.raw_scores_binned(&self.bin_frame(frame)?))
    }

    pub fn predict_proba(&self, frame: &TabularFrame) -> Result<Vec<f64>> {
        Ok(self.raw_scores(frame)?.into_iter().map(sigmoid).collect())
    }

    /// Probabilities with per-row log-odds offsets added (warm-started models).
    pub fn predict_proba_with_offset(&self, frame: &TabularFrame, offset: &InitScores) -> Result<Vec<f64>> {
        if offset.len() != frame.n_rows() {
            return Err(Error::data(format!(
                "{} offsets for {} rows",
                offset.len(),
                frame.n_rows()
            )));
        }
        Ok(self
            .raw_scores(frame)?
            .into_iter()
            .zip(&offset.values)
            .map(|(s, o)| sigmoid(o + s))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: EbmModel = serde_json::from_str(s)?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EbmModel::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ColumnKind;

    fn numeric_bin(name: &str, cuts: Vec<f64>) -> BinDefinition {
        BinDefinition {
            feature: name.into(),
            kind: ColumnKind::Numeric,
            n_bins: cuts.len() + 2,
            cut_points: cuts,
            categories: vec![],
            category_bins: vec![],
            overflow_bin: None,
            has_missing_bin: false,
        }
    }

    fn two_term_model() -> EbmModel {
        let bins = vec![numeric_bin("a", vec![0.0]), numeric_bin("b", vec![0.0])];
        let terms = vec![
            TermModel {
                name: "a".into(),
                features: vec![0],
                shape: vec![3],
                scores: vec![0.0, -0.1, 0.3],
            },
            TermModel {
                name: "b".into(),
                features: vec![1],
                shape: vec![3],
                scores: vec![0.0, 0.4, -0.2],
            },
        ];
        EbmModel::from_parts(bins, vec![], -1.0, terms).unwrap()
    }

    #[test]
    fn zero_table_returns_intercept() {
        let bins = vec![numeric_bin("a", vec![])];
        let term = TermModel {
            name: "a".into(),
            features: vec![0],
            shape: vec![2],
            scores: vec![0.0, 0.0],
        };
        let m = EbmModel::from_parts(bins, vec![], 0.5, vec![term]).unwrap();
        assert_eq!(m.raw_score(&[Cell::Num(3.0)]), 0.5);
    }

    #[test]
    fn raw_score_is_intercept_plus_lookups() {
        let m = two_term_model();
        let s = m.raw_score(&[Cell::Num(1.0), Cell::Num(2.0)]);
        assert!((s - (-0.9)).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_clamp() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e6), sigmoid(30.0));
        // 1 - sigmoid(30) = e^-30 / (1 + e^-30), about 9.36e-14.
        let gap = 1.0 - sigmoid(1e6);
        assert!(gap > 9.0e-14 && gap < 1.0e-13, "{gap}");
        assert!(sigmoid(-1e6) >= 9.0e-14);
        assert!(sigmoid(f64::INFINITY) < 1.0);
    }

    #[test]
    fn check_rejects_mismatched_tables() {
        let bins = vec![numeric_bin("a", vec![0.0])];
        let term = TermModel {
            name: "a".into(),
            features: vec![0],
            shape: vec![2],
            scores: vec![0.0, 0.0],
        };
        assert!(EbmModel::from_parts(bins, vec![], 0.0, vec![term]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = two_term_model();
        let back = EbmModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
