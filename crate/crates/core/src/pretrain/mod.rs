//! Self-supervised warm starts.
//!
//! An autoencoder learns a compact embedding of the (unlabeled) feature
//! space; a logistic head fitted on a small labeled subset turns the
//! embedding into probabilities, and their log-odds become the EBM's
//! per-row init scores.

pub mod autoencoder;
pub mod encode;
pub mod head;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{subset_of_rows, TabularFrame};
use crate::ebm::{logit, InitScores};
use crate::error::{Error, Result};

pub use autoencoder::{gradient_check, train_autoencoder, AeConfig, Activation, AutoencoderModel};
pub use encode::{encode_features, Encoder, Matrix};
pub use head::{fit_head, LogisticHead};

/// Head probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before
/// the logit.
pub const PROB_CLAMP: f64 = 1e-6;

/// Log-odds of a probability after clamping.
pub fn clamped_logit(p: f64) -> f64 {
    logit(p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub autoencoder: AeConfig,
    pub head_l2: f64,
    /// Labeled rows drawn from the training split; when unset,
    /// `label_fraction` of the training rows.
    pub n_labels: Option<usize>,
    pub label_fraction: f64,
    pub label_seed: u64,
    /// Train the autoencoder on training rows only instead of every row.
    pub train_only: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            autoencoder: AeConfig::default(),
            head_l2: 0.05,
            n_labels: None,
            label_fraction: 0.1,
            label_seed: 1337,
            train_only: false,
        }
    }
}

impl PretrainConfig {
    pub fn labels_for(&self, n_train: usize) -> usize {
        self.n_labels
            .unwrap_or_else(|| ((self.label_fraction * n_train as f64).round() as usize).max(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitScorePipeline {
    pub encoder: Encoder,
    pub autoencoder: AutoencoderModel,
    pub head: LogisticHead,
    pub config: PretrainConfig,
}

impl InitScorePipeline {
    /// Fits the encoder and autoencoder on `unlabeled`, then the head on
    /// the embeddings of `labeled`.
    pub fn fit(unlabeled: &TabularFrame, labeled: &TabularFrame, config: &PretrainConfig) -> Result<Self> {
        let (encoder, x) = encode_features(unlabeled)?;
        let autoencoder = train_autoencoder(&x, &config.autoencoder)?;
        let z = autoencoder.embed(&encoder.transform(labeled)?);
        let head = fit_head(&z, labeled.target(), config.head_l2)?;
        Ok(InitScorePipeline {
            encoder,
            autoencoder,
            head,
            config: config.clone(),
        })
    }

    /// Pretraining for one train/test split of `frame`: the autoencoder
    /// sees every row's features (or training rows only when
    /// `train_only`), the head sees a stratified labeled subset of `train`.
    /// Returns the pipeline and the labeled row indices.
    pub fn fit_split(frame: &TabularFrame, train: &[usize], config: &PretrainConfig) -> Result<(Self, Vec<usize>)> {
        let labeled = subset_of_rows(frame.target(), train, config.labels_for(train.len()), config.label_seed)?;
        let unlabeled = if config.train_only {
            frame.select_rows(train)
        } else {
            frame.clone()
        };
        let pipeline = Self::fit(&unlabeled, &frame.select_rows(&labeled), config)?;
        Ok((pipeline, labeled))
    }

    pub fn predict_proba(&self, frame: &TabularFrame) -> Result<Vec<f64>> {
        let z = self.autoencoder.embed(&self.encoder.transform(frame)?);
        Ok(self.head.predict_proba(&z))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Per-row init scores: clamped log-odds of the head's probabilities.
pub fn make_init_scores(pipeline: &InitScorePipeline, frame: &TabularFrame) -> Result<InitScores> {
    let p = pipeline.predict_proba(frame)?;
    InitScores::new(p.into_iter().map(clamped_logit).collect())
}

/// Single-column CSV (`init_score`) in row order.
pub fn write_init_scores_csv(scores: &InitScores, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("init_score\n");
    for v in &scores.values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_init_scores_csv(path: impl AsRef<Path>) -> Result<InitScores> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = s.lines();
    if lines.next().map(str::trim) != Some("init_score") {
        return Err(Error::data(format!("{}: expected an init_score header", path.display())));
    }
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::data(format!("{}: bad init score {l:?}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    InitScores::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_boundaries() {
        assert_eq!(clamped_logit(0.5), 0.0);
        assert_eq!(clamped_logit(1e-9), logit(1e-6));
        assert_eq!(clamped_logit(1.0), logit(1.0 - 1e-6));
    }

    #[test]
    fn init_score_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = InitScores::new(vec![0.1, -2.5, 1e-17, 3.0]).unwrap();
        write_init_scores_csv(&s, &p).unwrap();
        assert_eq!(read_init_scores_csv(&p).unwrap(), s);
    }
}
