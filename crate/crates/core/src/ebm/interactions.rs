//! Pairwise interaction ranking on the residuals of an additive model.

use serde::{Deserialize, Serialize};

use super::bins::{bin_frame, build_bins, BinDefinition, BinnedData};
use super::tree::{best_quadrant_gain, Histogram};
use super::EbmModel;
use crate::dataio::TabularFrame;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPair {
    /// Feature indices with `features.0 < features.1`.
    pub features: (usize, usize),
    pub gain: f64,
}

/// Ranks all feature pairs by how much a four-quadrant split of their joint
/// histogram improves on `model`'s predictions, returning the top `k`.
/// `k` is clamped to the number of pairs. Ties break by feature index.
pub fn detect_interactions(frame: &TabularFrame, model: &EbmModel, k: usize) -> Result<Vec<InteractionPair>> {
    let scores = model.raw_scores(frame)?;
    let ibins = if model.interaction_bins.is_empty() {
        build_bins(frame, model.hyperparams.max_interaction_bins)?
    } else {
        model.interaction_bins.clone()
    };
    let ibinned = bin_frame(&ibins, frame)?;
    let y: Vec<f64> = frame.target().iter().map(|&t| t as f64).collect();
    Ok(rank_pairs(&ibins, &ibinned, &y, &scores, k))
}

pub(crate) fn rank_pairs(
    bins: &[BinDefinition],
    binned: &BinnedData,
    y: &[f64],
    scores: &[f64],
    k: usize,
) -> Vec<InteractionPair> {
    let d = bins.len();
    let n = y.len();
    let (grad, hess): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .zip(y)
        .map(|(&s, &t)| {
            let p = super::sigmoid(s);
            (p - t, p * (1.0 - p))
        })
        .unzip();
    let mut pairs = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for a in 0..d {
        for b in a + 1..d {
            let nb = bins[b].n_bins;
            let mut hist = Histogram::new(bins[a].n_bins, nb);
            let (ca, cb) = (&binned.columns[a], &binned.columns[b]);
            for r in 0..n {
                hist.add(ca[r] as usize * nb + cb[r] as usize, grad[r], hess[r], 1.0);
            }
            pairs.push(InteractionPair {
                features: (a, b),
                gain: best_quadrant_gain(&hist),
            });
        }
    }
    pairs.sort_by(|x, y| y.gain.total_cmp(&x.gain).then(x.features.cmp(&y.features)));
    pairs.truncate(k);
    pairs
}
