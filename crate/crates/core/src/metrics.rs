//! Classification and group-fairness metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve via midranks: the probability that a random
/// positive outscores a random negative, ties counted as one half.
pub fn roc_auc(y: &[u8], p: &[f64]) -> Result<f64> {
    if y.len() != p.len() {
        return Err(Error::arg(format!("{} labels but {} scores", y.len(), p.len())));
    }
    if p.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("scores contain NaN"));
    }
    let n_pos = y.iter().filter(|&&t| t == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::arg("roc_auc needs both classes"));
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && p[order[j]] == p[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let midrank = (i + 1 + j) as f64 / 2.0;
        let pos_in_tie = order[i..j].iter().filter(|&&k| y[k] == 1).count();
        pos_rank_sum += midrank * pos_in_tie as f64;
        i = j;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn threshold(p: &[f64], t: f64) -> Vec<u8> {
    p.iter().map(|&v| (v >= t) as u8).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(y: &[u8], yhat: &[u8]) -> Self {
        let mut m = ConfusionMatrix::default();
        for (&t, &h) in y.iter().zip(yhat) {
            match (t, h) {
                (1, 1) => m.tp += 1,
                (0, 0) => m.tn += 1,
                (0, _) => m.fp += 1,
                _ => m.fn_ += 1,
            }
        }
        m
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total().max(1) as f64
    }

    /// F1 score; 0 when there are no true positives.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if self.tp == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// Confusion counts under `yhat = 1{p >= threshold}`.
pub fn confusion(y: &[u8], p: &[f64], t: f64) -> ConfusionMatrix {
    ConfusionMatrix::from_labels(y, &threshold(p, t))
}

pub fn f1(y: &[u8], yhat: &[u8]) -> f64 {
    ConfusionMatrix::from_labels(y, yhat).f1()
}

fn max_gap<'a>(rates: impl Iterator<Item = &'a f64> + Clone) -> f64 {
    let lo = rates.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Positive-prediction rate per group.
pub fn group_positive_rates<G: Ord + Clone>(yhat: &[u8], s: &[G]) -> BTreeMap<G, f64> {
    let mut acc: BTreeMap<G, (usize, usize)> = BTreeMap::new();
    for (&h, g) in yhat.iter().zip(s) {
        let e = acc.entry(g.clone()).or_default();
        e.0 += h as usize;
        e.1 += 1;
    }
    acc.into_iter().map(|(g, (k, n))| (g, k as f64 / n as f64)).collect()
}

/// Largest pairwise gap in positive-prediction rate across groups; 0 for a
/// single group.
pub fn demographic_parity<G: Ord + Clone>(yhat: &[u8], s: &[G]) -> f64 {
    max_gap(group_positive_rates(yhat, s).values())
}

/// True- and false-positive rates per group. A group without positives has
/// no TPR entry, one without negatives no FPR entry.
pub fn group_error_rates<G: Ord + Clone>(y: &[u8], yhat: &[u8], s: &[G]) -> (BTreeMap<G, f64>, BTreeMap<G, f64>) {
    let mut acc: BTreeMap<G, [usize; 4]> = BTreeMap::new();
    for ((&t, &h), g) in y.iter().zip(yhat).zip(s) {
        let e = acc.entry(g.clone()).or_default();
        if t == 1 {
            e[0] += h as usize;
            e[1] += 1;
        } else {
            e[2] += h as usize;
            e[3] += 1;
        }
    }
    let mut tpr = BTreeMap::new();
    let mut fpr = BTreeMap::new();
    for (g, [tp, pos, fp, neg]) in acc {
        if pos > 0 {
            tpr.insert(g.clone(), tp as f64 / pos as f64);
        }
        if neg > 0 {
            fpr.insert(g, fp as f64 / neg as f64);
        }
    }
    (tpr, fpr)
}

/// Equalized-odds difference: the larger of the TPR and FPR gaps.
pub fn equalized_odds<G: Ord + Clone>(y: &[u8], yhat: &[u8], s: &[G]) -> f64 {
    let (tpr, fpr) = group_error_rates(y, yhat, s);
    max_gap(tpr.values()).max(max_gap(fpr.values()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub dp: f64,
    pub eod: f64,
    pub group_positive_rates: BTreeMap<String, f64>,
    pub group_tpr: BTreeMap<String, f64>,
    pub group_fpr: BTreeMap<String, f64>,
}

impl FairnessReport {
    /// `labels[g]` names group code `g`.
    pub fn compute(y: &[u8], yhat: &[u8], groups: &[u32], labels: &[String]) -> Self {
        let name = |g: u32| labels.get(g as usize).cloned().unwrap_or_else(|| g.to_string());
        let rename = |m: BTreeMap<u32, f64>| m.into_iter().map(|(g, v)| (name(g), v)).collect();
        let rates = group_positive_rates(yhat, groups);
        let (tpr, fpr) = group_error_rates(y, yhat, groups);
        FairnessReport {
            dp: demographic_parity(yhat, groups),
            eod: equalized_odds(y, yhat, groups),
            group_positive_rates: rename(rates),
            group_tpr: rename(tpr),
            group_fpr: rename(fpr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_p: f64,
    pub empirical_rate: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub group: String,
    pub bins: Vec<CalibrationBin>,
}

fn calibration_curve(y: &[u8], p: &[f64], rows: &[usize], n_bins: usize) -> Vec<CalibrationBin> {
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_y = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for &r in rows {
        let b = ((p[r] * n_bins as f64).floor() as usize).min(n_bins - 1);
        sum_p[b] += p[r];
        sum_y[b] += y[r] as f64;
        count[b] += 1;
    }
    (0..n_bins)
        .map(|b| {
            let c = count[b];
            let (mean_p, empirical_rate) = if c > 0 {
                (sum_p[b] / c as f64, sum_y[b] / c as f64)
            } else {
                (0.0, 0.0)
            };
            CalibrationBin {
                lower: b as f64 / n_bins as f64,
                upper: (b + 1) as f64 / n_bins as f64,
                mean_p,
                empirical_rate,
                count: c,
            }
        })
        .collect()
}

/// Equal-width reliability bins over [0, 1], overall ("all") and per group
/// when `groups` is given. Empty bins are kept with count 0.
pub fn calibration_bins(
    y: &[u8],
    p: &[f64],
    groups: Option<(&[u32], &[String])>,
    n_bins: usize,
) -> Result<Vec<CalibrationCurve>> {
    if n_bins == 0 {
        return Err(Error::arg("n_bins must be at least 1"));
    }
    if y.len() != p.len() {
        return Err(Error::arg("labels and scores differ in length"));
    }
    let all: Vec<usize> = (0..y.len()).collect();
    let mut curves = vec![CalibrationCurve {
        group: "all".into(),
        bins: calibration_curve(y, p, &all, n_bins),
    }];
    if let Some((codes, labels)) = groups {
        let mut by_group: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (r, &g) in codes.iter().enumerate() {
            by_group.entry(g).or_default().push(r);
        }
        for (g, rows) in by_group {
            curves.push(CalibrationCurve {
                group: labels.get(g as usize).cloned().unwrap_or_else(|| g.to_string()),
                bins: calibration_curve(y, p, &rows, n_bins),
            });
        }
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub roc_auc: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    pub dp: Option<f64>,
    pub eod: Option<f64>,
    pub calibration: Vec<CalibrationCurve>,
    pub fit_time_seconds: Option<f64>,
}

impl EvalReport {
    /// Metrics at threshold 0.5 with ten calibration bins.
    pub fn compute(y: &[u8], p: &[f64], groups: Option<(&[u32], &[String])>, fit_time_seconds: Option<f64>) -> Result<Self> {
        let yhat = threshold(p, 0.5);
        let cm = ConfusionMatrix::from_labels(y, &yhat);
        let (dp, eod) = match groups {
            Some((g, _)) => (Some(demographic_parity(&yhat, g)), Some(equalized_odds(y, &yhat, g))),
            None => (None, None),
        };
        Ok(EvalReport {
            roc_auc: roc_auc(y, p)?,
            f1: cm.f1(),
            confusion: cm,
            dp,
            eod,
            calibration: calibration_bins(y, p, groups, 10)?,
            fit_time_seconds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0, 1], &[0.1, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert!(roc_auc(&[1, 1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let m = ConfusionMatrix::from_labels(&[1, 0, 1, 0], &[1, 0, 0, 0]);
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (1, 2, 0, 1));
        assert!((m.f1() - 2.0 / 3.0).abs() < 1e-15);
        let all = confusion(&[1, 0, 1], &[0.0, 0.2, 0.9], 0.0);
        assert_eq!((all.tn, all.fn_), (0, 0));
    }

    #[test]
    fn parity_examples() {
        assert_eq!(demographic_parity(&[1, 1, 0, 0], &["A", "A", "B", "B"]), 1.0);
        assert_eq!(demographic_parity(&[1, 0, 1], &[0, 0, 0]), 0.0);
        let dp = demographic_parity(&[1, 0, 0, 1, 1, 0], &['A', 'A', 'A', 'B', 'B', 'B']);
        assert!((dp - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equalized_odds_by_hand() {
        // group 0: TPR 1/2, FPR 0; group 1: TPR 1, FPR 1/2.
        let y = [1, 1, 0, 0, 1, 1, 0, 0];
        let yhat = [1, 0, 0, 0, 1, 1, 1, 0];
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        assert_eq!(equalized_odds(&y, &yhat, &s), 0.5);
        assert_eq!(equalized_odds(&y, &y, &s), 0.0);
    }

    #[test]
    fn one_calibration_bin_is_base_rate() {
        let c = calibration_bins(&[1, 0, 0, 1], &[0.2, 0.3, 0.9, 1.0], None, 1).unwrap();
        assert_eq!(c[0].bins.len(), 1);
        assert_eq!(c[0].bins[0].empirical_rate, 0.5);
        assert_eq!(c[0].bins[0].count, 4);
    }
}
