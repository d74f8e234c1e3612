//! Repeated-split evaluation, paired significance tests and perturbation
//! sensitivity.

use std::path::PathBuf;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataio::{stratified_splits, subset_of_rows, ColumnKind, SplitSpec, TabularFrame};
use crate::ebm::{fit, EbmHyperparams, EbmModel, InitScores};
use crate::error::{Error, Result};
use crate::hpo::Study;
use crate::metrics::EvalReport;
use crate::pretrain::{make_init_scores, InitScorePipeline, PretrainConfig};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs with a non-zero difference.
    pub n_effective: usize,
    pub method: PMethod,
}

/// Largest sample size whose p-value is computed exactly.
pub const WILCOXON_EXACT_MAX: usize = 20;

/// Midranks (1-based) of `v`; tied values share the mean of their ranks.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Two-sided paired Wilcoxon signed-rank test of `a - b`. Zero differences
/// are dropped. Up to 20 pairs the null distribution of `W+` is counted
/// exactly over all sign assignments (midranks included); beyond that a
/// tie-corrected normal approximation with continuity correction is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::arg(format!("paired samples differ in length ({} vs {})", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(SignificanceResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: PMethod::Exact,
        });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);
    if n <= WILCOXON_EXACT_MAX {
        // Doubled midranks are integers, so W+ can be counted on a grid.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let limit = (2.0 * w).round() as usize;
        let tail: u64 = counts[..=limit].iter().sum();
        let p = (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0);
        return Ok(SignificanceResult {
            statistic: w,
            p_value: p,
            n_effective: n,
            method: PMethod::Exact,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((mean - w).abs() - 0.5).max(0.0) / var.sqrt();
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * std_normal.cdf(-z)).min(1.0)
    };
    Ok(SignificanceResult {
        statistic: w,
        p_value: p,
        n_effective: n,
        method: PMethod::Normal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PerturbMode {
    /// Every numeric feature.
    Gaussian,
    /// One named numeric feature only.
    Targeted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    /// Noise standard deviation in units of each feature's training std.
    pub noise_scale: f64,
    pub n_draws: usize,
    pub seed: u64,
    pub mode: PerturbMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub mean_abs_delta: f64,
    pub max_abs_delta: f64,
    /// Share of (row, draw) pairs whose 0.5-thresholded label changed.
    pub flip_rate: f64,
}

/// Re-predicts `frame` under seeded Gaussian noise on numeric features.
/// Noise scales use the model's recorded training std, falling back to the
/// std of `frame` for models that carry none. Categoricals are untouched.
pub fn perturbation_sensitivity(model: &EbmModel, frame: &TabularFrame, cfg: &PerturbConfig) -> Result<PerturbationReport> {
    if !(cfg.noise_scale >= 0.0 && cfg.noise_scale.is_finite()) {
        return Err(Error::arg("noise_scale must be non-negative"));
    }
    let base = model.predict_proba(frame)?;
    let stds: Vec<f64> = (0..frame.n_cols())
        .map(|j| {
            let col = &frame.columns()[j];
            let targeted_out = matches!(&cfg.mode, PerturbMode::Targeted(name) if *name != col.name);
            if col.kind != ColumnKind::Numeric || targeted_out {
                return 0.0;
            }
            let recorded = model
                .feature_names
                .iter()
                .position(|f| *f == col.name)
                .and_then(|f| model.training_meta.feature_std.get(f).copied().flatten());
            recorded.unwrap_or_else(|| column_std(frame, j))
        })
        .collect();
    if let PerturbMode::Targeted(name) = &cfg.mode {
        let j = frame
            .column_index(name)
            .ok_or_else(|| Error::arg(format!("unknown feature {name:?}")))?;
        if frame.columns()[j].kind != ColumnKind::Numeric {
            return Err(Error::arg(format!("targeted feature {name:?} is not numeric")));
        }
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut flips = 0usize;
    let mut count = 0usize;
    for draw in 0..cfg.n_draws {
        let mut r = rng::stream(cfg.seed, &[rng::TAG_PERTURB, draw as u64]);
        let noisy = frame.map_numeric(|_, j, v| {
            let z: f64 = StandardNormal.sample(&mut r);
            v + cfg.noise_scale * stds[j] * z
        });
        let p = model.predict_proba(&noisy)?;
        for (a, b) in base.iter().zip(&p) {
            let d = (a - b).abs();
            sum += d;
            max = max.max(d);
            flips += ((*a >= 0.5) != (*b >= 0.5)) as usize;
            count += 1;
        }
    }
    let denom = count.max(1) as f64;
    Ok(PerturbationReport {
        mean_abs_delta: sum / denom,
        max_abs_delta: max,
        flip_rate: flips as f64 / denom,
    })
}

fn column_std(frame: &TabularFrame, j: usize) -> f64 {
    let v: Vec<f64> = (0..frame.n_rows()).filter_map(|r| frame.cell(r, j).as_f64()).collect();
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Where a configuration's hyperparameters come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HpSource {
    Fixed(EbmHyperparams),
    /// Best trial of a persisted study.
    Study(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub hyperparams: HpSource,
    /// Warm-start every fit with init scores from this pipeline setup.
    pub pretrain: Option<PretrainConfig>,
    /// Train the EBM on this many stratified labeled training rows only
    /// (the cold-start regime) instead of the whole training split.
    pub label_budget: Option<usize>,
}

impl RunConfig {
    pub fn baseline(name: &str, hp: EbmHyperparams) -> Self {
        RunConfig {
            name: name.into(),
            hyperparams: HpSource::Fixed(hp),
            pretrain: None,
            label_budget: None,
        }
    }

    fn resolve(&self) -> Result<EbmHyperparams> {
        match &self.hyperparams {
            HpSource::Fixed(hp) => Ok(hp.clone()),
            HpSource::Study(path) => {
                if !path.exists() {
                    return Err(Error::MissingArtifact(path.clone()));
                }
                let study = Study::load(path)?;
                let best = study
                    .best_trial()
                    .ok_or_else(|| Error::data(format!("{} has no trials", path.display())))?;
                let hp = best
                    .user_attrs
                    .get("hyperparams")
                    .ok_or_else(|| Error::data(format!("{}: best trial lacks hyperparams", path.display())))?;
                Ok(serde_json::from_value(hp.clone())?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub config: String,
    pub repeat: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> MeanStd {
    if v.is_empty() {
        return MeanStd { mean: f64::NAN, std: 0.0 };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: String,
    pub n: usize,
    pub roc_auc: MeanStd,
    pub f1: MeanStd,
    pub dp: Option<MeanStd>,
    pub eod: Option<MeanStd>,
    pub fit_time_seconds: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMatrix {
    pub configurations: Vec<String>,
    pub split: SplitSpec,
    pub rows: Vec<RunRow>,
    pub summaries: Vec<ConfigSummary>,
}

impl RunMatrix {
    pub fn roc_by_repeat(&self, config: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.config == config)
            .map(|r| r.report.roc_auc)
            .collect()
    }

    pub fn summary(&self, config: &str) -> Option<&ConfigSummary> {
        self.summaries.iter().find(|s| s.config == config)
    }

    /// Paired test of per-repeat ROC AUC between two configurations.
    pub fn compare(&self, a: &str, b: &str) -> Result<SignificanceResult> {
        wilcoxon_signed_rank(&self.roc_by_repeat(a), &self.roc_by_repeat(b))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Configuration | ROC AUC | F1 | DP | EOD | Fit time (s) |\n|---|---|---|---|---|---|\n");
        let fmt = |m: &MeanStd| format!("{:.5} ± {:.5}", m.mean, m.std);
        let opt = |m: &Option<MeanStd>| m.as_ref().map(fmt).unwrap_or_else(|| "n/a".into());
        for c in &self.summaries {
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {:.2} ± {:.2} |\n",
                c.config,
                fmt(&c.roc_auc),
                fmt(&c.f1),
                opt(&c.dp),
                opt(&c.eod),
                c.fit_time_seconds.mean,
                c.fit_time_seconds.std
            ));
        }
        s
    }
}

fn summarize(config: &str, rows: &[RunRow]) -> ConfigSummary {
    let mine: Vec<&EvalReport> = rows.iter().filter(|r| r.config == config).map(|r| &r.report).collect();
    let col = |f: &dyn Fn(&EvalReport) -> f64| mean_std(&mine.iter().map(|r| f(r)).collect::<Vec<_>>());
    let opt_col = |f: &dyn Fn(&EvalReport) -> Option<f64>| {
        let v: Option<Vec<f64>> = mine.iter().map(|r| f(r)).collect();
        v.filter(|v| !v.is_empty()).map(|v| mean_std(&v))
    };
    ConfigSummary {
        config: config.into(),
        n: mine.len(),
        roc_auc: col(&|r| r.roc_auc),
        f1: col(&|r| r.f1),
        dp: opt_col(&|r| r.dp),
        eod: opt_col(&|r| r.eod),
        fit_time_seconds: col(&|r| r.fit_time_seconds.unwrap_or(0.0)),
    }
}

/// A fitted configuration on one split, with the offsets its test
/// predictions need.
pub struct FittedRun {
    pub model: EbmModel,
    pub test_offsets: Option<InitScores>,
    pub fit_seconds: f64,
}

/// Fits `config` on `train` rows of `frame` (`repeat` picks the label
/// subset stream).
pub fn fit_config(frame: &TabularFrame, train: &[usize], test: &[usize], config: &RunConfig, repeat: usize) -> Result<FittedRun> {
    let hp = config.resolve()?;
    let t0 = Instant::now();
    let label_seed = config.pretrain.as_ref().map_or(1337, |p| p.label_seed).wrapping_add(repeat as u64);
    let fit_rows = match config.label_budget {
        Some(n) => subset_of_rows(frame.target(), train, n, label_seed)?,
        None => train.to_vec(),
    };
    let (model, test_offsets) = match &config.pretrain {
        None => (fit(&frame.select_rows(&fit_rows), &hp, None)?, None),
        Some(pcfg) => {
            let mut pcfg = pcfg.clone();
            pcfg.label_seed = label_seed;
            if let Some(n) = config.label_budget {
                pcfg.n_labels = Some(n);
            }
            let (pipeline, _) = InitScorePipeline::fit_split(frame, train, &pcfg)?;
            let fit_frame = frame.select_rows(&fit_rows);
            let offsets = make_init_scores(&pipeline, &fit_frame)?;
            let model = fit(&fit_frame, &hp, Some(&offsets))?;
            (model, Some(make_init_scores(&pipeline, &frame.select_rows(test))?))
        }
    };
    Ok(FittedRun {
        model,
        test_offsets,
        fit_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Scores a fitted run on `test` rows.
pub fn evaluate_run(frame: &TabularFrame, test: &[usize], run: &FittedRun) -> Result<EvalReport> {
    let test_frame = frame.select_rows(test);
    let p = match &run.test_offsets {
        Some(o) => run.model.predict_proba_with_offset(&test_frame, o)?,
        None => run.model.predict_proba(&test_frame)?,
    };
    let groups = test_frame.sensitive().map(|s| (s.groups.as_slice(), s.labels.as_slice()));
    EvalReport::compute(test_frame.target(), &p, groups, Some(run.fit_seconds))
}

/// Evaluates every configuration on the same stratified splits, in
/// (configuration, repeat) order.
pub fn run_matrix(frame: &TabularFrame, configs: &[RunConfig], spec: &SplitSpec) -> Result<RunMatrix> {
    for c in configs {
        c.resolve()?;
    }
    let splits = stratified_splits(frame, spec)?;
    let mut rows = Vec::new();
    for c in configs {
        for s in &splits {
            let run = fit_config(frame, &s.train, &s.test, c, s.repeat)?;
            rows.push(RunRow {
                config: c.name.clone(),
                repeat: s.repeat,
                report: evaluate_run(frame, &s.test, &run)?,
            });
        }
    }
    let summaries = configs.iter().map(|c| summarize(&c.name, &rows)).collect();
    Ok(RunMatrix {
        configurations: configs.iter().map(|c| c.name.clone()).collect(),
        split: *spec,
        rows,
        summaries,
    })
}
