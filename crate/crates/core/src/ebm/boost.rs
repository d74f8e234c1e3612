//! Bagged cyclic boosting.
//!
//! Training runs in two stages. The main-effect stage boosts one table per
//! feature in round-robin order, `floor(greedy_ratio)` extra steps per epoch
//! going to the term with the largest recent gain. Each outer bag holds out
//! a stratified validation slice for early stopping; bag tables are averaged
//! in bag order. The pair stage then ranks feature pairs on the residuals of
//! the averaged main-effect model, boosts the top pairs the same way for a
//! quarter of the epoch budget, and averages again. Finally every table is
//! centered on the training distribution with the mass moved to the
//! intercept.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::Rng as _;
use rayon::prelude::*;

use super::bins::{bin_frame, build_bins, BinnedData};
use super::interactions::rank_pairs;
use super::tree::{Histogram, TreeBuilder};
use super::{logit, EbmHyperparams, EbmModel, InitScores, TermModel, Timestamps, TrainingMeta, SCHEMA_VERSION};
use crate::dataio::{self, ColumnKind, TabularFrame};
use crate::error::{Error, Result};
use crate::rng;

/// Fits an EBM with default trainer options.
pub fn fit(frame: &TabularFrame, hp: &EbmHyperparams, init_scores: Option<&InitScores>) -> Result<EbmModel> {
    let mut trainer = Trainer::new(hp.clone());
    if let Some(s) = init_scores {
        trainer = trainer.init_scores(s.clone());
    }
    trainer.fit(frame)
}

/// Training diagnostics collected when tracing is enabled.
#[derive(Debug, Clone, Default)]
pub struct FitTrace {
    /// Mean training log-loss per bag: entry 0 is before boosting, entry
    /// `e` after main-effect epoch `e`.
    pub main_train_loss: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Trainer {
    hp: EbmHyperparams,
    init_scores: Option<InitScores>,
    fixed_intercept: Option<f64>,
    trace: bool,
}

impl Trainer {
    pub fn new(hp: EbmHyperparams) -> Self {
        Trainer {
            hp,
            init_scores: None,
            fixed_intercept: None,
            trace: false,
        }
    }

    /// Warm start: per-row log-odds offsets for the training rows.
    pub fn init_scores(mut self, scores: InitScores) -> Self {
        self.init_scores = Some(scores);
        self
    }

    /// Pins the intercept instead of fitting it. Tables are then left
    /// uncentered so the pinned value survives.
    pub fn fixed_intercept(mut self, value: f64) -> Self {
        self.fixed_intercept = Some(value);
        self
    }

    pub fn trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn fit(&self, frame: &TabularFrame) -> Result<EbmModel> {
        self.fit_traced(frame).map(|(m, _)| m)
    }

    pub fn fit_traced(&self, frame: &TabularFrame) -> Result<(EbmModel, FitTrace)> {
        let started_wall = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let started = Instant::now();
        let hp = &self.hp;
        hp.validate()?;
        let n = frame.n_rows();
        if n == 0 || frame.n_cols() == 0 {
            return Err(Error::data("cannot fit on an empty frame"));
        }
        let n_pos = frame.n_positive();
        if n_pos < 2 || n - n_pos < 2 {
            return Err(Error::data(format!(
                "fitting needs at least 2 rows of each class (got {} positive, {} negative)",
                n_pos,
                n - n_pos
            )));
        }
        let base: Vec<f64> = match &self.init_scores {
            Some(s) if s.len() != n => {
                return Err(Error::data(format!("{} init scores for {n} rows", s.len())))
            }
            Some(s) => s.values.clone(),
            None => vec![0.0; n],
        };
        if base.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("init scores must be finite"));
        }
        let y: Vec<f64> = frame.target().iter().map(|&t| t as f64).collect();
        let bins = build_bins(frame, hp.max_bins)?;
        let binned = bin_frame(&bins, frame)?;
        let intercept = match self.fixed_intercept {
            Some(c) => c,
            None if self.init_scores.is_none() => logit(n_pos as f64 / n as f64),
            None => optimal_intercept(&base, &y),
        };

        let mut meta = TrainingMeta {
            seed: hp.random_state,
            n_rows: n,
            warm_started: self.init_scores.is_some(),
            feature_std: feature_std(frame),
            ..Default::default()
        };
        let mut trace = FitTrace::default();
        let mut interaction_bins = Vec::new();
        let mut terms: Vec<TermModel> = Vec::new();

        if hp.max_rounds > 0 {
            let all_rows: Vec<usize> = (0..n).collect();
            let partitions: Vec<(Vec<usize>, Vec<usize>)> = (0..hp.outer_bags)
                .map(|b| {
                    if hp.validation_size > 0.0 {
                        dataio::stratified_partition(
                            frame.target(),
                            &all_rows,
                            hp.validation_size,
                            hp.random_state,
                            &[rng::TAG_BAG, b as u64],
                        )
                    } else {
                        (all_rows.clone(), Vec::new())
                    }
                })
                .collect();

            // Main effects.
            let main_terms: Vec<TermLayout> = bins
                .iter()
                .enumerate()
                .map(|(f, def)| TermLayout {
                    dims: (def.n_bins, 1),
                    categorical: def.kind == ColumnKind::Categorical,
                    cells: binned.columns[f].iter().map(|&b| b as u32).collect(),
                })
                .collect();
            let start: Vec<f64> = base.iter().map(|b| b + intercept).collect();
            let results: Vec<BagResult> = partitions
                .par_iter()
                .enumerate()
                .map(|(b, (train, val))| {
                    let job = BagJob {
                        hp,
                        terms: &main_terms,
                        y: &y,
                        start: &start,
                        train,
                        val,
                        epochs: hp.max_rounds,
                        rng: rng::stream(hp.random_state, &[rng::TAG_INNER_BAG, b as u64, 0]),
                        trace: self.trace,
                    };
                    job.run()
                })
                .collect();
            // Each bag's pairs start from that bag's own main effects, so its
            // validation rows stay unseen through both stages.
            let bag_starts: Vec<Vec<f64>> = results
                .par_iter()
                .map(|res| {
                    (0..n)
                        .map(|r| start[r] + (0..main_terms.len()).map(|f| res.tables[f][binned.bin(f, r)]).sum::<f64>())
                        .collect()
                })
                .collect();
            let main_tables = average_tables(&results, &main_terms);
            meta.main_epochs = results.iter().map(|r| r.epochs).collect();
            trace.main_train_loss = results.into_iter().map(|r| r.train_loss).collect();

            for (f, table) in main_tables.into_iter().enumerate() {
                terms.push(TermModel {
                    name: bins[f].feature.clone(),
                    features: vec![f],
                    shape: vec![bins[f].n_bins],
                    scores: table,
                });
            }

            // Pairs.
            if hp.interactions > 0 && bins.len() >= 2 {
                let ibins = build_bins(frame, hp.max_interaction_bins)?;
                let ibinned = bin_frame(&ibins, frame)?;
                let stage_start: Vec<f64> = (0..n)
                    .map(|r| {
                        let mut s = start[r];
                        for (f, t) in terms.iter().enumerate() {
                            s += t.scores[binned.bin(f, r)];
                        }
                        s
                    })
                    .collect();
                let pairs = rank_pairs(&ibins, &ibinned, &y, &stage_start, hp.interactions);
                if !pairs.is_empty() {
                    let pair_terms: Vec<TermLayout> = pairs
                        .iter()
                        .map(|p| pair_layout(&ibins, &ibinned, p.features.0, p.features.1))
                        .collect();
                    let epochs = hp.max_rounds.div_ceil(4);
                    let results: Vec<BagResult> = partitions
                        .par_iter()
                        .enumerate()
                        .map(|(b, (train, val))| {
                            let job = BagJob {
                                hp,
                                terms: &pair_terms,
                                y: &y,
                                start: &bag_starts[b],
                                train,
                                val,
                                epochs,
                                rng: rng::stream(hp.random_state, &[rng::TAG_INNER_BAG, b as u64, 1]),
                                trace: false,
                            };
                            job.run()
                        })
                        .collect();
                    let pair_tables = average_tables(&results, &pair_terms);
                    meta.pair_epochs = results.iter().map(|r| r.epochs).collect();
                    for (p, table) in pairs.iter().zip(pair_tables) {
                        let (a, b) = p.features;
                        terms.push(TermModel {
                            name: format!("{} & {}", bins[a].feature, bins[b].feature),
                            features: vec![a, b],
                            shape: vec![ibins[a].n_bins, ibins[b].n_bins],
                            scores: table,
                        });
                    }
                }
                interaction_bins = ibins;
            }
        }

        // Densities and centering.
        let mut model = EbmModel {
            schema_version: SCHEMA_VERSION,
            feature_names: frame.feature_names(),
            bins,
            interaction_bins,
            intercept,
            terms,
            hyperparams: hp.clone(),
            training_meta: TrainingMeta::default(),
        };
        let model_bins = model.bin_frame(frame)?;
        let mut densities = Vec::with_capacity(model.terms.len());
        for t in 0..model.terms.len() {
            let mut d = vec![0u64; model.terms[t].scores.len()];
            for r in 0..n {
                d[model.term_cell(t, &model_bins, r)] += 1;
            }
            densities.push(d);
        }
        if self.fixed_intercept.is_none() {
            for (term, d) in model.terms.iter_mut().zip(&densities) {
                let mean = term
                    .scores
                    .iter()
                    .zip(d)
                    .map(|(s, &c)| s * c as f64)
                    .sum::<f64>()
                    / n as f64;
                term.scores.iter_mut().for_each(|s| *s -= mean);
                model.intercept += mean;
            }
        }
        meta.term_density = densities;
        meta.timestamps = Some(Timestamps {
            fit_started_unix: started_wall,
            fit_seconds: started.elapsed().as_secs_f64(),
        });
        model.training_meta = meta;
        model.check()?;
        Ok((model, trace))
    }
}

fn feature_std(frame: &TabularFrame) -> Vec<Option<f64>> {
    (0..frame.n_cols())
        .map(|j| {
            if frame.columns()[j].kind != ColumnKind::Numeric {
                return None;
            }
            let vals: Vec<f64> = (0..frame.n_rows()).filter_map(|r| frame.cell(r, j).as_f64()).collect();
            if vals.is_empty() {
                return None;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            Some(var.sqrt())
        })
        .collect()
}

/// Constant `c` minimizing the log-loss of `sigmoid(base + c)`.
fn optimal_intercept(base: &[f64], y: &[f64]) -> f64 {
    let rate = y.iter().sum::<f64>() / y.len() as f64;
    let mut c = logit(rate) - base.iter().sum::<f64>() / base.len() as f64;
    for _ in 0..100 {
        let (mut g, mut h) = (0.0, 0.0);
        for (b, t) in base.iter().zip(y) {
            let p = stable_sigmoid(b + c);
            g += p - t;
            h += p * (1.0 - p);
        }
        if h <= 0.0 {
            break;
        }
        let step = (g / h).clamp(-5.0, 5.0);
        c -= step;
        if step.abs() < 1e-13 {
            break;
        }
    }
    c
}

#[inline]
fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn log_loss_term(score: f64, y: f64) -> f64 {
    // log(1 + e^s) - y s, computed stably.
    let softplus = if score > 0.0 {
        score + (-score).exp().ln_1p()
    } else {
        score.exp().ln_1p()
    };
    softplus - y * score
}

/// A term's geometry plus each training row's flattened table cell.
struct TermLayout {
    dims: (usize, usize),
    categorical: bool,
    cells: Vec<u32>,
}

fn pair_layout(ibins: &[super::BinDefinition], ibinned: &BinnedData, a: usize, b: usize) -> TermLayout {
    let nb = ibins[b].n_bins;
    TermLayout {
        dims: (ibins[a].n_bins, nb),
        categorical: false,
        cells: ibinned.columns[a]
            .iter()
            .zip(&ibinned.columns[b])
            .map(|(&x, &z)| (x as usize * nb + z as usize) as u32)
            .collect(),
    }
}

fn average_tables(results: &[BagResult], layouts: &[TermLayout]) -> Vec<Vec<f64>> {
    let k = results.len() as f64;
    layouts
        .iter()
        .enumerate()
        .map(|(t, l)| {
            let mut acc = vec![0.0; l.dims.0 * l.dims.1];
            for r in results {
                for (a, v) in acc.iter_mut().zip(&r.tables[t]) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= k);
            acc
        })
        .collect()
}

struct BagResult {
    tables: Vec<Vec<f64>>,
    epochs: usize,
    train_loss: Vec<f64>,
}

struct BagJob<'a> {
    hp: &'a EbmHyperparams,
    terms: &'a [TermLayout],
    y: &'a [f64],
    start: &'a [f64],
    train: &'a [usize],
    val: &'a [usize],
    epochs: usize,
    rng: rng::Rng,
    trace: bool,
}

/// Mutable boosting state for one bag, with rows renumbered `0..len`.
struct BagState<'a> {
    hp: &'a EbmHyperparams,
    terms: &'a [TermLayout],
    train_rows: &'a [usize],
    val_rows: &'a [usize],
    y_train: Vec<f64>,
    y_val: Vec<f64>,
    scores_train: Vec<f64>,
    scores_val: Vec<f64>,
    tables: Vec<Vec<f64>>,
    hists: Vec<Histogram>,
    grad: Vec<f64>,
    hess: Vec<f64>,
    weights: Vec<f64>,
    rng: rng::Rng,
}

impl BagState<'_> {
    fn train_cell(&self, t: usize, k: usize) -> usize {
        self.terms[t].cells[self.train_rows[k]] as usize
    }

    fn val_cell(&self, t: usize, k: usize) -> usize {
        self.terms[t].cells[self.val_rows[k]] as usize
    }

    fn mean_loss(scores: &[f64], y: &[f64]) -> f64 {
        scores.iter().zip(y).map(|(&s, &t)| log_loss_term(s, t)).sum::<f64>() / scores.len() as f64
    }

    fn fit_tree(&self, t: usize) -> Option<super::tree::TreeFit> {
        let builder = TreeBuilder::new(&self.hists[t], self.hp.min_samples_leaf);
        let builder = if self.terms[t].categorical {
            builder.order_rows_by_ratio()
        } else {
            builder
        };
        builder.fit(self.hp.max_leaves)
    }

    /// One boosting step on term `t`; returns the tree gain.
    fn step(&mut self, t: usize) -> f64 {
        let n = self.scores_train.len();
        for k in 0..n {
            let p = stable_sigmoid(self.scores_train[k]);
            self.grad[k] = p - self.y_train[k];
            self.hess[k] = p * (1.0 - p);
        }
        let cells = self.hists[t].grad.len();
        let mut update = vec![0.0; cells];
        let mut gain = 0.0;
        if self.hp.inner_bags == 0 {
            self.hists[t].clear();
            for k in 0..n {
                let c = self.train_cell(t, k);
                self.hists[t].add(c, self.grad[k], self.hess[k], 1.0);
            }
            match self.fit_tree(t) {
                Some(fit) => {
                    update = fit.values;
                    gain = fit.gain;
                }
                None => return 0.0,
            }
        } else {
            let mut fitted = 0;
            for _ in 0..self.hp.inner_bags {
                self.weights.iter_mut().for_each(|w| *w = 0.0);
                for _ in 0..n {
                    let k = self.rng.random_range(0..n);
                    self.weights[k] += 1.0;
                }
                self.hists[t].clear();
                for k in 0..n {
                    if self.weights[k] > 0.0 {
                        let c = self.train_cell(t, k);
                        self.hists[t].add(c, self.grad[k], self.hess[k], self.weights[k]);
                    }
                }
                if let Some(fit) = self.fit_tree(t) {
                    for (u, v) in update.iter_mut().zip(&fit.values) {
                        *u += v;
                    }
                    gain += fit.gain;
                    fitted += 1;
                }
            }
            if fitted == 0 {
                return 0.0;
            }
            let k = self.hp.inner_bags as f64;
            update.iter_mut().for_each(|u| *u /= k);
            gain /= k;
        }
        let lr = self.hp.learning_rate;
        update.iter_mut().for_each(|u| *u *= lr);
        for (s, u) in self.tables[t].iter_mut().zip(&update) {
            *s += u;
        }
        for k in 0..n {
            let c = self.train_cell(t, k);
            self.scores_train[k] += update[c];
        }
        for k in 0..self.val_rows.len() {
            let c = self.val_cell(t, k);
            self.scores_val[k] += update[c];
        }
        gain
    }
}

impl BagJob<'_> {
    fn run(self) -> BagResult {
        let hp = self.hp;
        let n_terms = self.terms.len();
        let mut st = BagState {
            hp,
            terms: self.terms,
            train_rows: self.train,
            val_rows: self.val,
            y_train: self.train.iter().map(|&r| self.y[r]).collect(),
            y_val: self.val.iter().map(|&r| self.y[r]).collect(),
            scores_train: self.train.iter().map(|&r| self.start[r]).collect(),
            scores_val: self.val.iter().map(|&r| self.start[r]).collect(),
            tables: self.terms.iter().map(|l| vec![0.0; l.dims.0 * l.dims.1]).collect(),
            hists: self.terms.iter().map(|l| Histogram::new(l.dims.0, l.dims.1)).collect(),
            grad: vec![0.0; self.train.len()],
            hess: vec![0.0; self.train.len()],
            weights: vec![0.0; self.train.len()],
            rng: self.rng,
        };
        let use_val = !self.val.is_empty() && hp.early_stopping_rounds > 0;
        let mut best_loss = if use_val {
            BagState::mean_loss(&st.scores_val, &st.y_val)
        } else {
            f64::INFINITY
        };
        let mut best_tables = st.tables.clone();
        let mut since_best = 0;
        let mut train_loss = Vec::new();
        if self.trace {
            train_loss.push(BagState::mean_loss(&st.scores_train, &st.y_train));
        }
        let mut gains = vec![0.0; n_terms];
        let mut epochs_run = 0;
        for _epoch in 0..self.epochs {
            for (t, g) in gains.iter_mut().enumerate() {
                *g = st.step(t);
            }
            for _ in 0..hp.greedy_steps() {
                let (t, g) = gains
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bt, bg), (t, &g)| if g > bg { (t, g) } else { (bt, bg) });
                if g <= 0.0 {
                    break;
                }
                gains[t] = st.step(t);
            }
            epochs_run += 1;
            if self.trace {
                train_loss.push(BagState::mean_loss(&st.scores_train, &st.y_train));
            }
            if use_val {
                let loss = BagState::mean_loss(&st.scores_val, &st.y_val);
                if loss < best_loss * (1.0 - hp.early_stopping_tolerance) {
                    best_loss = loss;
                    best_tables.clone_from(&st.tables);
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= hp.early_stopping_rounds {
                        break;
                    }
                }
            }
        }
        let tables = if use_val { best_tables } else { st.tables };
        BagResult {
            tables,
            epochs: epochs_run,
            train_loss,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;

    fn separable(n: usize) -> TabularFrame {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 2) as f64, ((i * 37) % 11) as f64]).collect();
        let target = (0..n).map(|i| (i % 2) as u8).collect();
        TabularFrame::from_numeric_rows(&["signal", "noise"], &rows, target).unwrap()
    }

    #[test]
    fn zero_rounds_is_intercept_only() {
        let frame = separable(40);
        let hp = EbmHyperparams {
            max_rounds: 0,
            ..Default::default()
        };
        let m = fit(&frame, &hp, None).unwrap();
        assert!(m.terms.is_empty());
        assert_eq!(m.intercept, logit(0.5));
    }

    #[test]
    fn perfect_feature_reaches_auc_one() {
        let frame = separable(60);
        let hp = EbmHyperparams {
            max_rounds: 200,
            outer_bags: 2,
            interactions: 0,
            ..Default::default()
        };
        let m = fit(&frame, &hp, None).unwrap();
        let p = m.predict_proba(&frame).unwrap();
        assert_eq!(roc_auc(frame.target(), &p).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let frame = TabularFrame::from_numeric_rows(&["x"], &rows, vec![1; 5]).unwrap();
        assert!(fit(&frame, &EbmHyperparams::default(), None).is_err());
    }

    #[test]
    fn intercept_matches_offsets() {
        let base = vec![0.3, -1.0, 2.0, 0.0, 0.5, -0.2];
        let y = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let c = optimal_intercept(&base, &y);
        let g: f64 = base.iter().zip(&y).map(|(b, t)| stable_sigmoid(b + c) - t).sum();
        assert!(g.abs() < 1e-10);
    }

    #[test]
    fn log_loss_term_is_stable() {
        assert!((log_loss_term(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!(log_loss_term(800.0, 1.0).abs() < 1e-12);
        assert!((log_loss_term(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }
}
