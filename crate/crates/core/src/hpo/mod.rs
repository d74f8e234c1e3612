//! Seeded hyperparameter search for EBMs.
//!
//! Two objectives are supported: `1 - ROC` on a validation split, and the
//! fairness-scalarized `(1 - ROC) + lambda * DP`, where lambda is itself one
//! of the searched parameters. Studies are plain JSON files written after
//! every trial so an interrupted search can resume where it stopped.

pub mod tpe;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataio::{stratified_partition, TabularFrame};
use crate::ebm::{fit, EbmHyperparams, InitScores};
use crate::error::{Error, Result};
use crate::metrics::{demographic_parity, roc_auc, threshold};
use crate::rng;

pub use tpe::{suggest, TpeConfig};

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Uniform,
    LogUniform,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub low: f64,
    pub high: f64,
}

impl ParamSpec {
    pub fn uniform(name: &str, low: f64, high: f64) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Uniform,
            low,
            high,
        }
    }

    pub fn log_uniform(name: &str, low: f64, high: f64) -> Self {
        ParamSpec {
            kind: ParamKind::LogUniform,
            ..ParamSpec::uniform(name, low, high)
        }
    }

    pub fn integer(name: &str, low: f64, high: f64) -> Self {
        ParamSpec {
            kind: ParamKind::Integer,
            ..ParamSpec::uniform(name, low, high)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let in_range = v >= self.low && v <= self.high;
        match self.kind {
            ParamKind::Uniform => in_range,
            ParamKind::LogUniform => in_range && v > 0.0,
            ParamKind::Integer => in_range && v.fract() == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::arg("search space is empty"));
        }
        for p in &self.params {
            if !(p.low < p.high) {
                return Err(Error::arg(format!("{}: low must be below high", p.name)));
            }
            if p.kind == ParamKind::LogUniform && p.low <= 0.0 {
                return Err(Error::arg(format!("{}: log-uniform bounds must be positive", p.name)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, params: &Params) -> bool {
        self.params
            .iter()
            .all(|p| params.get(&p.name).is_some_and(|&v| p.contains(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Performance,
    Fairness,
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "performance" => Ok(ObjectiveKind::Performance),
            "fairness" => Ok(ObjectiveKind::Fairness),
            _ => Err(Error::arg(format!("unknown objective {s:?}"))),
        }
    }
}

/// The EBM search space; fairness studies also search `lambda`.
pub fn default_space(kind: ObjectiveKind) -> SearchSpace {
    let mut params = vec![
        ParamSpec::log_uniform("learning_rate", 1e-4, 1e-1),
        ParamSpec::integer("max_bins", 64.0, 512.0),
        ParamSpec::integer("max_leaves", 2.0, 64.0),
        ParamSpec::integer("max_rounds", 50.0, 2000.0),
        ParamSpec::integer("interactions", 0.0, 10.0),
        ParamSpec::integer("outer_bags", 4.0, 32.0),
        ParamSpec::integer("inner_bags", 0.0, 8.0),
        ParamSpec::uniform("greedy_ratio", 0.0, 20.0),
    ];
    if kind == ObjectiveKind::Fairness {
        params.push(ParamSpec::uniform("lambda", 0.0, 5.0));
    }
    SearchSpace { params }
}

pub fn objective_performance(roc: f64) -> f64 {
    1.0 - roc
}

pub fn objective_fairness(roc: f64, dp: f64, lambda: f64) -> f64 {
    (1.0 - roc) + lambda * dp
}

/// Overrides the searched fields of `base`; other fields are kept.
pub fn apply_params(base: &EbmHyperparams, params: &Params) -> EbmHyperparams {
    let mut hp = base.clone();
    for (k, &v) in params {
        match k.as_str() {
            "learning_rate" => hp.learning_rate = v,
            "max_bins" => hp.max_bins = v as usize,
            "max_leaves" => hp.max_leaves = v as usize,
            "max_rounds" => hp.max_rounds = v as usize,
            "interactions" => hp.interactions = v as usize,
            "outer_bags" => hp.outer_bags = v as usize,
            "inner_bags" => hp.inner_bags = v as usize,
            "greedy_ratio" => hp.greedy_ratio = v,
            _ => {}
        }
    }
    hp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub params: Params,
    pub objective: f64,
    #[serde(default)]
    pub user_attrs: BTreeMap<String, Value>,
}

impl TrialRecord {
    pub fn attr_f64(&self, key: &str) -> Option<f64> {
        self.user_attrs.get(key).and_then(Value::as_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub space: SearchSpace,
    pub seed: u64,
    pub objective_kind: ObjectiveKind,
    pub direction: String,
    #[serde(default)]
    pub tpe: TpeConfig,
    pub trials: Vec<TrialRecord>,
}

impl Study {
    pub fn new(space: SearchSpace, seed: u64, objective_kind: ObjectiveKind) -> Self {
        Study {
            space,
            seed,
            objective_kind,
            direction: "minimize".into(),
            tpe: TpeConfig::default(),
            trials: Vec::new(),
        }
    }

    /// Parameters for the next trial.
    pub fn ask(&self) -> Result<Params> {
        let history: Vec<(&Params, f64)> = self.trials.iter().map(|t| (&t.params, t.objective)).collect();
        suggest(&self.space, &history, self.seed, self.trials.len(), &self.tpe)
    }

    pub fn tell(&mut self, params: Params, objective: f64, user_attrs: BTreeMap<String, Value>) -> Result<&TrialRecord> {
        if !objective.is_finite() {
            return Err(Error::data(format!("trial {} objective is not finite", self.trials.len())));
        }
        self.trials.push(TrialRecord {
            index: self.trials.len(),
            params,
            objective,
            user_attrs,
        });
        Ok(self.trials.last().unwrap())
    }

    /// Lowest objective; the earliest trial wins ties.
    pub fn best_trial(&self) -> Option<&TrialRecord> {
        self.trials
            .iter()
            .fold(None, |best: Option<&TrialRecord>, t| match best {
                Some(b) if b.objective <= t.objective => Some(b),
                _ => Some(t),
            })
    }

    /// Running minimum of the objective.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut m = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                m = m.min(t.objective);
                m
            })
            .collect()
    }

    /// Runs trials until the study holds `n_trials`, calling `objective`
    /// with each suggestion and `after_trial` once each result is recorded.
    pub fn optimize<F, A>(&mut self, n_trials: usize, mut objective: F, mut after_trial: A) -> Result<()>
    where
        F: FnMut(&Params) -> Result<(f64, BTreeMap<String, Value>)>,
        A: FnMut(&Study) -> Result<()>,
    {
        self.space.validate()?;
        while self.trials.len() < n_trials {
            let params = self.ask()?;
            let (value, attrs) = objective(&params)?;
            self.tell(params, value, attrs)?;
            after_trial(self)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        // Write then rename, so a crash never leaves a truncated study.
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub objective: ObjectiveKind,
    pub n_trials: usize,
    pub seed: u64,
    /// Fields not searched (random_state, early stopping ...) come from here.
    pub base: EbmHyperparams,
    /// Share of the training partition held out to score trials.
    pub validation_fraction: f64,
    /// Defaults to [`default_space`] for the objective.
    pub space: SearchSpace,
}

impl StudyConfig {
    pub fn new(objective: ObjectiveKind, n_trials: usize, seed: u64) -> Self {
        StudyConfig {
            objective,
            n_trials,
            seed,
            base: EbmHyperparams::default(),
            validation_fraction: 0.2,
            space: default_space(objective),
        }
    }
}

/// Fixed stratified train/validation split of `frame` used by every trial.
pub fn validation_split(frame: &TabularFrame, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let rows: Vec<usize> = (0..frame.n_rows()).collect();
    stratified_partition(frame.target(), &rows, fraction, seed, &[rng::TAG_VALIDATION])
}

/// Runs (or resumes, when `path` holds a matching study) a search on
/// `frame`, persisting after every trial.
pub fn run_study(frame: &TabularFrame, cfg: &StudyConfig, path: Option<&Path>) -> Result<Study> {
    run_study_with_offsets(frame, None, cfg, path)
}

/// As [`run_study`], with every trial warm-started from `offsets` (one
/// log-odds value per row of `frame`).
pub fn run_study_with_offsets(
    frame: &TabularFrame,
    offsets: Option<&InitScores>,
    cfg: &StudyConfig,
    path: Option<&Path>,
) -> Result<Study> {
    if offsets.is_some_and(|o| o.len() != frame.n_rows()) {
        return Err(Error::data("offsets do not match the frame's rows"));
    }
    if cfg.n_trials == 0 {
        return Err(Error::arg("n_trials must be at least 1"));
    }
    let groups = match (cfg.objective, frame.sensitive()) {
        (ObjectiveKind::Fairness, None) => {
            return Err(Error::arg("fairness objective needs a sensitive column"));
        }
        (_, s) => s.map(|s| s.groups.clone()),
    };
    let space = cfg.space.clone();
    let mut study = match path {
        Some(p) if p.exists() => {
            let s = Study::load(p)?;
            if s.space != space || s.seed != cfg.seed || s.objective_kind != cfg.objective {
                return Err(Error::Config(format!(
                    "{} holds a study with a different space, seed or objective",
                    p.display()
                )));
            }
            s
        }
        _ => Study::new(space, cfg.seed, cfg.objective),
    };
    let (fit_rows, val_rows) = validation_split(frame, cfg.validation_fraction, cfg.seed);
    let train = frame.select_rows(&fit_rows);
    let val = frame.select_rows(&val_rows);
    let val_groups: Option<Vec<u32>> = groups.map(|g| val_rows.iter().map(|&r| g[r]).collect());
    let fit_offsets = offsets.map(|o| o.select(&fit_rows));
    let val_offsets = offsets.map(|o| o.select(&val_rows));

    let objective = |params: &Params| -> Result<(f64, BTreeMap<String, Value>)> {
        let hp = apply_params(&cfg.base, params);
        let t0 = Instant::now();
        let model = fit(&train, &hp, fit_offsets.as_ref())?;
        let fit_time = t0.elapsed().as_secs_f64();
        let p = match &val_offsets {
            Some(o) => model.predict_proba_with_offset(&val, o)?,
            None => model.predict_proba(&val)?,
        };
        let roc = roc_auc(val.target(), &p)?;
        let dp = val_groups.as_ref().map(|g| demographic_parity(&threshold(&p, 0.5), g));
        let lambda = params.get("lambda").copied();
        let value = match cfg.objective {
            ObjectiveKind::Performance => objective_performance(roc),
            ObjectiveKind::Fairness => objective_fairness(roc, dp.unwrap_or(0.0), lambda.unwrap_or(0.0)),
        };
        let mut attrs = BTreeMap::new();
        attrs.insert("roc".into(), json!(roc));
        attrs.insert("dp".into(), json!(dp));
        attrs.insert("lambda".into(), json!(lambda));
        attrs.insert("hyperparams".into(), serde_json::to_value(&hp)?);
        attrs.insert("fit_time_seconds".into(), json!(fit_time));
        Ok((value, attrs))
    };
    study.optimize(cfg.n_trials, objective, |s| match path {
        Some(p) => s.save(p),
        None => Ok(()),
    })?;
    Ok(study)
}

/// Keys that vary between otherwise identical runs.
pub const VOLATILE_KEYS: [&str; 2] = ["timestamps", "fit_time_seconds"];

/// Removes [`VOLATILE_KEYS`] at any depth.
pub fn strip_volatile(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for k in VOLATILE_KEYS {
                m.remove(k);
            }
            m.values_mut().for_each(strip_volatile);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_volatile),
        _ => {}
    }
}

/// Canonical bytes of a JSON payload with volatile keys removed.
pub fn stable_payload(json_text: &str) -> Result<String> {
    let mut v: Value = serde_json::from_str(json_text)?;
    strip_volatile(&mut v);
    Ok(serde_json::to_string(&v)?)
}
