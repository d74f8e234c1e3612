//! Command-line front end.
//!
//! Every subcommand is also a plain function (`cmd_*`) taking resolved
//! options, so pipelines can be driven from Rust without going through
//! argument parsing. Settings resolve as command-line flag, then config
//! file, then built-in default.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataio::{load_csv, splits_to_json, stratified_splits, write_csv, ColumnSchema, LoadOptions, Split, SplitSpec, TabularFrame};
use crate::ebm::{EbmHyperparams, EbmModel, InitScores};
use crate::error::{Error, Result};
use crate::explain::{explain_global, ExplanationExport};
use crate::hpo::{apply_params, run_study, run_study_with_offsets, ObjectiveKind, StudyConfig};
use crate::metrics::EvalReport;
use crate::pretrain::{make_init_scores, read_init_scores_csv, write_init_scores_csv, InitScorePipeline, PretrainConfig};
use crate::validate::{
    evaluate_run, fit_config, mean_std, perturbation_sensitivity, run_matrix, HpSource, PerturbConfig,
    PerturbMode, PerturbationReport, RunConfig, RunMatrix, SignificanceResult,
};

pub const DEFAULT_SEED: u64 = 1337;

#[derive(Debug, Parser)]
#[command(name = "glassboost", version, about = "Explainable Boosting Machines: train, tune, pretrain, explain, validate")]
pub struct Cli {
    /// Seed for splits, bagging, tuning and pretraining.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with defaults for any option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving every output file.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a CSV, infer the schema and write a cleaned copy.
    Ingest(DataOpts),
    /// Write stratified train/test split indices.
    Split {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        split: SplitOpts,
    },
    /// Fit a baseline EBM on each split repeat.
    Train {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        split: SplitOpts,
        #[command(flatten)]
        hp: HpOpts,
    },
    /// Run a TPE study, refit the best trial and evaluate it.
    Tune {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        split: SplitOpts,
        #[command(flatten)]
        hp: HpOpts,
        #[arg(long, value_parser = parse_objective)]
        objective: Option<ObjectiveKind>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Train the autoencoder and head, write init scores.
    Pretrain {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        split: SplitOpts,
        #[command(flatten)]
        pretrain: PretrainOpts,
    },
    /// Score a saved model on a dataset.
    Evaluate {
        #[command(flatten)]
        data: DataOpts,
        #[arg(long)]
        model: PathBuf,
        /// Single-column CSV of init scores aligned with the evaluated rows.
        #[arg(long)]
        init_scores: Option<PathBuf>,
        /// Evaluate only the test rows of this split repeat.
        #[arg(long)]
        split_repeat: Option<usize>,
        #[command(flatten)]
        split: SplitOpts,
    },
    /// Export global importances and shape functions of a saved model.
    Explain {
        #[command(flatten)]
        data: DataOpts,
        #[arg(long)]
        model: PathBuf,
    },
    /// Repeated-split evaluation, significance tests and perturbation checks.
    Validate {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        split: SplitOpts,
        /// Study files whose best trials become extra configurations.
        #[arg(long = "study")]
        studies: Vec<PathBuf>,
        #[arg(long)]
        noise_scale: Option<f64>,
        #[arg(long)]
        draws: Option<usize>,
        /// Perturb only this numeric feature.
        #[arg(long)]
        target_feature: Option<String>,
    },
    /// Tune, pretrain and compare all configurations end to end.
    Benchmark {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        split: SplitOpts,
        #[command(flatten)]
        pretrain: PretrainOpts,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated subset of baseline,perf-hpo,fair-hpo,init-only,init+hpo.
        #[arg(long, value_delimiter = ',')]
        configs: Option<Vec<String>>,
        /// Print the plan and exit without writing anything.
        #[arg(long)]
        dry_run: bool,
    },
}

fn parse_objective(s: &str) -> std::result::Result<ObjectiveKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataOpts {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Sensitive attribute for fairness metrics.
    #[arg(long, alias = "sensitive-column")]
    pub sensitive: Option<String>,
    /// Target label treated as positive.
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Use a stratified sample of this many rows.
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SplitOpts {
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct HpOpts {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_bins: Option<usize>,
    #[arg(long)]
    pub max_leaves: Option<usize>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    #[arg(long)]
    pub interactions: Option<usize>,
    #[arg(long)]
    pub outer_bags: Option<usize>,
    #[arg(long)]
    pub inner_bags: Option<usize>,
    #[arg(long)]
    pub greedy_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PretrainOpts {
    /// Labeled training rows for the head (default: 10% of training rows).
    #[arg(long)]
    pub labels: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub ae_learning_rate: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub bottleneck: Option<usize>,
    #[arg(long)]
    pub head_l2: Option<f64>,
    /// Train the autoencoder on training rows only.
    #[arg(long)]
    pub train_only_pretrain: bool,
}

/// Config-file schema. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub quiet: Option<bool>,
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub sensitive: Option<String>,
    pub positive_label: Option<String>,
    pub subsample: Option<usize>,
    pub test_fraction: Option<f64>,
    pub repeats: Option<usize>,
    pub objective: Option<ObjectiveKind>,
    pub trials: Option<usize>,
    pub labels: Option<usize>,
    pub noise_scale: Option<f64>,
    pub draws: Option<usize>,
    pub hyperparams: Option<HpFile>,
    pub pretrain: Option<PretrainFile>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpFile {
    pub learning_rate: Option<f64>,
    pub max_bins: Option<usize>,
    pub max_leaves: Option<usize>,
    pub max_rounds: Option<usize>,
    pub interactions: Option<usize>,
    pub outer_bags: Option<usize>,
    pub inner_bags: Option<usize>,
    pub greedy_ratio: Option<f64>,
    pub validation_size: Option<f64>,
    pub early_stopping_rounds: Option<usize>,
    pub max_interaction_bins: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainFile {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub hidden: Option<usize>,
    pub bottleneck: Option<usize>,
    pub head_l2: Option<f64>,
    pub train_only: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub quiet: bool,
}

impl Context {
    pub fn new(seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Context {
            seed,
            out_dir: out_dir.into(),
            quiet: true,
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        self.say(format!("wrote {}", p.display()));
        Ok(p)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, &serde_json::to_string_pretty(value)?)
    }
}

/// Where the data comes from and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub path: PathBuf,
    pub target: String,
    pub sensitive: Option<String>,
    pub positive_label: Option<String>,
    /// Stratified row budget drawn with the run seed.
    pub subsample: Option<usize>,
}

impl DataSpec {
    pub fn new(path: impl Into<PathBuf>, target: &str) -> Self {
        DataSpec {
            path: path.into(),
            target: target.into(),
            sensitive: None,
            positive_label: None,
            subsample: None,
        }
    }

    pub fn with_sensitive(mut self, column: &str) -> Self {
        self.sensitive = Some(column.into());
        self
    }

    pub fn with_subsample(mut self, n: usize) -> Self {
        self.subsample = Some(n);
        self
    }

    pub fn load(&self, seed: u64) -> Result<TabularFrame> {
        let opts = LoadOptions {
            positive_label: self.positive_label.clone(),
            ..Default::default()
        };
        let frame = load_csv(&self.path, &self.target, self.sensitive.as_deref(), &opts)?;
        match self.subsample {
            Some(n) if n < frame.n_rows() => {
                let rows = crate::dataio::stratified_label_subset(&frame, n, seed)?;
                Ok(frame.select_rows(&rows))
            }
            _ => Ok(frame),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_rows: usize,
    pub target: String,
    pub target_labels: [String; 2],
    pub positive_rate: f64,
    pub sensitive: Option<String>,
    pub columns: Vec<ColumnSchema>,
}

pub fn cmd_ingest(ctx: &Context, data: &DataSpec) -> Result<IngestSummary> {
    let frame = data.load(ctx.seed)?;
    let summary = IngestSummary {
        n_rows: frame.n_rows(),
        target: frame.target_name().into(),
        target_labels: frame.target_labels().clone(),
        positive_rate: frame.positive_rate(),
        sensitive: frame.sensitive().map(|s| s.column.clone()),
        columns: frame.columns().to_vec(),
    };
    ctx.ensure_out_dir()?;
    write_csv(&frame, ctx.path("clean.csv"))?;
    ctx.write_json("schema.json", &summary)?;
    Ok(summary)
}

pub fn cmd_split(ctx: &Context, data: &DataSpec, spec: &SplitSpec) -> Result<Vec<Split>> {
    let frame = data.load(ctx.seed)?;
    let splits = stratified_splits(&frame, spec)?;
    ctx.write("splits.json", &splits_to_json(&splits)?)?;
    Ok(splits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub hyperparams: EbmHyperparams,
    pub split: SplitSpec,
    pub fit_time_mean: f64,
    pub fit_time_std: f64,
    pub test_score_mean: f64,
    pub test_score_std: f64,
    pub repeats: Vec<EvalReport>,
}

/// Baseline fit on every split repeat; writes `model_repeat{r}.json` and
/// `train_report.json`.
pub fn cmd_train(ctx: &Context, data: &DataSpec, spec: &SplitSpec, hp: &EbmHyperparams) -> Result<TrainReport> {
    hp.validate()?;
    let frame = data.load(ctx.seed)?;
    let splits = stratified_splits(&frame, spec)?;
    let config = RunConfig::baseline("baseline", hp.clone());
    let mut reports = Vec::new();
    for s in &splits {
        let run = fit_config(&frame, &s.train, &s.test, &config, s.repeat)?;
        let report = evaluate_run(&frame, &s.test, &run)?;
        ctx.say(format!("repeat {}: test ROC AUC {:.5}", s.repeat, report.roc_auc));
        ctx.write(&format!("model_repeat{}.json", s.repeat), &run.model.to_json()?)?;
        reports.push(report);
    }
    let times: Vec<f64> = reports.iter().map(|r| r.fit_time_seconds.unwrap_or(0.0)).collect();
    let rocs: Vec<f64> = reports.iter().map(|r| r.roc_auc).collect();
    let (t, s) = (mean_std(&times), mean_std(&rocs));
    let report = TrainReport {
        hyperparams: hp.clone(),
        split: *spec,
        fit_time_mean: t.mean,
        fit_time_std: t.std,
        test_score_mean: s.mean,
        test_score_std: s.std,
        repeats: reports,
    };
    ctx.write_json("train_report.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRank {
    pub term: String,
    pub importance: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub objective: ObjectiveKind,
    pub n_trials: usize,
    pub best_trial: usize,
    pub best_params: crate::hpo::Params,
    pub hyperparams: EbmHyperparams,
    pub validation_roc: Option<f64>,
    pub validation_dp: Option<f64>,
    /// Tuned model on the test rows of split repeat 0.
    pub test: EvalReport,
    /// Default-hyperparameter model on the same split, for comparison.
    pub baseline_test: EvalReport,
    pub sensitive_term_baseline: Option<TermRank>,
    pub sensitive_term_tuned: Option<TermRank>,
}

fn study_file(objective: ObjectiveKind) -> &'static str {
    match objective {
        ObjectiveKind::Performance => "study_performance.json",
        ObjectiveKind::Fairness => "study_fairness.json",
    }
}

fn term_rank(model: &EbmModel, reference: &TabularFrame, term: &str) -> Result<Option<TermRank>> {
    let g = explain_global(model, reference)?;
    Ok(g.get(term).map(|e| TermRank {
        term: e.term.clone(),
        importance: e.importance,
        rank: e.rank,
    }))
}

/// Tunes on the training rows of split repeat 0, refits the best trial on
/// all of them and evaluates on that repeat's test rows. Writes the study,
/// `model_{objective}.json` and `tune_report_{objective}.json`.
pub fn cmd_tune(
    ctx: &Context,
    data: &DataSpec,
    spec: &SplitSpec,
    objective: ObjectiveKind,
    n_trials: usize,
    base: &EbmHyperparams,
) -> Result<TuneReport> {
    if objective == ObjectiveKind::Fairness && data.sensitive.is_none() {
        return Err(Error::arg("the fairness objective needs --sensitive"));
    }
    let frame = data.load(ctx.seed)?;
    let split = stratified_splits(&frame, spec)?.swap_remove(0);
    let train = frame.select_rows(&split.train);
    let mut cfg = StudyConfig::new(objective, n_trials, ctx.seed);
    cfg.base = base.clone();
    ctx.ensure_out_dir()?;
    let study_path = ctx.path(study_file(objective));
    // A rerun starts from scratch so outputs depend on the seed alone.
    if study_path.exists() {
        std::fs::remove_file(&study_path).map_err(|e| Error::io(&study_path, e))?;
    }
    let study = run_study(&train, &cfg, Some(&study_path))?;
    let best = study.best_trial().expect("n_trials >= 1");
    ctx.say(format!("best trial {} objective {:.5}", best.index, best.objective));
    let hp = apply_params(base, &best.params);

    let tuned = fit_config(&frame, &split.train, &split.test, &RunConfig::baseline("tuned", hp.clone()), 0)?;
    let baseline = fit_config(&frame, &split.train, &split.test, &RunConfig::baseline("baseline", base.clone()), 0)?;
    let name = format!("model_{}.json", objective_name(objective));
    ctx.write(&name, &tuned.model.to_json()?)?;
    let sensitive = data.sensitive.as_deref();
    let rank = |m: &EbmModel| match sensitive {
        Some(s) => term_rank(m, &train, s),
        None => Ok(None),
    };
    let report = TuneReport {
        objective,
        n_trials: study.trials.len(),
        best_trial: best.index,
        best_params: best.params.clone(),
        hyperparams: hp,
        validation_roc: best.attr_f64("roc"),
        validation_dp: best.attr_f64("dp"),
        test: evaluate_run(&frame, &split.test, &tuned)?,
        baseline_test: evaluate_run(&frame, &split.test, &baseline)?,
        sensitive_term_baseline: rank(&baseline.model)?,
        sensitive_term_tuned: rank(&tuned.model)?,
    };
    ctx.write_json(&format!("tune_report_{}.json", objective_name(objective)), &report)?;
    Ok(report)
}

fn objective_name(o: ObjectiveKind) -> &'static str {
    match o {
        ObjectiveKind::Performance => "performance",
        ObjectiveKind::Fairness => "fairness",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub labeled_rows: Vec<usize>,
    pub final_reconstruction_loss: Option<f64>,
    pub head_train_roc: Option<f64>,
    pub test_roc_of_head: Option<f64>,
}

/// Pretrains on split repeat 0: writes `pipeline.json`,
/// `init_scores_train.csv`, `init_scores_test.csv` (rows in split order)
/// and `init_scores_all.csv` (every dataset row).
pub fn cmd_pretrain(ctx: &Context, data: &DataSpec, spec: &SplitSpec, cfg: &PretrainConfig) -> Result<PretrainReport> {
    let frame = data.load(ctx.seed)?;
    let split = stratified_splits(&frame, spec)?.swap_remove(0);
    let (pipeline, labeled) = InitScorePipeline::fit_split(&frame, &split.train, cfg)?;
    let all = make_init_scores(&pipeline, &frame)?;
    let train = all.select(&split.train);
    let test = all.select(&split.test);
    ctx.ensure_out_dir()?;
    ctx.write("pipeline.json", &pipeline.to_json()?)?;
    write_init_scores_csv(&train, ctx.path("init_scores_train.csv"))?;
    write_init_scores_csv(&test, ctx.path("init_scores_test.csv"))?;
    write_init_scores_csv(&all, ctx.path("init_scores_all.csv"))?;
    let roc_of = |rows: &[usize]| -> Option<f64> {
        let y: Vec<u8> = rows.iter().map(|&r| frame.target()[r]).collect();
        let s: Vec<f64> = rows.iter().map(|&r| all.values[r]).collect();
        crate::metrics::roc_auc(&y, &s).ok()
    };
    let report = PretrainReport {
        n_rows: frame.n_rows(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        head_train_roc: roc_of(&labeled),
        test_roc_of_head: roc_of(&split.test),
        labeled_rows: labeled,
        final_reconstruction_loss: pipeline.autoencoder.final_loss(),
    };
    ctx.write_json("pretrain_report.json", &report)?;
    Ok(report)
}

/// Evaluates a saved model on the dataset (or on one repeat's test rows).
pub fn cmd_evaluate(
    ctx: &Context,
    data: &DataSpec,
    model_path: &Path,
    init_scores: Option<&Path>,
    split: Option<(usize, SplitSpec)>,
) -> Result<EvalReport> {
    if !model_path.exists() {
        return Err(Error::MissingArtifact(model_path.to_path_buf()));
    }
    let model = EbmModel::load(model_path)?;
    let mut frame = data.load(ctx.seed)?;
    if let Some((repeat, spec)) = split {
        let splits = stratified_splits(&frame, &spec)?;
        let s = splits
            .get(repeat)
            .ok_or_else(|| Error::arg(format!("split repeat {repeat} does not exist")))?;
        frame = frame.select_rows(&s.test);
    }
    let p = match init_scores {
        Some(path) => model.predict_proba_with_offset(&frame, &read_init_scores_csv(path)?)?,
        None => model.predict_proba(&frame)?,
    };
    let groups = frame.sensitive().map(|s| (s.groups.as_slice(), s.labels.as_slice()));
    let report = EvalReport::compute(frame.target(), &p, groups, model.training_meta.timestamps.as_ref().map(|t| t.fit_seconds))?;
    ctx.write_json("eval_report.json", &report)?;
    Ok(report)
}

/// Importances over `data` plus every shape function; writes
/// `explanations.json` and `shapes.csv`.
pub fn cmd_explain(ctx: &Context, data: &DataSpec, model_path: &Path) -> Result<ExplanationExport> {
    if !model_path.exists() {
        return Err(Error::MissingArtifact(model_path.to_path_buf()));
    }
    let model = EbmModel::load(model_path)?;
    let frame = data.load(ctx.seed)?;
    let export = ExplanationExport::build(&model, &frame)?;
    ctx.write("explanations.json", &export.to_json()?)?;
    export.write_shapes_csv(ctx.path("shapes.csv"))?;
    Ok(export)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub matrix: RunMatrix,
    /// Each configuration against the first one, on per-repeat ROC AUC.
    pub significance: Vec<(String, SignificanceResult)>,
    /// Sensitivity of the first configuration fitted on repeat 0.
    pub perturbation: PerturbationReport,
}

pub fn validation_report(frame: &TabularFrame, configs: &[RunConfig], spec: &SplitSpec, perturb: &PerturbConfig) -> Result<ValidationReport> {
    let matrix = run_matrix(frame, configs, spec)?;
    let first = &configs[0].name;
    let significance = configs[1..]
        .iter()
        .map(|c| Ok((c.name.clone(), matrix.compare(&c.name, first)?)))
        .collect::<Result<_>>()?;
    let split = stratified_splits(frame, spec)?.swap_remove(0);
    let run = fit_config(frame, &split.train, &split.test, &configs[0], 0)?;
    let perturbation = perturbation_sensitivity(&run.model, &frame.select_rows(&split.test), perturb)?;
    Ok(ValidationReport {
        matrix,
        significance,
        perturbation,
    })
}

fn validation_markdown(r: &ValidationReport) -> String {
    let mut s = r.matrix.to_markdown();
    if !r.significance.is_empty() {
        s.push_str("\n| Comparison | W | p | n |\n|---|---|---|---|\n");
        for (name, sig) in &r.significance {
            s.push_str(&format!(
                "| {} vs {} | {} | {:.4} | {} |\n",
                name, r.matrix.configurations[0], sig.statistic, sig.p_value, sig.n_effective
            ));
        }
    }
    s.push_str(&format!(
        "\nPerturbation: mean |dp| {:.5}, max |dp| {:.5}, flip rate {:.5}\n",
        r.perturbation.mean_abs_delta, r.perturbation.max_abs_delta, r.perturbation.flip_rate
    ));
    s
}

pub fn cmd_validate(
    ctx: &Context,
    data: &DataSpec,
    spec: &SplitSpec,
    studies: &[PathBuf],
    perturb: &PerturbConfig,
) -> Result<ValidationReport> {
    let frame = data.load(ctx.seed)?;
    let mut base = EbmHyperparams::default();
    base.random_state = ctx.seed;
    let mut configs = vec![RunConfig::baseline("baseline", base)];
    for p in studies {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        configs.push(RunConfig {
            name,
            hyperparams: HpSource::Study(p.clone()),
            pretrain: None,
            label_budget: None,
        });
    }
    let report = validation_report(&frame, &configs, spec, perturb)?;
    ctx.write_json("validation.json", &report)?;
    ctx.write("validation.md", &validation_markdown(&report))?;
    Ok(report)
}

pub const BENCHMARK_CONFIGS: [&str; 5] = ["baseline", "perf-hpo", "fair-hpo", "init-only", "init+hpo"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub configs: Vec<String>,
    pub trials: usize,
    pub pretrain: PretrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub configs: Vec<String>,
    pub studies: Vec<String>,
    pub outputs: Vec<String>,
}

fn plan(opts: &BenchmarkOptions, has_sensitive: bool) -> Result<BenchmarkPlan> {
    for c in &opts.configs {
        if !BENCHMARK_CONFIGS.contains(&c.as_str()) {
            return Err(Error::arg(format!("unknown configuration {c:?}")));
        }
        if c == "fair-hpo" && !has_sensitive {
            return Err(Error::arg("fair-hpo needs --sensitive"));
        }
    }
    if opts.configs.is_empty() {
        return Err(Error::arg("no configurations requested"));
    }
    let wants = |c: &str| opts.configs.iter().any(|x| x == c);
    let mut studies = Vec::new();
    if wants("perf-hpo") {
        studies.push("study_performance.json".to_string());
    }
    if wants("fair-hpo") {
        studies.push("study_fairness.json".to_string());
    }
    if wants("init+hpo") {
        studies.push("study_init_performance.json".to_string());
    }
    let mut outputs = studies.clone();
    outputs.extend(["benchmark.json".to_string(), "benchmark.md".to_string()]);
    Ok(BenchmarkPlan {
        configs: opts.configs.clone(),
        studies,
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub matrix: RunMatrix,
    pub significance_vs_baseline: Vec<(String, SignificanceResult)>,
}

/// Builds any missing studies on the training rows of split repeat 0, then
/// evaluates the requested configurations on every repeat. With `dry_run`
/// only the plan is returned and nothing is written.
pub fn cmd_benchmark(
    ctx: &Context,
    data: &DataSpec,
    spec: &SplitSpec,
    opts: &BenchmarkOptions,
    dry_run: bool,
) -> Result<(BenchmarkPlan, Option<BenchmarkReport>)> {
    let the_plan = plan(opts, data.sensitive.is_some())?;
    if dry_run {
        return Ok((the_plan, None));
    }
    let frame = data.load(ctx.seed)?;
    let split = stratified_splits(&frame, spec)?.swap_remove(0);
    let tune_frame = frame.select_rows(&split.train);
    let mut base = EbmHyperparams::default();
    base.random_state = ctx.seed;
    ctx.ensure_out_dir()?;
    let study_cfg = |objective| {
        let mut c = StudyConfig::new(objective, opts.trials, ctx.seed);
        c.base = base.clone();
        c
    };
    for s in &the_plan.studies {
        let path = ctx.path(s);
        ctx.say(format!("study {}", path.display()));
        match s.as_str() {
            "study_performance.json" => {
                run_study(&tune_frame, &study_cfg(ObjectiveKind::Performance), Some(&path))?;
            }
            "study_fairness.json" => {
                run_study(&tune_frame, &study_cfg(ObjectiveKind::Fairness), Some(&path))?;
            }
            _ => {
                // The head fits its labeled rows closely; keeping them out of
                // the study stops its validation slice from rewarding that.
                let (pipeline, labeled) = InitScorePipeline::fit_split(&frame, &split.train, &opts.pretrain)?;
                let labeled: std::collections::HashSet<usize> = labeled.into_iter().collect();
                let rows: Vec<usize> = split.train.iter().copied().filter(|r| !labeled.contains(r)).collect();
                let unseen = frame.select_rows(&rows);
                let offsets: InitScores = make_init_scores(&pipeline, &unseen)?;
                run_study_with_offsets(&unseen, Some(&offsets), &study_cfg(ObjectiveKind::Performance), Some(&path))?;
            }
        }
    }
    let configs: Vec<RunConfig> = opts
        .configs
        .iter()
        .map(|c| {
            let study = |f: &str| HpSource::Study(ctx.path(f));
            let (hyperparams, pretrain) = match c.as_str() {
                "baseline" => (HpSource::Fixed(base.clone()), None),
                "perf-hpo" => (study("study_performance.json"), None),
                "fair-hpo" => (study("study_fairness.json"), None),
                "init-only" => (HpSource::Fixed(base.clone()), Some(opts.pretrain.clone())),
                _ => (study("study_init_performance.json"), Some(opts.pretrain.clone())),
            };
            RunConfig {
                name: c.clone(),
                hyperparams,
                pretrain,
                label_budget: None,
            }
        })
        .collect();
    let matrix = run_matrix(&frame, &configs, spec)?;
    let significance_vs_baseline = if opts.configs.iter().any(|c| c == "baseline") {
        opts.configs
            .iter()
            .filter(|c| *c != "baseline")
            .map(|c| Ok((c.clone(), matrix.compare(c, "baseline")?)))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let report = BenchmarkReport {
        matrix,
        significance_vs_baseline,
    };
    ctx.write_json("benchmark.json", &report)?;
    ctx.write("benchmark.md", &report.matrix.to_markdown())?;
    Ok((the_plan, Some(report)))
}

fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

fn resolve_data(d: &DataOpts, f: &FileConfig) -> Result<DataSpec> {
    let path = d
        .data
        .clone()
        .or_else(|| f.data.clone())
        .ok_or_else(|| Error::Config("no dataset given (--data or `data` in the config file)".into()))?;
    let target = d
        .target
        .clone()
        .or_else(|| f.target.clone())
        .ok_or_else(|| Error::Config("no target column given (--target)".into()))?;
    Ok(DataSpec {
        path,
        target,
        sensitive: d.sensitive.clone().or_else(|| f.sensitive.clone()),
        positive_label: d.positive_label.clone().or_else(|| f.positive_label.clone()),
        subsample: d.subsample.or(f.subsample),
    })
}

fn resolve_split(s: &SplitOpts, f: &FileConfig, seed: u64) -> Result<SplitSpec> {
    let d = SplitSpec::default();
    let spec = SplitSpec::new(
        pick(s.test_fraction, f.test_fraction, d.test_fraction),
        pick(s.repeats, f.repeats, d.n_repeats),
        seed,
    );
    spec.validate()?;
    Ok(spec)
}

fn resolve_hp(h: &HpOpts, f: &FileConfig, seed: u64) -> Result<EbmHyperparams> {
    let d = EbmHyperparams::default();
    let fh = f.hyperparams.clone().unwrap_or_default();
    let hp = EbmHyperparams {
        learning_rate: pick(h.learning_rate, fh.learning_rate, d.learning_rate),
        max_bins: pick(h.max_bins, fh.max_bins, d.max_bins),
        max_leaves: pick(h.max_leaves, fh.max_leaves, d.max_leaves),
        max_rounds: pick(h.max_rounds, fh.max_rounds, d.max_rounds),
        interactions: pick(h.interactions, fh.interactions, d.interactions),
        outer_bags: pick(h.outer_bags, fh.outer_bags, d.outer_bags),
        inner_bags: pick(h.inner_bags, fh.inner_bags, d.inner_bags),
        greedy_ratio: pick(h.greedy_ratio, fh.greedy_ratio, d.greedy_ratio),
        random_state: seed,
        validation_size: fh.validation_size.unwrap_or(d.validation_size),
        early_stopping_rounds: fh.early_stopping_rounds.unwrap_or(d.early_stopping_rounds),
        max_interaction_bins: fh.max_interaction_bins.unwrap_or(d.max_interaction_bins),
        ..d
    };
    hp.validate()?;
    Ok(hp)
}

fn resolve_pretrain(p: &PretrainOpts, f: &FileConfig, seed: u64) -> PretrainConfig {
    let d = PretrainConfig::default();
    let fp = f.pretrain.clone().unwrap_or_default();
    let mut cfg = d.clone();
    cfg.autoencoder.epochs = pick(p.epochs, fp.epochs, d.autoencoder.epochs);
    cfg.autoencoder.batch_size = pick(p.batch_size, fp.batch_size, d.autoencoder.batch_size);
    cfg.autoencoder.learning_rate = pick(p.ae_learning_rate, fp.learning_rate, d.autoencoder.learning_rate);
    cfg.autoencoder.hidden = p.hidden.or(fp.hidden);
    cfg.autoencoder.bottleneck = p.bottleneck.or(fp.bottleneck);
    cfg.autoencoder.seed = seed;
    cfg.head_l2 = pick(p.head_l2, fp.head_l2, d.head_l2);
    cfg.n_labels = p.labels.or(f.labels);
    cfg.label_seed = seed;
    cfg.train_only = p.train_only_pretrain || fp.train_only.unwrap_or(false);
    cfg
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::Config(e.to_string())),
    };
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = pick(cli.seed, file.seed, DEFAULT_SEED);
    let ctx = Context {
        seed,
        out_dir: pick(cli.out_dir.clone(), file.out_dir.clone(), PathBuf::from("out")),
        quiet: cli.quiet || file.quiet.unwrap_or(false),
    };
    let print = |v: serde_json::Value| {
        if !ctx.quiet {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
        }
    };
    match &cli.command {
        Command::Ingest(d) => {
            let s = cmd_ingest(&ctx, &resolve_data(d, &file)?)?;
            print(json!({"n_rows": s.n_rows, "positive_rate": s.positive_rate, "columns": s.columns.len()}));
        }
        Command::Split { data, split } => {
            let splits = cmd_split(&ctx, &resolve_data(data, &file)?, &resolve_split(split, &file, seed)?)?;
            print(json!({"repeats": splits.len()}));
        }
        Command::Train { data, split, hp } => {
            let r = cmd_train(
                &ctx,
                &resolve_data(data, &file)?,
                &resolve_split(split, &file, seed)?,
                &resolve_hp(hp, &file, seed)?,
            )?;
            print(json!({
                "fit_time_mean": r.fit_time_mean,
                "fit_time_std": r.fit_time_std,
                "test_score_mean": r.test_score_mean,
                "test_score_std": r.test_score_std,
            }));
        }
        Command::Tune {
            data,
            split,
            hp,
            objective,
            trials,
        } => {
            let r = cmd_tune(
                &ctx,
                &resolve_data(data, &file)?,
                &resolve_split(split, &file, seed)?,
                pick(*objective, file.objective, ObjectiveKind::Performance),
                pick(*trials, file.trials, 50),
                &resolve_hp(hp, &file, seed)?,
            )?;
            print(json!({"best_trial": r.best_trial, "test_roc_auc": r.test.roc_auc, "test_dp": r.test.dp}));
        }
        Command::Pretrain { data, split, pretrain } => {
            let r = cmd_pretrain(
                &ctx,
                &resolve_data(data, &file)?,
                &resolve_split(split, &file, seed)?,
                &resolve_pretrain(pretrain, &file, seed),
            )?;
            print(json!({"labeled": r.labeled_rows.len(), "final_reconstruction_loss": r.final_reconstruction_loss}));
        }
        Command::Evaluate {
            data,
            model,
            init_scores,
            split_repeat,
            split,
        } => {
            let spec = resolve_split(split, &file, seed)?;
            let r = cmd_evaluate(
                &ctx,
                &resolve_data(data, &file)?,
                model,
                init_scores.as_deref(),
                split_repeat.map(|r| (r, spec)),
            )?;
            print(json!({"roc_auc": r.roc_auc, "f1": r.f1, "dp": r.dp, "eod": r.eod}));
        }
        Command::Explain { data, model } => {
            let e = cmd_explain(&ctx, &resolve_data(data, &file)?, model)?;
            let top: Vec<_> = e.global.iter().filter(|g| g.rank <= 5).map(|g| (&g.term, g.importance)).collect();
            print(json!({"top_terms": top}));
        }
        Command::Validate {
            data,
            split,
            studies,
            noise_scale,
            draws,
            target_feature,
        } => {
            let perturb = PerturbConfig {
                noise_scale: pick(*noise_scale, file.noise_scale, 0.1),
                n_draws: pick(*draws, file.draws, 5),
                seed,
                mode: match target_feature {
                    Some(f) => PerturbMode::Targeted(f.clone()),
                    None => PerturbMode::Gaussian,
                },
            };
            let r = cmd_validate(&ctx, &resolve_data(data, &file)?, &resolve_split(split, &file, seed)?, studies, &perturb)?;
            if !ctx.quiet {
                println!("{}", validation_markdown(&r));
            }
        }
        Command::Benchmark {
            data,
            split,
            pretrain,
            trials,
            configs,
            dry_run,
        } => {
            let data = resolve_data(data, &file)?;
            let default_configs: Vec<String> = BENCHMARK_CONFIGS
                .iter()
                .filter(|c| data.sensitive.is_some() || **c != "fair-hpo")
                .map(|c| c.to_string())
                .collect();
            let opts = BenchmarkOptions {
                configs: configs.clone().unwrap_or(default_configs),
                trials: pick(*trials, file.trials, 50),
                pretrain: resolve_pretrain(pretrain, &file, seed),
            };
            let (the_plan, report) = cmd_benchmark(&ctx, &data, &resolve_split(split, &file, seed)?, &opts, *dry_run)?;
            match report {
                None => println!("{}", serde_json::to_string_pretty(&the_plan)?),
                Some(r) if !ctx.quiet => println!("{}", r.matrix.to_markdown()),
                Some(_) => {}
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file = FileConfig {
            hyperparams: Some(HpFile {
                max_rounds: Some(7),
                learning_rate: Some(0.2),
                ..Default::default()
            }),
            ..Default::default()
        };
        let flags = HpOpts {
            max_rounds: Some(3),
            ..Default::default()
        };
        let hp = resolve_hp(&flags, &file, 5).unwrap();
        assert_eq!(hp.max_rounds, 3);
        assert_eq!(hp.learning_rate, 0.2);
        assert_eq!(hp.max_leaves, 3);
        assert_eq!(hp.random_state, 5);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("seed = 3\nbogus = 1").is_err());
        let f: FileConfig = toml::from_str("seed = 3\n[hyperparams]\nmax_rounds = 10").unwrap();
        assert_eq!(f.seed, Some(3));
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["glassboost", "--seed", "4", "tune", "--data", "x.csv", "--target", "y", "--objective", "fairness"]).unwrap();
        assert_eq!(cli.seed, Some(4));
        assert!(matches!(cli.command, Command::Tune { objective: Some(ObjectiveKind::Fairness), .. }));
    }
}
