//! Trades ROC against demographic parity on the heart data with the
//! fairness objective, then compares the sensitive term's rank.
//!
//! cargo run --release --example fairness_tuning -- 30

use glassboost::dataio::{load_csv, stratified_splits, LoadOptions, SplitSpec};
use glassboost::ebm::fit;
use glassboost::explain::explain_global;
use glassboost::hpo::{apply_params, run_study, ObjectiveKind, StudyConfig};
use glassboost::metrics::EvalReport;

fn main() -> glassboost::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let frame = load_csv("data/heart.csv", "diameter narrowing", Some("gender"), &LoadOptions::default())?;
    let split = &stratified_splits(&frame, &SplitSpec::default())?[0];
    let (train, test) = (frame.select_rows(&split.train), frame.select_rows(&split.test));
    let s = test.sensitive().expect("sensitive column");

    for kind in [ObjectiveKind::Performance, ObjectiveKind::Fairness] {
        let cfg = StudyConfig::new(kind, trials, 1337);
        let study = run_study(&train, &cfg, None)?;
        let best = study.best_trial().expect("at least one trial");
        let model = fit(&train, &apply_params(&cfg.base, &best.params), None)?;
        let report = EvalReport::compute(test.target(), &model.predict_proba(&test)?, Some((&s.groups, &s.labels)), None)?;
        let rank = explain_global(&model, &train)?.get("gender").map(|e| e.rank);
        println!(
            "{kind:?}: lambda {:?}  test ROC {:.4}  DP {:.4}  gender rank {:?} of {}",
            best.params.get("lambda"),
            report.roc_auc,
            report.dp.unwrap_or(f64::NAN),
            rank,
            model.terms.len()
        );
    }
    Ok(())
}
