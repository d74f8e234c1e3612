//! TPE search for `1 - ROC` on the heart data, then a refit of the best
//! trial on the whole training split.
//!
//! cargo run --release --example performance_tuning -- 50

use std::time::Instant;

use glassboost::dataio::{load_csv, stratified_splits, LoadOptions, SplitSpec};
use glassboost::ebm::fit;
use glassboost::hpo::{apply_params, run_study, ObjectiveKind, StudyConfig};
use glassboost::metrics::roc_auc;

fn main() -> glassboost::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let frame = load_csv("data/heart.csv", "diameter narrowing", None, &LoadOptions::default())?;
    let split = &stratified_splits(&frame, &SplitSpec::default())?[0];
    let train = frame.select_rows(&split.train);
    let test = frame.select_rows(&split.test);

    let cfg = StudyConfig::new(ObjectiveKind::Performance, trials, 1337);
    let t0 = Instant::now();
    let study = run_study(&train, &cfg, None)?;
    for t in &study.trials {
        println!(
            "trial {:>2}  objective {:.4}  fit {:.2}s",
            t.index,
            t.objective,
            t.attr_f64("fit_time_seconds").unwrap_or(0.0)
        );
    }
    let best = study.best_trial().expect("at least one trial");
    println!("best trial {} after {:.1}s: {:?}", best.index, t0.elapsed().as_secs_f64(), best.params);

    let hp = apply_params(&cfg.base, &best.params);
    let model = fit(&train, &hp, None)?;
    println!("refit test ROC AUC {:.5}", roc_auc(test.target(), &model.predict_proba(&test)?)?);
    Ok(())
}
