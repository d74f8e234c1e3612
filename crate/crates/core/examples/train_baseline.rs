//! Baseline EBM on a CSV dataset across stratified repeats.
//!
//! cargo run --release --example train_baseline -- data/heart.csv "diameter narrowing"

use std::time::Instant;

use glassboost::dataio::{load_csv, stratified_splits, LoadOptions, SplitSpec};
use glassboost::ebm::{fit, EbmHyperparams};
use glassboost::metrics::roc_auc;

fn main() -> glassboost::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let path = args.get(1).map(String::as_str).unwrap_or("data/heart.csv");
    let target = args.get(2).map(String::as_str).unwrap_or("diameter narrowing");
    let frame = load_csv(path, target, None, &LoadOptions::default())?;
    let hp = EbmHyperparams::default();
    let splits = stratified_splits(&frame, &SplitSpec::default())?;
    let mut aucs = Vec::new();
    for split in &splits {
        let train = frame.select_rows(&split.train);
        let test = frame.select_rows(&split.test);
        let t0 = Instant::now();
        let model = fit(&train, &hp, None)?;
        let auc = roc_auc(test.target(), &model.predict_proba(&test)?)?;
        println!(
            "repeat {}: test ROC AUC {:.5}  fit {:.1}s  epochs {:?}",
            split.repeat,
            auc,
            t0.elapsed().as_secs_f64(),
            model.training_meta.main_epochs
        );
        aucs.push(auc);
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    println!("mean ROC AUC {mean:.5}");
    Ok(())
}
