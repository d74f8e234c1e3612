//! Cold start with 30 labels: an EBM trained from scratch next to one
//! warm-started from autoencoder init scores.
//!
//! cargo run --release --example pretrain_warm_start -- 30

use glassboost::dataio::{load_csv, stratified_splits, LoadOptions, SplitSpec};
use glassboost::ebm::{fit, EbmHyperparams, Trainer};
use glassboost::metrics::roc_auc;
use glassboost::pretrain::{make_init_scores, InitScorePipeline, PretrainConfig};

fn main() -> glassboost::Result<()> {
    let labels: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let frame = load_csv("data/heart.csv", "diameter narrowing", None, &LoadOptions::default())?;
    let split = &stratified_splits(&frame, &SplitSpec::default())?[0];
    let test = frame.select_rows(&split.test);

    let cfg = PretrainConfig {
        n_labels: Some(labels),
        ..Default::default()
    };
    // The autoencoder sees every row without labels; the head sees `labels` rows.
    let (pipeline, labeled) = InitScorePipeline::fit_split(&frame, &split.train, &cfg)?;
    let few = frame.select_rows(&labeled);
    println!("head alone      test ROC {:.4}", roc_auc(test.target(), &pipeline.predict_proba(&test)?)?);

    let scratch = fit(&few, &EbmHyperparams::default(), None)?;
    println!("EBM from scratch test ROC {:.4}", roc_auc(test.target(), &scratch.predict_proba(&test)?)?);

    let warm = Trainer::new(EbmHyperparams::default())
        .init_scores(make_init_scores(&pipeline, &few)?)
        .fit(&few)?;
    let p = warm.predict_proba_with_offset(&test, &make_init_scores(&pipeline, &test)?)?;
    println!("EBM warm start   test ROC {:.4}", roc_auc(test.target(), &p)?);
    Ok(())
}
