//! Pair ranking on a synthetic XOR problem: the pair term is what makes it
//! learnable.
//!
//! cargo run --release --example interaction_detection

use glassboost::dataio::{stratified_splits, SplitSpec, TabularFrame};
use glassboost::ebm::{detect_interactions, fit, EbmHyperparams};
use glassboost::metrics::roc_auc;
use glassboost::rng;
use rand::Rng as _;

fn main() -> glassboost::Result<()> {
    let mut r = rng::stream(7, &[]);
    let (mut rows, mut y) = (Vec::new(), Vec::new());
    for _ in 0..2000 {
        let (a, b) = (r.random_range(0..2u8), r.random_range(0..2u8));
        rows.push(vec![a as f64, b as f64, r.random::<f64>(), r.random::<f64>()]);
        y.push(a ^ b);
    }
    let frame = TabularFrame::from_numeric_rows(&["x1", "x2", "noise1", "noise2"], &rows, y)?;
    let split = &stratified_splits(&frame, &SplitSpec::new(0.25, 1, 1337))?[0];
    let (train, test) = (frame.select_rows(&split.train), frame.select_rows(&split.test));

    let mains = fit(
        &train,
        &EbmHyperparams {
            interactions: 0,
            ..Default::default()
        },
        None,
    )?;
    println!("pair ranking on main-effect residuals:");
    for pair in detect_interactions(&train, &mains, 6)? {
        let (i, j) = pair.features;
        println!("  {} x {}  gain {:.3}", mains.feature_names[i], mains.feature_names[j], pair.gain);
    }

    let with_pair = fit(
        &train,
        &EbmHyperparams {
            interactions: 1,
            ..Default::default()
        },
        None,
    )?;
    println!("\nmains only   test ROC {:.4}", roc_auc(test.target(), &mains.predict_proba(&test)?)?);
    println!("with 1 pair  test ROC {:.4}  terms {:?}", roc_auc(test.target(), &with_pair.predict_proba(&test)?)?, with_pair.term_names());
    Ok(())
}
