//! Paired Wilcoxon test of two settings over ten heart repeats, plus the
//! noise sensitivity of one fitted model.
//!
//! cargo run --release --example validate_significance

use glassboost::dataio::{load_csv, stratified_splits, LoadOptions, SplitSpec};
use glassboost::ebm::{fit, EbmHyperparams};
use glassboost::validate::{perturbation_sensitivity, run_matrix, PerturbConfig, PerturbMode, RunConfig};

fn main() -> glassboost::Result<()> {
    let frame = load_csv("data/heart.csv", "diameter narrowing", None, &LoadOptions::default())?;
    let spec = SplitSpec::new(0.25, 10, 1337);
    let stumps = EbmHyperparams {
        max_leaves: 2,
        interactions: 0,
        ..Default::default()
    };
    let configs = [
        RunConfig::baseline("default", EbmHyperparams::default()),
        RunConfig::baseline("stumps", stumps),
    ];
    let m = run_matrix(&frame, &configs, &spec)?;
    println!("{}", m.to_markdown());
    let w = m.compare("default", "stumps")?;
    println!("Wilcoxon default vs stumps: W = {}, p = {:.4} ({:?})\n", w.statistic, w.p_value, w.method);

    let split = &stratified_splits(&frame, &spec)?[0];
    let model = fit(&frame.select_rows(&split.train), &EbmHyperparams::default(), None)?;
    let test = frame.select_rows(&split.test);
    for scale in [0.05, 0.1, 0.25, 0.5] {
        let r = perturbation_sensitivity(
            &model,
            &test,
            &PerturbConfig {
                noise_scale: scale,
                n_draws: 20,
                seed: 1337,
                mode: PerturbMode::Gaussian,
            },
        )?;
        println!(
            "noise {scale:>4} std: mean |dp| {:.4}  max |dp| {:.4}  flip rate {:.3}",
            r.mean_abs_delta, r.max_abs_delta, r.flip_rate
        );
    }
    Ok(())
}
