mod common;

use glassboost::dataio::{ColumnKind, SplitSpec, TabularFrame};
use glassboost::ebm::{BinDefinition, EbmHyperparams, EbmModel, TermModel};
use glassboost::rng;
use glassboost::validate::{
    mean_std, perturbation_sensitivity, run_matrix, wilcoxon_signed_rank, PMethod, PerturbConfig, PerturbMode, RunConfig,
};
use rand::Rng as _;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn exact_p_values_match_sign_enumeration() {
    let mut r = rng::stream(2024, &[]);
    for case in 0..200 {
        let n = r.random_range(1..=12);
        // Values on a coarse grid so ties and zero differences both occur.
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0..6) as f64 * 0.5).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(0..6) as f64 * 0.5).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let (w, p) = common::wilcoxon_enumeration(&d);
        let got = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(got.method, PMethod::Exact);
        assert_eq!(got.statistic, w, "case {case}");
        assert!((got.p_value - p).abs() < 1e-12, "case {case}: {} vs {p}", got.p_value);
    }
}

#[test]
fn five_wins_give_one_sixteenth() {
    let r = wilcoxon_signed_rank(&[0.91, 0.92, 0.93, 0.94, 0.95], &[0.9; 5]).unwrap();
    assert_eq!(r.p_value, 2.0 / 32.0);
}

/// One numeric feature, score -2 at or below zero and +2 above.
fn step_model() -> EbmModel {
    let bins = vec![BinDefinition {
        feature: "x".into(),
        kind: ColumnKind::Numeric,
        cut_points: vec![0.0],
        categories: vec![],
        category_bins: vec![],
        overflow_bin: None,
        has_missing_bin: false,
        n_bins: 3,
    }];
    let term = TermModel {
        name: "x".into(),
        features: vec![0],
        shape: vec![3],
        scores: vec![0.0, -2.0, 2.0],
    };
    EbmModel::from_parts(bins, vec![], 0.0, vec![term]).unwrap()
}

fn grid_frame() -> TabularFrame {
    let rows: Vec<Vec<f64>> = (0..400).map(|i| vec![(i as f64 + 0.5) / 200.0 - 1.0]).collect();
    let y = (0..400).map(|i| (i >= 200) as u8).collect();
    TabularFrame::from_numeric_rows(&["x"], &rows, y).unwrap()
}

#[test]
fn flip_rate_matches_gaussian_crossing_mass() {
    let frame = grid_frame();
    let model = step_model();
    let cfg = PerturbConfig {
        noise_scale: 0.5,
        n_draws: 200,
        seed: 1,
        mode: PerturbMode::Gaussian,
    };
    let rep = perturbation_sensitivity(&model, &frame, &cfg).unwrap();
    // The handmade model records no std, so the frame's own is used.
    let xs: Vec<f64> = (0..400).map(|r| frame.cell(r, 0).as_f64().unwrap()).collect();
    let sigma = 0.5 * mean_std(&xs).std;
    let unit = Normal::new(0.0, 1.0).unwrap();
    let expected = xs.iter().map(|x| unit.cdf(-x.abs() / sigma)).sum::<f64>() / xs.len() as f64;
    assert!((rep.flip_rate - expected).abs() < 0.01, "{} vs {expected}", rep.flip_rate);
    let jump = 1.0 / (1.0 + (-2.0f64).exp()) - 1.0 / (1.0 + 2.0f64.exp());
    assert!((rep.mean_abs_delta - expected * jump).abs() < 0.01);
}

#[test]
fn zero_noise_and_constant_models_never_move() {
    let frame = common::heart();
    let model = glassboost::ebm::fit(
        &frame,
        &EbmHyperparams {
            max_rounds: 50,
            outer_bags: 1,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    let zero = PerturbConfig {
        noise_scale: 0.0,
        n_draws: 3,
        seed: 2,
        mode: PerturbMode::Gaussian,
    };
    let r = perturbation_sensitivity(&model, &frame, &zero).unwrap();
    assert_eq!((r.mean_abs_delta, r.max_abs_delta, r.flip_rate), (0.0, 0.0, 0.0));

    let flat = glassboost::ebm::fit(
        &frame,
        &EbmHyperparams {
            max_rounds: 0,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    let loud = PerturbConfig {
        noise_scale: 3.0,
        ..zero.clone()
    };
    let r = perturbation_sensitivity(&flat, &frame, &loud).unwrap();
    assert_eq!(r.max_abs_delta, 0.0);

    let targeted = PerturbConfig {
        mode: PerturbMode::Targeted("gender".into()),
        ..loud
    };
    assert!(perturbation_sensitivity(&model, &frame, &targeted).is_err());
}

#[test]
fn matrix_shape_and_summaries() {
    let frame = common::logistic_frame(300, 6);
    let hp = EbmHyperparams {
        max_rounds: 40,
        outer_bags: 2,
        ..Default::default()
    };
    let m = run_matrix(&frame, &[RunConfig::baseline("a", hp.clone())], &SplitSpec::default()).unwrap();
    assert_eq!(m.rows.len(), 3);
    let s = m.summary("a").unwrap();
    assert_eq!(s.n, 3);
    let rocs = m.roc_by_repeat("a");
    assert!((s.roc_auc.mean - rocs.iter().sum::<f64>() / 3.0).abs() < 1e-15);

    let single = run_matrix(&frame, &[RunConfig::baseline("a", hp)], &SplitSpec::new(0.25, 1, 1337)).unwrap();
    assert_eq!(single.summary("a").unwrap().roc_auc.std, 0.0);
    // Repeat 0 is the same split either way.
    assert_eq!(single.rows[0].report.roc_auc, m.rows[0].report.roc_auc);
}

#[test]
fn mean_of_identical_values_is_that_value() {
    let m = mean_std(&[0.8125; 7]);
    assert_eq!((m.mean, m.std), (0.8125, 0.0));
}
