mod common;

use glassboost::metrics::{calibration_bins, confusion, demographic_parity, equalized_odds, roc_auc, threshold};
use glassboost::rng;
use proptest::prelude::*;
use rand::Rng as _;

fn labelled_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (2usize..500)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..2, n),
                // Coarse grid so ties are common.
                proptest::collection::vec((0u32..20).prop_map(|k| k as f64 / 20.0), n),
            )
        })
        .prop_filter("both classes", |(y, _)| y.contains(&0) && y.contains(&1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_equals_pairwise_count((y, p) in labelled_scores()) {
        prop_assert_eq!(roc_auc(&y, &p).unwrap(), common::pairwise_auc(&y, &p));
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps((y, p) in labelled_scores()) {
        let q: Vec<f64> = p.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(roc_auc(&y, &p).unwrap(), roc_auc(&y, &q).unwrap());
    }

    #[test]
    fn negated_scores_complement(y in proptest::collection::vec(0u8..2, 2..200), seed in any::<u64>()) {
        prop_assume!(y.contains(&0) && y.contains(&1));
        let mut r = rng::stream(seed, &[]);
        let p: Vec<f64> = y.iter().map(|_| r.random::<f64>()).collect();
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        let sum = roc_auc(&y, &p).unwrap() + roc_auc(&y, &neg).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_ignores_group_names_and_order(
        yhat in proptest::collection::vec(0u8..2, 1..100),
        flip in any::<bool>(),
    ) {
        let s: Vec<u8> = (0..yhat.len()).map(|i| (i % 3 == 0) as u8).collect();
        let renamed: Vec<&str> = s.iter().map(|&g| if (g == 1) ^ flip { "left" } else { "right" }).collect();
        let dp = demographic_parity(&yhat, &s);
        prop_assert_eq!(dp, demographic_parity(&yhat, &renamed));
        prop_assert!((0.0..=1.0).contains(&dp));
    }

    #[test]
    fn confusion_counts_sum_to_n((y, p) in labelled_scores(), t in 0.0f64..1.0) {
        prop_assert_eq!(confusion(&y, &p, t).total(), y.len());
    }
}

#[test]
fn equal_group_rates_have_zero_gaps() {
    let y = [1, 0, 1, 0, 1, 0, 1, 0];
    let yhat = [1, 0, 0, 1, 1, 0, 0, 1];
    let s = ["a", "a", "a", "a", "b", "b", "b", "b"];
    assert_eq!(equalized_odds(&y, &yhat, &s), 0.0);
    assert_eq!(equalized_odds(&y, &y, &s), 0.0);
}

#[test]
fn calibrated_scores_track_empirical_rates() {
    let mut r = rng::stream(5, &[]);
    let n = 50_000;
    let p: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let y: Vec<u8> = p.iter().map(|&q| (r.random::<f64>() < q) as u8).collect();
    let curves = calibration_bins(&y, &p, None, 10).unwrap();
    for b in &curves[0].bins {
        assert!(b.count > 1000);
        assert!((b.mean_p - b.empirical_rate).abs() < 0.03, "{b:?}");
    }
    let yhat = threshold(&p, 0.5);
    assert_eq!(yhat.len(), n);
}
