mod common;

use std::collections::BTreeMap;

use glassboost::dataio::TabularFrame;
use glassboost::ebm::EbmHyperparams;
use glassboost::hpo::{
    default_space, objective_fairness, objective_performance, run_study, stable_payload, suggest, ObjectiveKind, ParamSpec, Params,
    SearchSpace, Study, StudyConfig, TpeConfig,
};
use glassboost::rng;
use glassboost::Error;
use rand::Rng as _;

fn unit_space() -> SearchSpace {
    SearchSpace {
        params: vec![ParamSpec::uniform("x", 0.0, 1.0)],
    }
}

fn params(x: f64) -> Params {
    BTreeMap::from([("x".to_string(), x)])
}

#[test]
fn suggestions_move_toward_the_good_end() {
    // Twelve completed trials where larger x is better.
    let mut r = rng::stream(77, &[]);
    let mut xs = vec![0.0, 1.0];
    xs.extend((0..10).map(|_| r.random_range(0.05..0.95)));
    let hist: Vec<(Params, f64)> = xs.iter().map(|&x| (params(x), 1.0 - x)).collect();
    let view: Vec<(&Params, f64)> = hist.iter().map(|(p, v)| (p, *v)).collect();

    // Quantile split computed independently: the best quarter by objective.
    let cfg = TpeConfig::default();
    let n_good = cfg.n_good(xs.len());
    let mut sorted = xs.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let good = &sorted[..n_good];
    let bad = &sorted[n_good..];
    assert!(good.contains(&1.0));
    let bad_mean = bad.iter().sum::<f64>() / bad.len() as f64;

    let mut nearer = 0;
    for seed in 0..100 {
        let s = suggest(&unit_space(), &view, seed, xs.len(), &cfg).unwrap()["x"];
        assert_eq!(s, suggest(&unit_space(), &view, seed, xs.len(), &cfg).unwrap()["x"]);
        if (s - 1.0).abs() < (s - bad_mean).abs() {
            nearer += 1;
        }
    }
    assert!(nearer >= 80, "{nearer} of 100");
}

#[test]
fn every_suggestion_respects_bounds_and_kinds() {
    let space = default_space(ObjectiveKind::Fairness);
    let mut study = Study::new(space.clone(), 5, ObjectiveKind::Fairness);
    for i in 0..40 {
        let p = study.ask().unwrap();
        assert!(space.contains(&p), "trial {i}: {p:?}");
        let score = p["learning_rate"].ln().abs() + p["max_leaves"] * 0.01;
        study.tell(p, score, BTreeMap::new()).unwrap();
    }
}

fn best_after(study: &mut Study, budget: usize) -> f64 {
    study
        .optimize(budget, |p| Ok(((p["x"] - 0.3).powi(2), BTreeMap::new())), |_| Ok(()))
        .unwrap();
    study.best_trial().unwrap().objective
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
}

#[test]
fn tpe_beats_random_search_on_a_parabola() {
    let mut tpe = Vec::new();
    let mut random = Vec::new();
    for seed in 0..20 {
        tpe.push(best_after(&mut Study::new(unit_space(), seed, ObjectiveKind::Performance), 30));
        // Random search: the same sampler that never leaves its startup phase.
        let mut s = Study::new(unit_space(), seed, ObjectiveKind::Performance);
        s.tpe.n_startup = usize::MAX;
        random.push(best_after(&mut s, 30));
    }
    let (t, r) = (median(tpe), median(random));
    assert!(t < r, "tpe {t} vs random {r}");
}

#[test]
fn best_so_far_is_non_increasing() {
    let mut s = Study::new(unit_space(), 3, ObjectiveKind::Performance);
    best_after(&mut s, 25);
    let b = s.best_so_far();
    assert!(b.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*b.last().unwrap(), s.best_trial().unwrap().objective);
}

#[test]
fn zero_lambda_ranks_like_performance() {
    let mut r = rng::stream(8, &[]);
    let hist: Vec<(f64, f64)> = (0..50).map(|_| (r.random_range(0.5..1.0), r.random::<f64>())).collect();
    let order = |f: &dyn Fn(f64, f64) -> f64| {
        let mut idx: Vec<usize> = (0..hist.len()).collect();
        idx.sort_by(|&a, &b| f(hist[a].0, hist[a].1).total_cmp(&f(hist[b].0, hist[b].1)));
        idx
    };
    assert_eq!(
        order(&|roc, _| objective_performance(roc)),
        order(&|roc, dp| objective_fairness(roc, dp, 0.0))
    );
}

fn small_frame() -> TabularFrame {
    common::logistic_frame(160, 4)
}

fn cheap_config(n_trials: usize) -> StudyConfig {
    let mut cfg = StudyConfig::new(ObjectiveKind::Performance, n_trials, 21);
    cfg.base = EbmHyperparams {
        early_stopping_rounds: 5,
        ..Default::default()
    };
    // Keep trials cheap: narrow the costly parameters.
    cfg.space = SearchSpace {
        params: vec![
            ParamSpec::log_uniform("learning_rate", 1e-2, 1e-1),
            ParamSpec::integer("max_rounds", 20.0, 60.0),
            ParamSpec::integer("max_leaves", 2.0, 4.0),
            ParamSpec::integer("outer_bags", 1.0, 2.0),
        ],
    };
    cfg
}

#[test]
fn resumed_study_matches_uninterrupted_run() {
    let frame = small_frame();
    let dir = tempfile::tempdir().unwrap();
    let whole = dir.path().join("whole.json");
    let split = dir.path().join("split.json");
    run_study(&frame, &cheap_config(8), Some(&whole)).unwrap();
    let first = run_study(&frame, &cheap_config(3), Some(&split)).unwrap();
    assert_eq!(first.trials.len(), 3);
    let resumed = run_study(&frame, &cheap_config(8), Some(&split)).unwrap();
    assert_eq!(resumed.trials.len(), 8);
    let read = |p| stable_payload(&std::fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(read(&whole), read(&split));

    let mut other_seed = cheap_config(8);
    other_seed.seed = 22;
    assert!(matches!(run_study(&frame, &other_seed, Some(&split)), Err(Error::Config(_))));
}

#[test]
fn single_trial_study_records_its_attributes() {
    let frame = small_frame();
    let s = run_study(&frame, &cheap_config(1), None).unwrap();
    assert_eq!(s.trials.len(), 1);
    let best = s.best_trial().unwrap();
    assert_eq!(best.index, 0);
    let roc = best.attr_f64("roc").unwrap();
    assert!((best.objective - (1.0 - roc)).abs() < 1e-15);
    assert!(best.user_attrs.contains_key("hyperparams"));
}

#[test]
fn fairness_study_needs_groups_and_records_dp() {
    let frame = small_frame();
    let mut cfg = cheap_config(2);
    cfg.objective = ObjectiveKind::Fairness;
    cfg.space.params.push(ParamSpec::uniform("lambda", 0.0, 5.0));
    assert!(matches!(run_study(&frame, &cfg, None), Err(Error::InvalidArgument(_))));

    // Group on the sign of a weak feature.
    let rows: Vec<Vec<f64>> = (0..frame.n_rows())
        .map(|r| {
            let c = frame.cell(r, 2).as_f64().unwrap();
            vec![frame.cell(r, 0).as_f64().unwrap(), frame.cell(r, 1).as_f64().unwrap(), (c > 0.0) as u8 as f64]
        })
        .collect();
    let grouped = TabularFrame::from_numeric_rows(&["a", "b", "g"], &rows, frame.target().to_vec())
        .unwrap()
        .with_sensitive("g")
        .unwrap();
    let s = run_study(&grouped, &cfg, None).unwrap();
    for t in &s.trials {
        let (roc, dp, lambda) = (t.attr_f64("roc").unwrap(), t.attr_f64("dp").unwrap(), t.attr_f64("lambda").unwrap());
        assert!((t.objective - objective_fairness(roc, dp, lambda)).abs() < 1e-15);
    }
}
