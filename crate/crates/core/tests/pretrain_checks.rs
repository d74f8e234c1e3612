mod common;

use glassboost::dataio::stratified_splits;
use glassboost::dataio::SplitSpec;
use glassboost::ebm::{EbmHyperparams, Trainer};
use glassboost::pretrain::autoencoder::{gradient_check, train, train_autoencoder, Activation, AeConfig, AutoencoderModel};
use glassboost::pretrain::encode::{encode_features, Matrix};
use glassboost::pretrain::head::{fit_head, head_objective, LogisticHead};
use glassboost::pretrain::{make_init_scores, InitScorePipeline, PretrainConfig, PROB_CLAMP};
use glassboost::rng;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

fn random_matrix(rows: usize, cols: usize, r: &mut rng::Rng) -> Matrix {
    let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| StandardNormal.sample(r)).collect()).collect();
    Matrix::from_rows(&data).unwrap()
}

fn random_net(seed: u64, linear_only: bool) -> (AutoencoderModel, Matrix) {
    let mut r = rng::stream(seed, &[1]);
    let depth = r.random_range(1..=4);
    let mut dims = vec![r.random_range(1..=5)];
    for _ in 0..depth {
        dims.push(r.random_range(1..=5));
    }
    let acts: Vec<Activation> = (0..depth)
        .map(|_| if linear_only || r.random::<bool>() { Activation::Linear } else { Activation::Relu })
        .collect();
    let mut net = AutoencoderModel::init(&dims, &acts, seed).unwrap();
    for l in &mut net.layers {
        for b in &mut l.bias {
            *b = r.random_range(-0.5..0.5);
        }
    }
    // The loss compares outputs with inputs, so the last width must match.
    *net.dims.last_mut().unwrap() = dims[0];
    let last = net.layers.last_mut().unwrap();
    if last.outputs != dims[0] {
        let inputs = last.inputs;
        *last = AutoencoderModel::init(&[inputs, dims[0]], &[last.activation], seed ^ 1).unwrap().layers.remove(0);
        for b in &mut last.bias {
            *b = r.random_range(-0.5..0.5);
        }
    }
    let x = random_matrix(r.random_range(2..=6), dims[0], &mut r);
    (net, x)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let worst = (0..50)
        .map(|s| {
            let (net, x) = random_net(s, false);
            gradient_check(&net, &x)
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn linear_networks_check_tightly() {
    let worst = (100..150)
        .map(|s| {
            let (net, x) = random_net(s, true);
            gradient_check(&net, &x)
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn zero_network_on_zero_input_has_no_gradient_gap() {
    let mut net = AutoencoderModel::init(&[3, 4, 3], &[Activation::Relu, Activation::Linear], 0).unwrap();
    for l in &mut net.layers {
        l.weights.iter_mut().for_each(|w| *w = 0.0);
    }
    assert_eq!(gradient_check(&net, &Matrix::zeros(4, 3)), 0.0);
}

#[test]
fn bottleneck_of_one_recovers_a_line() {
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let t = i as f64 / 100.0 - 1.0;
            vec![t, -0.7 * t]
        })
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let cfg = AeConfig {
        hidden: Some(4),
        bottleneck: Some(1),
        hidden_activation: Activation::Linear,
        epochs: 300,
        batch_size: 16,
        learning_rate: 0.05,
        seed: 3,
    };
    let ae = train_autoencoder(&x, &cfg).unwrap();
    assert!(ae.final_loss().unwrap() <= 1e-3, "{:?}", ae.final_loss());
}

#[test]
fn default_training_on_heart_is_monotone() {
    let (_, x) = encode_features(&common::heart()).unwrap();
    let ae = train_autoencoder(&x, &AeConfig::default()).unwrap();
    assert_eq!(ae.loss_history.len(), 101);
    assert!(ae.loss_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    assert!(ae.final_loss().unwrap() < ae.loss_history[0]);
}

#[test]
fn one_epoch_from_scratch_does_not_raise_loss() {
    let mut r = rng::stream(4, &[]);
    let x = random_matrix(20, 3, &mut r);
    let cfg = AeConfig {
        epochs: 1,
        ..Default::default()
    };
    let mut net = AutoencoderModel::for_config(3, &cfg).unwrap();
    let before = net.loss(&x);
    train(&mut net, &x, &cfg).unwrap();
    assert!(net.loss(&x).is_finite() && net.loss(&x) <= before);
}

/// Newton's method on the same penalized objective, solved independently.
fn newton_head(z: &Matrix, y: &[u8], l2: f64) -> (Vec<f64>, f64) {
    let d = z.cols + 1;
    let mut theta = vec![0.0; d];
    for _ in 0..50 {
        let mut g = vec![0.0; d];
        let mut h = vec![vec![0.0; d]; d];
        let n = z.rows as f64;
        for r in 0..z.rows {
            let mut x = z.row(r).to_vec();
            x.push(1.0);
            let s: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-s).exp());
            for i in 0..d {
                g[i] += (p - y[r] as f64) * x[i] / n;
                for j in 0..d {
                    h[i][j] += p * (1.0 - p) * x[i] * x[j] / n;
                }
            }
        }
        for i in 0..d - 1 {
            g[i] += l2 * theta[i];
            h[i][i] += l2;
        }
        // Gaussian elimination on h * step = g.
        let mut a: Vec<Vec<f64>> = h.iter().zip(&g).map(|(row, gi)| row.iter().copied().chain([*gi]).collect()).collect();
        for c in 0..d {
            let piv = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..d {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=d {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        for i in 0..d {
            theta[i] -= a[i][d] / a[i][i];
        }
    }
    let b = theta.pop().unwrap();
    (theta, b)
}

#[test]
fn head_matches_newton_oracle() {
    for seed in 0..5 {
        let mut r = rng::stream(seed, &[]);
        let z = random_matrix(20, 3, &mut r);
        let y: Vec<u8> = (0..20).map(|i| ((z.row(i)[0] + 0.8 * r.random::<f64>()) > 0.3) as u8).collect();
        if !y.contains(&0) || !y.contains(&1) {
            continue;
        }
        let head = fit_head(&z, &y, 0.05).unwrap();
        let (w, b) = newton_head(&z, &y, 0.05);
        let ours = head_objective(&z, &y, &head.weights, head.bias, 0.05).0;
        let oracle = head_objective(&z, &y, &w, b, 0.05).0;
        assert!((ours - oracle).abs() <= 1e-6, "{ours} vs {oracle}");
    }
}

#[test]
fn neutral_head_gives_zero_scores_and_clamps_apply() {
    let frame = common::heart();
    let cfg = PretrainConfig {
        autoencoder: AeConfig {
            epochs: 2,
            ..Default::default()
        },
        n_labels: Some(30),
        ..Default::default()
    };
    let rows: Vec<usize> = (0..frame.n_rows()).collect();
    let (mut pipe, labeled) = InitScorePipeline::fit_split(&frame, &rows, &cfg).unwrap();
    assert_eq!(labeled.len(), 30);
    let k = pipe.head.weights.len();
    pipe.head = LogisticHead {
        weights: vec![0.0; k],
        bias: 0.0,
        l2: 0.0,
        iterations: 0,
    };
    assert!(make_init_scores(&pipe, &frame).unwrap().values.iter().all(|&v| v == 0.0));
    pipe.head.bias = -40.0;
    let floor = (PROB_CLAMP / (1.0 - PROB_CLAMP)).ln();
    assert!(make_init_scores(&pipe, &frame).unwrap().values.iter().all(|&v| (v - floor).abs() < 1e-12));
}

#[test]
fn warm_start_with_no_rounds_reproduces_head_probabilities() {
    let frame = common::heart();
    let split = &stratified_splits(&frame, &SplitSpec::default()).unwrap()[0];
    let cfg = PretrainConfig {
        n_labels: Some(30),
        ..Default::default()
    };
    let (pipe, _) = InitScorePipeline::fit_split(&frame, &split.train, &cfg).unwrap();
    let (again, _) = InitScorePipeline::fit_split(&frame, &split.train, &cfg).unwrap();
    assert_eq!(pipe.to_json().unwrap(), again.to_json().unwrap());

    let train = frame.select_rows(&split.train);
    let scores = make_init_scores(&pipe, &train).unwrap();
    let hp = EbmHyperparams {
        max_rounds: 0,
        ..Default::default()
    };
    let model = Trainer::new(hp).init_scores(scores.clone()).fixed_intercept(0.0).fit(&train).unwrap();
    let p = model.predict_proba_with_offset(&train, &scores).unwrap();
    let head = pipe.predict_proba(&train).unwrap();
    for (a, b) in p.iter().zip(&head) {
        assert!((a - b.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)).abs() <= 1e-12);
    }
}

#[test]
fn standardization_and_one_hot() {
    use glassboost::dataio::{Cell, ColumnSchema, TabularFrame};
    let cols = vec![ColumnSchema::numeric("x"), ColumnSchema::categorical("c", vec!["a".into(), "b".into(), "c".into()])];
    let cells = vec![Cell::Num(1.0), Cell::Cat(0), Cell::Num(3.0), Cell::Cat(2), Cell::Num(1.0), Cell::Cat(1), Cell::Num(3.0), Cell::Cat(1)];
    let frame = TabularFrame::new(cols, cells, vec![0, 1, 0, 1]).unwrap();
    let (enc, m) = encode_features(&frame).unwrap();
    assert_eq!(enc.width(), 4);
    for r in 0..4 {
        let row = m.row(r);
        assert_eq!(row[0].abs(), 1.0);
        assert_eq!(row[1..].iter().sum::<f64>(), 1.0);
    }
}
