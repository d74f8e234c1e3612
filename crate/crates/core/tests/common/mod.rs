#![allow(dead_code)]

use std::path::PathBuf;

use glassboost::dataio::{load_csv, LoadOptions, TabularFrame};
use glassboost::rng;
use rand::Rng as _;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub const HEART_TARGET: &str = "diameter narrowing";

pub fn heart() -> TabularFrame {
    load_csv(data_path("heart.csv"), HEART_TARGET, Some("gender"), &LoadOptions::default()).expect("heart.csv")
}

/// Two binary features whose XOR is the label, plus a noise feature.
pub fn xor_frame(n: usize, seed: u64) -> TabularFrame {
    let mut r = rng::stream(seed, &[901]);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a = r.random_range(0..2) as f64;
        let b = r.random_range(0..2) as f64;
        rows.push(vec![a, b, r.random::<f64>()]);
        y.push((a != b) as u8);
    }
    TabularFrame::from_numeric_rows(&["x1", "x2", "noise"], &rows, y).unwrap()
}

/// Logistic data: label drawn from sigmoid(2*x0 - x1 + 0.5*x2^2).
pub fn logistic_frame(n: usize, seed: u64) -> TabularFrame {
    let mut r = rng::stream(seed, &[902]);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let z = 2.0 * x[0] - x[1] + 0.5 * x[2] * x[2] - 0.5;
        let p = 1.0 / (1.0 + (-z).exp());
        y.push((r.random::<f64>() < p) as u8);
        rows.push(x);
    }
    TabularFrame::from_numeric_rows(&["a", "b", "c"], &rows, y).unwrap()
}

/// Counts concordant pairs directly; ties count one half.
pub fn pairwise_auc(y: &[u8], p: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for i in 0..y.len() {
        if y[i] != 1 {
            continue;
        }
        for j in 0..y.len() {
            if y[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if p[i] > p[j] {
                num += 1.0;
            } else if p[i] == p[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

pub fn log_loss(y: &[u8], p: &[f64]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(p)
        .map(|(&t, &q)| if t == 1 { -q.ln() } else { -(1.0 - q).ln() })
        .sum::<f64>()
        / n
}

/// Exact two-sided Wilcoxon p by enumerating every sign assignment.
pub fn wilcoxon_enumeration(d: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    // Midranks of |d| by counting.
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|&a| {
            let less = abs.iter().filter(|&&b| b < a).count() as f64;
            let eq = abs.iter().filter(|&&b| b == a).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s <= w + 1e-9 {
            hits += 1;
        }
    }
    (w, (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0))
}
