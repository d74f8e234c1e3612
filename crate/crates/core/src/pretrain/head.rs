use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use crate::ebm::sigmoid;
use crate::error::{Error, Result};

pub const HEAD_MAX_ITER: usize = 10_000;
pub const HEAD_GRAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticHead {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    pub iterations: usize,
}

impl LogisticHead {
    pub fn raw(&self, z: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn predict_proba(&self, z: &Matrix) -> Vec<f64> {
        (0..z.rows).map(|r| sigmoid(self.raw(z.row(r)))).collect()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2` (the bias is not penalized), and
/// its gradient as `(dw, db)`.
pub fn head_objective(z: &Matrix, y: &[u8], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = z.rows as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for r in 0..z.rows {
        let x = z.row(r);
        let s = b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let t = y[r] as f64;
        let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
        loss += softplus - t * s;
        let p = if s >= 0.0 {
            1.0 / (1.0 + (-s).exp())
        } else {
            let e = s.exp();
            e / (1.0 + e)
        };
        let d = p - t;
        for (g, v) in gw.iter_mut().zip(x) {
            *g += d * v;
        }
        gb += d;
    }
    let reg: f64 = w.iter().map(|a| a * a).sum::<f64>();
    for (g, a) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * a;
    }
    (loss / n + 0.5 * l2 * reg, gw, gb / n)
}

/// L2-regularized logistic regression by full-batch gradient descent with
/// a fixed step `1 / L`, `L` an upper bound on the loss curvature. Stops at
/// gradient norm `1e-6` or after 10,000 iterations.
pub fn fit_head(z: &Matrix, y: &[u8], l2: f64) -> Result<LogisticHead> {
    if z.rows != y.len() {
        return Err(Error::data("embedding rows and labels differ"));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::arg("head l2 must be non-negative"));
    }
    let pos = y.iter().filter(|&&t| t == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::data("the labeled subset needs both classes"));
    }
    // Hessian <= (1/4) E[x x^T] + l2, whose top eigenvalue is <= (1/4) E|x|^2 + l2.
    let mean_sq = (0..z.rows)
        .map(|r| 1.0 + z.row(r).iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / z.rows as f64;
    let lr = 1.0 / (0.25 * mean_sq + l2);
    let mut w = vec![0.0; z.cols];
    let mut b = 0.0;
    let mut iterations = HEAD_MAX_ITER;
    for it in 0..HEAD_MAX_ITER {
        let (_, gw, gb) = head_objective(z, y, &w, b, l2);
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if norm <= HEAD_GRAD_TOL {
            iterations = it;
            break;
        }
        for (a, g) in w.iter_mut().zip(&gw) {
            *a -= lr * g;
        }
        b -= lr * gb;
    }
    Ok(LogisticHead {
        weights: w,
        bias: b,
        l2,
        iterations,
    })
}
