//! Tree-structured Parzen estimator.
//!
//! Each parameter is modelled independently. Completed trials are split at
//! a quantile of the objective into a good and a bad set; each set becomes a
//! mixture of truncated Gaussians (one per observation plus a broad prior
//! component). Candidates are drawn from the good mixture and the one with
//! the largest good/bad density ratio wins.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{ParamKind, ParamSpec, Params, SearchSpace};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    /// Trials drawn at random before the model kicks in.
    pub n_startup: usize,
    pub n_candidates: usize,
    /// Upper bound on the good fraction; the fraction is
    /// `min(gamma_cap, 25 / sqrt(n))`.
    pub gamma_cap: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            n_startup: 10,
            n_candidates: 24,
            gamma_cap: 0.25,
        }
    }
}

impl TpeConfig {
    /// Size of the good set among `n` completed trials.
    pub fn n_good(&self, n: usize) -> usize {
        let frac = self.gamma_cap.min(25.0 / (n as f64).sqrt());
        ((frac * n as f64).ceil() as usize).clamp(1, n.max(1))
    }
}

/// Draws one value uniformly in the parameter's natural measure.
pub fn sample_prior(p: &ParamSpec, rng: &mut Rng) -> f64 {
    match p.kind {
        ParamKind::Uniform => rng.random_range(p.low..=p.high),
        ParamKind::LogUniform => rng.random_range(p.low.ln()..=p.high.ln()).exp(),
        ParamKind::Integer => rng.random_range(p.low as i64..=p.high as i64) as f64,
    }
}

/// Suggests the parameters of trial `trial` given `(params, objective)`
/// history. Deterministic in `(space, history, seed, trial)`.
pub fn suggest(space: &SearchSpace, history: &[(&Params, f64)], seed: u64, trial: usize, cfg: &TpeConfig) -> Result<Params> {
    if space.params.is_empty() {
        return Err(Error::arg("search space is empty"));
    }
    let mut rng = rng::stream(seed, &[rng::TAG_TPE, trial as u64]);
    let mut out = Params::new();
    if history.len() < cfg.n_startup {
        for p in &space.params {
            out.insert(p.name.clone(), sample_prior(p, &mut rng));
        }
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| history[a].1.total_cmp(&history[b].1).then(a.cmp(&b)));
    let n_good = cfg.n_good(history.len());
    for p in &space.params {
        let values = |idx: &[usize]| -> Vec<f64> {
            idx.iter()
                .filter_map(|&i| history[i].0.get(&p.name).copied())
                .map(|v| to_internal(p, v))
                .collect()
        };
        let good = Parzen::new(p, &values(&order[..n_good]));
        let bad = Parzen::new(p, &values(&order[n_good..]));
        let mut best = (f64::NEG_INFINITY, 0.0);
        for _ in 0..cfg.n_candidates {
            let x = good.sample(&mut rng);
            let score = good.log_pdf(x) - bad.log_pdf(x);
            if score > best.0 {
                best = (score, x);
            }
        }
        out.insert(p.name.clone(), from_internal(p, best.1));
    }
    Ok(out)
}

fn to_internal(p: &ParamSpec, v: f64) -> f64 {
    match p.kind {
        ParamKind::LogUniform => v.ln(),
        _ => v,
    }
}

fn from_internal(p: &ParamSpec, x: f64) -> f64 {
    match p.kind {
        ParamKind::LogUniform => x.exp().clamp(p.low, p.high),
        ParamKind::Integer => x.round().clamp(p.low, p.high),
        ParamKind::Uniform => x.clamp(p.low, p.high),
    }
}

/// Truncated-Gaussian mixture over one parameter's internal range.
struct Parzen {
    integer: bool,
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
}

impl Parzen {
    fn new(p: &ParamSpec, obs: &[f64]) -> Self {
        let integer = p.kind == ParamKind::Integer;
        // Integers live on [low - 1/2, high + 1/2] so each value owns a unit cell.
        let (lo, hi) = match p.kind {
            ParamKind::LogUniform => (p.low.ln(), p.high.ln()),
            ParamKind::Integer => (p.low - 0.5, p.high + 0.5),
            ParamKind::Uniform => (p.low, p.high),
        };
        let range = hi - lo;
        let n = obs.len() as f64;
        let sigma = if obs.is_empty() {
            range
        } else {
            // Scott's rule on the observations, floored so a tight cluster
            // still explores, and never wider than the range.
            let mean = obs.iter().sum::<f64>() / n;
            let sd = (obs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            let scott = 1.06 * sd * (n + 1.0).powf(-0.2);
            let floor = range / (n + 1.0).min(100.0);
            scott.max(floor).min(range)
        };
        let mut mus: Vec<f64> = obs.to_vec();
        let mut sigmas = vec![sigma; obs.len()];
        // Broad prior component centred on the range.
        mus.push(lo + range / 2.0);
        sigmas.push(range);
        Parzen {
            integer,
            lo,
            hi,
            mus,
            sigmas,
        }
    }

    fn normal(mu: f64, sigma: f64) -> Normal {
        Normal::new(mu, sigma).expect("positive bandwidth")
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        let k = rng.random_range(0..self.mus.len());
        let d = Self::normal(self.mus[k], self.sigmas[k]);
        let (a, b) = (d.cdf(self.lo), d.cdf(self.hi));
        let u = if b > a { rng.random_range(a..b) } else { a };
        let x = d.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16)).clamp(self.lo, self.hi);
        if self.integer {
            x.round().clamp(self.lo + 0.5, self.hi - 0.5)
        } else {
            x
        }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let w = 1.0 / self.mus.len() as f64;
        let mut total = 0.0;
        for (&mu, &sigma) in self.mus.iter().zip(&self.sigmas) {
            let d = Self::normal(mu, sigma);
            let mass = d.cdf(self.hi) - d.cdf(self.lo);
            if mass <= 0.0 {
                continue;
            }
            let dens = if self.integer {
                d.cdf(x + 0.5) - d.cdf(x - 0.5)
            } else {
                d.pdf(x)
            };
            total += w * dens / mass;
        }
        total.max(1e-300).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn good_set_size() {
        let c = TpeConfig::default();
        assert_eq!(c.n_good(1), 1);
        assert_eq!(c.n_good(12), 3);
        assert_eq!(c.n_good(100), 25);
        // Past n = 10,000 the fraction is 25/sqrt(n): 0.125 of 40,000.
        assert_eq!(c.n_good(40_000), 5000);
    }

    #[test]
    fn integer_parzen_mass_sums_to_one() {
        let p = ParamSpec::integer("k", 2.0, 9.0);
        let pz = Parzen::new(&p, &[3.0, 4.0, 8.0]);
        let total: f64 = (2..=9).map(|k| pz.log_pdf(k as f64).exp()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }
}
