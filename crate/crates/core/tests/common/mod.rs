//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use cindex_core::measure::WeightedMeasure;
use cindex_core::ObservedTriple;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook Kaplan–Meier of the censoring time: distinct censoring times,
/// `d_j` censorings among `n_j` at risk (`T >= t_j`).
/// Returns `(t_j, G(t_j))` pairs.
pub fn textbook_km_censoring(data: &[ObservedTriple]) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = data.iter().filter(|o| !o.delta).map(|o| o.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut surv = 1.0;
    times
        .into_iter()
        .map(|t| {
            let at_risk = data.iter().filter(|o| o.t >= t).count() as f64;
            let d = data.iter().filter(|o| o.t == t && !o.delta).count() as f64;
            surv *= 1.0 - d / at_risk;
            (t, 1.0 - surv)
        })
        .collect()
}

/// Quartic kernel written out directly.
pub fn quartic(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        15.0 / 16.0 * (1.0 - u * u).powi(2)
    }
}

/// O(n^2) double loop for the least-squares criterion.
pub fn brute_force_criterion(
    m: &WeightedMeasure,
    beta: &[f64],
    h: f64,
    tau: f64,
    keep: impl Fn(&[f64]) -> bool,
    leave_one_out: bool,
) -> f64 {
    let index = |x: &[f64]| x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    let mut total = 0.0;
    for i in 0..m.ys.len() {
        if m.ys[i] > tau || !keep(&m.xs[i]) {
            continue;
        }
        let zi = index(&m.xs[i]);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..m.ys.len() {
            if m.ys[j] > tau || (leave_one_out && i == j) {
                continue;
            }
            let k = quartic((index(&m.xs[j]) - zi) / h);
            num += m.weights[j] * k * m.ys[j];
            den += m.weights[j] * k;
        }
        if den > 0.0 {
            total += m.weights[i] * (m.ys[i] - num / den).powi(2);
        }
    }
    total
}

/// Random censored dataset with continuous times.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, censor_prob: f64) -> Vec<ObservedTriple> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let t = x.iter().sum::<f64>() + rng.gen::<f64>() * 2.0 - 1.0;
            ObservedTriple::new(x, t, rng.gen::<f64>() >= censor_prob)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Covariates `U[0,1]^d`, response `m1(beta0'x) + N(0,1)`, censoring with
/// proportional hazard `rate * exp(theta'x)`.
pub fn cox_censored_dataset(n: usize, theta: &[f64], rate: f64, seed: u64) -> Vec<ObservedTriple> {
    use rand_distr::{Distribution, Exp1, StandardNormal};
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..theta.len()).map(|_| r.gen::<f64>()).collect();
            let idx: f64 = x.iter().zip(cindex_core::sim::BETA0).map(|(a, b)| a * b).sum();
            let eps: f64 = StandardNormal.sample(&mut r);
            let y = cindex_core::sim::Model::M1.mean(idx) + eps;
            let e: f64 = Exp1.sample(&mut r);
            let hazard = rate * x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>().exp();
            let c = e / hazard;
            ObservedTriple::new(x, y.min(c), y <= c)
        })
        .collect()
}
