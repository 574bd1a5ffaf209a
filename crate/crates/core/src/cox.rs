//! Cox partial likelihood for the censoring times.
//!
//! The roles of event and censoring are swapped: an observation with
//! `delta = false` is an "event" of the censoring process. The fitted
//! coefficient gives the censoring index `theta'x`.

use serde::{Deserialize, Serialize};

use crate::data::{self, ObservedTriple};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// The likelihood keeps increasing along a direction; some coefficient
    /// diverges (complete separation).
    MonotoneLikelihood,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringIndexFit {
    pub theta_hat: Vec<f64>,
    pub log_partial_likelihood: f64,
    /// Sup-norm of the score at `theta_hat`.
    pub score_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: FitStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50 }
    }
}

/// Observations sorted by decreasing time, grouped into blocks of equal time.
/// The order inside the data is content-defined so that permuting the input
/// gives bit-identical sums.
struct RiskSets<'a> {
    data: &'a [ObservedTriple],
    order: Vec<usize>,
    center: Vec<f64>,
}

struct Derivatives {
    loglik: f64,
    score: Vec<f64>,
    info: Vec<Vec<f64>>,
}

impl<'a> RiskSets<'a> {
    fn new(data: &'a [ObservedTriple], d: usize) -> Self {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| {
            let (oa, ob) = (&data[a], &data[b]);
            ob.t.total_cmp(&oa.t)
                .then_with(|| {
                    oa.x.iter()
                        .zip(&ob.x)
                        .map(|(u, v)| u.total_cmp(v))
                        .find(|c| c.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .then_with(|| oa.delta.cmp(&ob.delta))
        });
        let mut center = vec![0.0; d];
        for &i in &order {
            for (c, v) in center.iter_mut().zip(&data[i].x) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= data.len() as f64);
        Self { data, order, center }
    }

    fn centered(&self, i: usize) -> Vec<f64> {
        self.data[i].x.iter().zip(&self.center).map(|(v, c)| v - c).collect()
    }

    /// Breslow log partial likelihood with its gradient and negative Hessian.
    fn evaluate(&self, theta: &[f64], want_info: bool) -> Derivatives {
        let d = theta.len();
        let xs: Vec<Vec<f64>> = self.order.iter().map(|&i| self.centered(i)).collect();
        let eta: Vec<f64> = xs.iter().map(|x| data::dot(x, theta)).collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut s0 = 0.0;
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![vec![0.0; d]; d];
        let mut loglik = 0.0;
        let mut score = vec![0.0; d];
        let mut info = vec![vec![0.0; d]; d];

        let n = self.order.len();
        let mut start = 0;
        while start < n {
            let t = self.data[self.order[start]].t;
            let mut end = start;
            while end < n && self.data[self.order[end]].t == t {
                let r = (eta[end] - shift).exp();
                let x = &xs[end];
                s0 += r;
                for a in 0..d {
                    s1[a] += r * x[a];
                    if want_info {
                        for b in 0..=a {
                            s2[a][b] += r * x[a] * x[b];
                        }
                    }
                }
                end += 1;
            }
            for k in start..end {
                if self.data[self.order[k]].delta {
                    continue;
                }
                loglik += eta[k] - shift - s0.ln();
                for a in 0..d {
                    let mean_a = s1[a] / s0;
                    score[a] += xs[k][a] - mean_a;
                    if want_info {
                        for b in 0..=a {
                            info[a][b] += s2[a][b] / s0 - mean_a * s1[b] / s0;
                        }
                    }
                }
            }
            start = end;
        }
        for a in 0..d {
            for b in 0..a {
                info[b][a] = info[a][b];
            }
        }
        Derivatives { loglik, score, info }
    }
}

fn check_inputs(data: &[ObservedTriple], theta: &[f64]) -> Result<usize> {
    let d = data::validate(data)?;
    if theta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
    }
    Ok(d)
}

/// Gradient of the Breslow log partial likelihood (event indicator `1 - delta`).
pub fn cox_score(data: &[ObservedTriple], theta: &[f64]) -> Result<Vec<f64>> {
    let d = check_inputs(data, theta)?;
    Ok(RiskSets::new(data, d).evaluate(theta, false).score)
}

pub fn log_partial_likelihood(data: &[ObservedTriple], theta: &[f64]) -> Result<f64> {
    let d = check_inputs(data, theta)?;
    Ok(RiskSets::new(data, d).evaluate(theta, false).loglik)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton–Raphson with step halving, started at zero.
pub fn fit_cox(data: &[ObservedTriple], opts: CoxOptions) -> Result<CensoringIndexFit> {
    let d = data::validate(data)?;
    if data.iter().all(|o| o.delta) {
        return Err(Error::NoCensoredObservations);
    }
    let risk = RiskSets::new(data, d);
    let mut theta = vec![0.0; d];
    let mut cur = risk.evaluate(&theta, true);
    let ranges: Vec<f64> = (0..d)
        .map(|k| {
            let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.x[k]), hi.max(o.x[k])));
            hi - lo
        })
        .collect();
    // A relative risk beyond e^30 across the observed covariate range only
    // happens when the coefficient runs off to infinity.
    let diverging = |theta: &[f64]| theta.iter().zip(&ranges).any(|(t, r)| (t * r).abs() > 30.0);

    for iter in 0..opts.max_iter {
        let score_norm = sup_norm(&cur.score);
        let step = linalg::solve_spd(&cur.info, &cur.score);
        let step = match step {
            Some(s) => s,
            None if iter == 0 => return Err(Error::SingularHessian { iteration: iter }),
            None if diverging(&theta) || score_norm >= opts.tol => {
                return Ok(finish(theta, &cur, iter, false, FitStatus::MonotoneLikelihood));
            }
            None => return Ok(finish(theta, &cur, iter, true, FitStatus::Converged)),
        };
        if score_norm < opts.tol && sup_norm(&step) < 1e-4 {
            let status = if diverging(&theta) { FitStatus::MonotoneLikelihood } else { FitStatus::Converged };
            return Ok(finish(theta, &cur, iter, status == FitStatus::Converged, status));
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
            let next = risk.evaluate(&cand, true);
            if next.loglik.is_finite() && next.loglik >= cur.loglik - 1e-12 * cur.loglik.abs() {
                accepted = Some((cand, next));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, next)) = accepted else {
            let status = if score_norm < opts.tol { FitStatus::Converged } else { FitStatus::MaxIterations };
            return Ok(finish(theta, &cur, iter, status == FitStatus::Converged, status));
        };
        theta = cand;
        cur = next;
        if diverging(&theta) {
            return Ok(finish(theta, &cur, iter + 1, false, FitStatus::MonotoneLikelihood));
        }
    }

    let score_norm = sup_norm(&cur.score);
    // Vanishing score with Newton steps that refuse to shrink: the maximum
    // is at infinity.
    let status = if score_norm < opts.tol {
        FitStatus::MonotoneLikelihood
    } else {
        FitStatus::MaxIterations
    };
    Ok(finish(theta, &cur, opts.max_iter, false, status))
}

fn finish(theta: Vec<f64>, cur: &Derivatives, iterations: usize, converged: bool, status: FitStatus) -> CensoringIndexFit {
    CensoringIndexFit {
        theta_hat: theta,
        log_partial_likelihood: cur.loglik,
        score_norm: sup_norm(&cur.score),
        iterations,
        converged,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(x: f64, t: f64, censored: bool) -> ObservedTriple {
        ObservedTriple::new(vec![x], t, !censored)
    }

    fn four_points() -> Vec<ObservedTriple> {
        vec![obs(0.0, 1.0, true), obs(1.0, 2.0, true), obs(0.0, 3.0, false), obs(1.0, 4.0, false)]
    }

    /// Explicit partial likelihood of the four-point dataset:
    /// events at t=1 (x=0, risk set {0,1,0,1}) and t=2 (x=1, risk set {1,0,1}).
    fn four_point_loglik(theta: f64) -> f64 {
        let e = theta.exp();
        -(2.0 + 2.0 * e).ln() + theta - (1.0 + 2.0 * e).ln()
    }

    fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        while (b - a).abs() > 1e-12 {
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        0.5 * (a + b)
    }

    #[test]
    fn four_point_fit_matches_golden_section() {
        let oracle = golden_section_max(four_point_loglik, -5.0, 5.0);
        assert!((oracle + 0.5 * 2f64.ln()).abs() < 1e-8);
        let fit = fit_cox(&four_points(), CoxOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.theta_hat[0] - oracle).abs() < 1e-6, "{} vs {oracle}", fit.theta_hat[0]);
        assert!(fit.score_norm < 1e-8);
        assert!((fit.log_partial_likelihood - four_point_loglik(fit.theta_hat[0])).abs() < 1e-12);
    }

    #[test]
    fn four_point_score_at_zero() {
        // d/dθ at 0: -1/2 + 1 - 2/3
        let s = cox_score(&four_points(), &[0.0]).unwrap();
        assert!((s[0] + 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn single_censored_observation_has_zero_score() {
        let s = cox_score(&[ObservedTriple::new(vec![0.3, -1.0], 2.0, false)], &[0.4, 0.1]).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn separated_pair_is_flagged_monotone() {
        let data = vec![obs(0.0, 1.0, true), obs(1.0, 2.0, true)];
        let fit = fit_cox(&data, CoxOptions::default()).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.status, FitStatus::MonotoneLikelihood);
        assert!(fit.theta_hat[0] < -5.0);
    }

    #[test]
    fn all_uncensored_is_rejected() {
        let data = vec![obs(0.0, 1.0, false), obs(1.0, 2.0, false)];
        assert_eq!(fit_cox(&data, CoxOptions::default()), Err(Error::NoCensoredObservations));
    }

    #[test]
    fn collinear_covariates_give_singular_hessian() {
        let data: Vec<ObservedTriple> = (0..6)
            .map(|i| ObservedTriple::new(vec![i as f64, 2.0 * i as f64], i as f64 + 0.3 * (i % 3) as f64, i % 2 == 0))
            .collect();
        assert!(matches!(fit_cox(&data, CoxOptions::default()), Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn translation_and_permutation_invariance() {
        let mut data = four_points();
        data.push(obs(0.5, 2.5, true));
        data.push(obs(0.2, 0.5, false));
        data.push(obs(0.9, 3.5, true));
        let base = fit_cox(&data, CoxOptions::default()).unwrap();
        let shifted: Vec<_> = data.iter().map(|o| obs(o.x[0] + 3.0, o.t, !o.delta)).collect();
        let fit_shift = fit_cox(&shifted, CoxOptions::default()).unwrap();
        assert!((base.theta_hat[0] - fit_shift.theta_hat[0]).abs() < 1e-9);
        let mut perm = data.clone();
        perm.reverse();
        perm.swap(0, 3);
        let fit_perm = fit_cox(&perm, CoxOptions::default()).unwrap();
        assert!((base.theta_hat[0] - fit_perm.theta_hat[0]).abs() < 1e-12);
    }
}
