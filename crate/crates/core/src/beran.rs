//! Conditional censoring distribution given the censoring index.
//!
//! `G(t | z) = 1 - prod_{T_i <= t} (1 - w_i(z) / sum_{T_j >= T_i} w_j(z))^{1 - delta_i}`
//! with `w_i(z)` proportional to `K((theta'X_i - z) / a_n)`. With equal
//! weights this is the Kaplan–Meier estimator of the censoring distribution.

use serde::{Deserialize, Serialize};

use crate::data::{self, ObservedTriple};
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Right-continuous step function `t -> G(t | z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeranCurve {
    pub jump_times: Vec<f64>,
    pub jump_values: Vec<f64>,
    pub z: f64,
    pub bandwidth: f64,
}

impl BeranCurve {
    /// `G(t | z)`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 { 0.0 } else { self.jump_values[k - 1] }
    }

    /// Left limit `G(t- | z)`: a jump located exactly at `t` is excluded.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s < t);
        if k == 0 { 0.0 } else { self.jump_values[k - 1] }
    }
}

/// The data sorted once by time, shared by every curve fitted on it.
///
/// At equal times uncensored observations come first; with the weak
/// inequality in the risk set this keeps an event at `t` at risk for a
/// censoring at `t`.
#[derive(Debug, Clone)]
pub struct BeranFitter {
    times: Vec<f64>,
    censored: Vec<bool>,
    index: Vec<f64>,
    /// Position (in sorted order) of the first observation with time `>= times[k]`.
    tie_start: Vec<usize>,
    kernel: Kernel,
    bandwidth: f64,
}

impl BeranFitter {
    pub fn new(data: &[ObservedTriple], theta: &[f64], bandwidth: f64, kernel: Kernel) -> Result<Self> {
        let d = data::validate(data)?;
        if theta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
        }
        let index: Vec<f64> = data.iter().map(|o| data::dot(&o.x, theta)).collect();
        Self::from_index(data, &index, bandwidth, kernel)
    }

    /// Uses precomputed index values, one per observation.
    pub fn from_index(data: &[ObservedTriple], index: &[f64], bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !kernel.has_smooth_second_derivative() {
            return Err(Error::InvalidArgument(format!(
                "{} kernel is not admissible for the censoring estimator",
                kernel.name()
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| {
            data[a].t.total_cmp(&data[b].t).then_with(|| data[b].delta.cmp(&data[a].delta))
        });
        let times: Vec<f64> = order.iter().map(|&i| data[i].t).collect();
        let mut tie_start = vec![0; times.len()];
        for k in 1..times.len() {
            tie_start[k] = if times[k] == times[k - 1] { tie_start[k - 1] } else { k };
        }
        Ok(Self {
            censored: order.iter().map(|&i| !data[i].delta).collect(),
            index: order.iter().map(|&i| index[i]).collect(),
            times,
            tie_start,
            kernel,
            bandwidth,
        })
    }

    fn weights(&self, z: f64) -> Result<Vec<f64>> {
        let raw: Vec<f64> = self.index.iter().map(|&g| self.kernel.eval((g - z) / self.bandwidth)).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyWindow { z, bandwidth: self.bandwidth });
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }

    pub fn fit(&self, z: f64) -> Result<BeranCurve> {
        let w = self.weights(z)?;
        Ok(product_limit(&self.times, &self.censored, &w, &self.tie_start, z, self.bandwidth))
    }
}

/// Shared product-limit sweep over time-sorted observations with weights `w`.
fn product_limit(
    times: &[f64],
    censored: &[bool],
    w: &[f64],
    tie_start: &[usize],
    z: f64,
    bandwidth: f64,
) -> BeranCurve {
    let n = times.len();
    // at_risk[k] = sum of w over positions >= k
    let mut at_risk = vec![0.0; n + 1];
    for k in (0..n).rev() {
        at_risk[k] = at_risk[k + 1] + w[k];
    }
    let mut survival = 1.0;
    let mut jump_times = Vec::new();
    let mut jump_values = Vec::new();
    for k in 0..n {
        if !censored[k] || w[k] <= 0.0 {
            continue;
        }
        let risk = at_risk[tie_start[k]];
        survival *= 1.0 - w[k] / risk;
        let value = (1.0 - survival).clamp(0.0, 1.0);
        if jump_times.last() == Some(&times[k]) {
            *jump_values.last_mut().unwrap() = value;
        } else {
            jump_times.push(times[k]);
            jump_values.push(value);
        }
    }
    BeranCurve { jump_times, jump_values, z, bandwidth }
}

pub fn beran_fit(data: &[ObservedTriple], theta: &[f64], z: f64, a_n: f64, kernel: Kernel) -> Result<BeranCurve> {
    BeranFitter::new(data, theta, a_n, kernel)?.fit(z)
}

/// Unconditional Kaplan–Meier estimator of the censoring distribution
/// (event indicator `1 - delta`), as a curve with `z = NaN`.
pub fn kaplan_meier_censoring(data: &[ObservedTriple]) -> BeranCurve {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].t.total_cmp(&data[b].t));
    let n = data.len();
    let mut survival = 1.0;
    let mut jump_times = Vec::new();
    let mut jump_values = Vec::new();
    let mut k = 0;
    while k < n {
        let t = data[order[k]].t;
        let at_risk = n - k;
        let mut censored = 0usize;
        while k < n && data[order[k]].t == t {
            censored += usize::from(!data[order[k]].delta);
            k += 1;
        }
        if censored > 0 {
            survival *= 1.0 - censored as f64 / at_risk as f64;
            jump_times.push(t);
            jump_values.push((1.0 - survival).clamp(0.0, 1.0));
        }
    }
    BeranCurve { jump_times, jump_values, z: f64::NAN, bandwidth: f64::INFINITY }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_points() -> Vec<ObservedTriple> {
        vec![
            ObservedTriple::new(vec![0.0], 1.0, false),
            ObservedTriple::new(vec![0.0], 2.0, true),
            ObservedTriple::new(vec![0.0], 3.0, false),
        ]
    }

    #[test]
    fn uniform_three_point_curve() {
        let c = beran_fit(&three_points(), &[1.0], 0.0, 1.0, Kernel::Quartic).unwrap();
        assert_eq!(c.jump_times, vec![1.0, 3.0]);
        assert!((c.eval(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.eval(2.9) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.eval(3.0), 1.0);
        assert_eq!(c.eval(0.5), 0.0);
        assert_eq!(c.eval_left(1.0), 0.0);
        assert!((c.eval_left(3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.eval_left(2.5) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_censoring_gives_zero_curve() {
        let data: Vec<_> = (0..5).map(|i| ObservedTriple::new(vec![i as f64 * 0.1], i as f64, true)).collect();
        let c = beran_fit(&data, &[1.0], 0.2, 1.0, Kernel::Quartic).unwrap();
        assert!(c.jump_times.is_empty());
        assert_eq!(c.eval(100.0), 0.0);
    }

    #[test]
    fn empty_window_and_bad_kernel() {
        let err = beran_fit(&three_points(), &[1.0], 5.0, 1.0, Kernel::Quartic).unwrap_err();
        assert!(matches!(err, Error::EmptyWindow { .. }));
        assert!(matches!(
            beran_fit(&three_points(), &[1.0], 0.0, 1.0, Kernel::Epanechnikov),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(beran_fit(&three_points(), &[1.0], 0.0, 0.0, Kernel::Quartic), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ties_put_events_in_the_risk_set() {
        // censoring and event tied at t=1: risk set at the censoring is both points
        let data = vec![
            ObservedTriple::new(vec![0.0], 1.0, false),
            ObservedTriple::new(vec![0.0], 1.0, true),
        ];
        let c = beran_fit(&data, &[1.0], 0.0, 1.0, Kernel::Quartic).unwrap();
        assert!((c.eval(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(kaplan_meier_censoring(&data).eval(1.0), 0.5);
    }

    /// Direct O(n^2) evaluation of the defining product, independent of the
    /// sorted sweep.
    fn direct_product(data: &[ObservedTriple], theta: &[f64], z: f64, a_n: f64, t: f64) -> f64 {
        let raw: Vec<f64> = data.iter().map(|o| Kernel::Quartic.eval((data::dot(&o.x, theta) - z) / a_n)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let mut prod = 1.0;
        for (i, oi) in data.iter().enumerate() {
            if oi.t > t || oi.delta || w[i] == 0.0 {
                continue;
            }
            let denom: f64 = data.iter().zip(&w).filter(|(oj, _)| oj.t >= oi.t).map(|(_, wj)| wj).sum();
            prod *= 1.0 - w[i] / denom;
        }
        1.0 - prod
    }

    proptest! {
        #[test]
        fn matches_direct_product(
            rows in proptest::collection::vec((0.0f64..1.0, 0.01f64..10.0, proptest::bool::ANY), 2..50),
            z in 0.2f64..0.8,
        ) {
            let data: Vec<_> = rows.iter().map(|&(x, t, d)| ObservedTriple::new(vec![x], t, d)).collect();
            let curve = beran_fit(&data, &[1.0], z, 0.4, Kernel::Quartic);
            let Ok(curve) = curve else { return Ok(()); };
            for o in &data {
                for t in [o.t, o.t - 1e-9] {
                    let direct = direct_product(&data, &[1.0], z, 0.4, t);
                    prop_assert!((curve.eval(t) - direct).abs() < 1e-12, "t={} {} vs {}", t, curve.eval(t), direct);
                }
            }
            for w in curve.jump_values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            prop_assert!(curve.jump_values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn zero_weight_observations_are_irrelevant() {
        let data: Vec<_> = (0..30)
            .map(|i| ObservedTriple::new(vec![(i as f64 * 0.37).fract()], ((i * 13) % 31) as f64 + 0.1, i % 3 != 0))
            .collect();
        let z = 0.5;
        let full = beran_fit(&data, &[1.0], z, 0.2, Kernel::Quartic).unwrap();
        let local: Vec<_> = data.iter().filter(|o| Kernel::Quartic.eval((o.x[0] - z) / 0.2) > 0.0).cloned().collect();
        let reduced = beran_fit(&local, &[1.0], z, 0.2, Kernel::Quartic).unwrap();
        assert_eq!(full, reduced);
    }
}
