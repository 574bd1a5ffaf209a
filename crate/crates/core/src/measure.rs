//! Inverse-probability-of-censoring weighted estimate of the joint
//! distribution of `(X, Y)`.
//!
//! Each uncensored observation receives weight
//! `1 / (n (1 - G(T_i- | z_i)))`, censored observations receive nothing and
//! are not stored.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beran::{kaplan_meier_censoring, BeranFitter};
use crate::data::{self, ObservedTriple};
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Floor applied to `1 - G(T-)` before inversion.
pub const SURVIVAL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMeasure {
    /// Covariates of the uncensored observations.
    pub xs: Vec<Vec<f64>>,
    /// Responses (follow-up times) of the uncensored observations.
    pub ys: Vec<f64>,
    pub weights: Vec<f64>,
    /// Number of observations the measure was built from, censored included.
    pub n_obs: usize,
    pub guard_activations: usize,
    pub total_mass: f64,
}

impl WeightedMeasure {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.xs.first().map(Vec::len)
    }

    /// `sum_i w_i 1{y_i <= y, x_i <= x}` with componentwise comparison.
    pub fn eval_cdf(&self, x: &[f64], y: f64) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
        }
        Ok(self
            .xs
            .iter()
            .zip(&self.ys)
            .zip(&self.weights)
            .filter(|((xi, &yi), _)| yi <= y && xi.iter().zip(x).all(|(a, b)| a <= b))
            .map(|(_, w)| w)
            .sum())
    }

    pub fn integrate(&self, phi: impl Fn(&[f64], f64) -> f64) -> f64 {
        self.xs.iter().zip(&self.ys).zip(&self.weights).map(|((x, &y), w)| w * phi(x, y)).sum()
    }

    /// Copy rescaled to unit mass. For diagnostics only; the estimator
    /// itself is not self-normalizing.
    pub fn normalized(&self) -> WeightedMeasure {
        let mut out = self.clone();
        if self.total_mass > 0.0 {
            out.weights.iter_mut().for_each(|w| *w /= self.total_mass);
            out.total_mass = out.weights.iter().sum();
        }
        out
    }

    fn from_survival(data: &[ObservedTriple], survival_left: impl Fn(usize) -> f64) -> Self {
        let n = data.len() as f64;
        let mut guard = 0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut weights = Vec::new();
        for (i, o) in data.iter().enumerate() {
            if !o.delta {
                continue;
            }
            let mut s = survival_left(i);
            if s < SURVIVAL_FLOOR {
                s = SURVIVAL_FLOOR;
                guard += 1;
            }
            xs.push(o.x.clone());
            ys.push(o.t);
            weights.push(1.0 / (n * s));
        }
        if guard > 0 {
            log::warn!("{guard} censoring-survival denominators floored at {SURVIVAL_FLOOR}");
        }
        let total_mass = weights.iter().sum();
        Self { xs, ys, weights, n_obs: data.len(), guard_activations: guard, total_mass }
    }
}

/// Weights from the conditional censoring estimator evaluated at each
/// observation's own index value `theta'X_i`.
pub fn build_weighted_measure(
    data: &[ObservedTriple],
    theta: &[f64],
    a_n: f64,
    kernel: Kernel,
) -> Result<WeightedMeasure> {
    let d = data::validate(data)?;
    if theta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
    }
    let index: Vec<f64> = data.iter().map(|o| data::dot(&o.x, theta)).collect();
    let fitter = BeranFitter::from_index(data, &index, a_n, kernel)?;

    // one curve per distinct index value among uncensored points
    let mut zs: Vec<f64> = data.iter().zip(&index).filter(|(o, _)| o.delta).map(|(_, &z)| z).collect();
    zs.sort_by(f64::total_cmp);
    zs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let curves = zs.par_iter().map(|&z| fitter.fit(z)).collect::<Result<Vec<_>>>()?;
    let curve_for = |z: f64| {
        let k = zs.partition_point(|&c| c < z - 1e-12);
        &curves[k.min(curves.len() - 1)]
    };
    Ok(WeightedMeasure::from_survival(data, |i| 1.0 - curve_for(index[i]).eval_left(data[i].t)))
}

/// Comparator with the unconditional Kaplan–Meier estimator of the
/// censoring distribution in place of the conditional one.
pub fn build_km_measure(data: &[ObservedTriple]) -> Result<WeightedMeasure> {
    data::validate(data)?;
    let km = kaplan_meier_censoring(data);
    Ok(WeightedMeasure::from_survival(data, |i| 1.0 - km.eval_left(data[i].t)))
}
