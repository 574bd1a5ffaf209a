//! Censored observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One right-censored observation: covariates `x`, follow-up time
/// `t = min(Y, C)` and the event indicator `delta = 1{Y <= C}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedTriple {
    pub x: Vec<f64>,
    pub t: f64,
    pub delta: bool,
}

impl ObservedTriple {
    pub fn new(x: Vec<f64>, t: f64, delta: bool) -> Self {
        Self { x, t, delta }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Checks that `data` is non-empty, has a common covariate dimension
/// `d >= 1` and finite values. Returns `d`.
pub fn validate(data: &[ObservedTriple]) -> Result<usize> {
    let first = data.first().ok_or(Error::EmptyData)?;
    let d = first.dim();
    if d == 0 {
        return Err(Error::InvalidArgument("covariate dimension must be at least 1".into()));
    }
    for (i, obs) in data.iter().enumerate() {
        if obs.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: obs.dim() });
        }
        if !obs.t.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("observation {i} has a non-finite value")));
        }
    }
    Ok(d)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Linear-interpolation sample quantile (type 7). `values` need not be sorted.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn censoring_fraction(data: &[ObservedTriple]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().filter(|o| !o.delta).count() as f64 / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_ragged_rows() {
        let data = vec![
            ObservedTriple::new(vec![1.0, 2.0], 1.0, true),
            ObservedTriple::new(vec![1.0], 1.0, true),
        ];
        assert_eq!(validate(&data), Err(Error::DimensionMismatch { expected: 2, got: 1 }));
        assert_eq!(validate(&[]), Err(Error::EmptyData));
    }

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.9) - 4.6).abs() < 1e-12);
    }
}
