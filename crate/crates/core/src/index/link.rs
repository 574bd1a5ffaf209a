//! Weighted Nadaraya–Watson estimate of the link `f(t; beta)` and its
//! gradient in the free index coordinates.

use super::IndexParams;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::measure::WeightedMeasure;

fn check_dim(m: &WeightedMeasure, beta: &IndexParams) -> Result<()> {
    match m.dim() {
        Some(d) if d != beta.dim() => Err(Error::DimensionMismatch { expected: d, got: beta.dim() }),
        _ => Ok(()),
    }
}

/// `f(t; beta) = sum w_i K((beta'x_i - t)/h) y_i 1{y_i<=tau} / sum w_i K(...) 1{y_i<=tau}`.
pub fn link_estimate(m: &WeightedMeasure, beta: &IndexParams, t: f64, h: f64, tau: f64, kernel: Kernel) -> Result<f64> {
    check_dim(m, beta)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((x, &y), &w) in m.xs.iter().zip(&m.ys).zip(&m.weights) {
        if y > tau {
            continue;
        }
        let k = w * kernel.eval((beta.index(x) - t) / h);
        num += k * y;
        den += k;
    }
    if !(den > 0.0) {
        return Err(Error::EmptyNeighborhood { t, bandwidth: h });
    }
    Ok(num / den)
}

/// Gradient of `beta -> f(beta'x_query; beta)` with respect to the free
/// coordinates, by the quotient rule on the kernel sums.
pub fn link_gradient(
    m: &WeightedMeasure,
    beta: &IndexParams,
    x_query: &[f64],
    h: f64,
    tau: f64,
    kernel: Kernel,
) -> Result<Vec<f64>> {
    check_dim(m, beta)?;
    if x_query.len() != beta.dim() {
        return Err(Error::DimensionMismatch { expected: beta.dim(), got: x_query.len() });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let t = beta.index(x_query);
    let p = beta.free.len();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut d_num = vec![0.0; p];
    let mut d_den = vec![0.0; p];
    for ((x, &y), &w) in m.xs.iter().zip(&m.ys).zip(&m.weights) {
        if y > tau {
            continue;
        }
        let u = (beta.index(x) - t) / h;
        let k = w * kernel.eval(u);
        num += k * y;
        den += k;
        let dk = w * kernel.d1(u) / h;
        if dk != 0.0 {
            for j in 0..p {
                let dx = x[j + 1] - x_query[j + 1];
                d_num[j] += dk * dx * y;
                d_den[j] += dk * dx;
            }
        }
    }
    if !(den > 0.0) {
        return Err(Error::EmptyNeighborhood { t, bandwidth: h });
    }
    Ok(d_num.iter().zip(&d_den).map(|(dn, dd)| (dn * den - num * dd) / (den * den)).collect())
}

/// Estimated density of `beta'X` given `Y <= tau` at `t`.
pub fn trimming_density(
    m: &WeightedMeasure,
    beta: &IndexParams,
    t: f64,
    b_n: f64,
    tau: f64,
    kernel: Kernel,
) -> Result<f64> {
    check_dim(m, beta)?;
    if !(b_n > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {b_n}")));
    }
    let mut mass = 0.0;
    let mut acc = 0.0;
    for ((x, &y), &w) in m.xs.iter().zip(&m.ys).zip(&m.weights) {
        if y > tau {
            continue;
        }
        mass += w;
        acc += w * kernel.eval((beta.index(x) - t) / b_n);
    }
    if mass <= 0.0 {
        return Ok(0.0);
    }
    Ok(acc / (b_n * mass))
}
