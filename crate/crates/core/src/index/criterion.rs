//! Trimming functions and the weighted least-squares criterion
//! `M_n(beta) = sum_i w_i (y_i - f(beta'x_i; beta))^2 1{y_i <= tau} J(x_i)`.

use serde::{Deserialize, Serialize};

use super::link::trimming_density;
use super::IndexParams;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::measure::WeightedMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrimMode {
    /// Keep `x` inside a fixed covariate box.
    PreliminaryBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Keep `x` where the estimated index density at the frozen reference
    /// index `beta_ref'x` exceeds `c`.
    RefinedDensity { beta_ref: IndexParams, c: f64, b_n: f64, kernel: Kernel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimmingSpec {
    pub mode: TrimMode,
    /// Minimum number of kept points; `None` means `max(10, ceil(0.1 n))`.
    pub min_kept: Option<usize>,
}

impl TrimmingSpec {
    pub fn preliminary_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("trimming box has lower > upper".into()));
        }
        Ok(Self { mode: TrimMode::PreliminaryBox { lower, upper }, min_kept: None })
    }

    pub fn refined_density(beta_ref: IndexParams, c: f64, b_n: f64, kernel: Kernel) -> Result<Self> {
        if !(c > 0.0) || !(b_n > 0.0) {
            return Err(Error::InvalidArgument(format!("density trimming needs c > 0 and b_n > 0, got {c}, {b_n}")));
        }
        Ok(Self { mode: TrimMode::RefinedDensity { beta_ref, c, b_n, kernel }, min_kept: None })
    }

    /// Keeps every point: a box covering the whole real line.
    pub fn keep_all(dim: usize) -> Self {
        Self {
            mode: TrimMode::PreliminaryBox { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] },
            min_kept: None,
        }
    }

    pub fn with_min_kept(mut self, min_kept: usize) -> Self {
        self.min_kept = Some(min_kept);
        self
    }

    pub fn required(&self, n_obs: usize) -> usize {
        self.min_kept.unwrap_or_else(|| 10.max((0.1 * n_obs as f64).ceil() as usize))
    }

    /// `J(x_i)` for every support point of `m`.
    pub fn keep_mask(&self, m: &WeightedMeasure, tau: f64) -> Result<Vec<bool>> {
        match &self.mode {
            TrimMode::PreliminaryBox { lower, upper } => {
                if let Some(d) = m.dim() {
                    if d != lower.len() {
                        return Err(Error::DimensionMismatch { expected: d, got: lower.len() });
                    }
                }
                Ok(m.xs
                    .iter()
                    .map(|x| x.iter().zip(lower).zip(upper).all(|((v, l), u)| l <= v && v <= u))
                    .collect())
            }
            TrimMode::RefinedDensity { beta_ref, c, b_n, kernel } => m
                .xs
                .iter()
                .map(|x| Ok(trimming_density(m, beta_ref, beta_ref.index(x), *b_n, tau, *kernel)? > *c))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub value: f64,
    /// Points with `y <= tau` and `J = 1` that entered the sum.
    pub kept: usize,
    /// Kept points dropped because the link estimate was undefined there.
    pub excluded: usize,
}

/// Evaluates the criterion with a precomputed trimming mask. The link
/// estimate at each kept point uses every support point with `y <= tau`,
/// the point itself included.
#[allow(clippy::too_many_arguments)]
pub(crate) fn criterion_masked(
    m: &WeightedMeasure,
    beta: &IndexParams,
    h: f64,
    tau: f64,
    keep: &[bool],
    required: usize,
    kernel: Kernel,
    leave_one_out: bool,
) -> Result<CriterionReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let mut active: Vec<(f64, usize)> = (0..m.len())
        .filter(|&i| m.ys[i] <= tau && m.weights[i] > 0.0)
        .map(|i| (beta.index(&m.xs[i]), i))
        .collect();
    let kept_total = active.iter().filter(|(_, i)| keep[*i]).count();
    if kept_total < required {
        return Err(Error::IllConditionedTrim { kept: kept_total, required });
    }
    active.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let z: Vec<f64> = active.iter().map(|&(z, _)| z).collect();
    let w: Vec<f64> = active.iter().map(|&(_, i)| m.weights[i]).collect();
    let wy: Vec<f64> = active.iter().map(|&(_, i)| m.weights[i] * m.ys[i]).collect();
    let k0 = if leave_one_out { 0.0 } else { kernel.eval(0.0) };
    let mut num: Vec<f64> = wy.iter().map(|v| k0 * v).collect();
    let mut den: Vec<f64> = w.iter().map(|v| k0 * v).collect();
    let inv_h = 1.0 / h;
    for a in 0..z.len() {
        let (za, wa, wya) = (z[a], w[a], wy[a]);
        let (mut num_a, mut den_a) = (0.0, 0.0);
        for b in a + 1..z.len() {
            let u = (z[b] - za) * inv_h;
            if u >= 1.0 {
                break;
            }
            let k = kernel.eval(u);
            num_a += k * wy[b];
            den_a += k * w[b];
            num[b] += k * wya;
            den[b] += k * wa;
        }
        num[a] += num_a;
        den[a] += den_a;
    }

    let mut value = 0.0;
    let mut kept = 0;
    let mut excluded = 0;
    for (a, &(_, i)) in active.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        if !(den[a] > 0.0) {
            excluded += 1;
            continue;
        }
        let resid = m.ys[i] - num[a] / den[a];
        value += m.weights[i] * resid * resid;
        kept += 1;
    }
    Ok(CriterionReport { value, kept, excluded })
}

/// Criterion with the point itself included in its own link estimate.
pub fn criterion_report(
    m: &WeightedMeasure,
    beta: &IndexParams,
    h: f64,
    tau: f64,
    trim: &TrimmingSpec,
    kernel: Kernel,
) -> Result<CriterionReport> {
    criterion_report_with(m, beta, h, tau, trim, kernel, false)
}

pub fn criterion_report_with(
    m: &WeightedMeasure,
    beta: &IndexParams,
    h: f64,
    tau: f64,
    trim: &TrimmingSpec,
    kernel: Kernel,
    leave_one_out: bool,
) -> Result<CriterionReport> {
    if let Some(d) = m.dim() {
        if d != beta.dim() {
            return Err(Error::DimensionMismatch { expected: d, got: beta.dim() });
        }
    }
    let keep = trim.keep_mask(m, tau)?;
    criterion_masked(m, beta, h, tau, &keep, trim.required(m.n_obs), kernel, leave_one_out)
}

pub fn criterion_mn(
    m: &WeightedMeasure,
    beta: &IndexParams,
    h: f64,
    tau: f64,
    trim: &TrimmingSpec,
    kernel: Kernel,
) -> Result<f64> {
    criterion_report(m, beta, h, tau, trim, kernel).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservedTriple;
    use crate::measure::build_km_measure;

    fn measure(rows: &[([f64; 2], f64)]) -> WeightedMeasure {
        let data: Vec<_> = rows.iter().map(|(x, y)| ObservedTriple::new(x.to_vec(), *y, true)).collect();
        build_km_measure(&data).unwrap()
    }

    #[test]
    fn constant_response_gives_zero() {
        let rows: Vec<_> = (0..15).map(|i| ([(i as f64 * 0.3).fract(), (i as f64 * 0.7).fract()], 1.25)).collect();
        let m = measure(&rows);
        let trim = TrimmingSpec::keep_all(2);
        let v = criterion_mn(&m, &IndexParams::new(vec![0.2]), 0.5, 2.0, &trim, Kernel::Quartic).unwrap();
        assert!(v.abs() < 1e-28);
    }

    #[test]
    fn single_kept_point_interpolates_itself() {
        let rows = [([0.0, 0.0], 1.0), ([5.0, 0.0], 2.0), ([10.0, 0.0], 7.0)];
        let m = measure(&rows);
        let trim = TrimmingSpec::preliminary_box(vec![4.0, -1.0], vec![6.0, 1.0]).unwrap().with_min_kept(1);
        let r = criterion_report(&m, &IndexParams::new(vec![0.0]), 1.0, 10.0, &trim, Kernel::Quartic).unwrap();
        assert_eq!(r.kept, 1);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn too_few_kept_points_is_ill_conditioned() {
        let rows = [([0.0, 0.0], 1.0), ([5.0, 0.0], 2.0)];
        let m = measure(&rows);
        let trim = TrimmingSpec::keep_all(2);
        let err = criterion_mn(&m, &IndexParams::new(vec![0.0]), 1.0, 10.0, &trim, Kernel::Quartic).unwrap_err();
        assert_eq!(err, Error::IllConditionedTrim { kept: 2, required: 10 });
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(TrimmingSpec::preliminary_box(vec![1.0], vec![0.0]).is_err());
        assert!(TrimmingSpec::refined_density(IndexParams::new(vec![]), 0.0, 1.0, Kernel::Quartic).is_err());
    }
}
