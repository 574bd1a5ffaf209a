//! Two-stage trimmed least-squares estimation of the single-index model
//! `E[Y | X, Y <= tau] = m(beta'x)`, `beta = (1, free)`.

mod bootstrap;
mod criterion;
mod fit;
mod link;
mod pipeline;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_covariance, ChaChaResampler, Resampler};
pub use criterion::{criterion_mn, criterion_report, criterion_report_with, CriterionReport, TrimMode, TrimmingSpec};
pub use fit::{
    estimate_omega, fit_final, fit_preliminary, select_bandwidth, starting_points, BandwidthSelection,
    FitDiagnostics, GridEntry, IndexConfig, IndexFit, PreliminaryFit, Threshold,
};
pub use link::{link_estimate, link_gradient, trimming_density};
pub use pipeline::{
    build_measure, covariate_box, fit_censoring_index, fit_on_measure, resolve_tau, run_pipeline, tau_from_quantile,
    PipelineConfig, PipelineFit, Weighting,
};

/// Index coefficients with the first component pinned to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub free: Vec<f64>,
}

impl IndexParams {
    pub fn new(free: Vec<f64>) -> Self {
        Self { free }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { free: vec![0.0; dim.saturating_sub(1)] }
    }

    /// Full coefficient vector `(1, free...)`.
    pub fn beta(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.free.iter().copied()).collect()
    }

    pub fn dim(&self) -> usize {
        self.free.len() + 1
    }

    /// `beta'x`.
    #[inline]
    pub fn index(&self, x: &[f64]) -> f64 {
        x[0] + self.free.iter().zip(&x[1..]).map(|(b, v)| b * v).sum::<f64>()
    }

    /// Euclidean distance between full vectors, equal to the distance
    /// between free parts.
    pub fn distance(&self, beta: &[f64]) -> f64 {
        self.beta().iter().zip(beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_component_is_one() {
        let p = IndexParams::new(vec![0.75, 0.25, -0.5]);
        assert_eq!(p.beta(), vec![1.0, 0.75, 0.25, -0.5]);
        assert_eq!(p.index(&[0.5; 4]), 0.75);
        assert_eq!(IndexParams::zeros(1).beta(), vec![1.0]);
        assert_eq!(p.distance(&[1.0, 0.75, 0.25, -0.5]), 0.0);
    }
}
