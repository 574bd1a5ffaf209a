//! End-to-end estimation from raw censored data.

use serde::{Deserialize, Serialize};

use super::criterion::TrimmingSpec;
use super::fit::{select_bandwidth, BandwidthSelection, IndexConfig};
use crate::cox::{fit_cox, CensoringIndexFit, CoxOptions};
use crate::data::{self, ObservedTriple};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::measure::{build_km_measure, build_weighted_measure, WeightedMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Censoring distribution conditional on the estimated censoring index.
    Conditional,
    /// Unconditional Kaplan–Meier censoring distribution.
    KaplanMeier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub a_n: f64,
    pub beran_kernel: Kernel,
    pub weighting: Weighting,
    /// Quantile of the uncensored times used as `tau`, unless `tau` is set.
    pub tau_quantile: f64,
    pub tau: Option<f64>,
    /// Marginal covariate quantiles bounding the preliminary trimming box.
    pub box_quantiles: (f64, f64),
    pub cox: CoxOptions,
    pub index: IndexConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            a_n: 2.0,
            beran_kernel: Kernel::Quartic,
            weighting: Weighting::Conditional,
            tau_quantile: 0.9,
            tau: None,
            box_quantiles: (0.05, 0.95),
            cox: CoxOptions::default(),
            index: IndexConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFit {
    pub censoring: Option<CensoringIndexFit>,
    pub theta: Vec<f64>,
    pub tau: f64,
    pub measure: WeightedMeasure,
    pub selection: BandwidthSelection,
    pub warnings: Vec<String>,
}

pub fn tau_from_quantile(data: &[ObservedTriple], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("tau quantile must be in (0, 1), got {q}")));
    }
    let times: Vec<f64> = data.iter().filter(|o| o.delta).map(|o| o.t).collect();
    if times.is_empty() {
        return Err(Error::InvalidArgument("no uncensored observations".into()));
    }
    Ok(data::quantile(&times, q))
}

/// Box of marginal covariate quantiles over all observations.
pub fn covariate_box(data: &[ObservedTriple], lo: f64, hi: f64) -> Result<TrimmingSpec> {
    let d = data::validate(data)?;
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for k in 0..d {
        let col: Vec<f64> = data.iter().map(|o| o.x[k]).collect();
        lower.push(data::quantile(&col, lo));
        upper.push(data::quantile(&col, hi));
    }
    TrimmingSpec::preliminary_box(lower, upper)
}

/// Fits the censoring index. With no censored observation the Cox stage is
/// skipped with a warning and a zero index is returned; all weights are
/// then `1/n` anyway. The same fallback applies when every covariate is
/// constant, since the index, and hence every weight, is then the same for
/// all `theta`.
pub fn fit_censoring_index(
    data: &[ObservedTriple],
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<(Option<CensoringIndexFit>, Vec<f64>)> {
    let d = data::validate(data)?;
    match fit_cox(data, cfg.cox) {
        Ok(fit) => {
            if !fit.converged {
                warnings.push(format!("censoring model did not converge ({:?})", fit.status));
            }
            let theta = fit.theta_hat.clone();
            Ok((Some(fit), theta))
        }
        Err(Error::NoCensoredObservations) => {
            warnings.push("no censored observations: censoring model skipped".into());
            Ok((None, vec![0.0; d]))
        }
        Err(Error::SingularHessian { .. }) if constant_covariates(data) => {
            warnings.push("all covariates are constant: censoring model skipped".into());
            Ok((None, vec![0.0; d]))
        }
        Err(e) => Err(e),
    }
}

fn constant_covariates(data: &[ObservedTriple]) -> bool {
    data.iter().all(|o| o.x == data[0].x)
}

pub fn build_measure(data: &[ObservedTriple], theta: &[f64], cfg: &PipelineConfig) -> Result<WeightedMeasure> {
    match cfg.weighting {
        Weighting::Conditional => build_weighted_measure(data, theta, cfg.a_n, cfg.beran_kernel),
        Weighting::KaplanMeier => build_km_measure(data),
    }
}

pub fn resolve_tau(data: &[ObservedTriple], cfg: &PipelineConfig) -> Result<f64> {
    match cfg.tau {
        Some(t) => Ok(t),
        None => tau_from_quantile(data, cfg.tau_quantile),
    }
}

/// Censoring index, weights, then the two-stage index fit with bandwidth
/// selection.
pub fn run_pipeline(data: &[ObservedTriple], cfg: &PipelineConfig) -> Result<PipelineFit> {
    let mut warnings = Vec::new();
    let (censoring, theta) = match cfg.weighting {
        Weighting::Conditional => fit_censoring_index(data, cfg, &mut warnings)?,
        Weighting::KaplanMeier => (None, vec![0.0; data::validate(data)?]),
    };
    let measure = build_measure(data, &theta, cfg)?;
    fit_on_measure(data, censoring, theta, measure, cfg, warnings)
}

/// Bandwidth selection and the two-stage fit on an already built measure.
pub fn fit_on_measure(
    data: &[ObservedTriple],
    censoring: Option<CensoringIndexFit>,
    theta: Vec<f64>,
    measure: WeightedMeasure,
    cfg: &PipelineConfig,
    mut warnings: Vec<String>,
) -> Result<PipelineFit> {
    let tau = resolve_tau(data, cfg)?;
    let trim_box = covariate_box(data, cfg.box_quantiles.0, cfg.box_quantiles.1)?;
    let selection = select_bandwidth(&measure, &cfg.index, &trim_box, tau)?;
    if measure.guard_activations > 0 {
        warnings.push(format!("{} weight denominators floored", measure.guard_activations));
    }
    if selection.fit.diagnostics.exclusion_flag {
        warnings.push("more than 5% of kept points had an empty kernel neighborhood".into());
    }
    Ok(PipelineFit { censoring, theta, tau, measure, selection, warnings })
}
