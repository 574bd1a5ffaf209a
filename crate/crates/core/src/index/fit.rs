//! Preliminary and final index fits, bandwidth selection and the plug-in
//! matrix `Omega`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::criterion::{criterion_masked, TrimMode, TrimmingSpec};
use super::link::{link_gradient, trimming_density};
use super::IndexParams;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::measure::WeightedMeasure;
use crate::optim::{nelder_mead, Bounds, NelderMeadOptions};

/// Density threshold `c` of the refined trimming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Largest `c` keeping at least this fraction of the `tau`-truncated
    /// mass at the preliminary index.
    Auto { keep_mass: f64 },
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexConfig {
    pub h_grid: Vec<f64>,
    pub threshold: Threshold,
    /// Trimming-density bandwidth; `None` uses the regression bandwidth `h`.
    pub b_n: Option<f64>,
    pub regression_kernel: Kernel,
    pub trimming_kernel: Kernel,
    /// Radius of the final search box is `shrink_kappa * n^(-1/4)`.
    pub shrink_kappa: f64,
    pub n_starts: usize,
    pub start_seed: u64,
    /// Half-width of the uniform perturbations used as extra starts.
    pub start_spread: f64,
    /// Free coordinates are searched in `[-param_bound, param_bound]`, i.e.
    /// no coefficient exceeds the pinned first one in magnitude by default.
    pub param_bound: f64,
    pub nelder_mead: NelderMeadOptions,
    /// Drop each point's own term from the link estimate inside the
    /// criterion. With the point included, spreading the index out lets
    /// every point fit itself and drives the criterion to zero.
    pub leave_one_out: bool,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            h_grid: (6..=15).map(|j| j as f64 / 10.0).collect(),
            threshold: Threshold::Auto { keep_mass: 0.95 },
            b_n: None,
            regression_kernel: Kernel::Quartic,
            trimming_kernel: Kernel::Quartic,
            shrink_kappa: 1.0,
            n_starts: 5,
            start_seed: 0x5eed,
            start_spread: 1.0,
            param_bound: 1.0,
            nelder_mead: NelderMeadOptions { initial_step: 0.25, max_evals: 400, f_tol: 1e-8, x_tol: 1e-4 },
            leave_one_out: true,
        }
    }
}

impl IndexConfig {
    pub fn shrink_radius(&self, n_obs: usize) -> f64 {
        self.shrink_kappa * (n_obs.max(1) as f64).powf(-0.25)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreliminaryFit {
    pub beta: IndexParams,
    pub criterion: f64,
    pub kept: usize,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub preliminary_criterion: f64,
    pub preliminary_kept: usize,
    pub refined_kept: usize,
    /// Support points with `y <= tau`.
    pub truncated_points: usize,
    pub threshold_c: f64,
    pub b_n: f64,
    pub shrink_radius: f64,
    /// Criterion at the preliminary estimate under the refined trimming.
    pub start_criterion: f64,
    pub excluded_points: usize,
    /// More than 5% of kept points had an undefined link estimate.
    pub exclusion_flag: bool,
    pub omega_skipped: usize,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexFit {
    pub beta_prelim: IndexParams,
    pub beta_hat: IndexParams,
    pub h_selected: f64,
    pub criterion_value: f64,
    pub trim_kept_fraction: f64,
    pub omega_hat: Vec<Vec<f64>>,
    pub cov_boot: Option<Vec<Vec<f64>>>,
    pub tau: f64,
    pub trimming: TrimmingSpec,
    pub diagnostics: FitDiagnostics,
}

/// The zero vector followed by `n_starts - 1` seeded uniform perturbations.
pub fn starting_points(free_dim: usize, n_starts: usize, seed: u64, spread: f64) -> Vec<IndexParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![IndexParams::new(vec![0.0; free_dim])];
    for _ in 1..n_starts {
        starts.push(IndexParams::new((0..free_dim).map(|_| rng.gen_range(-spread..=spread)).collect()));
    }
    starts
}

fn check_dim(m: &WeightedMeasure, dim: usize) -> Result<()> {
    match m.dim() {
        Some(d) if d != dim => Err(Error::DimensionMismatch { expected: d, got: dim }),
        _ => Ok(()),
    }
}

/// Multi-start Nelder–Mead on the criterion with box trimming. Returns the
/// best point found over all starts.
pub fn fit_preliminary(
    m: &WeightedMeasure,
    h: f64,
    tau: f64,
    trim: &TrimmingSpec,
    starts: &[IndexParams],
    cfg: &IndexConfig,
) -> Result<PreliminaryFit> {
    let first = starts.first().ok_or_else(|| Error::InvalidArgument("no starting points".into()))?;
    check_dim(m, first.dim())?;
    let kernel = cfg.regression_kernel;
    let keep = trim.keep_mask(m, tau)?;
    let required = trim.required(m.n_obs);
    let report = criterion_masked(m, first, h, tau, &keep, required, kernel, cfg.leave_one_out)?;
    if first.free.is_empty() {
        return Ok(PreliminaryFit { beta: first.clone(), criterion: report.value, kept: report.kept, evals: 1 });
    }

    let p = first.free.len();
    let bounds = Bounds::new(vec![-cfg.param_bound; p], vec![cfg.param_bound; p]);
    let objective = |free: &[f64]| {
        criterion_masked(m, &IndexParams::new(free.to_vec()), h, tau, &keep, required, kernel, cfg.leave_one_out)
            .map_or(f64::INFINITY, |r| r.value)
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evals = 0;
    for start in starts {
        let res = nelder_mead(objective, &start.free, Some(&bounds), cfg.nelder_mead);
        evals += res.evals;
        if best.as_ref().map_or(true, |(_, v)| res.value < *v) {
            best = Some((res.x, res.value));
        }
    }
    let (free, criterion) = best.expect("starts is non-empty");
    Ok(PreliminaryFit { beta: IndexParams::new(free), criterion, kept: report.kept, evals })
}

/// Largest threshold such that points with density `<= c` carry at most
/// `1 - keep_mass` of the total weight.
fn calibrate_threshold(densities: &[(f64, f64)], keep_mass: f64) -> f64 {
    let mut sorted = densities.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|(_, w)| w).sum();
    let limit = (1.0 - keep_mass) * total;
    let mut c = None;
    let mut acc = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let d = sorted[k].0;
        while k < sorted.len() && sorted[k].0 == d {
            acc += sorted[k].1;
            k += 1;
        }
        if acc <= limit {
            c = Some(d);
        } else {
            break;
        }
    }
    let min_d = sorted.first().map_or(1.0, |s| s.0);
    match c {
        Some(c) if c > 0.0 => c,
        _ => 0.5 * min_d.max(f64::MIN_POSITIVE),
    }
}

/// Refined trimming at the preliminary estimate, then Nelder–Mead inside a
/// sup-norm box of radius `shrink_radius` around it.
pub fn fit_final(
    m: &WeightedMeasure,
    prelim: &PreliminaryFit,
    h: f64,
    tau: f64,
    shrink_radius: f64,
    cfg: &IndexConfig,
) -> Result<IndexFit> {
    if !(shrink_radius > 0.0) {
        return Err(Error::InvalidArgument(format!("shrink radius must be positive, got {shrink_radius}")));
    }
    let beta_n = &prelim.beta;
    check_dim(m, beta_n.dim())?;
    let kernel = cfg.regression_kernel;
    let b_n = cfg.b_n.unwrap_or(h);

    let c = match cfg.threshold {
        Threshold::Absolute(c) => c,
        Threshold::Auto { keep_mass } => {
            let dens = (0..m.len())
                .filter(|&i| m.ys[i] <= tau && m.weights[i] > 0.0)
                .map(|i| Ok((trimming_density(m, beta_n, beta_n.index(&m.xs[i]), b_n, tau, cfg.trimming_kernel)?, m.weights[i])))
                .collect::<Result<Vec<_>>>()?;
            calibrate_threshold(&dens, keep_mass)
        }
    };
    let trim = TrimmingSpec::refined_density(beta_n.clone(), c, b_n, cfg.trimming_kernel)?;
    let keep = trim.keep_mask(m, tau)?;
    let required = trim.required(m.n_obs);
    let start = criterion_masked(m, beta_n, h, tau, &keep, required, kernel, cfg.leave_one_out)?;

    let p = beta_n.free.len();
    let (beta_hat, evals) = if p == 0 {
        (beta_n.clone(), 1)
    } else {
        let bounds = Bounds::around(&beta_n.free, shrink_radius);
        let opts = NelderMeadOptions { initial_step: cfg.nelder_mead.initial_step.min(0.5 * shrink_radius), ..cfg.nelder_mead };
        let res = nelder_mead(
            |free: &[f64]| {
                criterion_masked(m, &IndexParams::new(free.to_vec()), h, tau, &keep, required, kernel, cfg.leave_one_out)
                    .map_or(f64::INFINITY, |r| r.value)
            },
            &beta_n.free,
            Some(&bounds),
            opts,
        );
        (IndexParams::new(res.x), res.evals)
    };
    let report = criterion_masked(m, &beta_hat, h, tau, &keep, required, kernel, cfg.leave_one_out)?;
    let (omega_hat, omega_skipped) = omega_masked(m, &beta_hat, h, tau, &keep, kernel)?;
    let truncated = (0..m.len()).filter(|&i| m.ys[i] <= tau && m.weights[i] > 0.0).count();

    Ok(IndexFit {
        beta_prelim: beta_n.clone(),
        beta_hat,
        h_selected: h,
        criterion_value: report.value,
        trim_kept_fraction: if truncated == 0 { 0.0 } else { report.kept as f64 / truncated as f64 },
        omega_hat,
        cov_boot: None,
        tau,
        trimming: trim,
        diagnostics: FitDiagnostics {
            preliminary_criterion: prelim.criterion,
            preliminary_kept: prelim.kept,
            refined_kept: report.kept,
            truncated_points: truncated,
            threshold_c: c,
            b_n,
            shrink_radius,
            start_criterion: start.value,
            excluded_points: report.excluded,
            exclusion_flag: report.excluded as f64 > 0.05 * (report.kept + report.excluded).max(1) as f64,
            omega_skipped,
            evals,
        },
    })
}

fn omega_masked(
    m: &WeightedMeasure,
    beta: &IndexParams,
    h: f64,
    tau: f64,
    keep: &[bool],
    kernel: Kernel,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let p = beta.free.len();
    let mut omega = vec![vec![0.0; p]; p];
    let mut skipped = 0;
    let n = m.n_obs.max(1) as f64;
    for i in 0..m.len() {
        // observable surrogate delta_i 1{T_i <= tau}: the measure only holds
        // uncensored points
        if m.ys[i] > tau || !keep[i] {
            continue;
        }
        let g = match link_gradient(m, beta, &m.xs[i], h, tau, kernel) {
            Ok(g) => g,
            Err(Error::EmptyNeighborhood { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for a in 0..p {
            for b in 0..=a {
                omega[a][b] += g[a] * g[b] / n;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            omega[b][a] = omega[a][b];
        }
    }
    if skipped > 0 {
        log::warn!("omega: {skipped} points skipped with an empty kernel neighborhood");
    }
    Ok((omega, skipped))
}

/// `(1/n) sum_i 1{y_i <= tau} J(x_i) grad f grad f'` over the uncensored
/// observations, `n` counting censored ones too.
pub fn estimate_omega(
    m: &WeightedMeasure,
    beta_hat: &IndexParams,
    h: f64,
    tau: f64,
    trim: &TrimmingSpec,
    kernel: Kernel,
) -> Result<Vec<Vec<f64>>> {
    check_dim(m, beta_hat.dim())?;
    let keep = trim.keep_mask(m, tau)?;
    omega_masked(m, beta_hat, h, tau, &keep, kernel).map(|(o, _)| o)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub h: f64,
    pub criterion: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub h: f64,
    pub fit: IndexFit,
    pub grid: Vec<GridEntry>,
}

/// Runs both stages for every bandwidth in the grid and keeps the one with
/// the smallest final criterion (smaller `h` on ties).
pub fn select_bandwidth(
    m: &WeightedMeasure,
    cfg: &IndexConfig,
    trim_box: &TrimmingSpec,
    tau: f64,
) -> Result<BandwidthSelection> {
    if cfg.h_grid.is_empty() {
        return Err(Error::InvalidArgument("bandwidth grid is empty".into()));
    }
    if cfg.h_grid.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("bandwidths must be positive".into()));
    }
    if !matches!(trim_box.mode, TrimMode::PreliminaryBox { .. }) {
        return Err(Error::InvalidArgument("preliminary trimming must be a covariate box".into()));
    }
    let dim = m.dim().ok_or_else(|| Error::InvalidArgument("measure has no support points".into()))?;
    let mut grid = cfg.h_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let starts = starting_points(dim - 1, cfg.n_starts.max(1), cfg.start_seed, cfg.start_spread);
    let radius = cfg.shrink_radius(m.n_obs);
    let fits: Vec<Result<IndexFit>> = grid
        .par_iter()
        .map(|&h| {
            let prelim = fit_preliminary(m, h, tau, trim_box, &starts, cfg)?;
            fit_final(m, &prelim, h, tau, radius, cfg)
        })
        .collect();

    let mut best: Option<IndexFit> = None;
    let mut entries = Vec::with_capacity(grid.len());
    for (h, res) in grid.iter().zip(fits) {
        match res {
            Ok(fit) => {
                entries.push(GridEntry { h: *h, criterion: Some(fit.criterion_value), error: None });
                if best.as_ref().map_or(true, |b| fit.criterion_value < b.criterion_value) {
                    best = Some(fit);
                }
            }
            Err(e @ Error::IllConditionedTrim { .. }) => {
                log::warn!("bandwidth {h} skipped: {e}");
                entries.push(GridEntry { h: *h, criterion: None, error: Some(e.to_string()) });
            }
            Err(e) => return Err(e),
        }
    }
    let fit = best.ok_or(Error::NoUsableBandwidth)?;
    Ok(BandwidthSelection { h: fit.h_selected, fit, grid: entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_keeps_requested_mass() {
        let dens: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64, 1.0)).collect();
        let c = calibrate_threshold(&dens, 0.95);
        assert_eq!(c, 1.0);
        let c = calibrate_threshold(&dens, 0.75);
        assert_eq!(c, 5.0);
        // a single heavy low-density point cannot be dropped
        let c = calibrate_threshold(&[(0.5, 10.0), (1.0, 1.0)], 0.95);
        assert_eq!(c, 0.25);
    }

    #[test]
    fn starts_are_deterministic() {
        let a = starting_points(3, 5, 7, 1.0);
        assert_eq!(a, starting_points(3, 5, 7, 1.0));
        assert_eq!(a[0].free, vec![0.0; 3]);
        assert_eq!(a.len(), 5);
        assert!(a[1..].iter().all(|s| s.free.iter().all(|v| v.abs() <= 1.0)));
    }
}
