//! Monte Carlo comparison of conditional (index-based) and Kaplan–Meier
//! censoring weights.
//!
//! Design: `X ~ U[0,1]^4`, `Y = m(beta0'X) + N(0,1)`, and `C` exponential
//! with mean `gamma exp(theta0'X)`, so censoring follows a proportional
//! hazards model in `theta0'X`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, ObservedTriple};
use crate::error::{Error, Result};
use crate::index::{build_measure, fit_censoring_index, fit_on_measure, PipelineConfig, Weighting};

pub const BETA0: [f64; 4] = [1.0, 0.75, 0.25, -0.5];
pub const THETA0: [f64; 4] = [-0.1, -0.2, 0.1, -0.3];
pub const CENSORING_LEVELS: [f64; 3] = [0.15, 0.30, 0.50];

/// Published MSE values `(model, censoring, ckm, km)` for `n = 200`.
pub const REFERENCE_MSE: [(Model, f64, f64, f64); 6] = [
    (Model::M1, 0.15, 1.022, 1.463),
    (Model::M1, 0.30, 1.147, 1.279),
    (Model::M1, 0.50, 1.619, 1.728),
    (Model::M2, 0.15, 0.580, 1.480),
    (Model::M2, 0.30, 1.290, 1.613),
    (Model::M2, 0.50, 1.407, 1.633),
];

pub fn reference_mse(model: Model, censoring: f64, estimator: Estimator) -> Option<f64> {
    REFERENCE_MSE
        .iter()
        .find(|(m, c, _, _)| *m == model && (c - censoring).abs() < 1e-9)
        .map(|&(_, _, ckm, km)| match estimator {
            Estimator::Ckm => ckm,
            Estimator::Km => km,
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `m(t) = t - 0.5 t^2`
    M1,
    /// `m(t) = log(1 + 0.5 t)`
    M2,
}

impl Model {
    pub fn mean(self, t: f64) -> f64 {
        match self {
            Model::M1 => t - 0.5 * t * t,
            Model::M2 => (1.0 + 0.5 * t).ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::M1 => "m1",
            Model::M2 => "m2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Some(Model::M1),
            "m2" => Some(Model::M2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Estimator {
    /// Conditional Kaplan–Meier (index-based) weights.
    Ckm,
    /// Unconditional Kaplan–Meier weights.
    Km,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ckm => "CKM",
            Estimator::Km => "KM",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub model: Model,
    pub n: usize,
    pub gamma: f64,
    pub beta0: Vec<f64>,
    pub theta0: Vec<f64>,
    pub target_censoring: f64,
    pub seed: u64,
}

impl SimScenario {
    pub fn new(model: Model, n: usize, gamma: f64, target_censoring: f64, seed: u64) -> Self {
        Self { model, n, gamma, beta0: BETA0.to_vec(), theta0: THETA0.to_vec(), target_censoring, seed }
    }
}

struct Draw {
    x: Vec<f64>,
    y: f64,
    /// Standard exponential; `C = gamma exp(theta0'x) * e`.
    e: f64,
}

fn draw(rng: &mut ChaCha8Rng, model: Model, beta0: &[f64]) -> Draw {
    let x: Vec<f64> = (0..beta0.len()).map(|_| rng.gen::<f64>()).collect();
    let eps: f64 = StandardNormal.sample(rng);
    let e: f64 = Exp1.sample(rng);
    let y = model.mean(data::dot(beta0, &x)) + eps;
    Draw { x, y, e }
}

pub fn simulate_dataset(s: &SimScenario) -> Vec<ObservedTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    (0..s.n)
        .map(|_| {
            let Draw { x, y, e } = draw(&mut rng, s.model, &s.beta0);
            let c = s.gamma * data::dot(&s.theta0, &x).exp() * e;
            ObservedTriple::new(x, y.min(c), y <= c)
        })
        .collect()
}

/// Pilot sample size for [`calibrate_gamma`].
pub const CALIBRATION_PILOT: usize = 100_000;
const GAMMA_BRACKET: (f64, f64) = (1e-3, 1e3);

/// Bisection on `log gamma` so that the censoring fraction of a fixed
/// pilot sample matches `target` within 0.005. The pilot reuses the same
/// draws for every `gamma`, so the fraction is monotone in `gamma`.
pub fn calibrate_gamma(model: Model, target: f64, seed: u64) -> Result<f64> {
    calibrate_gamma_with(model, target, seed, CALIBRATION_PILOT)
}

pub fn calibrate_gamma_with(model: Model, target: f64, seed: u64, pilot: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&target) || pilot == 0 {
        return Err(Error::InvalidArgument(format!("censoring target must be in [0, 1), got {target}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // censored iff gamma < y / (exp(theta0'x) e)
    let ratios: Vec<f64> = (0..pilot)
        .map(|_| {
            let d = draw(&mut rng, model, &BETA0);
            d.y / (data::dot(&THETA0, &d.x).exp() * d.e)
        })
        .collect();
    let frac = |gamma: f64| ratios.iter().filter(|&&r| r > gamma).count() as f64 / pilot as f64;

    let (mut lo, mut hi) = (GAMMA_BRACKET.0.ln(), GAMMA_BRACKET.1.ln());
    let (f_lo, f_hi) = (frac(lo.exp()), frac(hi.exp()));
    const TOL: f64 = 0.005;
    if target > f_lo {
        return if target - f_lo <= TOL { Ok(lo.exp()) } else { Err(Error::BracketFailure { target, low: f_hi, high: f_lo }) };
    }
    if target < f_hi {
        return if f_hi - target <= TOL { Ok(hi.exp()) } else { Err(Error::BracketFailure { target, low: f_hi, high: f_lo }) };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = frac(mid.exp());
        if (f - target).abs() <= TOL * 0.1 || hi - lo < 1e-12 {
            return Ok(mid.exp());
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: Model,
    pub censoring_level: f64,
    pub estimator: Estimator,
    pub mse: f64,
    pub mc_stderr: f64,
    pub replications: usize,
    pub failures: usize,
    /// Fewer than 5% of the replications failed.
    pub valid: bool,
    pub gamma: f64,
    pub observed_censoring: f64,
    /// Free coordinates of each successful estimate, in replication order.
    #[serde(skip)]
    pub estimates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub cells: Vec<CellResult>,
}

impl StudyResult {
    pub fn cell(&self, model: Model, level: f64, estimator: Estimator) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.model == model && (c.censoring_level - level).abs() < 1e-9 && c.estimator == estimator)
    }
}

/// Seed of replication `r` of a scenario: a pure function of
/// `(scenario seed, r)`.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(r as u64 + 1);
    rng.gen()
}

struct Replicate {
    ckm: Option<Vec<f64>>,
    km: Option<Vec<f64>>,
    censoring: f64,
}

fn run_replicate(s: &SimScenario, r: usize, base: &PipelineConfig) -> Replicate {
    let scenario = SimScenario { seed: replication_seed(s.seed, r), ..s.clone() };
    let data = simulate_dataset(&scenario);
    let censoring = data::censoring_fraction(&data);
    let fit_with = |weighting: Weighting, theta: &[f64], cens| {
        let cfg = PipelineConfig { weighting, ..base.clone() };
        let measure = build_measure(&data, theta, &cfg)?;
        fit_on_measure(&data, cens, theta.to_vec(), measure, &cfg, Vec::new())
            .map(|f| f.selection.fit.beta_hat.free)
    };
    let mut warnings = Vec::new();
    let ckm = fit_censoring_index(&data, base, &mut warnings)
        .and_then(|(cens, theta)| fit_with(Weighting::Conditional, &theta, cens));
    let km = fit_with(Weighting::KaplanMeier, &vec![0.0; s.beta0.len()], None);
    for (name, res) in [("CKM", &ckm), ("KM", &km)] {
        if let Err(e) = res {
            log::warn!("{} n={} seed={} replicate {r} {name} failed: {e}", s.model.name(), s.n, s.seed);
        }
    }
    Replicate { ckm: ckm.ok(), km: km.ok(), censoring }
}

fn summarize(s: &SimScenario, estimator: Estimator, estimates: Vec<Vec<f64>>, total: usize, censoring: f64) -> CellResult {
    let sq: Vec<f64> = estimates
        .iter()
        .map(|free| free.iter().zip(&s.beta0[1..]).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let k = sq.len();
    let mse = if k == 0 { f64::NAN } else { sq.iter().sum::<f64>() / k as f64 };
    let mc_stderr = if k < 2 {
        f64::NAN
    } else {
        let var = sq.iter().map(|v| (v - mse).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    };
    let failures = total - k;
    CellResult {
        model: s.model,
        censoring_level: s.target_censoring,
        estimator,
        mse,
        mc_stderr,
        replications: total,
        failures,
        valid: (failures as f64) <= 0.05 * total as f64,
        gamma: s.gamma,
        observed_censoring: censoring,
        estimates,
    }
}

/// Replicates every scenario with both weighting schemes. Replications run
/// in parallel; results do not depend on the schedule.
pub fn run_study(scenarios: &[SimScenario], replications: usize, base: &PipelineConfig) -> Result<StudyResult> {
    if replications < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replications, got {replications}")));
    }
    let jobs: Vec<(usize, usize)> =
        (0..scenarios.len()).flat_map(|s| (0..replications).map(move |r| (s, r))).collect();
    let reps: Vec<Replicate> = jobs.par_iter().map(|&(s, r)| run_replicate(&scenarios[s], r, base)).collect();

    let mut cells = Vec::with_capacity(2 * scenarios.len());
    for (si, s) in scenarios.iter().enumerate() {
        let chunk = &reps[si * replications..(si + 1) * replications];
        let censoring = chunk.iter().map(|r| r.censoring).sum::<f64>() / replications as f64;
        let ckm: Vec<Vec<f64>> = chunk.iter().filter_map(|r| r.ckm.clone()).collect();
        let km: Vec<Vec<f64>> = chunk.iter().filter_map(|r| r.km.clone()).collect();
        cells.push(summarize(s, Estimator::Ckm, ckm, replications, censoring));
        cells.push(summarize(s, Estimator::Km, km, replications, censoring));
    }
    Ok(StudyResult { cells })
}
