use std::path::{Path, PathBuf};

use cindex_core::cox::CensoringIndexFit;
use cindex_core::data::censoring_fraction;
use cindex_core::index::{
    bootstrap_covariance, build_measure, fit_censoring_index, fit_on_measure, BandwidthSelection, ChaChaResampler,
    FitDiagnostics, GridEntry, TrimmingSpec, Weighting,
};
use cindex_core::sim::{
    calibrate_gamma, calibrate_gamma_with, reference_mse, replication_seed, run_study, simulate_dataset, Estimator,
    Model, SimScenario, StudyResult, CENSORING_LEVELS,
};
use cindex_core::ObservedTriple;
use serde::Serialize;

use crate::config::{ConfigEcho, RunConfig};
use crate::csv_io::{self, format_f64};
use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {k} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightRow {
    pub x: Vec<f64>,
    pub y: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSection {
    pub tau: f64,
    pub h_selected: f64,
    pub beta_prelim: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub criterion_value: f64,
    pub trim_kept_fraction: f64,
    pub omega_hat: Vec<Vec<f64>>,
    pub cov_boot: Option<Vec<Vec<f64>>>,
    pub bootstrap_replicates: Option<usize>,
    pub trimming: TrimmingSpec,
    pub diagnostics: FitDiagnostics,
    pub grid: Vec<GridEntry>,
}

impl FitSection {
    fn new(sel: &BandwidthSelection, tau: f64) -> Self {
        let f = &sel.fit;
        FitSection {
            tau,
            h_selected: sel.h,
            beta_prelim: f.beta_prelim.beta(),
            beta_hat: f.beta_hat.beta(),
            criterion_value: f.criterion_value,
            trim_kept_fraction: f.trim_kept_fraction,
            omega_hat: f.omega_hat.clone(),
            cov_boot: None,
            bootstrap_replicates: None,
            trimming: f.trimming.clone(),
            diagnostics: f.diagnostics.clone(),
            grid: sel.grid.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub schema: u32,
    pub command: &'static str,
    pub input: String,
    pub status: &'static str,
    pub error: Option<String>,
    pub seed: u64,
    pub n_obs: usize,
    pub dim: usize,
    pub censoring_fraction: f64,
    pub config: ConfigEcho,
    pub censoring_model: Option<CensoringIndexFit>,
    pub theta_hat: Option<Vec<f64>>,
    pub guard_activations: Option<usize>,
    pub fit: Option<FitSection>,
    pub weights: Option<Vec<WeightRow>>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "n = {}, d = {}, censored = {:.1}%\n",
            self.n_obs,
            self.dim,
            100.0 * self.censoring_fraction
        );
        if let Some(theta) = &self.theta_hat {
            s += &format!("theta_hat = {}\n", fmt_vec(theta));
        }
        if let Some(f) = &self.fit {
            s += &format!("tau = {:.4}, h = {:.2}\n", f.tau, f.h_selected);
            s += &format!("beta_n   = {}\n", fmt_vec(&f.beta_prelim));
            s += &format!("beta_hat = {}\n", fmt_vec(&f.beta_hat));
            s += &format!("criterion = {:.6}, kept = {:.1}%\n", f.criterion_value, 100.0 * f.trim_kept_fraction);
            if let Some(cov) = &f.cov_boot {
                let se: Vec<f64> = (0..cov.len()).map(|i| cov[i][i].sqrt()).collect();
                s += &format!("bootstrap se (free) = {}\n", fmt_vec(&se));
            }
        }
        for w in &self.warnings {
            s += &format!("warning: {w}\n");
        }
        if let Some(e) = &self.error {
            s += &format!("error: {e}\n");
        }
        s
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

/// Input problems are returned as errors; estimation failures are recorded
/// in the report, which keeps whatever stages succeeded.
pub fn cmd_fit(input: &Path, cfg: &RunConfig) -> CliResult<FitReport> {
    let data = csv_io::read_triples(input)?;
    let dim = cindex_core::data::validate(&data).map_err(|e| CliError::Schema(e.to_string()))?;
    let pipeline = cfg.pipeline();
    if let Some(b) = cfg.bootstrap {
        if b == 1 {
            return Err(CliError::Usage("bootstrap needs at least 2 replicates".into()));
        }
    }
    let mut report = FitReport {
        schema: SCHEMA,
        command: "fit",
        input: input.display().to_string(),
        status: "ok",
        error: None,
        seed: cfg.seed(),
        n_obs: data.len(),
        dim,
        censoring_fraction: censoring_fraction(&data),
        config: ConfigEcho::from(&pipeline),
        censoring_model: None,
        theta_hat: None,
        guard_activations: None,
        fit: None,
        weights: None,
        warnings: Vec::new(),
    };

    let threads = cfg.resolved_threads()?;
    let outcome = with_threads(threads, || -> cindex_core::Result<()> {
        let mut warnings = Vec::new();
        let (censoring, theta) = match pipeline.weighting {
            Weighting::Conditional => fit_censoring_index(&data, &pipeline, &mut warnings)?,
            Weighting::KaplanMeier => (None, vec![0.0; dim]),
        };
        report.censoring_model = censoring.clone();
        report.theta_hat = censoring.as_ref().map(|_| theta.clone());
        let measure = build_measure(&data, &theta, &pipeline)?;
        report.guard_activations = Some(measure.guard_activations);
        report.weights = Some(
            measure
                .xs
                .iter()
                .zip(&measure.ys)
                .zip(&measure.weights)
                .map(|((x, &y), &w)| WeightRow { x: x.clone(), y, w })
                .collect(),
        );
        report.warnings = warnings.clone();
        let fit = fit_on_measure(&data, censoring, theta, measure, &pipeline, warnings)?;
        report.warnings = fit.warnings.clone();
        report.fit = Some(FitSection::new(&fit.selection, fit.tau));
        if let Some(b) = cfg.bootstrap.filter(|&b| b > 0) {
            let cov = bootstrap_covariance(&data, &pipeline, b, &ChaChaResampler { seed: cfg.seed() })?;
            if let Some(f) = report.fit.as_mut() {
                f.cov_boot = Some(cov);
                f.bootstrap_replicates = Some(b);
            }
        }
        Ok(())
    })?;
    if let Err(e) = outcome {
        report.status = "error";
        report.error = Some(e.to_string());
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub model: Model,
    pub n: usize,
    /// `None` calibrates gamma to `censoring`.
    pub gamma: Option<f64>,
    pub censoring: Option<f64>,
    pub seed: u64,
}

/// Dataset plus the header comments recording how it was generated.
pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<(Vec<ObservedTriple>, Vec<String>)> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let mut comments = vec![format!("model={} n={} seed={}", args.model.name(), args.n, args.seed)];
    let gamma = match args.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(CliError::Usage(format!("gamma must be positive, got {g}"))),
        None => {
            let target = args
                .censoring
                .ok_or_else(|| CliError::Usage("--gamma auto needs --censoring".into()))?;
            let g = calibrate_gamma(args.model, target, args.seed)?;
            comments.push(format!("gamma={} calibrated to censoring={target}", format_f64(g)));
            g
        }
    };
    if args.gamma.is_some() {
        comments.push(format!("gamma={}", format_f64(gamma)));
    }
    let scenario = SimScenario::new(args.model, args.n, gamma, args.censoring.unwrap_or(0.0), args.seed);
    let data = simulate_dataset(&scenario);
    comments.push(format!("observed censoring={:.4}", censoring_fraction(&data)));
    Ok((data, comments))
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub model: Model,
    pub target: f64,
    pub seed: u64,
    pub pilot: usize,
    pub gamma: f64,
}

pub fn cmd_calibrate(model: Model, target: f64, seed: u64, pilot: usize) -> CliResult<CalibrationReport> {
    if !(0.0..1.0).contains(&target) {
        return Err(CliError::Usage(format!("censoring target must be in [0, 1), got {target}")));
    }
    let gamma = calibrate_gamma_with(model, target, seed, pilot)?;
    Ok(CalibrationReport { model, target, seed, pilot, gamma })
}

/// `m1:0.15,m2:0.5`; empty means all six cells.
pub fn parse_cells(spec: Option<&str>) -> CliResult<Vec<(Model, f64)>> {
    let Some(spec) = spec.filter(|s| !s.trim().is_empty()) else {
        return Ok([Model::M1, Model::M2]
            .into_iter()
            .flat_map(|m| CENSORING_LEVELS.iter().map(move |&c| (m, c)))
            .collect());
    };
    spec.split(',')
        .map(|cell| {
            let cell = cell.trim();
            let (m, c) = cell
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("cell {cell:?}: expected model:censoring")))?;
            let model = Model::from_name(m).ok_or_else(|| CliError::Usage(format!("unknown model {m:?}")))?;
            let level: f64 = c.parse().map_err(|_| CliError::Usage(format!("cell {cell:?}: bad censoring level")))?;
            if !(level > 0.0 && level < 1.0) {
                return Err(CliError::Usage(format!("cell {cell:?}: censoring must be in (0, 1)")));
            }
            Ok((model, level))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Table1Args {
    pub replications: usize,
    pub n: usize,
    pub cells: Vec<(Model, f64)>,
    pub seed: u64,
}

/// One cell of the table: both estimators side by side.
#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub model: Model,
    pub censoring: f64,
    pub gamma: f64,
    pub observed_censoring: f64,
    pub replications: usize,
    pub ckm_mse: f64,
    pub ckm_stderr: f64,
    pub ckm_failures: usize,
    pub km_mse: f64,
    pub km_stderr: f64,
    pub km_failures: usize,
    pub valid: bool,
    pub ref_ckm: Option<f64>,
    pub ref_km: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub schema: u32,
    pub command: &'static str,
    pub seed: u64,
    pub n: usize,
    pub replications: usize,
    pub config: ConfigEcho,
    pub rows: Vec<Table1Row>,
}

/// Seed of a cell: depends on the master seed and the cell itself, not on
/// which other cells are run.
pub fn cell_seed(master: u64, model: Model, level: f64) -> u64 {
    let m = match model {
        Model::M1 => 0,
        Model::M2 => 1,
    };
    replication_seed(master, (m << 20) | (level * 1000.0).round() as usize)
}

pub fn cmd_table1(args: &Table1Args, cfg: &RunConfig) -> CliResult<(Table1Report, StudyResult)> {
    if args.replications < 2 {
        return Err(CliError::Usage("--replications must be at least 2".into()));
    }
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let pipeline = cfg.pipeline();
    let threads = cfg.resolved_threads()?;
    let study = with_threads(threads, || -> cindex_core::Result<StudyResult> {
        let scenarios = args
            .cells
            .iter()
            .map(|&(model, level)| {
                let seed = cell_seed(args.seed, model, level);
                let gamma = calibrate_gamma(model, level, seed)?;
                Ok(SimScenario::new(model, args.n, gamma, level, seed))
            })
            .collect::<cindex_core::Result<Vec<_>>>()?;
        run_study(&scenarios, args.replications, &pipeline)
    })??;
    let rows = args
        .cells
        .iter()
        .map(|&(model, level)| {
            let ckm = study.cell(model, level, Estimator::Ckm).expect("cell was run");
            let km = study.cell(model, level, Estimator::Km).expect("cell was run");
            Table1Row {
                model,
                censoring: level,
                gamma: ckm.gamma,
                observed_censoring: ckm.observed_censoring,
                replications: ckm.replications,
                ckm_mse: ckm.mse,
                ckm_stderr: ckm.mc_stderr,
                ckm_failures: ckm.failures,
                km_mse: km.mse,
                km_stderr: km.mc_stderr,
                km_failures: km.failures,
                valid: ckm.valid && km.valid,
                ref_ckm: reference_mse(model, level, Estimator::Ckm),
                ref_km: reference_mse(model, level, Estimator::Km),
            }
        })
        .collect();
    let report = Table1Report {
        schema: SCHEMA,
        command: "table1",
        seed: args.seed,
        n: args.n,
        replications: args.replications,
        config: ConfigEcho::from(&pipeline),
        rows,
    };
    Ok((report, study))
}

pub fn table1_csv(report: &Table1Report) -> String {
    let reference = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.3}"));
    let mut s = format!("# seed={} n={} replications={}\n", report.seed, report.n, report.replications);
    s += "model,censoring,gamma,observed_censoring,replications,ckm_mse,ckm_stderr,ckm_failures,km_mse,km_stderr,km_failures,valid,ref_ckm,ref_km\n";
    for r in &report.rows {
        s += &format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.model.name(),
            r.censoring,
            format_f64(r.gamma),
            format_f64(r.observed_censoring),
            r.replications,
            format_f64(r.ckm_mse),
            format_f64(r.ckm_stderr),
            r.ckm_failures,
            format_f64(r.km_mse),
            format_f64(r.km_stderr),
            r.km_failures,
            r.valid,
            reference(r.ref_ckm),
            reference(r.ref_km),
        );
    }
    s
}

pub fn table1_text(report: &Table1Report) -> String {
    let reference = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut s = format!(
        "{:<6}{:>10}{:>10}{:>9}{:>10}{:>9}{:>8}{:>8}\n",
        "model", "censoring", "CKM", "(se)", "KM", "(se)", "ref CKM", "ref KM"
    );
    for r in &report.rows {
        s += &format!(
            "{:<6}{:>10.2}{:>10.3}{:>9.3}{:>10.3}{:>9.3}{:>8}{:>8}\n",
            r.model.name(),
            r.censoring,
            r.ckm_mse,
            r.ckm_stderr,
            r.km_mse,
            r.km_stderr,
            reference(r.ref_ckm),
            reference(r.ref_km),
        );
    }
    s
}

/// Writes `table1.csv` and `table1.json` into `dir`.
pub fn write_table1(report: &Table1Report, dir: &Path) -> CliResult<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    let csv_path = dir.join("table1.csv");
    let json_path = dir.join("table1.json");
    std::fs::write(&csv_path, table1_csv(report)).map_err(|e| CliError::io(csv_path.display().to_string(), e))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    std::fs::write(&json_path, json).map_err(|e| CliError::io(json_path.display().to_string(), e))?;
    Ok((csv_path, json_path))
}
