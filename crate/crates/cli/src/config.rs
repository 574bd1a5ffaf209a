//! Run settings from a flat `key = value` file, overridden by flags.

use std::path::Path;

use cindex_core::index::{PipelineConfig, Threshold, Weighting};
use cindex_core::Kernel;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 20240101;

/// Every field is optional so that layers can be merged; unset fields take
/// the library defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub a_n: Option<f64>,
    pub h_grid: Option<Vec<f64>>,
    pub tau_quantile: Option<f64>,
    pub tau: Option<f64>,
    pub c: Option<Threshold>,
    pub b_n: Option<f64>,
    pub kernel: Option<Kernel>,
    pub beran_kernel: Option<Kernel>,
    pub shrink_kappa: Option<f64>,
    pub n_starts: Option<usize>,
    pub param_bound: Option<f64>,
    pub leave_one_out: Option<bool>,
    pub weighting: Option<Weighting>,
    pub bootstrap: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

pub const KEYS: &[&str] = &[
    "a_n",
    "h_grid",
    "tau_quantile",
    "tau",
    "c",
    "b_n",
    "kernel",
    "beran_kernel",
    "shrink_kappa",
    "n_starts",
    "param_bound",
    "leave_one_out",
    "weighting",
    "bootstrap",
    "seed",
    "threads",
];

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Usage(format!("{key} = {value:?}: {what}"))
}

fn positive(key: &str, value: &str) -> CliResult<f64> {
    match value.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(bad(key, value, "expected a positive number")),
    }
}

fn kernel(key: &str, value: &str) -> CliResult<Kernel> {
    Kernel::from_name(value).ok_or_else(|| bad(key, value, "unknown kernel (quartic, epanechnikov, triweight)"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key {
            "a_n" => self.a_n = Some(positive(key, value)?),
            "h_grid" => {
                let grid = value
                    .split(',')
                    .map(|s| positive(key, s.trim()))
                    .collect::<CliResult<Vec<f64>>>()?;
                self.h_grid = Some(grid);
            }
            "tau_quantile" => match value.parse::<f64>() {
                Ok(q) if q > 0.0 && q < 1.0 => self.tau_quantile = Some(q),
                _ => return Err(bad(key, value, "expected a number in (0, 1)")),
            },
            "tau" => match value.parse::<f64>() {
                Ok(t) if t.is_finite() => self.tau = Some(t),
                _ => return Err(bad(key, value, "expected a finite number")),
            },
            "c" => {
                self.c = Some(if value == "auto" {
                    Threshold::Auto { keep_mass: 0.95 }
                } else if let Some(mass) = value.strip_prefix("auto:") {
                    match mass.parse::<f64>() {
                        Ok(m) if m > 0.0 && m <= 1.0 => Threshold::Auto { keep_mass: m },
                        _ => return Err(bad(key, value, "keep mass must be in (0, 1]")),
                    }
                } else {
                    Threshold::Absolute(positive(key, value)?)
                })
            }
            "b_n" => self.b_n = Some(positive(key, value)?),
            "kernel" => self.kernel = Some(kernel(key, value)?),
            "beran_kernel" => self.beran_kernel = Some(kernel(key, value)?),
            "shrink_kappa" => self.shrink_kappa = Some(positive(key, value)?),
            "n_starts" => match value.parse::<usize>() {
                Ok(k) if k > 0 => self.n_starts = Some(k),
                _ => return Err(bad(key, value, "expected a positive integer")),
            },
            "param_bound" => self.param_bound = Some(positive(key, value)?),
            "leave_one_out" => {
                self.leave_one_out = Some(value.parse().map_err(|_| bad(key, value, "expected true or false"))?)
            }
            "weighting" => {
                self.weighting = Some(match value {
                    "conditional" | "ckm" => Weighting::Conditional,
                    "km" | "kaplan_meier" => Weighting::KaplanMeier,
                    _ => return Err(bad(key, value, "expected conditional or km")),
                })
            }
            "bootstrap" => self.bootstrap = Some(value.parse().map_err(|_| bad(key, value, "expected an integer"))?),
            "seed" => self.seed = Some(value.parse().map_err(|_| bad(key, value, "expected an unsigned integer"))?),
            "threads" => match value.parse::<usize>() {
                Ok(k) if k > 0 => self.threads = Some(k),
                _ => return Err(bad(key, value, "expected a positive integer")),
            },
            _ => return Err(CliError::Usage(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", k + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: RunConfig) -> RunConfig {
        RunConfig {
            a_n: over.a_n.or(self.a_n),
            h_grid: over.h_grid.or(self.h_grid),
            tau_quantile: over.tau_quantile.or(self.tau_quantile),
            tau: over.tau.or(self.tau),
            c: over.c.or(self.c),
            b_n: over.b_n.or(self.b_n),
            kernel: over.kernel.or(self.kernel),
            beran_kernel: over.beran_kernel.or(self.beran_kernel),
            shrink_kappa: over.shrink_kappa.or(self.shrink_kappa),
            n_starts: over.n_starts.or(self.n_starts),
            param_bound: over.param_bound.or(self.param_bound),
            leave_one_out: over.leave_one_out.or(self.leave_one_out),
            weighting: over.weighting.or(self.weighting),
            bootstrap: over.bootstrap.or(self.bootstrap),
            seed: over.seed.or(self.seed),
            threads: over.threads.or(self.threads),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut p = PipelineConfig::default();
        if let Some(v) = self.a_n {
            p.a_n = v;
        }
        if let Some(k) = self.beran_kernel {
            p.beran_kernel = k;
        }
        if let Some(w) = self.weighting {
            p.weighting = w;
        }
        if let Some(q) = self.tau_quantile {
            p.tau_quantile = q;
        }
        p.tau = self.tau.or(p.tau);
        let ix = &mut p.index;
        if let Some(g) = &self.h_grid {
            ix.h_grid = g.clone();
        }
        if let Some(c) = self.c {
            ix.threshold = c;
        }
        ix.b_n = self.b_n.or(ix.b_n);
        if let Some(k) = self.kernel {
            ix.regression_kernel = k;
            ix.trimming_kernel = k;
        }
        if let Some(v) = self.shrink_kappa {
            ix.shrink_kappa = v;
        }
        if let Some(v) = self.n_starts {
            ix.n_starts = v;
        }
        if let Some(v) = self.param_bound {
            ix.param_bound = v;
        }
        if let Some(v) = self.leave_one_out {
            ix.leave_one_out = v;
        }
        p
    }

    /// Thread count: `CINDEX_THREADS` beats the flag.
    pub fn resolved_threads(&self) -> CliResult<Option<usize>> {
        match std::env::var("CINDEX_THREADS") {
            Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
                Ok(k) if k > 0 => Ok(Some(k)),
                _ => Err(CliError::Usage(format!("CINDEX_THREADS = {v:?}: expected a positive integer"))),
            },
            _ => Ok(self.threads),
        }
    }
}

/// Settings echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub a_n: f64,
    pub h_grid: Vec<f64>,
    pub tau_quantile: f64,
    pub tau: Option<f64>,
    pub threshold: Threshold,
    pub b_n: Option<f64>,
    pub kernel: Kernel,
    pub beran_kernel: Kernel,
    pub shrink_kappa: f64,
    pub n_starts: usize,
    pub param_bound: f64,
    pub leave_one_out: bool,
    pub weighting: Weighting,
    pub box_quantiles: (f64, f64),
}

impl From<&PipelineConfig> for ConfigEcho {
    fn from(p: &PipelineConfig) -> Self {
        ConfigEcho {
            a_n: p.a_n,
            h_grid: p.index.h_grid.clone(),
            tau_quantile: p.tau_quantile,
            tau: p.tau,
            threshold: p.index.threshold,
            b_n: p.index.b_n,
            kernel: p.index.regression_kernel,
            beran_kernel: p.beran_kernel,
            shrink_kappa: p.index.shrink_kappa,
            n_starts: p.index.n_starts,
            param_bound: p.index.param_bound,
            leave_one_out: p.index.leave_one_out,
            weighting: p.weighting,
            box_quantiles: p.box_quantiles,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let cfg = RunConfig::parse("# run\na_n = 1.5\nh_grid = 0.6, 0.8\n\nc = auto:0.9\nkernel = triweight\nseed=7\n").unwrap();
        assert_eq!(cfg.a_n, Some(1.5));
        assert_eq!(cfg.h_grid, Some(vec![0.6, 0.8]));
        assert_eq!(cfg.c, Some(Threshold::Auto { keep_mass: 0.9 }));
        assert_eq!(cfg.kernel, Some(Kernel::Triweight));
        assert_eq!(cfg.seed(), 7);
        let p = cfg.pipeline();
        assert_eq!(p.a_n, 1.5);
        assert_eq!(p.index.trimming_kernel, Kernel::Triweight);
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig::parse("a_n = 1.5\nseed = 7").unwrap();
        let mut flags = RunConfig::default();
        flags.set("a_n", "3").unwrap();
        let merged = file.merge(flags);
        assert_eq!(merged.a_n, Some(3.0));
        assert_eq!(merged.seed, Some(7));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("a_n = -1").is_err());
        assert!(RunConfig::parse("h_grid = 0.5, 0").is_err());
        assert!(RunConfig::parse("tau_quantile = 1").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("a_n 2").is_err());
        assert!(RunConfig::parse("kernel = gaussian").is_err());
    }
}
