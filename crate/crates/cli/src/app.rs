use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use cindex_core::sim::{Model, CALIBRATION_PILOT};
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, SimulateArgs, Table1Args};
use crate::config::RunConfig;
use crate::csv_io;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cindex", version, about = "Single-index regression under index-dependent censoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the index model to a CSV dataset and write a JSON report.
    Fit {
        /// CSV with header x1,...,xd,t,delta.
        input: PathBuf,
        /// JSON report path; without it the report goes to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Simulate a dataset from the study design.
    Simulate {
        #[arg(long, default_value = "m1")]
        model: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Censoring scale, or `auto` to calibrate to --censoring.
        #[arg(long, default_value = "auto")]
        gamma: String,
        #[arg(long)]
        censoring: Option<f64>,
        #[arg(long, default_value_t = crate::config::DEFAULT_SEED)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo MSE table for both weighting schemes.
    Table1 {
        #[arg(long, default_value_t = 500)]
        replications: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Comma-separated `model:censoring` cells; all six by default.
        #[arg(long)]
        cells: Option<String>,
        /// Directory receiving table1.csv and table1.json.
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Censoring scale giving a target censoring fraction.
    CalibrateGamma {
        #[arg(long, default_value = "m1")]
        model: String,
        #[arg(long)]
        censoring: f64,
        #[arg(long, default_value_t = crate::config::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = CALIBRATION_PILOT)]
        pilot: usize,
    },
}

/// Flags mirroring the config-file keys; a flag beats the file.
#[derive(Debug, Args)]
struct Settings {
    /// Flat `key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a_n: Option<String>,
    /// Comma-separated bandwidths.
    #[arg(long)]
    h_grid: Option<String>,
    #[arg(long)]
    tau_quantile: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Density threshold: a number, `auto` or `auto:<mass>`.
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    b_n: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    beran_kernel: Option<String>,
    #[arg(long)]
    shrink_kappa: Option<String>,
    #[arg(long)]
    n_starts: Option<String>,
    #[arg(long)]
    param_bound: Option<String>,
    #[arg(long)]
    leave_one_out: Option<String>,
    /// `conditional` or `km`.
    #[arg(long)]
    weighting: Option<String>,
    /// Bootstrap replicates for the covariance of the estimate.
    #[arg(long)]
    bootstrap: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl Settings {
    fn resolve(&self) -> CliResult<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut flags = RunConfig::default();
        let pairs = [
            ("a_n", &self.a_n),
            ("h_grid", &self.h_grid),
            ("tau_quantile", &self.tau_quantile),
            ("tau", &self.tau),
            ("c", &self.c),
            ("b_n", &self.b_n),
            ("kernel", &self.kernel),
            ("beran_kernel", &self.beran_kernel),
            ("shrink_kappa", &self.shrink_kappa),
            ("n_starts", &self.n_starts),
            ("param_bound", &self.param_bound),
            ("leave_one_out", &self.leave_one_out),
            ("weighting", &self.weighting),
            ("bootstrap", &self.bootstrap),
            ("seed", &self.seed),
            ("threads", &self.threads),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        Ok(base.merge(flags))
    }
}

fn model(name: &str) -> CliResult<Model> {
    Model::from_name(name).ok_or_else(|| CliError::Usage(format!("unknown model {name:?} (m1, m2)")))
}

fn write_out(path: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p.display().to_string(), e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e)),
    }
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Fit { input, output, settings } => {
            let cfg = settings.resolve()?;
            let report = commands::cmd_fit(&input, &cfg)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            write_out(output.as_ref(), &json)?;
            if output.is_some() {
                print!("{}", report.summary());
            } else {
                eprint!("{}", report.summary());
            }
            Ok(if report.failed() { 1 } else { 0 })
        }
        Command::Simulate { model: m, n, gamma, censoring, seed, output } => {
            let gamma = if gamma == "auto" {
                None
            } else {
                Some(gamma.parse::<f64>().map_err(|_| CliError::Usage(format!("--gamma {gamma:?}: expected a number or auto")))?)
            };
            let args = SimulateArgs { model: model(&m)?, n, gamma, censoring, seed };
            let (data, comments) = commands::cmd_simulate(&args)?;
            let mut buf = Vec::new();
            csv_io::write_triples(&mut buf, &data, &comments).map_err(|e| CliError::io("csv", e))?;
            write_out(output.as_ref(), &String::from_utf8(buf).expect("csv is utf-8"))?;
            Ok(0)
        }
        Command::Table1 { replications, n, cells, output_dir, settings } => {
            let cfg = settings.resolve()?;
            let args = Table1Args { replications, n, cells: commands::parse_cells(cells.as_deref())?, seed: cfg.seed() };
            let (report, _) = commands::cmd_table1(&args, &cfg)?;
            let (csv_path, json_path) = commands::write_table1(&report, &output_dir)?;
            print!("{}", commands::table1_text(&report));
            println!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(0)
        }
        Command::CalibrateGamma { model: m, censoring, seed, pilot } => {
            let r = commands::cmd_calibrate(model(&m)?, censoring, seed, pilot)?;
            println!("{}", serde_json::to_string(&r).expect("report serializes"));
            Ok(0)
        }
    }
}

/// Parses arguments, runs the command, returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
