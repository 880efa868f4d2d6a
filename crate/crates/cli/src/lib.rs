//! Experiment harness around `dotcavity-core`.
//!
//! `dotcavity <experiment> --config <path> [--model analytic|effective|full]
//! [--strict] [--out <path>] [--format json|csv]`
//!
//! Data files hold results only. Timing, the config echo and the
//! photon-cutoff guard go to `<out>.manifest.json` next to them.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use dotcavity_core::gates::ModelLevel;
use dotcavity_core::model::ApproximationReport;
use dotcavity_core::propagation::Scheme;
use serde::Serialize;

use config::{parse_config, ConfigError, ExperimentConfig, Format};
use experiments::{Experiment, GuardResult, Request};
use output::to_json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_APPROXIMATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelArg {
    Analytic,
    Effective,
    Full,
}

impl From<ModelArg> for ModelLevel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Analytic => ModelLevel::Analytic,
            ModelArg::Effective => ModelLevel::EffectiveNumeric,
            ModelArg::Full => ModelLevel::FullNumeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "dotcavity", version, about = "Dot-cavity conditional-phase gate experiments")]
pub struct Cli {
    /// params, truth-table, photon-sweep, compare, parallel, decoherence or single-qubit
    pub experiment: Experiment,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `model_level` from the config. `compare` defaults to
    /// `full`.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Fail with exit code 2 if any approximation check warns.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Photon numbers for photon-sweep as `lo..hi`, inclusive; overrides
    /// `photon_sweep`.
    #[arg(long)]
    pub n: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("approximation checks failed under --strict:\n{0}")]
    Approximation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("photon-cutoff guard failed: drift {drift:e} between cutoffs {cutoff} and {check_cutoff}")]
    Guard { drift: f64, cutoff: usize, check_cutoff: usize },
    #[error("I/O failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Approximation(_) => EXIT_APPROXIMATION,
            CliError::Numerical(_) | CliError::Guard { .. } => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Serialize)]
struct Integrator {
    scheme: Scheme,
    steps_per_period: usize,
    lindblad_steps_per_period: usize,
}

#[derive(Serialize)]
pub struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: Experiment,
    model_level: ModelLevel,
    format: Format,
    data_file: Option<String>,
    config: &'a ExperimentConfig,
    photon_numbers: &'a [usize],
    integrator: Integrator,
    approximations: &'a ApproximationReport,
    guard: GuardResult,
    wall_clock_s: f64,
}

/// `lo..hi` or a single number.
fn parse_range(s: &str) -> Option<Vec<usize>> {
    match s.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (lo.trim().parse::<usize>().ok()?, hi.trim().parse::<usize>().ok()?);
            (lo <= hi).then(|| (lo..=hi).collect())
        }
        None => Some(vec![s.trim().parse().ok()?]),
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn numerical(e: dotcavity_core::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    output::write_file(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs one invocation; returns the path of the data file, if one was
/// written.
pub fn run(cli: &Cli) -> Result<Option<PathBuf>, CliError> {
    let started = Instant::now();
    let config = parse_config(&cli.config)?;
    let model_level = match (cli.model, cli.experiment) {
        (Some(m), _) => m.into(),
        (None, Experiment::Compare) => ModelLevel::FullNumeric,
        (None, _) => config.model_level,
    };
    let format = match cli.format {
        Some(FormatArg::Json) => Format::Json,
        Some(FormatArg::Csv) => Format::Csv,
        None => config.format.unwrap_or(cli.experiment.default_format()),
    };
    let photon_numbers = match &cli.n {
        Some(raw) => parse_range(raw).ok_or_else(|| CliError::Usage(format!("--n must be \"lo..hi\", got \"{raw}\"")))?,
        None => config.photon_sweep.linear().into_iter().map(|n| n as usize).collect(),
    };
    if let Some(&n) = photon_numbers.iter().find(|&&n| n > config.photon_cutoff) {
        return Err(CliError::Usage(format!("photon number {n} exceeds photon_cutoff ({})", config.photon_cutoff)));
    }
    let out = cli.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from));
    let request = Request { experiment: cli.experiment, config, model_level, photon_numbers };

    // anything the solver rejects is a problem with the inputs
    let schedule = request.schedule(request.config.photon_cutoff).map_err(|e| CliError::Usage(e.to_string()))?;
    let approximations = request.approximations(&schedule).map_err(|e| CliError::Usage(e.to_string()))?;
    if approximations.has_warnings() {
        let lines: Vec<String> = approximations
            .entries
            .iter()
            .filter(|e| e.status == dotcavity_core::model::ApproxStatus::Warn)
            .map(|e| format!("  {}: ratio {:.3e} exceeds {}", e.condition, e.ratio, approximations.threshold))
            .collect();
        if cli.strict {
            return Err(CliError::Approximation(lines.join("\n")));
        }
        eprintln!("warning: approximation checks:\n{}", lines.join("\n"));
    }

    let outcome = request.run(&schedule, &approximations).map_err(numerical)?;
    let data = match format {
        Format::Json => outcome.json,
        Format::Csv => outcome.csv.map(|c| c.render()),
    }
    .ok_or_else(|| CliError::Usage(format!("{} has no {:?} output", cli.experiment, format).to_lowercase()))?;

    let manifest = RunManifest {
        tool: "dotcavity",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cli.experiment,
        model_level,
        format,
        data_file: out.as_ref().filter(|_| outcome.guard.passed).map(|p| p.display().to_string()),
        config: &request.config,
        photon_numbers: &request.photon_numbers,
        integrator: Integrator {
            scheme: request.config.scheme,
            steps_per_period: request.config.steps_per_period,
            lindblad_steps_per_period: request.config.lindblad_steps_per_period,
        },
        approximations: &approximations,
        guard: outcome.guard,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let manifest = to_json(&manifest);
    let guard = outcome.guard;
    match &out {
        Some(path) => {
            // a failed guard leaves only the manifest behind
            if guard.passed {
                write(path, &data)?;
            }
            write(&manifest_path(path), &manifest)?;
        }
        None => {
            if guard.passed {
                print!("{data}");
            }
            eprint!("{manifest}");
        }
    }
    if !guard.passed {
        return Err(CliError::Guard { drift: guard.drift, cutoff: guard.cutoff, check_cutoff: guard.check_cutoff });
    }
    Ok(out.filter(|_| guard.passed))
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
