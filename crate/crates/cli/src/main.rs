use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Leggett-type inequality tests: settings, bounds, simulated scans and
/// non-signaling audits. Angles are in degrees.
#[derive(Debug, Parser)]
#[command(name = "leggett", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Master seed (overrides any seed in a config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; a `<out>.manifest.json` is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Use exact model correlations instead of simulated counts.
    #[arg(long, global = true)]
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometryArg {
    Standard,
    Tetrahedron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    White,
    Colored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 22 interleaved points, −55°..55°, 18,000 pairs per setting.
    Wide,
    /// φ = ±30° at 72,000 pairs per setting.
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Leggett,
    Zero,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measurement settings for one separation angle, as JSON.
    Settings {
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long, value_enum, default_value_t = GeometryArg::Standard)]
        geometry: GeometryArg,
    },
    /// Leggett bound versus the noisy singlet, with violation summary.
    Bound {
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',')]
        phi: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Overrides the geometry's ξ.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long, value_enum, default_value_t = GeometryArg::Standard)]
        geometry: GeometryArg,
        #[arg(long, default_value_t = 0.984)]
        visibility: f64,
    },
    /// Exact quantum prediction of L_N on the chosen geometry.
    Predict {
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',')]
        phi: Vec<f64>,
        #[arg(long, value_enum, default_value_t = GeometryArg::Standard)]
        geometry: GeometryArg,
        #[arg(long, default_value_t = 0.984)]
        visibility: f64,
        #[arg(long, value_enum, default_value_t = NoiseArg::White)]
        noise: NoiseArg,
        /// Correlation model JSON file (overrides --visibility/--noise).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Simulated φ scan of L_N.
    Scan {
        /// Scan config JSON file.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Overrides the mean pairs per setting.
        #[arg(long)]
        mean_pairs: Option<f64>,
    },
    /// Maximal excess over the η-generalized bound, from a scan CSV.
    Eta {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        xi: f64,
        #[arg(long, default_value_t = 0.5)]
        eta_min: f64,
        #[arg(long, default_value_t = 1.0)]
        eta_max: f64,
        #[arg(long, default_value_t = 0.05)]
        eta_step: f64,
        /// Significance level for the summary line.
        #[arg(long, default_value_t = 3.65)]
        level: f64,
    },
    /// Marginal audits of a discrete non-signaling model.
    Audit {
        /// Model JSON file.
        #[arg(long, conflicts_with = "family")]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: Option<Family>,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 64)]
        lambda_samples: usize,
        #[arg(long, default_value_t = 3)]
        subdivisions: u32,
    },
    /// Geometric constant ξ of a set of difference directions.
    Xi {
        #[arg(long, value_enum, conflicts_with = "dirs")]
        geometry: Option<GeometryArg>,
        /// Directions as `x,y,z;x,y,z;...`.
        #[arg(long, allow_hyphen_values = true)]
        dirs: Option<String>,
        #[arg(long, default_value_t = leggett_core::geometry::DEFAULT_XI_RESOLUTION)]
        resolution: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(leggett_core::Error),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
            CliError::Json(e) => write!(f, "JSON error: {e}"),
        }
    }
}

impl From<leggett_core::Error> for CliError {
    fn from(e: leggett_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
