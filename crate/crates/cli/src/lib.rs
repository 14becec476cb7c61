//! Command-line front end: argument parsing, dispatch and rendering.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod output;
pub mod presets;
#[cfg(test)]
mod tests;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};
pub use output::Output;

#[derive(Debug, Parser)]
#[command(name = "stochkit", version, about = "Monte Carlo, SDE simulation, pricing, calibration and forecasting")]
pub struct Cli {
    /// Root seed; every artifact is a function of it.
    #[arg(long, global = true, env = "STOCHKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the primary artifact here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crude Monte Carlo integration over [0,1]^d.
    Mc(commands::mc::Args),
    /// Deterministic, randomized and variance-reduced quadrature on [0,1].
    Quad(commands::quad::Args),
    /// Deterministic and randomized Euler / RK2 for ODEs.
    Ode(commands::ode::Args),
    /// Exact simulation of Wiener, Poisson and compound Poisson paths.
    Paths(commands::paths::Args),
    /// Euler–Maruyama schemes for jump-diffusion SDEs.
    Sde(commands::sde::Args),
    /// Monte Carlo prices of European and Asian payoffs.
    Price(commands::price::Args),
    /// Estimate model parameters from a (time, value) CSV series.
    Calibrate(commands::calibrate::Args),
    /// Forecast past the data horizon with prediction regions.
    Forecast(commands::forecast::Args),
    /// Run a named experiment preset.
    Study(commands::study::Args),
}

impl Command {
    fn default_format(&self) -> Format {
        match self {
            Command::Quad(_) | Command::Ode(_) | Command::Paths(_) | Command::Sde(_) | Command::Forecast(_) => Format::Csv,
            _ => Format::Json,
        }
    }
}

impl Cli {
    pub fn format(&self) -> Format {
        self.format.unwrap_or_else(|| self.command.default_format())
    }
}

/// Run the command, inside a pool of `--threads` workers when given.
pub fn execute(cli: &Cli) -> CliResult<Output> {
    match cli.threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        _ => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> CliResult<Output> {
    let seed = cli.seed;
    match &cli.command {
        Command::Mc(a) => commands::mc::run(a, seed),
        Command::Quad(a) => commands::quad::run(a, seed),
        Command::Ode(a) => commands::ode::run(a, seed),
        Command::Paths(a) => commands::paths::run(a, seed),
        Command::Sde(a) => commands::sde::run(a, seed),
        Command::Price(a) => commands::price::run(a, seed),
        Command::Calibrate(a) => commands::calibrate::run(a),
        Command::Forecast(a) => commands::forecast::run(a, seed),
        Command::Study(a) => commands::study::run(a, seed),
    }
}

/// Write the artifact and return what belongs on stdout.
///
/// JSON embeds any table. CSV writes the table; when it goes to `--out`,
/// the JSON summary is printed instead.
pub fn render(cli: &Cli, output: &Output) -> CliResult<String> {
    let primary = match cli.format() {
        Format::Json => output.json(),
        Format::Csv => output.csv(),
    };
    match &cli.out {
        None => Ok(primary),
        Some(path) => {
            std::fs::write(path, primary).map_err(|e| CliError::io(&path.display().to_string(), &e))?;
            Ok(match (cli.format(), &output.table) {
                (Format::Csv, Some(_)) => output.summary_json(),
                _ => String::new(),
            })
        }
    }
}

/// Parse, run and render; returns (exit code, stdout, stderr).
pub fn main_with_args<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    (if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { error::EXIT_USAGE } else { 0 }, e.to_string(), String::new())
                }
                _ => {
                    let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
                    (error::EXIT_USAGE, String::new(), CliError::usage(first).to_json())
                }
            };
        }
    };
    match execute(&cli).and_then(|o| render(&cli, &o)) {
        Ok(stdout) => (0, stdout, String::new()),
        Err(e) => (e.code, String::new(), e.to_json()),
    }
}

/// Read a file, mapping failures to the missing-file exit code.
pub(crate) fn read_file(path: &std::path::Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(&path.display().to_string(), &e))
}
