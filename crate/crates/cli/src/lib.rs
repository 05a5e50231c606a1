//! The `ladder` command-line front end: scenario loading, report commands
//! and plot-ready artifact emission.
//!
//! Exit codes: 0 ok, 1 input error, 2 certificate failure (report still
//! emitted), 3 consistency-suite failure.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ladder_core::scenario::ScenarioFile;
use ladder_core::LadderError;

mod commands;
mod output;

pub use output::fmt_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_ERGODIC: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LADDER_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ladder", version, about = "Maturity-ladder debt dynamics: metrics, simulation, optimization")]
pub struct Cli {
    /// Scenario file (TOML). The bundled baseline scenario when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true, value_name = "DIR", env = OUT_DIR_ENV, default_value = "ladder-out")]
    pub out: PathBuf,

    /// Master seed; overrides the scenario's `simulation.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Format of the report printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Start {
    /// Empty ladder, drivers at their means.
    Zero,
    /// Ladder at the invariant mean state.
    Stationary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state and invariant metrics with the ergodicity certificate.
    Metrics,
    /// Monte Carlo ensemble: fan bands, time averages and a summary.
    Simulate {
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long, value_enum, default_value_t = Start::Zero)]
        initial: Start,
    },
    /// Optimal allocation over a grid of rollover caps.
    Frontier {
        /// Rollover caps separated by ':' or ','.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "step")]
        grid: Option<String>,
        /// Build the grid step, 2·step, …, up to --max.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 0.5, requires = "step")]
        max: f64,
        /// invariant_interest, invariant_debt, cost_ratio or deterministic_wac.
        #[arg(long)]
        objective: Option<String>,
    },
    /// Cost ratio as a function of the rate/deficit correlation.
    SweepRho {
        /// Correlation values separated by ':' or ','.
        #[arg(long, allow_hyphen_values = true, default_value = "-0.5:-0.25:0:0.25:0.5")]
        values: String,
        /// Add a warm-started Monte Carlo estimate with this many paths.
        #[arg(long)]
        mc_paths: Option<usize>,
        #[arg(long)]
        mc_horizon: Option<usize>,
        #[arg(long)]
        mc_burn_in: Option<usize>,
    },
    /// Internal-consistency suite.
    Validate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<LadderError> for CliError {
    fn from(err: LadderError) -> Self {
        let code = match err {
            LadderError::NotErgodic { .. }
            | LadderError::ClosedFormInapplicable { .. }
            | LadderError::Divergent { .. } => EXIT_NOT_ERGODIC,
            LadderError::Internal(_) => EXIT_VALIDATION,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn load_scenario(path: Option<&Path>) -> CliResult<ScenarioFile> {
    match path {
        Some(p) => ScenarioFile::load(p).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => Ok(ScenarioFile::baseline()),
    }
}

/// Run one parsed invocation, writing the report to `stdout`. Returns the
/// exit code; errors carry their own.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<i32> {
    let scenario = load_scenario(cli.config.as_deref())?;
    match &cli.command {
        Command::Metrics => commands::metrics(&scenario, cli.format, stdout),
        Command::Simulate {
            paths,
            horizon,
            burn_in,
            initial,
        } => commands::simulate(
            &scenario,
            &commands::SimulateArgs {
                paths: *paths,
                horizon: *horizon,
                burn_in: *burn_in,
                initial: *initial,
                seed: cli.seed,
            },
            &cli.out,
            cli.format,
            stdout,
        ),
        Command::Frontier {
            grid,
            step,
            max,
            objective,
        } => {
            let caps = match (grid, step) {
                (Some(g), _) => parse_list(g)?,
                (None, Some(s)) => step_grid(*s, *max)?,
                (None, None) => scenario
                    .optimization
                    .as_ref()
                    .and_then(|o| o.grid.clone())
                    .unwrap_or_default(),
            };
            commands::frontier(&scenario, caps, objective.as_deref(), &cli.out, cli.format, stdout)
        }
        Command::SweepRho {
            values,
            mc_paths,
            mc_horizon,
            mc_burn_in,
        } => {
            let rhos = parse_list(values)?;
            commands::sweep_rho(
                &scenario,
                &rhos,
                &commands::SweepArgs {
                    paths: *mc_paths,
                    horizon: *mc_horizon,
                    burn_in: *mc_burn_in,
                    seed: cli.seed,
                },
                &cli.out,
                cli.format,
                stdout,
            )
        }
        Command::Validate => commands::validate(&scenario, cli.format, stdout),
    }
}

/// Parse, run and report; the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// Numbers separated by ':' or ','; empty input yields an empty list.
pub fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split([':', ','])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::input(format!("not a number: {t:?}")))
        })
        .collect()
}

/// `max, max − step, …` down to the last positive multiple of `step`.
pub fn step_grid(step: f64, max: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && max.is_finite()) {
        return Err(CliError::input(format!("--step must be positive, got {step}")));
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((1..=n).rev().map(|k| k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_accept_both_separators() {
        assert_eq!(parse_list("-0.5:-0.25,0").unwrap(), vec![-0.5, -0.25, 0.0]);
        assert!(parse_list("").unwrap().is_empty());
        assert!(parse_list("0.1:x").is_err());
    }

    #[test]
    fn step_grid_covers_half_open_interval() {
        let g = step_grid(0.01, 0.5).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.5);
        assert_eq!(*g.last().unwrap(), 0.01);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn error_codes_follow_contract() {
        assert_eq!(CliError::from(LadderError::NotErgodic { phi_abs: 1.2 }).code, EXIT_NOT_ERGODIC);
        assert_eq!(CliError::from(LadderError::Infeasible("x".into())).code, EXIT_INPUT);
        assert_eq!(CliError::from(LadderError::Internal("x".into())).code, EXIT_VALIDATION);
    }
}
