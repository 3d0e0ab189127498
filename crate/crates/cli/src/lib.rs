//! Command-line front end: TOML configs in, CSV/JSON artifacts plus a manifest out.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use npiv_core::estimators::{FitMode, Orthonormalization};
use npiv_core::sieve::SieveSpec;
use npiv_core::{NpivError, Result};

use crate::config::{load_config, missing, FitSection, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "npiv", version, about = "Sieve NPIV and series regression estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config file (a manifest from a previous run is accepted).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the base seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator to a sample CSV.
    Fit(FitArgs),
    /// Draw a sample from a synthetic design.
    Simulate,
    /// Monte Carlo rate study.
    Rates,
    /// Matrix concentration study of the empirical Gram.
    Concentration,
    /// Identifiability statistic and its Rayleigh-quotient check.
    Identifiability,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Simulate => "simulate",
            Command::Rates => "rates",
            Command::Concentration => "concentration",
            Command::Identifiability => "identifiability",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Npiv,
    Ls,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrthoArg {
    Empirical,
    Uniform,
}

/// Command-line overrides of the `[fit]` section.
#[derive(Debug, Default, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Basis for the endogenous regressor, e.g. `bspline:order=4,knots=5`.
    #[arg(long)]
    pub psi: Option<SieveSpec>,
    /// Basis for the instrument (or regressor in least-squares mode).
    #[arg(long)]
    pub b: Option<SieveSpec>,
    #[arg(long, value_enum)]
    pub orthonormalization: Option<OrthoArg>,
    /// Points per axis of the prediction grid.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Assumed smoothness p of the structural function; enables the basis smoothness warning
    #[arg(long)]
    pub smoothness: Option<f64>,
}

impl FitArgs {
    fn merge(&self, base: Option<FitSection>) -> FitSection {
        let base = base.unwrap_or_default();
        FitSection {
            input: self.input.clone().or(base.input),
            mode: self
                .mode
                .map(|m| match m {
                    ModeArg::Npiv => FitMode::Npiv,
                    ModeArg::Ls => FitMode::Ls,
                })
                .or(base.mode),
            psi: self.psi.clone().or(base.psi),
            b: self.b.clone().or(base.b),
            orthonormalization: self
                .orthonormalization
                .map(|o| match o {
                    OrthoArg::Empirical => Orthonormalization::Empirical,
                    OrthoArg::Uniform => Orthonormalization::Uniform,
                })
                .or(base.orthonormalization),
            grid_points: self.grid_points.or(base.grid_points),
            smoothness: self.smoothness.or(base.smoothness),
        }
    }
}

/// Input paths in a config are relative to the config file; the manifest records them absolute.
fn absolute_from(base: &Path, path: &Path) -> Result<PathBuf> {
    std::path::absolute(base.join(path))
        .map_err(|e| NpivError::Io(format!("{}: {e}", path.display())))
}

/// Runs one subcommand and returns the written paths (artifacts, then the manifest).
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let config_dir = cli
        .config
        .as_ref()
        .and_then(|p| p.parent())
        .map(Path::to_path_buf)
        .unwrap_or_default();
    if let Some(fit) = config.fit.as_mut() {
        fit.input = fit.input.take().map(|p| absolute_from(&config_dir, &p)).transpose()?;
    }
    if let Some(ident) = config.identifiability.as_mut() {
        ident.input = ident.input.take().map(|p| absolute_from(&config_dir, &p)).transpose()?;
    }
    let fit_args = match &cli.command {
        Command::Fit(args) => Some(FitArgs {
            input: args.input.as_ref().map(|p| absolute_from(Path::new(""), p)).transpose()?,
            psi: args.psi.clone(),
            b: args.b.clone(),
            ..*args
        }),
        _ => None,
    };
    let body = || -> Result<Vec<PathBuf>> {
        let (resolved, outputs) = match &cli.command {
            Command::Fit(_) => {
                let args = fit_args.as_ref().expect("fit arguments resolved above");
                commands::fit(args.merge(config.fit.clone()))?
            }
            Command::Simulate => commands::simulate(
                config.simulate.clone().ok_or_else(|| missing("simulate"))?,
                cli.seed,
            )?,
            Command::Rates => {
                commands::rates(config.rates.clone().ok_or_else(|| missing("rates"))?, cli.seed)?
            }
            Command::Concentration => commands::concentration(
                config.concentration.clone().ok_or_else(|| missing("concentration"))?,
                cli.seed,
            )?,
            Command::Identifiability => commands::identifiability(
                config.identifiability.clone().ok_or_else(|| missing("identifiability"))?,
                cli.seed,
            )?,
        };
        outputs.write(&cli.out, cli.command.name(), resolved)
    };
    match cli.threads {
        Some(t) => {
            if t == 0 {
                return Err(NpivError::Config("--threads: must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| NpivError::Config(format!("--threads: {e}")))?
                .install(body)
        }
        None => body(),
    }
}

/// Parses `args` (including the program name), runs, and maps the result to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("npiv {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
