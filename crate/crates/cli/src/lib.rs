//! Batch front end for constrained Helfrich shape optimization.
//!
//! Four commands share one configuration file and a few global flags:
//! `analyze`, `correct`, `minimize` and `replace`. Every command validates
//! its configuration before creating the output directory, writes its files
//! atomically and produces byte-identical output for identical input.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use helfrich_core::Error;
use thiserror::Error as ThisError;

pub mod commands;
pub mod config;
pub mod output;

pub use config::RunConfig;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("input mesh not found: {0}")]
    MeshNotFound(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    #[error("stationary: line search stalled after {0} accepted steps")]
    Stationary(usize),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MeshNotFound(_) | CliError::Config(_) => 2,
            CliError::Output(_) => 1,
            CliError::Stationary(_) => 5,
            CliError::Core(e) => match e {
                Error::OutOfRadius { .. } => 3,
                Error::DegenerateConstraints(_) => 4,
                Error::LineSearchStalled => 5,
                Error::NotAGraph | Error::MultiSheet(_) => 6,
                Error::Parse { .. }
                | Error::NonManifold(..)
                | Error::OpenBoundary(..)
                | Error::DegenerateFace(_)
                | Error::InvalidTopology(_)
                | Error::Disconnected(_)
                | Error::InvalidInput(_) => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "helfrich", version, about = "Constrained Helfrich energy tools for closed triangle meshes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Input mesh (OFF or OBJ).
    #[arg(long, global = true)]
    pub mesh: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Spontaneous curvature.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub h0: Option<f64>,

    #[arg(long, global = true)]
    pub area0: Option<f64>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    pub vol0: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Areas, volumes, energies, topology and regularity diagnostics.
    Analyze {
        /// Winding-number grid resolution.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Restore the target area and volume with a two-parameter flow.
    Correct,
    /// Constrained gradient descent of the Helfrich energy.
    Minimize {
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Replace a graphical patch by its clamped biharmonic graph.
    Replace {
        /// Patch centre as `x,y,z`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Restore area and volume away from the patch afterwards.
        #[arg(long)]
        correct: bool,
    },
}

/// Merges the configuration file with the command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if let Some(m) = &g.mesh {
        c.mesh = Some(m.clone());
    }
    if let Some(o) = &g.out {
        c.out = o.clone();
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(h) = g.h0 {
        c.h0 = h;
    }
    if let Some(a) = g.area0 {
        c.area0 = Some(a);
    }
    if let Some(v) = g.vol0 {
        c.vol0 = Some(v);
    }
    match &cli.command {
        Command::Analyze { grid } => {
            if let Some(n) = grid {
                c.analyze.grid = *n;
            }
        }
        Command::Correct => {}
        Command::Minimize { max_steps } => {
            if let Some(n) = max_steps {
                c.minimize.max_steps = *n;
            }
        }
        Command::Replace {
            center,
            rho,
            sigma,
            correct,
        } => {
            if let Some(p) = center {
                let [x, y, z] = p[..] else {
                    return Err(CliError::Config(format!("--center needs three coordinates, got {}", p.len())));
                };
                c.replace.center = Some([x, y, z]);
            }
            if let Some(r) = rho {
                c.replace.rho = *r;
            }
            if sigma.is_some() {
                c.replace.sigma = *sigma;
            }
            c.replace.correct |= correct;
        }
    }
    Ok(c)
}

/// Runs one command and returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let config = resolve_config(cli)?;
    config.validate()?;
    match cli.command {
        Command::Analyze { .. } => commands::analyze(&config),
        Command::Correct => commands::correct(&config),
        Command::Minimize { .. } => commands::minimize(&config),
        Command::Replace { .. } => commands::replace(&config),
    }
}

/// Caps the global thread pool from `HELFRICH_THREADS`.
pub fn init_threads() {
    if let Some(n) = std::env::var("HELFRICH_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            // a pool that already exists keeps its size
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
