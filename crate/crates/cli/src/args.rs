//! Command-line flags and their merge into a [`RunConfig`].

use crate::config::{CommandKind, RunConfig};
use crate::error::CliError;
use clap::{ArgAction, Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "igaodil", version, about = "IGA-ODIL collocation solvers with sparse Gauss-Newton")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one benchmark and report its error.
    Solve(Overrides),
    /// Mesh sweep with observed convergence rates.
    Convergence(Overrides),
    /// Finite-difference ODIL baseline for the Poisson benchmark.
    OdilFd(Overrides),
    /// Recover the Helmholtz wavenumber from observations.
    Inverse(Overrides),
    /// Solve and export the field sampled in physical coordinates.
    Sample(Overrides),
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Degrees for `convergence`.
    #[arg(long, value_delimiter = ',')]
    pub degrees: Option<Vec<usize>>,
    /// Elements per dimension (a list for `convergence`, grid nodes for `odil-fd`).
    #[arg(long, value_delimiter = ',')]
    pub elements: Option<Vec<usize>>,
    /// Collocation points per dimension (fixes N_c in `convergence`).
    #[arg(long)]
    pub collocation: Option<usize>,
    /// N_c = factor · n when --collocation is not given.
    #[arg(long)]
    pub collocation_factor: Option<usize>,
    #[arg(long, value_parser = ["midpoint", "linspace"])]
    pub collocation_layout: Option<String>,
    #[arg(long, value_parser = ["identity", "h1"])]
    pub gram: Option<String>,
    #[arg(long, value_parser = ["identity", "disk", "ball"])]
    pub geometry: Option<String>,
    /// Initial interior coefficients.
    #[arg(long, value_parser = ["zero", "exact"])]
    pub initial: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub kappa_true: Option<f64>,
    #[arg(long)]
    pub kappa_init: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub min_iters: Option<usize>,
    #[arg(long)]
    pub step_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Result document (JSON); standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table artifact; defaults to the result path with a .csv extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub export_solution: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
}

impl Command {
    fn split(self) -> (CommandKind, Overrides) {
        match self {
            Command::Solve(o) => (CommandKind::Solve, o),
            Command::Convergence(o) => (CommandKind::Convergence, o),
            Command::OdilFd(o) => (CommandKind::OdilFd, o),
            Command::Inverse(o) => (CommandKind::Inverse, o),
            Command::Sample(o) => (CommandKind::Sample, o),
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl Overrides {
    pub fn apply(self, cfg: &mut RunConfig) -> Result<(), CliError> {
        let convergence = cfg.command == CommandKind::Convergence;
        set(&mut cfg.benchmark, self.benchmark);
        if convergence {
            match (self.degrees, self.degree) {
                (Some(d), _) => cfg.convergence.degrees = d,
                (None, Some(p)) => cfg.convergence.degrees = vec![p],
                (None, None) => {}
            }
            set(&mut cfg.convergence.elements, self.elements);
        } else {
            if self.degrees.is_some() {
                return Err(CliError::Config(
                    "--degrees applies only to the convergence command".into(),
                ));
            }
            set(&mut cfg.degree, self.degree);
            match self.elements.as_deref() {
                None => {}
                Some([n]) => cfg.elements = Some(*n),
                Some(_) => {
                    return Err(CliError::Config(format!(
                        "{} takes a single --elements value",
                        cfg.command
                    )))
                }
            }
        }
        set_opt(&mut cfg.collocation, self.collocation);
        set(&mut cfg.collocation_factor, self.collocation_factor);
        set(&mut cfg.collocation_layout, self.collocation_layout);
        set(&mut cfg.gram, self.gram);
        set_opt(&mut cfg.geometry, self.geometry);
        set(&mut cfg.initial, self.initial);
        set_opt(&mut cfg.epsilon, self.epsilon);
        set_opt(&mut cfg.alpha, self.alpha);
        set_opt(&mut cfg.kappa, self.kappa);
        set(&mut cfg.inverse.kappa_true, self.kappa_true);
        set(&mut cfg.inverse.kappa_init, self.kappa_init);
        set(&mut cfg.inverse.lambda, self.lambda);
        set_opt(&mut cfg.solver.max_iterations, self.max_iters);
        set_opt(&mut cfg.solver.min_iterations, self.min_iters);
        set_opt(&mut cfg.solver.step_tolerance, self.step_tol);
        set(&mut cfg.seed, self.seed);
        set_opt(&mut cfg.output.out, self.out);
        set_opt(&mut cfg.output.csv, self.csv);
        set_opt(&mut cfg.output.export_solution, self.export_solution);
        set_opt(&mut cfg.output.samples, self.samples);
        Ok(())
    }
}

/// Loads the config file (if any) and applies the subcommand's flags.
pub fn build_config(cli: Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    match cli.command {
        Some(cmd) => {
            let (kind, overrides) = cmd.split();
            cfg.command = kind;
            overrides.apply(&mut cfg)?;
        }
        None if cli.config.is_none() => {
            return Err(CliError::Config(
                "no command given (use solve, convergence, odil-fd, inverse or sample)".into(),
            ))
        }
        None => {}
    }
    Ok(cfg)
}
