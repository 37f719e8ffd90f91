//! Run configuration: a TOML document plus command-line overrides.

use crate::error::CliError;
use igaodil::assembly::CollocationLayout;
use igaodil::geometry::GeometryMap;
use igaodil::gram::GramKind;
use igaodil::pipeline::InitialGuess;
use igaodil::problem::{Benchmark, BenchmarkParams};
use igaodil::solver::GnConfig;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    #[default]
    Solve,
    Convergence,
    OdilFd,
    Inverse,
    Sample,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Solve => "solve",
            CommandKind::Convergence => "convergence",
            CommandKind::OdilFd => "odil-fd",
            CommandKind::Inverse => "inverse",
            CommandKind::Sample => "sample",
        })
    }
}

/// Optional solver overrides; unset fields keep the command's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping_growth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping_max: Option<f64>,
}

impl SolverSettings {
    pub fn apply(&self, base: GnConfig) -> GnConfig {
        GnConfig {
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
            min_iterations: self.min_iterations.unwrap_or(base.min_iterations),
            step_tolerance: self.step_tolerance.unwrap_or(base.step_tolerance),
            loss_tolerance: self.loss_tolerance.unwrap_or(base.loss_tolerance),
            damping_initial: self.damping_initial.unwrap_or(base.damping_initial),
            damping_growth: self.damping_growth.unwrap_or(base.damping_growth),
            damping_max: self.damping_max.unwrap_or(base.damping_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSettings {
    pub degrees: Vec<usize>,
    pub elements: Vec<usize>,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            degrees: vec![2, 3],
            elements: vec![8, 16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseSettings {
    pub kappa_true: f64,
    pub kappa_init: f64,
    pub lambda: f64,
}

impl Default for InverseSettings {
    fn default() -> Self {
        let d = igaodil::inverse::InverseSetup::default();
        Self {
            kappa_true: d.kappa_true,
            kappa_init: d.kappa_init,
            lambda: d.lambda,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    /// Result document; standard output when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Table artifact (convergence rows or the κ history).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Sampled solution in physical coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export_solution: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: CommandKind,
    pub benchmark: String,
    pub degree: usize,
    /// Elements per dimension; grid nodes per dimension for `odil-fd`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements: Option<usize>,
    /// Collocation points per dimension; `collocation_factor · n` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collocation: Option<usize>,
    pub collocation_factor: usize,
    pub collocation_layout: String,
    pub gram: String,
    /// Output map; follows the benchmark when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    pub initial: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub seed: u64,
    pub solver: SolverSettings,
    pub convergence: ConvergenceSettings,
    pub inverse: InverseSettings,
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: CommandKind::Solve,
            benchmark: Benchmark::Poisson2d.name().to_string(),
            degree: 3,
            elements: None,
            collocation: None,
            collocation_factor: 2,
            collocation_layout: CollocationLayout::Midpoint.name().to_string(),
            gram: GramKind::Identity.name().to_string(),
            geometry: None,
            initial: "zero".to_string(),
            epsilon: None,
            alpha: None,
            kappa: None,
            seed: 0,
            solver: SolverSettings::default(),
            convergence: ConvergenceSettings::default(),
            inverse: InverseSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

pub const DEFAULT_SAMPLES: usize = 33;

fn parse_initial(s: &str) -> Result<InitialGuess, CliError> {
    match s {
        "zero" => Ok(InitialGuess::Zero),
        "exact" => Ok(InitialGuess::ExactInterpolant),
        other => Err(CliError::Config(format!(
            "unknown initial guess '{other}' (expected zero or exact)"
        ))),
    }
}

fn parse_geometry(s: &str) -> Result<GeometryMap, CliError> {
    match s {
        "identity" => Ok(GeometryMap::Identity(2)),
        "disk" => Ok(GeometryMap::SquareToDisk),
        "ball" => Ok(GeometryMap::CubeToBall),
        other => Err(CliError::Config(format!(
            "unknown geometry '{other}' (expected identity, disk or ball)"
        ))),
    }
}

fn positive(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Config(format!("{name} must be positive")));
    }
    Ok(v)
}

/// Parsed and checked view of a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub benchmark: Benchmark,
    pub params: BenchmarkParams,
    pub gram: GramKind,
    pub layout: CollocationLayout,
    pub initial: InitialGuess,
    pub geometry: GeometryMap,
    pub solver: GnConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn samples(&self) -> usize {
        self.output.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    /// Checks every field and converts names into library types.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let benchmark = Benchmark::from_str(&self.benchmark).map_err(|_| {
            let names: Vec<&str> = Benchmark::ALL.iter().map(|b| b.name()).collect();
            CliError::Config(format!(
                "unknown benchmark '{}' (expected one of {})",
                self.benchmark,
                names.join(", ")
            ))
        })?;
        positive("degree", self.degree)?;
        positive("collocation_factor", self.collocation_factor)?;
        if let Some(n) = self.elements {
            positive("elements", n)?;
        }
        if let Some(n) = self.collocation {
            positive("collocation", n)?;
        }
        for &p in &self.convergence.degrees {
            positive("convergence degree", p)?;
        }
        for &n in &self.convergence.elements {
            positive("convergence element count", n)?;
        }
        if let Some(s) = self.output.samples {
            if s < 2 {
                return Err(CliError::Config("samples must be at least 2".into()));
            }
        }
        let gram = GramKind::from_str(&self.gram).map_err(CliError::from_library_config)?;
        let layout = CollocationLayout::from_str(&self.collocation_layout)
            .map_err(CliError::from_library_config)?;
        let initial = parse_initial(&self.initial)?;
        let geometry = match &self.geometry {
            Some(g) => match parse_geometry(g)? {
                GeometryMap::Identity(_) => GeometryMap::Identity(benchmark.dim()),
                m => m,
            },
            None => default_geometry(benchmark),
        };
        if geometry.dim() != benchmark.dim() {
            return Err(CliError::Config(format!(
                "geometry '{}' does not match the {}D benchmark '{}'",
                self.geometry.as_deref().unwrap_or(""),
                benchmark.dim(),
                benchmark
            )));
        }
        let base = match self.command {
            CommandKind::Inverse => igaodil::inverse::default_inverse_config(),
            _ => GnConfig::default(),
        };
        let solver = self.solver.apply(base);
        solver.validate().map_err(CliError::from_library_config)?;
        Ok(Resolved {
            benchmark,
            params: BenchmarkParams {
                epsilon: self.epsilon,
                alpha: self.alpha,
                kappa: self.kappa,
            },
            gram,
            layout,
            initial,
            geometry,
            solver,
        })
    }
}

fn default_geometry(b: Benchmark) -> GeometryMap {
    match b {
        Benchmark::EjDisk => GeometryMap::SquareToDisk,
        Benchmark::Helmholtz3dBall => GeometryMap::CubeToBall,
        _ => GeometryMap::Identity(b.dim()),
    }
}
