use crate::config::{CommandKind, Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{
    convergence_csv, finite, kappa_history_csv, samples_csv, write_file, ConvergenceRow,
    ConvergenceSummary, DofCounts, ObservedRate, Recovered, RunResult,
};
use igaodil::assembly::CollocationSet;
use igaodil::geometry::sample_mapped_grid;
use igaodil::gram::{build_gram, GramKind, GramOperator};
use igaodil::inverse::{solve_inverse, InverseSetup};
use igaodil::metrics::observed_rate;
use igaodil::odil_fd::odil_solve;
use igaodil::pipeline::{solve_forward, ForwardSetup, ForwardSolution};
use igaodil::problem::{make_benchmark, Benchmark};
use igaodil::solver::GnReport;
use std::io::Write;
use std::path::PathBuf;

const DEFAULT_ELEMENTS: usize = 20;
const DEFAULT_FD_NODES: usize = 100;

/// Files produced next to the result document.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    pub table: Option<Vec<u8>>,
    pub samples: Option<Vec<u8>>,
}

fn record_report(result: &mut RunResult, report: &GnReport) {
    result.initial_loss = finite(report.initial_loss);
    result.loss_history = report.loss_history.iter().map(|&l| finite(l)).collect();
    result.iterations = Some(report.iterations);
    result.stop_reason = Some(format!("{:?}", report.stop_reason));
    result.wall_seconds = report.wall_seconds;
}

fn record_forward(result: &mut RunResult, sol: &ForwardSolution) {
    record_report(result, &sol.report);
    result.l2_error = sol.l2_error.and_then(finite);
    result.h1_seminorm_error = sol.h1_seminorm_error.and_then(finite);
    result.dofs = Some(DofCounts {
        interior: sol.n_interior,
        total: sol.n_total,
    });
    result.collocation_points = Some(sol.n_collocation);
    result.jacobian_nnz = Some(sol.jacobian_nnz);
}

fn forward_setup(cfg: &RunConfig, res: &Resolved, degree: usize, n: usize) -> ForwardSetup {
    ForwardSetup {
        degree,
        elements: n,
        collocation: cfg.collocation.unwrap_or(cfg.collocation_factor * n),
        gram: res.gram,
        layout: res.layout,
        initial: res.initial,
    }
}

fn solve(cfg: &RunConfig, res: &Resolved, export: bool) -> Result<(RunResult, Artifacts), CliError> {
    let problem = make_benchmark(res.benchmark, &res.params)?;
    let n = cfg.elements.unwrap_or(DEFAULT_ELEMENTS);
    let sol = solve_forward(&problem, &forward_setup(cfg, res, cfg.degree, n), &res.solver)?;
    let mut result = RunResult::new(cfg.clone());
    record_forward(&mut result, &sol);
    let mut artifacts = Artifacts::default();
    if export {
        let rows = sample_mapped_grid(res.geometry, &sol.field, cfg.samples())?;
        artifacts.samples = Some(samples_csv(&rows));
    }
    Ok((result, artifacts))
}

fn convergence(cfg: &RunConfig, res: &Resolved) -> Result<(RunResult, Artifacts), CliError> {
    let ns = &cfg.convergence.elements;
    if ns.len() < 2 {
        return Err(CliError::Config(
            "convergence needs at least two element counts".into(),
        ));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "convergence element counts must be strictly increasing".into(),
        ));
    }
    if cfg.convergence.degrees.is_empty() {
        return Err(CliError::Config("convergence needs at least one degree".into()));
    }
    let problem = make_benchmark(res.benchmark, &res.params)?;
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    let mut seconds = 0.0;
    for &p in &cfg.convergence.degrees {
        let mut errors = Vec::new();
        for &n in ns {
            let setup = forward_setup(cfg, res, p, n);
            let sol = solve_forward(&problem, &setup, &res.solver)?;
            seconds += sol.report.wall_seconds;
            errors.push(sol.l2_error);
            rows.push(ConvergenceRow {
                degree: p,
                elements: n,
                collocation: setup.collocation,
                n_interior: sol.n_interior,
                iterations: sol.report.iterations,
                solver_seconds: sol.report.wall_seconds,
                l2_error: sol.l2_error.and_then(finite),
                h1_seminorm_error: sol.h1_seminorm_error.and_then(finite),
                sqrt_loss: finite(sol.report.final_loss().sqrt()),
            });
        }
        let rate = match errors.into_iter().collect::<Option<Vec<f64>>>() {
            Some(e) => finite(observed_rate(&e, &hs)?),
            None => None,
        };
        rates.push(ObservedRate { degree: p, rate });
    }
    let summary = ConvergenceSummary { rows, rates };
    let mut result = RunResult::new(cfg.clone());
    result.wall_seconds = seconds;
    let artifacts = Artifacts {
        table: Some(convergence_csv(&summary)),
        samples: None,
    };
    result.convergence = Some(summary);
    Ok((result, artifacts))
}

fn odil(cfg: &RunConfig, res: &Resolved) -> Result<(RunResult, Artifacts), CliError> {
    if res.benchmark != Benchmark::Poisson2d {
        return Err(CliError::Config(
            "odil-fd supports only the poisson2d benchmark".into(),
        ));
    }
    let problem = make_benchmark(res.benchmark, &res.params)?;
    let n = cfg.elements.unwrap_or(DEFAULT_FD_NODES);
    if n < 3 {
        return Err(CliError::Config(format!(
            "odil-fd needs at least 3 nodes per dimension, got {n}"
        )));
    }
    let m = n - 2;
    let gram = match res.gram {
        GramKind::Identity => GramOperator::identity(m * m),
        kind => {
            let h = 1.0 / (n - 1) as f64;
            let axis: Vec<f64> = (1..=m).map(|i| i as f64 * h).collect();
            build_gram(kind, &CollocationSet::from_axis(axis, 2)?)?
        }
    };
    let sol = odil_solve(n, &problem, &gram, &res.solver)?;
    let mut result = RunResult::new(cfg.clone());
    record_report(&mut result, &sol.report);
    result.l2_error = sol.l2_error.and_then(finite);
    result.dofs = Some(DofCounts {
        interior: sol.grid.n_interior(),
        total: n * n,
    });
    result.collocation_points = Some(sol.grid.n_interior());
    Ok((result, Artifacts::default()))
}

fn inverse(cfg: &RunConfig, res: &Resolved) -> Result<(RunResult, Artifacts), CliError> {
    if res.gram != GramKind::Identity {
        return Err(CliError::Config(
            "the inverse solver supports only the identity gram".into(),
        ));
    }
    let defaults = InverseSetup::default();
    let elements = cfg.elements.unwrap_or(defaults.elements);
    let collocation = match (cfg.collocation, cfg.elements) {
        (Some(c), _) => c,
        (None, None) => defaults.collocation,
        (None, Some(n)) => cfg.collocation_factor * n,
    };
    let setup = InverseSetup {
        kappa_true: cfg.inverse.kappa_true,
        kappa_init: cfg.inverse.kappa_init,
        lambda: cfg.inverse.lambda,
        degree: cfg.degree,
        elements,
        collocation,
        initial: res.initial,
    };
    let sol = solve_inverse(&setup, &res.solver)?;
    let mut result = RunResult::new(cfg.clone());
    record_report(&mut result, &sol.report);
    result.l2_error = finite(sol.l2_error);
    let history: Vec<f64> = sol.kappa_history[1..].to_vec();
    let artifacts = Artifacts {
        table: Some(kappa_history_csv(&history, &result.loss_history)),
        samples: None,
    };
    result.dofs = Some(DofCounts {
        interior: sol.n_interior,
        total: sol.field.coefficients().len(),
    });
    result.collocation_points = Some(collocation * collocation);
    result.recovered = Some(Recovered {
        kappa: finite(sol.kappa),
        kappa_history: history,
    });
    Ok((result, artifacts))
}

/// Runs the configured command without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<(RunResult, Artifacts), CliError> {
    let res = cfg.resolve()?;
    log::info!("running {} on {}", cfg.command, res.benchmark);
    match cfg.command {
        CommandKind::Solve => solve(cfg, &res, cfg.output.export_solution.is_some()),
        CommandKind::Sample => {
            if cfg.output.export_solution.is_none() {
                return Err(CliError::Config(
                    "sample needs --export-solution <path>".into(),
                ));
            }
            solve(cfg, &res, true)
        }
        CommandKind::Convergence => convergence(cfg, &res),
        CommandKind::OdilFd => odil(cfg, &res),
        CommandKind::Inverse => inverse(cfg, &res),
    }
}

fn table_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.output
        .csv
        .clone()
        .or_else(|| cfg.output.out.as_ref().map(|p| p.with_extension("csv")))
}

/// Executes and writes the result document and artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunResult, CliError> {
    let (result, artifacts) = execute(cfg)?;
    let json = result.to_json();
    match &cfg.output.out {
        Some(p) => write_file(p, json.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(json.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
    }
    if let (Some(table), Some(path)) = (&artifacts.table, table_path(cfg)) {
        write_file(&path, table)?;
    }
    if let (Some(samples), Some(path)) = (&artifacts.samples, &cfg.output.export_solution) {
        write_file(path, samples)?;
    }
    Ok(result)
}
