//! End-to-end forward solve: spaces, collocation, boundary elimination,
//! Gauss–Newton and error measurement.

use crate::assembly::{apply_dirichlet, CollocationLayout};
use crate::error::Result;
use crate::gram::{build_gram, GramKind};
use crate::metrics::error_report;
use crate::problem::PdeProblem;
use crate::solver::{gauss_newton, GnConfig, GnReport};
use crate::spline::{SplineSpace1D, TensorSplineField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardSetup {
    pub degree: usize,
    /// Elements per dimension.
    pub elements: usize,
    /// Collocation points per dimension.
    pub collocation: usize,
    pub gram: GramKind,
    pub layout: CollocationLayout,
    pub initial: InitialGuess,
}

impl ForwardSetup {
    pub fn new(degree: usize, elements: usize, collocation: usize) -> Self {
        Self {
            degree,
            elements,
            collocation,
            gram: GramKind::Identity,
            layout: CollocationLayout::Midpoint,
            initial: InitialGuess::Zero,
        }
    }
}

/// Starting interior coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialGuess {
    #[default]
    Zero,
    /// Greville interpolant of the exact solution (debugging aid).
    ExactInterpolant,
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub field: TensorSplineField,
    pub report: GnReport,
    pub l2_error: Option<f64>,
    pub h1_seminorm_error: Option<f64>,
    pub n_interior: usize,
    pub n_total: usize,
    pub n_collocation: usize,
    pub jacobian_nnz: usize,
}

pub fn solve_forward(
    problem: &PdeProblem,
    setup: &ForwardSetup,
    cfg: &GnConfig,
) -> Result<ForwardSolution> {
    let space = SplineSpace1D::uniform(setup.degree, setup.elements, 0.0, 1.0)?;
    let spaces = vec![space; problem.dim];
    let colloc = setup.layout.build(setup.collocation, problem.dim)?;
    let dofs = apply_dirichlet(problem, &spaces)?;
    let gram = build_gram(setup.gram, &colloc)?;
    let init = match (setup.initial, &problem.exact) {
        (InitialGuess::Zero, _) => dofs.initial_field(&spaces)?,
        (InitialGuess::ExactInterpolant, Some(exact)) => {
            let full = TensorSplineField::interpolate(spaces.clone(), |x| exact(x))?;
            dofs.field_with_interior(&spaces, &dofs.interior_of(&full))?
        }
        (InitialGuess::ExactInterpolant, None) => {
            return Err(crate::error::Error::InvalidParameter(
                "an exact-interpolant start needs an exact solution".into(),
            ))
        }
    };
    let jacobian_nnz = crate::assembly::assemble(problem, &init, &colloc, &dofs)?
        .jacobian
        .nnz();
    let (field, report) = gauss_newton(problem, &init, &colloc, &dofs, &gram, cfg)?;
    let (l2_error, h1_seminorm_error) = match &problem.exact {
        Some(exact) => {
            let grad = problem
                .exact_gradient
                .as_ref()
                .map(|g| g.as_ref() as &(dyn Fn(&[f64]) -> Vec<f64> + Sync));
            let rep = error_report(&field, exact.as_ref(), grad)?;
            (Some(rep.l2_error), rep.h1_seminorm_error)
        }
        None => (None, None),
    };
    Ok(ForwardSolution {
        field,
        report,
        l2_error,
        h1_seminorm_error,
        n_interior: dofs.n_interior(),
        n_total: dofs.n_total(),
        n_collocation: colloc.len(),
        jacobian_nnz,
    })
}
