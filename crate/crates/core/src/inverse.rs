//! Joint state/parameter Gauss–Newton for the inverse Helmholtz problem
//! `−Δu + κ²u = f` with unknown wavenumber `κ`.
//!
//! The unknown vector is `θ = [c_int; κ]`. The residual stacks the PDE rows
//! and the data misfit `√λ (u_c − u_obs)`; `∂R/∂κ = 2κ u_c` is the only dense
//! Jacobian column, and the step solve keeps it in a bordered structure.

use crate::assembly::{
    apply_dirichlet, assemble_with_values, uniform_collocation, CollocationSet, DofMap,
    ResidualSystem,
};
use crate::error::{Error, Result};
use crate::gram::GramOperator;
use crate::linalg::{dot, CsrMatrix, SparseCholesky};
use crate::metrics::error_report;
use crate::pipeline::InitialGuess;
use crate::problem::{Operator, OperatorCoefficients, PdeProblem, ScalarFn};
use crate::solver::{minimize, GnConfig, GnReport, ResidualModel, StepSystem};
use crate::spline::{SplineSpace1D, TensorSplineField};
use std::f64::consts::PI;
use std::sync::Arc;

/// Noiseless samples of `sin(κ_true π x) sin(κ_true π y)`.
pub fn synthesize_observations(kappa_true: f64, points: &[Vec<f64>]) -> Vec<f64> {
    points
        .iter()
        .map(|p| (kappa_true * PI * p[0]).sin() * (kappa_true * PI * p[1]).sin())
        .collect()
}

/// Data of the identification problem: forcing built from `κ_true`,
/// observations at the collocation points and the misfit weight `λ`.
#[derive(Clone)]
pub struct InverseProblem {
    kappa_true: f64,
    lambda: f64,
    forcing: ScalarFn,
    exact: ScalarFn,
    observations: Vec<f64>,
}

impl InverseProblem {
    pub fn new(kappa_true: f64, lambda: f64, colloc: &CollocationSet) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !kappa_true.is_finite() {
            return Err(Error::InvalidParameter("kappa_true must be finite".into()));
        }
        if colloc.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: colloc.dim(),
            });
        }
        let k = kappa_true;
        let exact: ScalarFn =
            Arc::new(move |x: &[f64]| (k * PI * x[0]).sin() * (k * PI * x[1]).sin());
        let scale = 2.0 * k * k * PI * PI + k * k;
        let e = exact.clone();
        let forcing: ScalarFn = Arc::new(move |x: &[f64]| scale * e(x));
        Ok(Self {
            kappa_true,
            lambda,
            forcing,
            exact,
            observations: synthesize_observations(kappa_true, &colloc.points()),
        })
    }

    pub fn kappa_true(&self) -> f64 {
        self.kappa_true
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn exact(&self) -> &ScalarFn {
        &self.exact
    }

    /// PDE `−Δu + κ²u − f` at a given `κ`, with the manufactured boundary data.
    pub fn pde(&self, kappa: f64) -> PdeProblem {
        let op = Operator::Custom(OperatorCoefficients {
            laplacian: -1.0,
            advection_x: 0.0,
            reaction: kappa * kappa,
            cubic: 0.0,
            forcing_sign: -1.0,
        });
        PdeProblem {
            benchmark: None,
            dim: 2,
            operator: op,
            forcing: self.forcing.clone(),
            dirichlet: self.exact.clone(),
            exact: Some(self.exact.clone()),
            exact_gradient: None,
            geometry: crate::geometry::GeometryMap::Identity(2),
        }
    }

    fn misfit_operator(&self) -> PdeProblem {
        let s = self.lambda.sqrt();
        let mut p = self.pde(0.0);
        p.operator = Operator::Custom(OperatorCoefficients {
            laplacian: 0.0,
            advection_x: 0.0,
            reaction: s,
            cubic: 0.0,
            forcing_sign: 0.0,
        });
        p
    }
}

/// Stacked residual `[R_pde; √λ(u_c − u_obs)]` and its Jacobian with respect
/// to `[c_int; κ]`. The κ column is stored on PDE rows only.
pub fn assemble_inverse(
    inv: &InverseProblem,
    field: &TensorSplineField,
    kappa: f64,
    colloc: &CollocationSet,
    dofs: &DofMap,
) -> Result<ResidualSystem> {
    if !kappa.is_finite() {
        return Err(Error::NonFinite("kappa"));
    }
    if inv.observations.len() != colloc.len() {
        return Err(Error::DimensionMismatch {
            expected: inv.observations.len(),
            got: colloc.len(),
        });
    }
    let (pde, values) = assemble_with_values(&inv.pde(kappa), field, colloc, dofs)?;
    let (mass, _) = assemble_with_values(&inv.misfit_operator(), field, colloc, dofs)?;
    let m = colloc.len();
    let n = dofs.n_interior();
    let s = inv.lambda.sqrt();

    let mut residual = pde.residual;
    residual.extend(
        mass.residual
            .iter()
            .zip(&inv.observations)
            .map(|(su, obs)| su - s * obs),
    );
    let nnz = pde.jacobian.nnz() + m + mass.jacobian.nnz();
    let mut row_ptr = Vec::with_capacity(2 * m + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for (k, &u) in values.iter().enumerate() {
        let (c, v) = pde.jacobian.row(k);
        col_idx.extend_from_slice(c);
        vals.extend_from_slice(v);
        col_idx.push(n);
        vals.push(2.0 * kappa * u);
        row_ptr.push(col_idx.len());
    }
    for k in 0..m {
        let (c, v) = mass.jacobian.row(k);
        col_idx.extend_from_slice(c);
        vals.extend_from_slice(v);
        row_ptr.push(col_idx.len());
    }
    let jacobian = CsrMatrix::new(2 * m, n + 1, row_ptr, col_idx, vals)?;
    Ok(ResidualSystem { residual, jacobian })
}

/// `[[H, h], [hᵀ, d]] δ = −[g_c; g_κ]` solved through the sparse block and a
/// scalar Schur complement.
struct BorderedSystem {
    h_cc: CsrMatrix,
    h: Vec<f64>,
    d: f64,
    gradient: Vec<f64>,
    scale: f64,
}

impl BorderedSystem {
    fn new(sys: &ResidualSystem) -> Result<Self> {
        let j = &sys.jacobian;
        let n = j.ncols() - 1;
        let mut b = vec![0.0; j.nrows()];
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(j.nnz());
        let mut vals = Vec::with_capacity(j.nnz());
        for r in 0..j.nrows() {
            let (c, v) = j.row(r);
            for (&cc, &vv) in c.iter().zip(v) {
                if cc == n {
                    b[r] = vv;
                } else {
                    col_idx.push(cc);
                    vals.push(vv);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let a = CsrMatrix::new(j.nrows(), n, row_ptr, col_idx, vals)?;
        let h_cc = a.normal_matrix();
        let h = a.tr_matvec(&b);
        let d = dot(&b, &b);
        let mut gradient = a.tr_matvec(&sys.residual);
        gradient.push(dot(&b, &sys.residual));
        let trace = (0..n).map(|i| h_cc.get(i, i)).sum::<f64>() + d;
        let mean = trace / (n + 1) as f64;
        Ok(Self {
            h_cc,
            h,
            d,
            gradient,
            scale: if mean > 0.0 && mean.is_finite() { mean } else { 1.0 },
        })
    }
}

impl StepSystem for BorderedSystem {
    fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn solve(&mut self, shift: f64) -> Result<Vec<f64>> {
        let n = self.h.len();
        let chol = SparseCholesky::factor(&self.h_cc, shift)?;
        let g_c = &self.gradient[..n];
        let g_k = self.gradient[n];
        let x1 = chol.solve(&g_c.iter().map(|g| -g).collect::<Vec<_>>());
        let x2 = chol.solve(&self.h);
        let schur = self.d + shift - dot(&self.h, &x2);
        if !(schur > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: n });
        }
        let dk = (-g_k - dot(&self.h, &x1)) / schur;
        let mut delta: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b * dk).collect();
        delta.push(dk);
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("step"));
        }
        Ok(delta)
    }
}

struct InverseModel<'a> {
    inv: &'a InverseProblem,
    spaces: &'a [SplineSpace1D],
    colloc: &'a CollocationSet,
    dofs: &'a DofMap,
}

impl ResidualModel for InverseModel<'_> {
    fn evaluate(&self, x: &[f64]) -> Result<ResidualSystem> {
        let (c, k) = x.split_at(x.len() - 1);
        let field = self.dofs.field_with_interior(self.spaces, c)?;
        assemble_inverse(self.inv, &field, k[0], self.colloc, self.dofs)
    }

    fn step_system(&self, sys: &ResidualSystem, gram: &GramOperator) -> Result<Box<dyn StepSystem>> {
        if !gram.is_identity() {
            return Err(Error::InvalidParameter(
                "the inverse solve is unweighted".into(),
            ));
        }
        Ok(Box::new(BorderedSystem::new(sys)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSetup {
    pub kappa_true: f64,
    pub kappa_init: f64,
    pub lambda: f64,
    pub degree: usize,
    pub elements: usize,
    pub collocation: usize,
    pub initial: InitialGuess,
}

impl Default for InverseSetup {
    fn default() -> Self {
        Self {
            kappa_true: 2.0,
            kappa_init: 1.0,
            lambda: 1.0,
            degree: 3,
            elements: 30,
            collocation: 40,
            initial: InitialGuess::Zero,
        }
    }
}

/// Solver defaults for the inverse problem: 100 iterations.
pub fn default_inverse_config() -> GnConfig {
    GnConfig {
        max_iterations: 100,
        ..GnConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct InverseSolution {
    pub kappa: f64,
    pub field: TensorSplineField,
    pub report: GnReport,
    /// κ after every accepted iteration, starting with `κ_init`.
    pub kappa_history: Vec<f64>,
    pub l2_error: f64,
    pub n_interior: usize,
}

/// Largest |κ| before the iteration is declared divergent.
pub const KAPPA_DIVERGENCE: f64 = 1e3;

pub fn solve_inverse(setup: &InverseSetup, cfg: &GnConfig) -> Result<InverseSolution> {
    if !(setup.kappa_init > 0.0 && setup.kappa_init.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kappa_init must be positive, got {}",
            setup.kappa_init
        )));
    }
    let space = SplineSpace1D::uniform(setup.degree, setup.elements, 0.0, 1.0)?;
    let spaces = vec![space; 2];
    let colloc = uniform_collocation(setup.collocation, 2)?;
    let inv = InverseProblem::new(setup.kappa_true, setup.lambda, &colloc)?;
    let dofs = apply_dirichlet(&inv.pde(setup.kappa_init), &spaces)?;
    let gram = GramOperator::identity(2 * colloc.len());
    let model = InverseModel {
        inv: &inv,
        spaces: &spaces,
        colloc: &colloc,
        dofs: &dofs,
    };
    let mut x0 = match setup.initial {
        InitialGuess::Zero => vec![0.0; dofs.n_interior()],
        InitialGuess::ExactInterpolant => {
            let exact = inv.exact().clone();
            let full = TensorSplineField::interpolate(spaces.clone(), |x| exact(x))?;
            dofs.interior_of(&full)
        }
    };
    x0.push(setup.kappa_init);
    let mut kappa_history = vec![setup.kappa_init];
    let (x, report) = minimize(&model, x0, &gram, cfg, &mut |it| {
        let k = *it.x.last().expect("kappa is the last unknown");
        log::info!("iter {} | kappa {k:.12}", it.iteration);
        if !(k.abs() <= KAPPA_DIVERGENCE) {
            return Err(Error::Diverged(k));
        }
        kappa_history.push(k);
        Ok(())
    })?;
    let (c, k) = x.split_at(x.len() - 1);
    let field = dofs.field_with_interior(&spaces, c)?;
    let l2_error = error_report(&field, inv.exact().as_ref(), None)?.l2_error;
    Ok(InverseSolution {
        kappa: k[0],
        field,
        report,
        kappa_history,
        l2_error,
        n_interior: dofs.n_interior(),
    })
}
