//! Gauss–Newton driver with Levenberg damping.
//!
//! Each step solves `(JᵀG⁻¹J + μ·s·I) δ = −JᵀG⁻¹R`, where `s` is the mean
//! diagonal of `JᵀG⁻¹J`, so the damping parameter `μ` is dimensionless.

use crate::assembly::{assemble, CollocationSet, DofMap, ResidualSystem};
use crate::error::{Error, Result};
use crate::gram::GramOperator;
use crate::linalg::{inf_norm, CsrMatrix, DenseCholesky, SparseCholesky};
use crate::problem::PdeProblem;
use crate::spline::{SplineSpace1D, TensorSplineField};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct GnConfig {
    pub max_iterations: usize,
    /// Steps taken even when a stopping test already holds.
    pub min_iterations: usize,
    pub step_tolerance: f64,
    pub loss_tolerance: f64,
    pub damping_initial: f64,
    pub damping_growth: f64,
    pub damping_max: f64,
}

impl Default for GnConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            min_iterations: 0,
            step_tolerance: 1e-10,
            loss_tolerance: 1e-24,
            damping_initial: 1e-10,
            damping_growth: 10.0,
            damping_max: 1e12,
        }
    }
}

impl GnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if self.min_iterations > self.max_iterations {
            return bad("min_iterations exceeds max_iterations");
        }
        if !(self.step_tolerance > 0.0) || !(self.loss_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.damping_initial > 0.0) || !(self.damping_growth > 1.0) {
            return bad("damping must start positive and grow by a factor > 1");
        }
        if !(self.damping_max >= self.damping_initial) {
            return bad("damping_max is below damping_initial");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    StepTolerance,
    LossTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnReport {
    pub iterations: usize,
    pub initial_loss: f64,
    /// Loss after each accepted step.
    pub loss_history: Vec<f64>,
    /// `‖δ‖∞` of each accepted step.
    pub step_norm_history: Vec<f64>,
    /// Relative damping used by each accepted step (0 for an undamped step).
    pub damping_history: Vec<f64>,
    /// `‖δ‖∞` of the last computed step, accepted or not.
    pub final_step_norm: f64,
    pub damping_events: usize,
    pub stop_reason: StopReason,
    pub wall_seconds: f64,
}

impl GnReport {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Linearized step problem built from one residual system.
pub trait StepSystem {
    /// `JᵀG⁻¹R`.
    fn gradient(&self) -> &[f64];
    /// Positive scale that makes the damping dimensionless.
    fn scale(&self) -> f64;
    /// Solves `(H + shift·I) δ = −g`.
    fn solve(&mut self, shift: f64) -> Result<Vec<f64>>;
    /// Takes a new residual at an unchanged Jacobian; returns `false` if the
    /// system must be rebuilt instead.
    fn refresh(&mut self, _sys: &ResidualSystem, _gram: &GramOperator) -> Result<bool> {
        Ok(false)
    }
}

/// A residual `R(x)` with Jacobian, minimized in the `G⁻¹` norm.
pub trait ResidualModel {
    fn evaluate(&self, x: &[f64]) -> Result<ResidualSystem>;

    /// True when `J` does not depend on `x` (affine residuals).
    fn jacobian_is_constant(&self) -> bool {
        false
    }

    fn step_system(
        &self,
        sys: &ResidualSystem,
        gram: &GramOperator,
    ) -> Result<Box<dyn StepSystem>> {
        Ok(Box::new(NormalEquations::new(&sys.jacobian, &sys.residual, gram)?))
    }
}

enum Hessian {
    Sparse(CsrMatrix),
    /// Row-major `n×n`, used with a non-identity Gram operator.
    Dense(Vec<f64>),
}

pub enum NormalFactor {
    Sparse(SparseCholesky),
    Dense(DenseCholesky),
}

impl NormalFactor {
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        match self {
            NormalFactor::Sparse(f) => f.solve_in_place(rhs),
            NormalFactor::Dense(f) => f.solve_in_place(rhs),
        }
    }
}

/// `H = JᵀG⁻¹J`, `g = JᵀG⁻¹R`, with the last factorization cached.
pub struct NormalEquations {
    n: usize,
    hessian: Hessian,
    jacobian: Option<CsrMatrix>,
    gradient: Vec<f64>,
    scale: f64,
    factor: Option<(f64, NormalFactor)>,
}

fn weighted_gradient(j: &CsrMatrix, r: &[f64], gram: &GramOperator) -> Result<Vec<f64>> {
    if r.len() != j.nrows() {
        return Err(Error::DimensionMismatch {
            expected: j.nrows(),
            got: r.len(),
        });
    }
    Ok(j.tr_matvec(&gram.apply_inverse(r)?))
}

impl NormalEquations {
    pub fn new(j: &CsrMatrix, r: &[f64], gram: &GramOperator) -> Result<Self> {
        let gradient = weighted_gradient(j, r, gram)?;
        let n = j.ncols();
        let (hessian, mean_diag) = if gram.is_identity() {
            let h = j.normal_matrix();
            let s = h.mean_diagonal();
            (Hessian::Sparse(h), s)
        } else {
            // Y = G⁻¹J column by column, then H = JᵀY.
            let mut h = vec![0.0; n * n];
            for c in 0..n {
                let y = gram.apply_inverse(&j.column(c))?;
                let col = j.tr_matvec(&y);
                for (rr, v) in col.into_iter().enumerate() {
                    h[rr * n + c] = v;
                }
            }
            // Symmetrize away rounding.
            for a in 0..n {
                for b in 0..a {
                    let v = 0.5 * (h[a * n + b] + h[b * n + a]);
                    h[a * n + b] = v;
                    h[b * n + a] = v;
                }
            }
            let s = if n == 0 {
                0.0
            } else {
                (0..n).map(|i| h[i * n + i]).sum::<f64>() / n as f64
            };
            (Hessian::Dense(h), s)
        };
        Ok(Self {
            n,
            hessian,
            jacobian: Some(j.clone()),
            gradient,
            scale: if mean_diag > 0.0 && mean_diag.is_finite() {
                mean_diag
            } else {
                1.0
            },
            factor: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factorize(&self, shift: f64) -> Result<NormalFactor> {
        Ok(match &self.hessian {
            Hessian::Sparse(h) => NormalFactor::Sparse(SparseCholesky::factor(h, shift)?),
            Hessian::Dense(h) => NormalFactor::Dense(DenseCholesky::factor(h, self.n, shift)?),
        })
    }
}

impl StepSystem for NormalEquations {
    fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn solve(&mut self, shift: f64) -> Result<Vec<f64>> {
        if !matches!(&self.factor, Some((s, _)) if *s == shift) {
            self.factor = None;
            let f = self.factorize(shift)?;
            self.factor = Some((shift, f));
        }
        let (_, f) = self.factor.as_ref().expect("factor cached above");
        let mut delta: Vec<f64> = self.gradient.iter().map(|g| -g).collect();
        f.solve_in_place(&mut delta);
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("step"));
        }
        Ok(delta)
    }

    fn refresh(&mut self, sys: &ResidualSystem, gram: &GramOperator) -> Result<bool> {
        let j = self.jacobian.as_ref().expect("jacobian kept");
        if j.ncols() != sys.jacobian.ncols() || j.nrows() != sys.jacobian.nrows() {
            return Ok(false);
        }
        self.gradient = weighted_gradient(&sys.jacobian, &sys.residual, gram)?;
        Ok(true)
    }
}

/// One damped Gauss–Newton step for a fixed system: minimizes
/// `‖G^{-1/2}(R + Jδ)‖² + μ‖δ‖²` with absolute damping `μ`.
pub fn solve_linear_normal_equations(
    j: &CsrMatrix,
    r: &[f64],
    gram: &GramOperator,
    mu: f64,
) -> Result<Vec<f64>> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("damping {mu} must be >= 0")));
    }
    if j.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("jacobian"));
    }
    NormalEquations::new(j, r, gram)?.solve(mu)
}

/// State passed to observers after every accepted step.
pub struct Iterate<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub loss: f64,
    pub step_norm: f64,
}

/// Minimizes `½ R(x)ᵀG⁻¹R(x)` by damped Gauss–Newton.
pub fn minimize<M: ResidualModel + ?Sized>(
    model: &M,
    x0: Vec<f64>,
    gram: &GramOperator,
    cfg: &GnConfig,
    observer: &mut dyn FnMut(&Iterate) -> Result<()>,
) -> Result<(Vec<f64>, GnReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut x = x0;
    let mut sys = model.evaluate(&x)?;
    if sys.jacobian.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: sys.jacobian.ncols(),
            got: x.len(),
        });
    }
    let mut loss = gram.robust_loss(&sys.residual)?;
    let initial_loss = loss;
    let underdetermined = sys.underdetermined();
    if underdetermined {
        log::warn!(
            "underdetermined system: {} residuals for {} unknowns; the solve relies on damping",
            sys.residual.len(),
            x.len()
        );
    }
    let mut report = GnReport {
        iterations: 0,
        initial_loss,
        loss_history: Vec::new(),
        step_norm_history: Vec::new(),
        damping_history: Vec::new(),
        final_step_norm: f64::NAN,
        damping_events: 0,
        stop_reason: StopReason::MaxIterations,
        wall_seconds: 0.0,
    };
    log::info!("iter 0 | loss {loss:.6e} | step {:.6e} | damping {:.3e}", 0.0, 0.0);
    let mut steps: Option<Box<dyn StepSystem>> = None;
    let mut mu_prev = 0.0;
    loop {
        let k = report.iterations;
        if loss <= cfg.loss_tolerance && k >= cfg.min_iterations {
            report.stop_reason = StopReason::LossTolerance;
            break;
        }
        if k >= cfg.max_iterations {
            report.stop_reason = StopReason::MaxIterations;
            break;
        }
        let reuse = match steps.as_mut() {
            Some(s) if model.jacobian_is_constant() => s.refresh(&sys, gram)?,
            _ => false,
        };
        if !reuse {
            // Release the previous factorization before building the next.
            drop(steps.take());
            steps = Some(model.step_system(&sys, gram)?);
        }
        let step_sys = steps.as_mut().expect("step system built above");
        let scale = step_sys.scale();

        let mut mu = if underdetermined || mu_prev > 0.0 {
            (mu_prev / cfg.damping_growth).max(cfg.damping_initial)
        } else {
            0.0
        };
        let (delta, trial_sys, trial_loss) = loop {
            let attempt = step_sys.solve(mu * scale).and_then(|delta| {
                let norm = inf_norm(&delta);
                if norm <= cfg.step_tolerance && k >= cfg.min_iterations {
                    return Ok((delta, None));
                }
                let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
                let tsys = model.evaluate(&trial)?;
                let tloss = gram.robust_loss(&tsys.residual)?;
                Ok((delta, Some((tsys, tloss))))
            });
            match attempt {
                Ok((delta, None)) => break (delta, None, loss),
                Ok((delta, Some((tsys, tloss)))) => {
                    if tloss.is_finite() && tloss <= loss * (1.0 + 1e-10) + f64::MIN_POSITIVE {
                        break (delta, Some(tsys), tloss);
                    }
                    log::debug!("iter {} | rejected step: loss {tloss:.6e} > {loss:.6e}", k + 1);
                }
                Err(Error::NotPositiveDefinite { .. }) => {
                    log::debug!("iter {} | factorization failed at damping {mu:.3e}", k + 1);
                }
                Err(Error::NonFinite(what)) if what == "step" => {}
                Err(e) => return Err(e),
            }
            report.damping_events += 1;
            mu = if mu == 0.0 {
                cfg.damping_initial
            } else {
                mu * cfg.damping_growth
            };
            if mu > cfg.damping_max {
                return Err(Error::DampingExhausted { mu });
            }
        };
        let step_norm = inf_norm(&delta);
        report.final_step_norm = step_norm;
        let Some(tsys) = trial_sys else {
            report.stop_reason = StopReason::StepTolerance;
            log::info!("converged: step {step_norm:.6e} below tolerance");
            break;
        };
        for (a, b) in x.iter_mut().zip(&delta) {
            *a += b;
        }
        sys = tsys;
        loss = trial_loss;
        mu_prev = mu;
        report.iterations += 1;
        report.loss_history.push(loss);
        report.step_norm_history.push(step_norm);
        report.damping_history.push(mu);
        log::info!(
            "iter {} | loss {loss:.6e} | step {step_norm:.6e} | damping {mu:.3e}",
            report.iterations
        );
        observer(&Iterate {
            iteration: report.iterations,
            x: &x,
            loss,
            step_norm,
        })?;
        if !model.jacobian_is_constant() {
            steps = None;
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Collocation residual of a PDE over the interior coefficients.
pub struct CollocationModel<'a> {
    pub problem: &'a PdeProblem,
    pub spaces: &'a [SplineSpace1D],
    pub colloc: &'a CollocationSet,
    pub dofs: &'a DofMap,
}

impl ResidualModel for CollocationModel<'_> {
    fn evaluate(&self, x: &[f64]) -> Result<ResidualSystem> {
        let field = self.dofs.field_with_interior(self.spaces, x)?;
        assemble(self.problem, &field, self.colloc, self.dofs)
    }

    fn jacobian_is_constant(&self) -> bool {
        self.problem.is_linear()
    }
}

/// Gauss–Newton on the collocation residual starting from `initial_field`,
/// whose boundary layer must already hold the Dirichlet coefficients.
pub fn gauss_newton(
    problem: &PdeProblem,
    initial_field: &TensorSplineField,
    colloc: &CollocationSet,
    dofs: &DofMap,
    gram: &GramOperator,
    cfg: &GnConfig,
) -> Result<(TensorSplineField, GnReport)> {
    if dofs.shape() != initial_field.shape() {
        return Err(Error::DimensionMismatch {
            expected: dofs.n_total(),
            got: initial_field.coefficients().len(),
        });
    }
    if gram.dim() != colloc.len() {
        return Err(Error::DimensionMismatch {
            expected: colloc.len(),
            got: gram.dim(),
        });
    }
    let model = CollocationModel {
        problem,
        spaces: initial_field.spaces(),
        colloc,
        dofs,
    };
    let (x, report) = minimize(
        &model,
        dofs.interior_of(initial_field),
        gram,
        cfg,
        &mut |_| Ok(()),
    )?;
    let field = dofs.field_with_interior(initial_field.spaces(), &x)?;
    Ok((field, report))
}

/// Newton iteration for the nonlinear benchmarks; with a residual of this
/// form Gauss–Newton re-linearized each step is the nonlinear iteration.
pub fn newton_nonlinear(
    problem: &PdeProblem,
    initial_field: &TensorSplineField,
    colloc: &CollocationSet,
    dofs: &DofMap,
    gram: &GramOperator,
    cfg: &GnConfig,
) -> Result<(TensorSplineField, GnReport)> {
    gauss_newton(problem, initial_field, colloc, dofs, gram, cfg)
}
