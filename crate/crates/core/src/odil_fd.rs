//! Finite-difference ODIL baseline: nodal unknowns, five-point Laplacian,
//! solved with the same Gauss–Newton driver.

use crate::assembly::ResidualSystem;
use crate::error::{Error, Result};
use crate::gram::GramOperator;
use crate::linalg::CsrMatrix;
use crate::problem::{Operator, PdeProblem};
use crate::solver::{minimize, GnConfig, GnReport, ResidualModel};

/// Nodal values on the unit square, `values[i * n + j] = u(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGrid {
    n: usize,
    h: f64,
    values: Vec<f64>,
}

impl FdGrid {
    /// Grid with boundary nodes set from `g` and zero interior.
    pub fn new(n: usize, g: &dyn Fn(&[f64]) -> f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::GridTooSmall(n));
        }
        let h = 1.0 / (n - 1) as f64;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    values[i * n + j] = g(&[i as f64 * h, j as f64 * h]);
                }
            }
        }
        Ok(Self { n, h, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.h, j as f64 * self.h]
    }

    pub fn n_interior(&self) -> usize {
        (self.n - 2) * (self.n - 2)
    }

    fn interior_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.n - 2) + (j - 1)
    }

    pub fn interior(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.n_interior());
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                out.push(self.values[i * n + j]);
            }
        }
        out
    }

    pub fn set_interior(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_interior() {
            return Err(Error::DimensionMismatch {
                expected: self.n_interior(),
                got: x.len(),
            });
        }
        let n = self.n;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                self.values[i * n + j] = x[self.interior_index(i, j)];
            }
        }
        Ok(())
    }

    /// Trapezoid-rule `L²` distance to `exact` over the nodes.
    pub fn l2_error(&self, exact: &dyn Fn(&[f64]) -> f64) -> f64 {
        let n = self.n;
        let w = |i: usize| if i == 0 || i == n - 1 { 0.5 * self.h } else { self.h };
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let e = self.values[i * n + j] - exact(&self.node(i, j));
                s += w(i) * w(j) * e * e;
            }
        }
        s.sqrt()
    }
}

/// Five-point residual `Δ_h u + f` at every interior node.
///
/// Boundary nodes take their stored values. Rows and columns follow the
/// interior nodes in row-major order.
pub fn odil_assemble(grid: &FdGrid, f: &dyn Fn(&[f64]) -> f64) -> Result<ResidualSystem> {
    let n = grid.n;
    let h2 = grid.h * grid.h;
    let m = grid.n_interior();
    let u = |i: usize, j: usize| grid.values[i * n + j];
    let mut residual = Vec::with_capacity(m);
    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut col_idx = Vec::with_capacity(5 * m);
    let mut vals = Vec::with_capacity(5 * m);
    row_ptr.push(0);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let lap = (u(i + 1, j) - 2.0 * u(i, j) + u(i - 1, j)) / h2
                + (u(i, j + 1) - 2.0 * u(i, j) + u(i, j - 1)) / h2;
            residual.push(lap + f(&grid.node(i, j)));
            // Neighbours in increasing interior-column order.
            let stencil = [
                (i - 1, j, 1.0),
                (i, j - 1, 1.0),
                (i, j, -4.0),
                (i, j + 1, 1.0),
                (i + 1, j, 1.0),
            ];
            for (a, b, c) in stencil {
                if a == 0 || b == 0 || a == n - 1 || b == n - 1 {
                    continue;
                }
                col_idx.push(grid.interior_index(a, b));
                vals.push(c / h2);
            }
            row_ptr.push(col_idx.len());
        }
    }
    if residual.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("residual"));
    }
    let jacobian = CsrMatrix::new(m, m, row_ptr, col_idx, vals)?;
    Ok(ResidualSystem { residual, jacobian })
}

struct FdModel<'a> {
    grid: FdGrid,
    forcing: &'a (dyn Fn(&[f64]) -> f64 + Sync),
}

impl ResidualModel for FdModel<'_> {
    fn evaluate(&self, x: &[f64]) -> Result<ResidualSystem> {
        let mut g = self.grid.clone();
        g.set_interior(x)?;
        odil_assemble(&g, self.forcing)
    }

    fn jacobian_is_constant(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct FdSolution {
    pub grid: FdGrid,
    pub report: GnReport,
    pub l2_error: Option<f64>,
}

/// Solves a Poisson problem (`Δu + f = 0`) on an `n×n` node grid.
pub fn odil_solve(
    n: usize,
    problem: &PdeProblem,
    gram: &GramOperator,
    cfg: &GnConfig,
) -> Result<FdSolution> {
    if problem.dim != 2 || problem.operator != Operator::Poisson {
        return Err(Error::InvalidParameter(
            "the finite-difference baseline only covers the 2D Poisson problem".into(),
        ));
    }
    let grid = FdGrid::new(n, problem.dirichlet.as_ref())?;
    if gram.dim() != grid.n_interior() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_interior(),
            got: gram.dim(),
        });
    }
    let model = FdModel {
        grid: grid.clone(),
        forcing: problem.forcing.as_ref(),
    };
    let (x, report) = minimize(&model, grid.interior(), gram, cfg, &mut |_| Ok(()))?;
    let mut grid = grid;
    grid.set_interior(&x)?;
    let l2_error = problem.exact.as_ref().map(|e| grid.l2_error(e.as_ref()));
    Ok(FdSolution {
        grid,
        report,
        l2_error,
    })
}
