//! Gram weighting operators for the robust loss `Φ = ½ RᵀG⁻¹R`.

use crate::assembly::CollocationSet;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SparseCholesky};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GramKind {
    #[default]
    Identity,
    /// Mass plus graph Laplacian on the collocation grid.
    DiscreteH1,
}

impl GramKind {
    pub fn name(&self) -> &'static str {
        match self {
            GramKind::Identity => "identity",
            GramKind::DiscreteH1 => "h1",
        }
    }
}

impl fmt::Display for GramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(GramKind::Identity),
            "h1" => Ok(GramKind::DiscreteH1),
            other => Err(Error::InvalidParameter(format!(
                "unknown gram kind '{other}' (expected identity or h1)"
            ))),
        }
    }
}

enum Factor {
    None,
    Cholesky(CsrMatrix, SparseCholesky),
}

pub struct GramOperator {
    kind: GramKind,
    dim: usize,
    factor: Factor,
}

impl fmt::Debug for GramOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GramOperator")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Builds `G` for the given collocation grid and factorizes it once.
pub fn build_gram(kind: GramKind, colloc: &CollocationSet) -> Result<GramOperator> {
    let dim = colloc.len();
    let factor = match kind {
        GramKind::Identity => Factor::None,
        GramKind::DiscreteH1 => {
            let g = discrete_h1_matrix(colloc)?;
            let chol = SparseCholesky::factor(&g, 0.0)?;
            Factor::Cholesky(g, chol)
        }
    };
    Ok(GramOperator { kind, dim, factor })
}

/// `w·(I + Σ_d D_dᵀD_d)` with forward differences `D_d` scaled by 1/spacing.
fn discrete_h1_matrix(colloc: &CollocationSet) -> Result<CsrMatrix> {
    let n = colloc.per_dim();
    let d = colloc.dim();
    let m = colloc.len();
    let h2 = colloc.spacing().powi(2);
    let w = colloc.cell_volume();
    let mut stride = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        stride[a] = stride[a + 1] * n;
    }
    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for k in 0..m {
        let mi = colloc.multi_index(k);
        let mut entries: Vec<(usize, f64)> = vec![(k, 1.0)];
        for a in 0..d {
            // Path-graph Laplacian along axis a.
            if mi[a] > 0 {
                entries.push((k - stride[a], -1.0 / h2));
                entries[0].1 += 1.0 / h2;
            }
            if mi[a] + 1 < n {
                entries.push((k + stride[a], -1.0 / h2));
                entries[0].1 += 1.0 / h2;
            }
        }
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            col_idx.push(c);
            values.push(w * v);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::new(m, m, row_ptr, col_idx, values)
}

impl GramOperator {
    /// Identity weighting of a residual of length `dim`.
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: GramKind::Identity,
            dim,
            factor: Factor::None,
        }
    }

    pub fn kind(&self) -> GramKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.factor, Factor::None)
    }

    /// The assembled matrix, `None` for the identity.
    pub fn matrix(&self) -> Option<&CsrMatrix> {
        match &self.factor {
            Factor::None => None,
            Factor::Cholesky(g, _) => Some(g),
        }
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `G v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(match &self.factor {
            Factor::None => v.to_vec(),
            Factor::Cholesky(g, _) => g.matvec(v),
        })
    }

    /// `G⁻¹ v` through the cached factors.
    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(match &self.factor {
            Factor::None => v.to_vec(),
            Factor::Cholesky(_, chol) => chol.solve(v),
        })
    }

    /// `½ Rᵀ G⁻¹ R`.
    pub fn robust_loss(&self, r: &[f64]) -> Result<f64> {
        let y = self.apply_inverse(r)?;
        Ok(0.5 * r.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>())
    }
}

/// Free function form of [`GramOperator::apply_inverse`].
pub fn apply_inverse(gram: &GramOperator, v: &[f64]) -> Result<Vec<f64>> {
    gram.apply_inverse(v)
}

/// Free function form of [`GramOperator::robust_loss`].
pub fn robust_loss(gram: &GramOperator, r: &[f64]) -> Result<f64> {
    gram.robust_loss(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::uniform_collocation;
    use crate::linalg::factorization_count;

    #[test]
    fn identity_is_trivial() {
        let c = uniform_collocation(30, 2).unwrap();
        let g = build_gram(GramKind::Identity, &c).unwrap();
        let v: Vec<f64> = (0..900).map(|i| i as f64).collect();
        assert_eq!(g.apply_inverse(&v).unwrap(), v);
        let r = [3.0, 4.0];
        let small = build_gram(GramKind::Identity, &uniform_collocation(2, 1).unwrap()).unwrap();
        assert_eq!(small.robust_loss(&r).unwrap(), 12.5);
        assert!(g.apply_inverse(&[1.0]).is_err());
    }

    #[test]
    fn h1_constants() {
        let c = uniform_collocation(2, 2).unwrap();
        let g = build_gram(GramKind::DiscreteH1, &c).unwrap();
        let gv = g.apply(&[1.0; 4]).unwrap();
        for v in gv {
            assert!((v - 0.25).abs() < 1e-15);
        }
        for v in g.apply_inverse(&[1.0; 4]).unwrap() {
            assert!((v - 4.0).abs() < 1e-12);
        }
        assert_eq!(g.apply_inverse(&[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn applies_do_not_refactorize() {
        let c = uniform_collocation(6, 2).unwrap();
        let before = factorization_count();
        let g = build_gram(GramKind::DiscreteH1, &c).unwrap();
        assert_eq!(factorization_count(), before + 1);
        let v = vec![1.5; 36];
        for _ in 0..10 {
            g.apply_inverse(&v).unwrap();
            g.robust_loss(&v).unwrap();
        }
        assert_eq!(factorization_count(), before + 1);
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("h1".parse::<GramKind>().unwrap(), GramKind::DiscreteH1);
        assert_eq!("identity".parse::<GramKind>().unwrap(), GramKind::Identity);
        assert!("l2".parse::<GramKind>().is_err());
    }
}
