//! Error norms by element-wise Gauss–Legendre quadrature and observed
//! convergence rates.

use crate::error::{Error, Result};
use crate::gram::GramKind;
use crate::pipeline::{solve_forward, ForwardSetup};
use crate::problem::PdeProblem;
use crate::solver::GnConfig;
use crate::spline::{for_each_multi_index, TensorSplineField};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub l2_error: f64,
    pub h1_seminorm_error: Option<f64>,
    pub quadrature_order: usize,
}

type Exact<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);
type ExactGrad<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

fn element_integrals(
    field: &TensorSplineField,
    q: usize,
    integrand: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidParameter(
            "quadrature needs at least one point".into(),
        ));
    }
    let d = field.dim();
    let (xi, wi) = gauss_legendre(q);
    let breaks: Vec<&[f64]> = field.spaces().iter().map(|s| s.breakpoints()).collect();
    let extent: Vec<usize> = field.spaces().iter().map(|s| s.n_elements()).collect();
    let mut elements = Vec::new();
    for_each_multi_index(&extent, |e| elements.push(e.to_vec()));
    let local = vec![q; d];
    let sums = elements
        .par_iter()
        .map(|e| {
            let mut sum = 0.0;
            let mut err = None;
            let mut point = vec![0.0; d];
            for_each_multi_index(&local, |m| {
                if err.is_some() {
                    return;
                }
                let mut w = 1.0;
                for a in 0..d {
                    let (lo, hi) = (breaks[a][e[a]], breaks[a][e[a] + 1]);
                    let half = 0.5 * (hi - lo);
                    point[a] = lo + half * (xi[m[a]] + 1.0);
                    w *= half * wi[m[a]];
                }
                match integrand(&point) {
                    Ok(v) => sum += w * v,
                    Err(er) => err = Some(er),
                }
            });
            match err {
                Some(er) => Err(er),
                None => Ok(sum),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    // Sequential reduction keeps the result independent of thread count.
    Ok(sums.iter().sum())
}

/// `‖u_h − u‖_{L²}` over the parametric domain with `q` Gauss points per
/// dimension per element.
pub fn l2_error(field: &TensorSplineField, exact: Exact, q: usize) -> Result<f64> {
    let s = element_integrals(field, q, &|x| {
        let e = field.value(x)? - exact(x);
        Ok(e * e)
    })?;
    Ok(s.max(0.0).sqrt())
}

/// `|u_h − u|_{H¹}` seminorm error.
pub fn h1_seminorm_error(field: &TensorSplineField, gradient: ExactGrad, q: usize) -> Result<f64> {
    let d = field.dim();
    let s = element_integrals(field, q, &|x| {
        let g = gradient(x);
        let mut acc = 0.0;
        for a in 0..d {
            let mut orders = vec![0; d];
            orders[a] = 1;
            let e = field.eval(x, &orders)? - g[a];
            acc += e * e;
        }
        Ok(acc)
    })?;
    Ok(s.max(0.0).sqrt())
}

/// L2 (and, with a gradient, H1-seminorm) error at the default order `p + 1`.
pub fn error_report(
    field: &TensorSplineField,
    exact: Exact,
    gradient: Option<ExactGrad>,
) -> Result<ErrorReport> {
    let q = field.spaces().iter().map(|s| s.degree()).max().unwrap_or(0) + 1;
    Ok(ErrorReport {
        l2_error: l2_error(field, exact, q)?,
        h1_seminorm_error: gradient
            .map(|g| h1_seminorm_error(field, g, q))
            .transpose()?,
        quadrature_order: q,
    })
}

/// Least-squares slope of `log(error)` against `log(h)`.
///
/// Returns `+∞` when any error is zero or negative (exact reproduction).
pub fn observed_rate(errors: &[f64], mesh_sizes: &[f64]) -> Result<f64> {
    if errors.len() != mesh_sizes.len() {
        return Err(Error::InvalidRateInput(format!(
            "{} errors for {} mesh sizes",
            errors.len(),
            mesh_sizes.len()
        )));
    }
    if errors.len() < 2 {
        return Err(Error::InvalidRateInput("need at least two points".into()));
    }
    if mesh_sizes.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidRateInput("mesh sizes must be positive".into()));
    }
    if mesh_sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidRateInput(
            "mesh sizes must be strictly decreasing".into(),
        ));
    }
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Ok(f64::INFINITY);
    }
    let lx: Vec<f64> = mesh_sizes.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossErrorRow {
    pub elements: usize,
    pub h: f64,
    pub sqrt_loss: f64,
    pub l2_error: f64,
}

/// Final robust loss and true error over a mesh sweep with `N_c = 2n`.
pub fn loss_error_series(
    problem: &PdeProblem,
    degree: usize,
    element_counts: &[usize],
    gram: GramKind,
    cfg: &GnConfig,
) -> Result<Vec<LossErrorRow>> {
    if element_counts.len() < 3 {
        return Err(Error::InvalidParameter(
            "loss/error series needs at least three meshes".into(),
        ));
    }
    element_counts
        .iter()
        .map(|&n| {
            let sol = solve_forward(
                problem,
                &ForwardSetup {
                    gram,
                    ..ForwardSetup::new(degree, n, 2 * n)
                },
                cfg,
            )?;
            let l2 = sol.l2_error.ok_or_else(|| {
                Error::InvalidParameter("problem has no exact solution".into())
            })?;
            Ok(LossErrorRow {
                elements: n,
                h: 1.0 / n as f64,
                sqrt_loss: sol.report.final_loss().sqrt(),
                l2_error: l2,
            })
        })
        .collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidRateInput(
            "rank correlation needs two equal-length series of length >= 2".into(),
        ));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    Ok(cov / (va * vb).sqrt())
}
