//! Collocation grids, strong Dirichlet elimination and residual/Jacobian assembly.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::problem::PdeProblem;
use crate::spline::{
    fit_along_axis, for_each_multi_index, strides, BasisDerivatives, GrevilleInterpolator,
    SplineSpace1D, TensorSplineField,
};
use rayon::prelude::*;

/// Tensor grid of cell midpoints `(i - 1/2) / n_c` in the open unit square/cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    dim: usize,
    per_dim: usize,
    axis: Vec<f64>,
    fill_distance: f64,
}

impl CollocationSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_dim(&self) -> usize {
        self.per_dim
    }

    /// Coordinates along one axis (shared by all axes).
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill_distance(&self) -> f64 {
        self.fill_distance
    }

    /// Distance between the first two points along an axis.
    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    /// Volume of one collocation cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Per-axis grid indices of point `k` (last axis fastest).
    pub fn multi_index(&self, k: usize) -> [usize; 3] {
        let mut m = [0; 3];
        let mut rest = k;
        for d in (0..self.dim).rev() {
            m[d] = rest % self.per_dim;
            rest /= self.per_dim;
        }
        m
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        let m = self.multi_index(k);
        (0..self.dim).map(|d| self.axis[m[d]]).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

pub fn uniform_collocation(n_c: usize, dim: usize) -> Result<CollocationSet> {
    if n_c < 2 {
        return Err(Error::TooFewCollocationPoints(n_c));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: dim,
        });
    }
    let axis = (1..=n_c).map(|i| (i as f64 - 0.5) / n_c as f64).collect();
    Ok(CollocationSet {
        dim,
        per_dim: n_c,
        axis,
        // Farthest domain point from the grid is a corner of a cell.
        fill_distance: (dim as f64).sqrt() / (2.0 * n_c as f64),
    })
}

impl CollocationSet {
    /// Tensor grid from explicit per-axis coordinates in the open unit interval.
    pub fn from_axis(axis: Vec<f64>, dim: usize) -> Result<Self> {
        if axis.len() < 2 {
            return Err(Error::TooFewCollocationPoints(axis.len()));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: dim,
            });
        }
        if axis.iter().any(|&x| !(x > 0.0 && x < 1.0)) || axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "collocation coordinates must be increasing and strictly inside (0, 1)".into(),
            ));
        }
        // Largest gap, including the half-gaps to the domain ends.
        let mut gap: f64 = 2.0 * axis[0].max(1.0 - axis[axis.len() - 1]);
        for w in axis.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        Ok(Self {
            dim,
            per_dim: axis.len(),
            axis,
            fill_distance: (dim as f64).sqrt() * gap / 2.0,
        })
    }
}

/// The `n_c − 2` interior points of `linspace(0, 1, n_c)` along each axis.
pub fn linspace_collocation(n_c: usize, dim: usize) -> Result<CollocationSet> {
    if n_c < 4 {
        return Err(Error::TooFewCollocationPoints(n_c));
    }
    let axis = (1..n_c - 1).map(|i| i as f64 / (n_c - 1) as f64).collect();
    CollocationSet::from_axis(axis, dim)
}

/// Placement of the collocation points along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollocationLayout {
    /// Cell midpoints `(i − 1/2)/n_c`.
    #[default]
    Midpoint,
    /// Interior points of `linspace(0, 1, n_c)`.
    Linspace,
}

impl CollocationLayout {
    pub fn name(&self) -> &'static str {
        match self {
            CollocationLayout::Midpoint => "midpoint",
            CollocationLayout::Linspace => "linspace",
        }
    }

    pub fn build(&self, n_c: usize, dim: usize) -> Result<CollocationSet> {
        match self {
            CollocationLayout::Midpoint => uniform_collocation(n_c, dim),
            CollocationLayout::Linspace => linspace_collocation(n_c, dim),
        }
    }
}

impl std::str::FromStr for CollocationLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(CollocationLayout::Midpoint),
            "linspace" => Ok(CollocationLayout::Linspace),
            other => Err(Error::InvalidParameter(format!(
                "unknown collocation layout '{other}' (expected midpoint or linspace)"
            ))),
        }
    }
}

const NOT_FREE: usize = usize::MAX;

/// Split of the coefficient array into free interior unknowns and a fixed
/// boundary layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    shape: Vec<usize>,
    interior: Vec<usize>,
    column_of: Vec<usize>,
    boundary_values: Vec<(usize, f64)>,
}

impl DofMap {
    /// Dof map with all boundary coefficients set to zero.
    pub fn homogeneous(shape: &[usize]) -> Self {
        let total: usize = shape.iter().product();
        let mut values = vec![Some(0.0); total];
        let st = strides(shape);
        for (flat, v) in values.iter_mut().enumerate() {
            if !is_boundary(flat, shape, &st) {
                *v = None;
            }
        }
        Self::from_values(shape, &values)
    }

    fn from_values(shape: &[usize], values: &[Option<f64>]) -> Self {
        let mut interior = Vec::new();
        let mut column_of = vec![NOT_FREE; values.len()];
        let mut boundary_values = Vec::new();
        for (flat, v) in values.iter().enumerate() {
            match v {
                Some(g) => boundary_values.push((flat, *g)),
                None => {
                    column_of[flat] = interior.len();
                    interior.push(flat);
                }
            }
        }
        Self {
            shape: shape.to_vec(),
            interior,
            column_of,
            boundary_values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_total(&self) -> usize {
        self.column_of.len()
    }

    /// Flat coefficient indices of the free unknowns, in column order.
    pub fn interior_indices(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_values(&self) -> &[(usize, f64)] {
        &self.boundary_values
    }

    /// Jacobian column of a flat coefficient index, if it is free.
    pub fn column(&self, flat: usize) -> Option<usize> {
        match self.column_of[flat] {
            NOT_FREE => None,
            c => Some(c),
        }
    }

    /// Field with the boundary layer set and the given interior values.
    pub fn field_with_interior(
        &self,
        spaces: &[SplineSpace1D],
        interior: &[f64],
    ) -> Result<TensorSplineField> {
        if interior.len() != self.n_interior() {
            return Err(Error::DimensionMismatch {
                expected: self.n_interior(),
                got: interior.len(),
            });
        }
        let mut c = vec![0.0; self.n_total()];
        for &(flat, g) in &self.boundary_values {
            c[flat] = g;
        }
        for (&flat, &v) in self.interior.iter().zip(interior) {
            c[flat] = v;
        }
        TensorSplineField::new(spaces.to_vec(), c)
    }

    /// Field with the boundary layer set and zero interior.
    pub fn initial_field(&self, spaces: &[SplineSpace1D]) -> Result<TensorSplineField> {
        self.field_with_interior(spaces, &vec![0.0; self.n_interior()])
    }

    pub fn interior_of(&self, field: &TensorSplineField) -> Vec<f64> {
        self.interior
            .iter()
            .map(|&f| field.coefficients()[f])
            .collect()
    }
}

fn is_boundary(flat: usize, shape: &[usize], st: &[usize]) -> bool {
    (0..shape.len()).any(|d| {
        let i = (flat / st[d]) % shape[d];
        i == 0 || i == shape[d] - 1
    })
}

/// Fixes the boundary coefficient layer by interpolating the Dirichlet data
/// at the Greville abscissae of every face.
pub fn apply_dirichlet(problem: &PdeProblem, spaces: &[SplineSpace1D]) -> Result<DofMap> {
    let d = spaces.len();
    if d != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            got: d,
        });
    }
    let shape: Vec<usize> = spaces.iter().map(|s| s.n_basis()).collect();
    let st = strides(&shape);
    let interps = spaces
        .iter()
        .map(GrevilleInterpolator::new)
        .collect::<Result<Vec<_>>>()?;
    let mut values: Vec<Option<f64>> = vec![None; shape.iter().product()];

    for axis in 0..d {
        let face_axes: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
        let face_shape: Vec<usize> = face_axes.iter().map(|&a| shape[a]).collect();
        let face_st = strides(&face_shape);
        let face_len: usize = face_shape.iter().product();
        let (lo, hi) = spaces[axis].domain();
        for (side, coord) in [(0, lo), (shape[axis] - 1, hi)] {
            let mut samples = vec![0.0; face_len];
            let mut point = vec![0.0; d];
            point[axis] = coord;
            for (flat, s) in samples.iter_mut().enumerate() {
                for (k, &a) in face_axes.iter().enumerate() {
                    point[a] = interps[a].nodes()[(flat / face_st[k]) % face_shape[k]];
                }
                *s = (problem.dirichlet)(&point);
            }
            for (k, &a) in face_axes.iter().enumerate() {
                fit_along_axis(&mut samples, &face_shape, k, &interps[a]);
            }
            for (flat, &v) in samples.iter().enumerate() {
                let mut idx = side * st[axis];
                for (k, &a) in face_axes.iter().enumerate() {
                    idx += ((flat / face_st[k]) % face_shape[k]) * st[a];
                }
                match values[idx] {
                    Some(old) => {
                        let mismatch = (old - v).abs();
                        if mismatch > 1e-10 * old.abs().max(1.0) {
                            return Err(Error::InconsistentBoundaryData { mismatch });
                        }
                    }
                    None => values[idx] = Some(v),
                }
            }
        }
    }
    Ok(DofMap::from_values(&shape, &values))
}

/// Residual vector and Jacobian with respect to the free coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSystem {
    pub residual: Vec<f64>,
    pub jacobian: CsrMatrix,
}

impl ResidualSystem {
    pub fn underdetermined(&self) -> bool {
        self.jacobian.nrows() < self.jacobian.ncols()
    }
}

/// Basis tables for every collocation coordinate along every axis.
struct AxisTables {
    tables: Vec<Vec<BasisDerivatives>>,
}

impl AxisTables {
    fn new(spaces: &[SplineSpace1D], colloc: &CollocationSet) -> Result<Self> {
        let tables = spaces
            .iter()
            .map(|s| {
                colloc
                    .axis()
                    .iter()
                    .map(|&x| s.eval_derivatives(x))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables })
    }
}

struct RowChunk {
    residual: Vec<f64>,
    values: Vec<f64>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    counts: Vec<usize>,
}

const ROW_CHUNK: usize = 512;

/// Evaluates residuals and Jacobian rows at every collocation point.
///
/// Rows follow the collocation order, columns the interior-dof order. The
/// output is identical for any number of worker threads.
pub fn assemble(
    problem: &PdeProblem,
    field: &TensorSplineField,
    colloc: &CollocationSet,
    dofs: &DofMap,
) -> Result<ResidualSystem> {
    let (sys, _) = assemble_with_values(problem, field, colloc, dofs)?;
    Ok(sys)
}

/// Like [`assemble`], also returning the field values at the collocation points.
pub fn assemble_with_values(
    problem: &PdeProblem,
    field: &TensorSplineField,
    colloc: &CollocationSet,
    dofs: &DofMap,
) -> Result<(ResidualSystem, Vec<f64>)> {
    let d = field.dim();
    if d != problem.dim || colloc.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            got: d,
        });
    }
    if dofs.shape() != field.shape() {
        return Err(Error::DimensionMismatch {
            expected: dofs.n_total(),
            got: field.coefficients().len(),
        });
    }
    let m = colloc.len();
    let n_int = dofs.n_interior();
    let tables = AxisTables::new(field.spaces(), colloc)?;
    let st = strides(field.shape());
    let coeffs = field.coefficients();
    let local: Vec<usize> = field.spaces().iter().map(|s| s.degree() + 1).collect();
    let n_local: usize = local.iter().product();
    let n_chunks = m.div_ceil(ROW_CHUNK);

    let chunks: Vec<RowChunk> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let rows = ci * ROW_CHUNK..((ci + 1) * ROW_CHUNK).min(m);
            let mut chunk = RowChunk {
                residual: Vec::with_capacity(rows.len()),
                values: Vec::with_capacity(rows.len()),
                cols: Vec::with_capacity(rows.len() * n_local),
                vals: Vec::with_capacity(rows.len() * n_local),
                counts: Vec::with_capacity(rows.len()),
            };
            let mut phi = vec![0.0; n_local];
            let mut phi_x = vec![0.0; n_local];
            let mut phi_lap = vec![0.0; n_local];
            let mut flat = vec![0usize; n_local];
            for k in rows {
                let mi = colloc.multi_index(k);
                let ders: Vec<&BasisDerivatives> =
                    (0..d).map(|a| &tables.tables[a][mi[a]]).collect();
                let mut l = 0;
                for_each_multi_index(&local, |loc| {
                    let mut v = 1.0;
                    let mut idx = 0;
                    for a in 0..d {
                        v *= ders[a].order(0)[loc[a]];
                        idx += (ders[a].first + loc[a]) * st[a];
                    }
                    let mut vx = ders[0].order(1)[loc[0]];
                    for a in 1..d {
                        vx *= ders[a].order(0)[loc[a]];
                    }
                    let mut lap = 0.0;
                    for a in 0..d {
                        let mut t = ders[a].order(2)[loc[a]];
                        for b in 0..d {
                            if b != a {
                                t *= ders[b].order(0)[loc[b]];
                            }
                        }
                        lap += t;
                    }
                    phi[l] = v;
                    phi_x[l] = vx;
                    phi_lap[l] = lap;
                    flat[l] = idx;
                    l += 1;
                });
                let (mut u, mut ux, mut ul) = (0.0, 0.0, 0.0);
                for l in 0..n_local {
                    let c = coeffs[flat[l]];
                    u += c * phi[l];
                    ux += c * phi_x[l];
                    ul += c * phi_lap[l];
                }
                let point: Vec<f64> = (0..d).map(|a| colloc.axis()[mi[a]]).collect();
                chunk
                    .residual
                    .push(problem.residual_from_derivatives(u, ux, ul, problem.source(&point)));
                chunk.values.push(u);
                let mut count = 0;
                for l in 0..n_local {
                    if let Some(col) = dofs.column(flat[l]) {
                        chunk.cols.push(col);
                        chunk
                            .vals
                            .push(problem.linearized(u, phi[l], phi_x[l], phi_lap[l]));
                        count += 1;
                    }
                }
                chunk.counts.push(count);
            }
            chunk
        })
        .collect();

    let nnz: usize = chunks.iter().map(|c| c.cols.len()).sum();
    let mut residual = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for c in chunks {
        residual.extend(c.residual);
        values.extend(c.values);
        col_idx.extend(c.cols);
        vals.extend(c.vals);
        for count in c.counts {
            row_ptr.push(row_ptr.last().unwrap() + count);
        }
    }
    if residual.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("residual"));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("jacobian"));
    }
    let jacobian = CsrMatrix::new(m, n_int, row_ptr, col_idx, vals)?;
    Ok((ResidualSystem { residual, jacobian }, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_benchmark, Benchmark, BenchmarkParams};

    #[test]
    fn collocation_grids() {
        let c = uniform_collocation(2, 2).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(
            c.points(),
            vec![
                vec![0.25, 0.25],
                vec![0.25, 0.75],
                vec![0.75, 0.25],
                vec![0.75, 0.75]
            ]
        );
        let c = uniform_collocation(30, 2).unwrap();
        assert_eq!(c.len(), 900);
        assert!(c.fill_distance() <= 1.0 / 30.0);
        assert!(c.points().iter().flatten().all(|&x| x > 0.0 && x < 1.0));
        assert_eq!(uniform_collocation(40, 3).unwrap().len(), 64000);
        assert_eq!(
            uniform_collocation(1, 2),
            Err(Error::TooFewCollocationPoints(1))
        );
    }

    #[test]
    fn poisson_dof_counts() {
        let prob = make_benchmark(Benchmark::Poisson2d, &BenchmarkParams::default()).unwrap();
        let s = SplineSpace1D::uniform(3, 30, 0.0, 1.0).unwrap();
        let dofs = apply_dirichlet(&prob, &[s.clone(), s]).unwrap();
        assert_eq!(dofs.n_interior(), 961);
        assert_eq!(dofs.n_total(), 33 * 33);
        assert!(dofs.boundary_values().iter().all(|&(_, v)| v == 0.0));
        assert_eq!(dofs.boundary_values().len() + 961, 33 * 33);
    }

    #[test]
    fn discontinuous_boundary_data_is_flagged() {
        let mut prob =
            make_benchmark(Benchmark::Poisson2d, &BenchmarkParams::default()).unwrap();
        // A single-valued g always agrees at corners; only data that changes
        // between evaluations can disagree.
        let calls = std::sync::atomic::AtomicUsize::new(0);
        prob.dirichlet = std::sync::Arc::new(move |_: &[f64]| {
            calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed) as f64
        });
        let s = SplineSpace1D::uniform(2, 4, 0.0, 1.0).unwrap();
        assert!(matches!(
            apply_dirichlet(&prob, &[s.clone(), s]),
            Err(Error::InconsistentBoundaryData { .. })
        ));
    }
}
