//! Univariate B-spline spaces on open knot vectors and tensor-product fields.
//!
//! Basis evaluation follows the triangular Cox–de Boor scheme and works in a
//! fixed-size stack workspace, so it can be called from the innermost loops of
//! assembly without allocating.

use crate::error::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

/// Highest polynomial degree supported by the stack-allocated evaluators.
pub const MAX_DEGREE: usize = 8;

const W: usize = MAX_DEGREE + 1;

/// Highest derivative order any operator needs.
pub const MAX_DERIVATIVE: usize = 2;

/// A univariate B-spline space with an open knot vector on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace1D {
    degree: usize,
    knots: Vec<f64>,
    n_elements: usize,
    a: f64,
    b: f64,
    h: f64,
}

/// Values (or derivatives) of the `p + 1` basis functions active at a point.
#[derive(Debug, Clone, Copy)]
pub struct BasisValues {
    pub first: usize,
    len: usize,
    values: [f64; W],
}

impl BasisValues {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }
}

/// Active basis values together with their first and second derivatives.
#[derive(Debug, Clone, Copy)]
pub struct BasisDerivatives {
    pub first: usize,
    len: usize,
    ders: [[f64; W]; MAX_DERIVATIVE + 1],
}

impl BasisDerivatives {
    /// Row `order` of the derivative table (order 0 = values).
    pub fn order(&self, order: usize) -> &[f64] {
        &self.ders[order][..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl SplineSpace1D {
    /// Uniform open knot vector with `n_elements` spans of degree `p` on `[a, b]`.
    pub fn uniform(p: usize, n_elements: usize, a: f64, b: f64) -> Result<Self> {
        if p == 0 || p > MAX_DEGREE {
            return Err(Error::InvalidDegree(p));
        }
        if n_elements == 0 {
            return Err(Error::InvalidElementCount(n_elements));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::DegenerateInterval { a, b });
        }
        let h = (b - a) / n_elements as f64;
        let mut knots = Vec::with_capacity(n_elements + 2 * p + 1);
        knots.extend(std::iter::repeat(a).take(p + 1));
        for i in 1..n_elements {
            knots.push(a + (b - a) * i as f64 / n_elements as f64);
        }
        knots.extend(std::iter::repeat(b).take(p + 1));
        Ok(Self {
            degree: p,
            knots,
            n_elements,
            a,
            b,
            h,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn mesh_size(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Element boundaries (distinct knot values), `n_elements + 1` entries.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[self.degree..self.knots.len() - self.degree]
    }

    fn check_domain(&self, x: f64) -> Result<f64> {
        let slack = 1e-12 * (self.b - self.a);
        if !(x >= self.a - slack && x <= self.b + slack) {
            return Err(Error::OutOfDomain {
                x,
                a: self.a,
                b: self.b,
            });
        }
        Ok(x.clamp(self.a, self.b))
    }

    /// Knot span index `i` with `knots[i] <= x < knots[i + 1]`; the last span is closed.
    pub fn find_span(&self, x: f64) -> Result<usize> {
        let x = self.check_domain(x)?;
        Ok(self.span_unchecked(x))
    }

    fn span_unchecked(&self, x: f64) -> usize {
        let n = self.n_basis();
        let p = self.degree;
        if x >= self.knots[n] {
            return n - 1;
        }
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Active basis functions at `x`, differentiated `order` times.
    pub fn eval_basis(&self, x: f64, order: usize) -> Result<BasisValues> {
        if order > MAX_DERIVATIVE {
            return Err(Error::UnsupportedDerivative(order));
        }
        let d = self.eval_derivatives(x)?;
        let mut values = [0.0; W];
        values[..d.len].copy_from_slice(d.order(order));
        Ok(BasisValues {
            first: d.first,
            len: d.len,
            values,
        })
    }

    /// Values, first and second derivatives of the active basis at `x`.
    pub fn eval_derivatives(&self, x: f64) -> Result<BasisDerivatives> {
        let x = self.check_domain(x)?;
        let span = self.span_unchecked(x);
        Ok(self.ders_basis_funs(span, x))
    }

    // Triangular Cox–de Boor table with derivative recurrences.
    fn ders_basis_funs(&self, span: usize, x: f64) -> BasisDerivatives {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = [[0.0f64; W]; W];
        let mut left = [0.0f64; W];
        let mut right = [0.0f64; W];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = [[0.0f64; W]; MAX_DERIVATIVE + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let n = MAX_DERIVATIVE.min(p);
        let mut a = [[0.0f64; W]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=n {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=n {
            for v in ders[k].iter_mut().take(p + 1) {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        BasisDerivatives {
            first: span - p,
            len: p + 1,
            ders,
        }
    }

    /// Knot averages `(t_{i+1} + ... + t_{i+p}) / p`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.n_basis())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }
}

/// Free function form of [`SplineSpace1D::uniform`].
pub fn make_uniform_open_space(
    p: usize,
    n_elements: usize,
    a: f64,
    b: f64,
) -> Result<SplineSpace1D> {
    SplineSpace1D::uniform(p, n_elements, a, b)
}

/// Interpolation at the Greville abscissae, factorized once per space.
pub struct GrevilleInterpolator {
    nodes: Vec<f64>,
    lu: PartialPivLu<f64>,
}

impl GrevilleInterpolator {
    pub fn new(space: &SplineSpace1D) -> Result<Self> {
        let nodes = space.greville();
        let n = nodes.len();
        let mut m = Mat::<f64>::zeros(n, n);
        for (row, &x) in nodes.iter().enumerate() {
            let b = space.eval_basis(x, 0)?;
            for (k, &v) in b.values().iter().enumerate() {
                m[(row, b.first + k)] = v;
            }
        }
        let lu = m.partial_piv_lu();
        Ok(Self { nodes, lu })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Coefficients whose spline takes `values` at the nodes.
    pub fn fit(&self, values: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(values.len(), 1, |i, _| values[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..values.len()).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Row-major strides for a shape (last axis fastest).
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Tensor-product spline field `u(x) = sum_I c_I prod_d B_{i_d}(x_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSplineField {
    spaces: Vec<SplineSpace1D>,
    shape: Vec<usize>,
    coefficients: Vec<f64>,
}

impl TensorSplineField {
    pub fn new(spaces: Vec<SplineSpace1D>, coefficients: Vec<f64>) -> Result<Self> {
        if spaces.is_empty() || spaces.len() > 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: spaces.len(),
            });
        }
        let shape: Vec<usize> = spaces.iter().map(|s| s.n_basis()).collect();
        let total: usize = shape.iter().product();
        if coefficients.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: coefficients.len(),
            });
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient(i));
        }
        Ok(Self {
            spaces,
            shape,
            coefficients,
        })
    }

    pub fn zeros(spaces: Vec<SplineSpace1D>) -> Result<Self> {
        let total = spaces.iter().map(|s| s.n_basis()).product();
        Self::new(spaces, vec![0.0; total])
    }

    /// Interpolates `f` at the tensor grid of Greville abscissae.
    pub fn interpolate<F>(spaces: Vec<SplineSpace1D>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let interps = spaces
            .iter()
            .map(GrevilleInterpolator::new)
            .collect::<Result<Vec<_>>>()?;
        let shape: Vec<usize> = spaces.iter().map(|s| s.n_basis()).collect();
        let st = strides(&shape);
        let total: usize = shape.iter().product();
        let mut values = vec![0.0; total];
        let mut point = vec![0.0; shape.len()];
        for (flat, v) in values.iter_mut().enumerate() {
            for d in 0..shape.len() {
                point[d] = interps[d].nodes()[(flat / st[d]) % shape[d]];
            }
            *v = f(&point);
        }
        for d in 0..shape.len() {
            fit_along_axis(&mut values, &shape, d, &interps[d]);
        }
        Self::new(spaces, values)
    }

    pub fn dim(&self) -> usize {
        self.spaces.len()
    }

    pub fn spaces(&self) -> &[SplineSpace1D] {
        &self.spaces
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Flat coefficient indices read when evaluating at `point`, in increasing order.
    pub fn active_indices(&self, point: &[f64]) -> Result<Vec<usize>> {
        self.check_point(point)?;
        let firsts = point
            .iter()
            .zip(&self.spaces)
            .map(|(&x, s)| s.find_span(x).map(|span| span - s.degree()))
            .collect::<Result<Vec<_>>>()?;
        let local: Vec<usize> = self.spaces.iter().map(|s| s.degree() + 1).collect();
        let st = strides(&self.shape);
        let mut out = Vec::with_capacity(local.iter().product());
        for_each_multi_index(&local, |m| {
            out.push((0..m.len()).map(|d| (firsts[d] + m[d]) * st[d]).sum());
        });
        Ok(out)
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Evaluates the mixed partial derivative given by `orders` at `point`.
    pub fn eval(&self, point: &[f64], orders: &[usize]) -> Result<f64> {
        self.check_point(point)?;
        if orders.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: orders.len(),
            });
        }
        let bases = point
            .iter()
            .zip(&self.spaces)
            .zip(orders)
            .map(|((&x, s), &r)| s.eval_basis(x, r))
            .collect::<Result<Vec<_>>>()?;
        let st = strides(&self.shape);
        let local: Vec<usize> = bases.iter().map(|b| b.values().len()).collect();
        let mut sum = 0.0;
        for_each_multi_index(&local, |m| {
            let mut w = 1.0;
            let mut flat = 0;
            for d in 0..m.len() {
                w *= bases[d].values()[m[d]];
                flat += (bases[d].first + m[d]) * st[d];
            }
            sum += w * self.coefficients[flat];
        });
        Ok(sum)
    }

    pub fn value(&self, point: &[f64]) -> Result<f64> {
        self.eval(point, &vec![0; self.dim()])
    }
}

/// Free function form of [`TensorSplineField::eval`].
pub fn eval_field(field: &TensorSplineField, point: &[f64], orders: &[usize]) -> Result<f64> {
    field.eval(point, orders)
}

/// Solves the 1D interpolation system along axis `axis` for every grid line.
pub(crate) fn fit_along_axis(
    values: &mut [f64],
    shape: &[usize],
    axis: usize,
    interp: &GrevilleInterpolator,
) {
    let st = strides(shape);
    let n = shape[axis];
    let stride = st[axis];
    let total = values.len();
    let mut line = vec![0.0; n];
    for start in 0..total {
        if (start / stride) % n != 0 {
            continue;
        }
        for (k, v) in line.iter_mut().enumerate() {
            *v = values[start + k * stride];
        }
        let c = interp.fit(&line);
        for (k, v) in c.into_iter().enumerate() {
            values[start + k * stride] = v;
        }
    }
}

/// Visits every multi-index in the box `0..extent[0] x ... x 0..extent[d-1]`,
/// last axis fastest.
pub fn for_each_multi_index(extent: &[usize], mut f: impl FnMut(&[usize])) {
    if extent.iter().any(|&e| e == 0) {
        return;
    }
    let mut m = [0usize; 3];
    let d = extent.len();
    loop {
        f(&m[..d]);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            m[axis] += 1;
            if m[axis] < extent[axis] {
                break;
            }
            m[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_space_counts() {
        let s = SplineSpace1D::uniform(3, 30, 0.0, 1.0).unwrap();
        assert_eq!(s.n_basis(), 33);
        let s = SplineSpace1D::uniform(1, 10, 0.0, 1.0).unwrap();
        assert_eq!(s.n_basis(), 11);
        assert_eq!(s.knots().len(), 13);
        assert_eq!(&s.knots()[..2], &[0.0, 0.0]);
        assert!((s.knots()[2] - 0.1).abs() < 1e-15);
        assert!((s.knots()[10] - 0.9).abs() < 1e-15);
        assert_eq!(&s.knots()[11..], &[1.0, 1.0]);
        let s = SplineSpace1D::uniform(2, 1, 0.0, 1.0).unwrap();
        assert_eq!(s.knots(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.n_basis(), 3);
    }

    #[test]
    fn invalid_spaces() {
        assert_eq!(
            SplineSpace1D::uniform(0, 3, 0.0, 1.0),
            Err(Error::InvalidDegree(0))
        );
        assert_eq!(
            SplineSpace1D::uniform(2, 0, 0.0, 1.0),
            Err(Error::InvalidElementCount(0))
        );
        assert!(matches!(
            SplineSpace1D::uniform(2, 3, 1.0, 1.0),
            Err(Error::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn bernstein_midpoint() {
        let s = SplineSpace1D::uniform(2, 1, 0.0, 1.0).unwrap();
        let b = s.eval_basis(0.5, 0).unwrap();
        assert_eq!(b.first, 0);
        for (v, e) in b.values().iter().zip([0.25, 0.5, 0.25]) {
            assert!((v - e).abs() < 1e-15);
        }
        let b = s.eval_basis(0.5, 1).unwrap();
        for (v, e) in b.values().iter().zip([-1.0, 0.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        let b = s.eval_basis(0.5, 2).unwrap();
        for (v, e) in b.values().iter().zip([2.0, -4.0, 2.0]) {
            assert!((v - e).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_above_degree_vanishes() {
        let s = SplineSpace1D::uniform(1, 4, 0.0, 1.0).unwrap();
        let b = s.eval_basis(0.3, 2).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
        assert_eq!(
            s.eval_basis(0.3, 3).unwrap_err(),
            Error::UnsupportedDerivative(3)
        );
    }

    #[test]
    fn out_of_domain() {
        let s = SplineSpace1D::uniform(2, 4, 0.0, 1.0).unwrap();
        assert!(matches!(
            s.eval_basis(1.1, 0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(s.eval_basis(-0.5, 0).is_err());
        assert!(s.eval_basis(f64::NAN, 0).is_err());
    }

    #[test]
    fn right_endpoint_uses_last_span() {
        let s = SplineSpace1D::uniform(3, 5, 0.0, 1.0).unwrap();
        let b = s.eval_basis(1.0, 0).unwrap();
        assert_eq!(b.first, s.n_basis() - 4);
        assert_eq!(b.values(), &[0.0, 0.0, 0.0, 1.0]);
        let b = s.eval_basis(0.0, 0).unwrap();
        assert_eq!(b.first, 0);
        assert_eq!(b.values()[0], 1.0);
    }

    #[test]
    fn greville_points() {
        let s = SplineSpace1D::uniform(2, 1, 0.0, 1.0).unwrap();
        assert_eq!(s.greville(), vec![0.0, 0.5, 1.0]);
        let s = SplineSpace1D::uniform(1, 2, 0.0, 1.0).unwrap();
        assert_eq!(s.greville(), vec![0.0, 0.5, 1.0]);
        let g = SplineSpace1D::uniform(3, 4, 0.0, 1.0).unwrap().greville();
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
    }

    #[test]
    fn field_constants() {
        let sx = SplineSpace1D::uniform(2, 3, 0.0, 1.0).unwrap();
        let sy = SplineSpace1D::uniform(3, 4, 0.0, 1.0).unwrap();
        let n = sx.n_basis() * sy.n_basis();
        let ones = TensorSplineField::new(vec![sx.clone(), sy.clone()], vec![1.0; n]).unwrap();
        let zeros = TensorSplineField::zeros(vec![sx, sy]).unwrap();
        for p in [[0.0, 0.0], [0.3, 0.77], [1.0, 0.5]] {
            assert!((ones.eval(&p, &[0, 0]).unwrap() - 1.0).abs() < 1e-14);
            assert_eq!(zeros.eval(&p, &[2, 1]).unwrap(), 0.0);
        }
    }

    #[test]
    fn bilinear_reproduction() {
        let s = SplineSpace1D::uniform(1, 5, 0.0, 1.0).unwrap();
        let f = TensorSplineField::interpolate(vec![s.clone(), s], |x| x[0] * x[1]).unwrap();
        for p in [[0.13, 0.71], [0.5, 0.5], [0.99, 0.01]] {
            assert!((f.eval(&p, &[1, 1]).unwrap() - 1.0).abs() < 1e-12);
            assert!((f.value(&p).unwrap() - p[0] * p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn field_shape_mismatch() {
        let s = SplineSpace1D::uniform(2, 3, 0.0, 1.0).unwrap();
        assert!(matches!(
            TensorSplineField::new(vec![s.clone(), s.clone()], vec![0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut c = vec![0.0; 25];
        c[7] = f64::NAN;
        assert_eq!(
            TensorSplineField::new(vec![s.clone(), s], c),
            Err(Error::NonFiniteCoefficient(7))
        );
    }

    #[test]
    fn multi_index_order() {
        let mut seen = Vec::new();
        for_each_multi_index(&[2, 3], |m| seen.push((m[0], m[1])));
        assert_eq!(
            seen,
            vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
        );
    }
}
