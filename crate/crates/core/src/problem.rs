//! Benchmark PDEs and pointwise strong-form residuals.
//!
//! Every operator is written as
//! `R(u) = laplacian * Δu + advection_x * ∂u/∂x + reaction * u + cubic * u³ + forcing_sign * f`,
//! which covers all the benchmarks with one residual kernel. The sign
//! conventions differ between benchmarks (Poisson is `Δu + f`, the others move
//! `f` to the left with a minus sign); they are frozen per operator.

use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::spline::{for_each_multi_index, strides, TensorSplineField};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorCoefficients {
    pub laplacian: f64,
    pub advection_x: f64,
    pub reaction: f64,
    pub cubic: f64,
    pub forcing_sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operator {
    /// `Δu + f`
    Poisson,
    /// `-ε Δu + ∂u/∂x - f`
    AdvectionDiffusionX { epsilon: f64 },
    /// `-Δu + α u - f`
    Helmholtz { alpha: f64 },
    /// `-Δu + α u - f` on the unit cube (α = κ² for the ball benchmark)
    Helmholtz3D { alpha: f64 },
    /// `-ε² Δu + u³ - u - f`
    AllenCahn { epsilon: f64 },
    /// Any operator of the shared residual form.
    Custom(OperatorCoefficients),
}

impl Operator {
    pub fn coefficients(&self) -> OperatorCoefficients {
        let base = OperatorCoefficients {
            laplacian: -1.0,
            advection_x: 0.0,
            reaction: 0.0,
            cubic: 0.0,
            forcing_sign: -1.0,
        };
        match *self {
            Operator::Poisson => OperatorCoefficients {
                laplacian: 1.0,
                forcing_sign: 1.0,
                ..base
            },
            Operator::AdvectionDiffusionX { epsilon } => OperatorCoefficients {
                laplacian: -epsilon,
                advection_x: 1.0,
                ..base
            },
            Operator::Helmholtz { alpha } | Operator::Helmholtz3D { alpha } => {
                OperatorCoefficients {
                    reaction: alpha,
                    ..base
                }
            }
            Operator::AllenCahn { epsilon } => OperatorCoefficients {
                laplacian: -epsilon * epsilon,
                reaction: -1.0,
                cubic: 1.0,
                ..base
            },
            Operator::Custom(c) => c,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.coefficients().cubic == 0.0
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Operator::AdvectionDiffusionX { epsilon } | Operator::AllenCahn { epsilon }
                if !(epsilon > 0.0 && epsilon.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "epsilon must be positive, got {epsilon}"
                )))
            }
            Operator::Helmholtz { alpha } | Operator::Helmholtz3D { alpha }
                if !(alpha >= 0.0 && alpha.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "alpha must be nonnegative, got {alpha}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Poisson2d,
    ErikssonJohnson,
    Helmholtz2d,
    Helmholtz3dBall,
    AllenCahn,
    EjDisk,
}

impl Benchmark {
    pub const ALL: [Benchmark; 6] = [
        Benchmark::Poisson2d,
        Benchmark::ErikssonJohnson,
        Benchmark::Helmholtz2d,
        Benchmark::Helmholtz3dBall,
        Benchmark::AllenCahn,
        Benchmark::EjDisk,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Poisson2d => "poisson2d",
            Benchmark::ErikssonJohnson => "eriksson_johnson",
            Benchmark::Helmholtz2d => "helmholtz2d",
            Benchmark::Helmholtz3dBall => "helmholtz3d_ball",
            Benchmark::AllenCahn => "allen_cahn",
            Benchmark::EjDisk => "ej_disk",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Benchmark::Helmholtz3dBall => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownBenchmark(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BenchmarkParams {
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub kappa: Option<f64>,
}

/// A boundary value problem on the parametric unit square or cube.
#[derive(Clone)]
pub struct PdeProblem {
    pub benchmark: Option<Benchmark>,
    pub dim: usize,
    pub operator: Operator,
    pub forcing: ScalarFn,
    pub dirichlet: ScalarFn,
    pub exact: Option<ScalarFn>,
    pub exact_gradient: Option<VectorFn>,
    pub geometry: GeometryMap,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("benchmark", &self.benchmark)
            .field("dim", &self.dim)
            .field("operator", &self.operator)
            .field("has_exact", &self.exact.is_some())
            .field("geometry", &self.geometry)
            .finish()
    }
}

impl PdeProblem {
    pub fn new(
        dim: usize,
        operator: Operator,
        forcing: ScalarFn,
        dirichlet: ScalarFn,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: dim,
            });
        }
        operator.validate()?;
        Ok(Self {
            benchmark: None,
            dim,
            operator,
            forcing,
            dirichlet,
            exact: None,
            exact_gradient: None,
            geometry: GeometryMap::Identity(dim),
        })
    }

    pub fn with_exact(mut self, exact: ScalarFn) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_exact_gradient(mut self, grad: VectorFn) -> Self {
        self.exact_gradient = Some(grad);
        self
    }

    pub fn with_geometry(mut self, geometry: GeometryMap) -> Self {
        self.geometry = geometry;
        self
    }

    pub fn coefficients(&self) -> OperatorCoefficients {
        self.operator.coefficients()
    }

    pub fn is_linear(&self) -> bool {
        self.operator.is_linear()
    }

    /// `forcing_sign * f(point)`, the field-independent part of the residual.
    pub fn source(&self, point: &[f64]) -> f64 {
        self.coefficients().forcing_sign * (self.forcing)(point)
    }

    /// Residual from the field value, x-derivative and Laplacian at a point.
    pub fn residual_from_derivatives(&self, u: f64, ux: f64, lap: f64, source: f64) -> f64 {
        let c = self.coefficients();
        c.laplacian * lap + c.advection_x * ux + c.reaction * u + c.cubic * u * u * u + source
    }

    /// Local Jacobian entry for a basis function with value `phi`,
    /// x-derivative `phi_x` and Laplacian `phi_lap`, at field value `u`.
    pub fn linearized(&self, u: f64, phi: f64, phi_x: f64, phi_lap: f64) -> f64 {
        let c = self.coefficients();
        c.laplacian * phi_lap
            + c.advection_x * phi_x
            + (c.reaction + 3.0 * c.cubic * u * u) * phi
    }
}

/// Exponents of the Eriksson–Johnson exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EJExactParams {
    pub r1: f64,
    pub r2: f64,
    pub epsilon: f64,
}

impl EJExactParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let s = (1.0 + 4.0 * epsilon * epsilon * PI * PI).sqrt();
        Ok(Self {
            r1: (1.0 + s) / (2.0 * epsilon),
            r2: (1.0 - s) / (2.0 * epsilon),
            epsilon,
        })
    }

    fn denominator(&self) -> f64 {
        (-self.r1).exp() - (-self.r2).exp()
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        ((self.r1 * (x - 1.0)).exp() - (self.r2 * (x - 1.0)).exp()) / self.denominator()
            * (PI * y).sin()
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let d = self.denominator();
        let ex = (self.r1 * (x - 1.0)).exp() - (self.r2 * (x - 1.0)).exp();
        let dex = self.r1 * (self.r1 * (x - 1.0)).exp() - self.r2 * (self.r2 * (x - 1.0)).exp();
        [dex / d * (PI * y).sin(), ex / d * PI * (PI * y).cos()]
    }
}

/// Eriksson–Johnson exact solution.
pub fn ej_exact(epsilon: f64, x: f64, y: f64) -> Result<f64> {
    Ok(EJExactParams::new(epsilon)?.value(x, y))
}

fn require(value: Option<f64>, benchmark: Benchmark, param: &'static str) -> Result<f64> {
    value.ok_or(Error::MissingParameter {
        benchmark: benchmark.name().to_string(),
        param,
    })
}

fn sine_product(freq: f64) -> (ScalarFn, VectorFn) {
    let u: ScalarFn = Arc::new(move |x: &[f64]| x.iter().map(|&t| (freq * t).sin()).product());
    let g: VectorFn = Arc::new(move |x: &[f64]| {
        (0..x.len())
            .map(|d| {
                x.iter()
                    .enumerate()
                    .map(|(e, &t)| {
                        if e == d {
                            freq * (freq * t).cos()
                        } else {
                            (freq * t).sin()
                        }
                    })
                    .product()
            })
            .collect()
    });
    (u, g)
}

fn zero_fn() -> ScalarFn {
    Arc::new(|_: &[f64]| 0.0)
}

/// Fully wired benchmark problem (operator, forcing, boundary data, exact solution).
pub fn make_benchmark(benchmark: Benchmark, params: &BenchmarkParams) -> Result<PdeProblem> {
    let problem = match benchmark {
        Benchmark::Poisson2d => {
            let (u, g) = sine_product(2.0 * PI);
            let uf = u.clone();
            let f: ScalarFn = Arc::new(move |x: &[f64]| 8.0 * PI * PI * uf(x));
            PdeProblem::new(2, Operator::Poisson, f, zero_fn())?
                .with_exact(u)
                .with_exact_gradient(g)
        }
        Benchmark::ErikssonJohnson | Benchmark::EjDisk => {
            let epsilon = require(params.epsilon, benchmark, "epsilon")?;
            let ej = EJExactParams::new(epsilon)?;
            let inflow: ScalarFn = Arc::new(|x: &[f64]| {
                if x[0] == 0.0 {
                    (PI * x[1]).sin()
                } else {
                    0.0
                }
            });
            let exact: ScalarFn = Arc::new(move |x: &[f64]| ej.value(x[0], x[1]));
            let grad: VectorFn = Arc::new(move |x: &[f64]| ej.gradient(x[0], x[1]).to_vec());
            let p = PdeProblem::new(
                2,
                Operator::AdvectionDiffusionX { epsilon },
                zero_fn(),
                inflow,
            )?
            .with_exact(exact)
            .with_exact_gradient(grad);
            if benchmark == Benchmark::EjDisk {
                p.with_geometry(GeometryMap::SquareToDisk)
            } else {
                p
            }
        }
        Benchmark::Helmholtz2d => {
            let kappa = require(params.kappa, benchmark, "kappa")?;
            let alpha = params.alpha.unwrap_or(1.0);
            let (u, g) = sine_product(kappa * PI);
            let uf = u.clone();
            let scale = 2.0 * (kappa * PI).powi(2) + alpha;
            let f: ScalarFn = Arc::new(move |x: &[f64]| scale * uf(x));
            PdeProblem::new(2, Operator::Helmholtz { alpha }, f, zero_fn())?
                .with_exact(u)
                .with_exact_gradient(g)
        }
        Benchmark::Helmholtz3dBall => {
            let kappa = require(params.kappa, benchmark, "kappa")?;
            let (u, g) = sine_product(kappa * PI);
            let uf = u.clone();
            let k2 = kappa * kappa;
            let scale = 3.0 * k2 * PI * PI + k2;
            let f: ScalarFn = Arc::new(move |x: &[f64]| scale * uf(x));
            PdeProblem::new(3, Operator::Helmholtz3D { alpha: k2 }, f, zero_fn())?
                .with_exact(u)
                .with_exact_gradient(g)
                .with_geometry(GeometryMap::CubeToBall)
        }
        Benchmark::AllenCahn => {
            let epsilon = require(params.epsilon, benchmark, "epsilon")?;
            let w = std::f64::consts::SQRT_2 * epsilon;
            let u: ScalarFn = Arc::new(move |x: &[f64]| ((x[0] + x[1] - 1.0) / w).tanh());
            let grad: VectorFn = Arc::new(move |x: &[f64]| {
                let t = ((x[0] + x[1] - 1.0) / w).tanh();
                let d = (1.0 - t * t) / w;
                vec![d, d]
            });
            let f: ScalarFn = Arc::new(move |x: &[f64]| {
                let t = ((x[0] + x[1] - 1.0) / w).tanh();
                t - t * t * t
            });
            PdeProblem::new(2, Operator::AllenCahn { epsilon }, f, u.clone())?
                .with_exact(u)
                .with_exact_gradient(grad)
        }
    };
    Ok(PdeProblem {
        benchmark: Some(benchmark),
        ..problem
    })
}

/// Strong-form residual of `field` at a parametric point.
pub fn residual_at(problem: &PdeProblem, field: &TensorSplineField, point: &[f64]) -> Result<f64> {
    let d = field.dim();
    if d != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            got: d,
        });
    }
    let mut orders = vec![0usize; d];
    let u = field.eval(point, &orders)?;
    orders[0] = 1;
    let ux = field.eval(point, &orders)?;
    let mut lap = 0.0;
    for axis in 0..d {
        orders.iter_mut().for_each(|o| *o = 0);
        orders[axis] = 2;
        lap += field.eval(point, &orders)?;
    }
    Ok(problem.residual_from_derivatives(u, ux, lap, problem.source(point)))
}

/// Sparse gradient of one pointwise residual with respect to the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// `∂R(point)/∂c` over the `(p+1)^d` coefficients active at `point`.
pub fn residual_gradient_row(
    problem: &PdeProblem,
    field: &TensorSplineField,
    point: &[f64],
) -> Result<SparseRow> {
    let d = field.dim();
    if d != problem.dim || point.len() != d {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            got: d.min(point.len()),
        });
    }
    let u = if problem.is_linear() {
        0.0
    } else {
        field.value(point)?
    };
    let ders = point
        .iter()
        .zip(field.spaces())
        .map(|(&x, s)| s.eval_derivatives(x))
        .collect::<Result<Vec<_>>>()?;
    let st = strides(field.shape());
    let local: Vec<usize> = ders.iter().map(|b| b.len()).collect();
    let mut row = SparseRow {
        indices: Vec::with_capacity(local.iter().product()),
        values: Vec::with_capacity(local.iter().product()),
    };
    for_each_multi_index(&local, |m| {
        let mut phi = 1.0;
        let mut flat = 0;
        for a in 0..d {
            phi *= ders[a].order(0)[m[a]];
            flat += (ders[a].first + m[a]) * st[a];
        }
        let mut phi_x = ders[0].order(1)[m[0]];
        for a in 1..d {
            phi_x *= ders[a].order(0)[m[a]];
        }
        let mut lap = 0.0;
        for a in 0..d {
            let mut t = ders[a].order(2)[m[a]];
            for b in 0..d {
                if b != a {
                    t *= ders[b].order(0)[m[b]];
                }
            }
            lap += t;
        }
        row.indices.push(flat);
        row.values.push(problem.linearized(u, phi, phi_x, lap));
    });
    Ok(row)
}
