//! Parametric-to-physical maps used when sampling solutions for output.
//!
//! Solves always happen on the parametric unit square/cube; these maps only
//! place the sampled values on the physical disk or ball.

use crate::error::{Error, Result};
use crate::spline::{for_each_multi_index, TensorSplineField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryMap {
    Identity(usize),
    SquareToDisk,
    CubeToBall,
}

impl GeometryMap {
    pub fn dim(&self) -> usize {
        match *self {
            GeometryMap::Identity(d) => d,
            GeometryMap::SquareToDisk => 2,
            GeometryMap::CubeToBall => 3,
        }
    }

    pub fn map_point(&self, parametric: &[f64]) -> Result<Vec<f64>> {
        if parametric.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: parametric.len(),
            });
        }
        for &t in parametric {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::OutOfDomain {
                    x: t,
                    a: 0.0,
                    b: 1.0,
                });
            }
        }
        let centered: Vec<f64> = parametric.iter().map(|&t| 2.0 * t - 1.0).collect();
        Ok(match *self {
            GeometryMap::Identity(_) => parametric.to_vec(),
            GeometryMap::SquareToDisk => {
                let (a, b) = (centered[0], centered[1]);
                vec![
                    a * radical(1.0 - b * b / 2.0),
                    b * radical(1.0 - a * a / 2.0),
                ]
            }
            GeometryMap::CubeToBall => {
                let (a, b, c) = (centered[0], centered[1], centered[2]);
                let (a2, b2, c2) = (a * a, b * b, c * c);
                vec![
                    a * radical(1.0 - b2 / 2.0 - c2 / 2.0 + b2 * c2 / 3.0),
                    b * radical(1.0 - a2 / 2.0 - c2 / 2.0 + a2 * c2 / 3.0),
                    c * radical(1.0 - a2 / 2.0 - b2 / 2.0 + a2 * b2 / 3.0),
                ]
            }
        })
    }
}

// Radicands are nonnegative on the closed cube; the clamp only absorbs rounding.
fn radical(v: f64) -> f64 {
    v.max(0.0).sqrt()
}

/// Free function form of [`GeometryMap::map_point`].
pub fn map_point(map: GeometryMap, parametric: &[f64]) -> Result<Vec<f64>> {
    map.map_point(parametric)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub physical: Vec<f64>,
    pub value: f64,
}

/// Evaluates `field` on a uniform parametric grid (endpoints included) and
/// maps every sample to physical coordinates. Rows are row-major in the
/// parametric grid, last axis fastest.
pub fn sample_mapped_grid(
    map: GeometryMap,
    field: &TensorSplineField,
    samples_per_dim: usize,
) -> Result<Vec<SampleRow>> {
    if samples_per_dim < 2 {
        return Err(Error::TooFewSamples(samples_per_dim));
    }
    let d = field.dim();
    if map.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: map.dim(),
        });
    }
    let coords: Vec<f64> = (0..samples_per_dim)
        .map(|i| i as f64 / (samples_per_dim - 1) as f64)
        .collect();
    let extent = vec![samples_per_dim; d];
    let mut rows = Vec::with_capacity(samples_per_dim.pow(d as u32));
    let mut err = None;
    for_each_multi_index(&extent, |m| {
        if err.is_some() {
            return;
        }
        let p: Vec<f64> = m.iter().map(|&i| coords[i]).collect();
        match (map.map_point(&p), field.value(&p)) {
            (Ok(physical), Ok(value)) => rows.push(SampleRow { physical, value }),
            (Err(e), _) | (_, Err(e)) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::SplineSpace1D;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn disk_examples() {
        let c = GeometryMap::SquareToDisk.map_point(&[0.5, 0.5]).unwrap();
        assert_eq!(c, vec![0.0, 0.0]);
        let p = GeometryMap::SquareToDisk.map_point(&[1.0, 1.0]).unwrap();
        assert!((p[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((p[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((norm(&p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_examples() {
        let p = GeometryMap::CubeToBall.map_point(&[1.0, 0.5, 0.5]).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let c = GeometryMap::CubeToBall.map_point(&[0.5; 3]).unwrap();
        assert_eq!(c, vec![0.0; 3]);
        let corner = GeometryMap::CubeToBall.map_point(&[1.0; 3]).unwrap();
        assert!((norm(&corner) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_passthrough_and_errors() {
        let m = GeometryMap::Identity(2);
        assert_eq!(m.map_point(&[0.2, 0.9]).unwrap(), vec![0.2, 0.9]);
        assert!(m.map_point(&[0.2]).is_err());
        assert!(m.map_point(&[1.2, 0.0]).is_err());
    }

    #[test]
    fn sample_constant_field() {
        let s = SplineSpace1D::uniform(2, 3, 0.0, 1.0).unwrap();
        let n = s.n_basis() * s.n_basis();
        let f = TensorSplineField::new(vec![s.clone(), s], vec![1.0; n]).unwrap();
        let rows = sample_mapped_grid(GeometryMap::Identity(2), &f, 3).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| (r.value - 1.0).abs() < 1e-14));
        let rows = sample_mapped_grid(GeometryMap::SquareToDisk, &f, 2).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!((norm(&r.physical) - 1.0).abs() < 1e-12);
        }
        assert!(sample_mapped_grid(GeometryMap::SquareToDisk, &f, 1).is_err());
        assert!(sample_mapped_grid(GeometryMap::CubeToBall, &f, 3).is_err());
    }
}
