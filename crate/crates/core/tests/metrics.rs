use igaodil::gram::GramKind;
use igaodil::metrics::{
    error_report, l2_error, loss_error_series, observed_rate, rank_correlation,
};
use igaodil::pipeline::{solve_forward, ForwardSetup};
use igaodil::problem::{make_benchmark, Benchmark, BenchmarkParams};
use igaodil::solver::GnConfig;
use igaodil::spline::{SplineSpace1D, TensorSplineField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Closed Newton–Cotes weights on `[0, 1]` with `k + 1` equispaced nodes,
/// from the moment equations.
fn newton_cotes(k: usize) -> Vec<f64> {
    let n = k + 1;
    let nodes: Vec<f64> = (0..n).map(|i| i as f64 / k as f64).collect();
    let mut a: Vec<Vec<f64>> = (0..n).map(|r| nodes.iter().map(|x| x.powi(r as i32)).collect()).collect();
    let mut b: Vec<f64> = (0..n).map(|r| 1.0 / (r + 1) as f64).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..n {
                    a[r][j] -= f * a[c][j];
                }
                b[r] -= f * b[c];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// 1D mass matrix by element-wise Newton–Cotes of degree 2p.
fn mass_matrix(s: &SplineSpace1D) -> Vec<Vec<f64>> {
    let nb = s.n_basis();
    let k = 2 * s.degree();
    let w = newton_cotes(k);
    let br = s.breakpoints();
    let mut m = vec![vec![0.0; nb]; nb];
    for e in 0..s.n_elements() {
        let (lo, hi) = (br[e], br[e + 1]);
        for (q, wq) in w.iter().enumerate() {
            // Nudge the element ends inward so the active span is this element.
            let t = (q as f64 / k as f64).clamp(1e-14, 1.0 - 1e-14);
            let x = lo + t * (hi - lo);
            let v = s.eval_basis(x, 0).unwrap();
            for (a, va) in v.values().iter().enumerate() {
                for (b, vb) in v.values().iter().enumerate() {
                    m[v.first + a][v.first + b] += wq * (hi - lo) * va * vb;
                }
            }
        }
    }
    m
}

#[test]
fn quadrature_matches_gram_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (p, n) in [(1, 3), (2, 4), (3, 5)] {
        let s = SplineSpace1D::uniform(p, n, 0.0, 1.0).unwrap();
        let nb = s.n_basis();
        let c: Vec<f64> = (0..nb * nb).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = TensorSplineField::new(vec![s.clone(), s.clone()], c.clone()).unwrap();
        let m = mass_matrix(&s);
        let mut norm2 = 0.0;
        for i in 0..nb {
            for j in 0..nb {
                for k in 0..nb {
                    for l in 0..nb {
                        norm2 += c[i * nb + j] * c[k * nb + l] * m[i][k] * m[j][l];
                    }
                }
            }
        }
        let got = l2_error(&f, &|_: &[f64]| 0.0, p + 1).unwrap();
        assert!((got - norm2.sqrt()).abs() < 1e-10, "p={p}: {got} vs {}", norm2.sqrt());
    }
}

#[test]
fn zero_field_against_poisson_solution() {
    let s = SplineSpace1D::uniform(3, 8, 0.0, 1.0).unwrap();
    let f = TensorSplineField::zeros(vec![s.clone(), s]).unwrap();
    let exact = |x: &[f64]| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
    let rep = error_report(&f, &exact, None).unwrap();
    assert_eq!(rep.quadrature_order, 4);
    assert!((rep.l2_error - 0.5).abs() < 1e-3, "{}", rep.l2_error);
    // Higher quadrature converges to the exact 1/2.
    assert!((l2_error(&f, &exact, 10).unwrap() - 0.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn scale_equivariance(seed in 0u64..1000, scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = SplineSpace1D::uniform(2, 3, 0.0, 1.0).unwrap();
        let c: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = TensorSplineField::new(vec![s.clone(), s.clone()], c.clone()).unwrap();
        let g = TensorSplineField::new(vec![s.clone(), s], c.iter().map(|v| scale * v).collect()).unwrap();
        let exact = |x: &[f64]| (x[0] * 3.0).cos() + x[1];
        let scaled = move |x: &[f64]| scale * exact(x);
        let a = l2_error(&f, &exact, 3).unwrap();
        let b = l2_error(&g, &scaled, 3).unwrap();
        prop_assert!((b - scale * a).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn geometric_sequences(c in 0.01f64..100.0, rate in 0.5f64..6.0, h0 in 0.05f64..1.0) {
        let hs: Vec<f64> = (0..4).map(|k| h0 / 2f64.powi(k)).collect();
        let es: Vec<f64> = hs.iter().map(|h| c * h.powf(rate)).collect();
        prop_assert!((observed_rate(&es, &hs).unwrap() - rate).abs() < 1e-12);
    }
}

#[test]
fn rate_input_errors() {
    assert!(observed_rate(&[1.0], &[0.1]).is_err());
    assert!(observed_rate(&[1.0, 0.5], &[0.1]).is_err());
    assert!(observed_rate(&[1.0, 0.5], &[0.1, -0.05]).is_err());
    assert!(rank_correlation(&[1.0], &[1.0]).is_err());
}

#[test]
fn loss_and_error_decrease_together() {
    let problem = make_benchmark(Benchmark::Poisson2d, &BenchmarkParams::default()).unwrap();
    for gram in [GramKind::Identity, GramKind::DiscreteH1] {
        let rows = loss_error_series(&problem, 3, &[10, 20, 40], gram, &GnConfig::default()).unwrap();
        let loss: Vec<f64> = rows.iter().map(|r| r.sqrt_loss).collect();
        let err: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
        assert!(loss.windows(2).all(|w| w[1] < w[0]), "{gram}: {loss:?}");
        assert!(err.windows(2).all(|w| w[1] < w[0]), "{gram}: {err:?}");
        assert_eq!(rank_correlation(&loss, &err).unwrap(), 1.0);
    }
    assert!(loss_error_series(&problem, 3, &[10, 20], GramKind::Identity, &GnConfig::default()).is_err());
}

#[test]
fn poisson_rates_reach_p_minus_one() {
    let problem = make_benchmark(Benchmark::Poisson2d, &BenchmarkParams::default()).unwrap();
    let ns = [8, 16, 32, 64];
    for p in [2, 3] {
        let errors: Vec<f64> = ns
            .iter()
            .map(|&n| {
                solve_forward(&problem, &ForwardSetup::new(p, n, 2 * n), &GnConfig::default())
                    .unwrap()
                    .l2_error
                    .unwrap()
            })
            .collect();
        let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
        let rate = observed_rate(&errors, &hs).unwrap();
        assert!(rate >= (p - 1) as f64, "p={p}: rate {rate}");
    }
}
