//! Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL
//! line each. Runs on a single worker thread so timings are single-core.
//!
//! Failing criteria are reported but do not fail the process unless
//! `IGAODIL_ACCEPTANCE_STRICT=1` is set.

mod common;

use common::{inf_norm, max_abs_diff, qr_least_squares};
use igaodil::assembly::{apply_dirichlet, assemble, uniform_collocation};
use igaodil::gram::{build_gram, robust_loss, GramKind, GramOperator};
use igaodil::inverse::{
    assemble_inverse, default_inverse_config, solve_inverse, InverseProblem, InverseSetup,
};
use igaodil::linalg::CsrMatrix;
use igaodil::metrics::observed_rate;
use igaodil::odil_fd::odil_solve;
use igaodil::pipeline::{solve_forward, ForwardSetup, ForwardSolution};
use igaodil::problem::{make_benchmark, Benchmark, BenchmarkParams, PdeProblem};
use igaodil::solver::{solve_linear_normal_equations, GnConfig};
use igaodil::spline::SplineSpace1D;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn bench(b: Benchmark, epsilon: Option<f64>, kappa: Option<f64>) -> PdeProblem {
    make_benchmark(
        b,
        &BenchmarkParams {
            epsilon,
            kappa,
            alpha: None,
        },
    )
    .expect("benchmark parameters")
}

fn timed_solve(problem: &PdeProblem, setup: ForwardSetup) -> (ForwardSolution, f64) {
    let t = Instant::now();
    let sol = solve_forward(problem, &setup, &GnConfig::default()).expect("forward solve");
    (sol, t.elapsed().as_secs_f64())
}

fn c1_poisson_table() -> Outcome {
    let problem = bench(Benchmark::Poisson2d, None, None);
    let cases = [
        (3, 20, 4e-5, 4e-4),
        (3, 30, 2e-4, 2e-3),
        (1, 20, 0.45, 0.55),
        (1, 30, 0.45, 0.55),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, n, lo, hi) in cases {
        let (sol, secs) = timed_solve(&problem, ForwardSetup::new(p, n, 30));
        let e = sol.l2_error.unwrap();
        let ok = within(e, lo, hi) && secs < 5.0;
        pass &= ok;
        parts.push(format!("p{p} n{n}: {e:.3e} ({secs:.2}s)"));
    }
    Outcome::new(pass, parts.join(", "))
}

fn c2_linear_one_step() -> Outcome {
    let cases = [
        (bench(Benchmark::Poisson2d, None, None), ForwardSetup::new(3, 20, 40)),
        (
            bench(Benchmark::ErikssonJohnson, Some(0.001), None),
            ForwardSetup::new(3, 100, 200),
        ),
        (
            bench(Benchmark::Helmholtz2d, None, Some(40.0)),
            ForwardSetup::new(3, 80, 160),
        ),
        (
            bench(Benchmark::Helmholtz3dBall, None, Some(6.0)),
            ForwardSetup::new(3, 16, 30),
        ),
        (
            bench(Benchmark::EjDisk, Some(0.1), None),
            ForwardSetup::new(3, 20, 40),
        ),
    ];
    let forced = GnConfig {
        min_iterations: 2,
        ..GnConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (problem, setup) in cases {
        let one = solve_forward(&problem, &setup, &GnConfig::default()).expect("solve");
        let two = solve_forward(&problem, &setup, &forced).expect("forced solve");
        let d2 = two.report.step_norm_history.get(1).copied().unwrap_or(f64::NAN);
        let ok = one.report.iterations == 1 && one.report.final_step_norm <= 1e-10 && d2 <= 1e-8;
        pass &= ok;
        parts.push(format!(
            "{}: {} it, |d2| {d2:.1e}",
            problem.benchmark.unwrap(),
            one.report.iterations
        ));
    }
    Outcome::new(pass, parts.join(", "))
}

fn c3_eriksson_johnson() -> Outcome {
    let problem = bench(Benchmark::ErikssonJohnson, Some(0.001), None);
    let (p1, s1) = timed_solve(&problem, ForwardSetup::new(1, 100, 500));
    let (p3, s3) = timed_solve(&problem, ForwardSetup::new(3, 300, 500));
    let (e1, e3) = (p1.l2_error.unwrap(), p3.l2_error.unwrap());
    Outcome::new(
        within(e1, 0.37, 0.43) && e3 <= 6e-2 && s3 <= 120.0,
        format!("p1 n100: {e1:.4e} ({s1:.2}s), p3 n300 [slow]: {e3:.4e} ({s3:.2}s)"),
    )
}

fn c4_helmholtz_2d() -> Outcome {
    let problem = bench(Benchmark::Helmholtz2d, None, Some(40.0));
    let (sol, secs) = timed_solve(&problem, ForwardSetup::new(3, 80, 160));
    let e = sol.l2_error.unwrap();
    Outcome::new(e <= 6e-2 && secs <= 60.0, format!("{e:.4e} ({secs:.2}s)"))
}

fn c5_helmholtz_ball() -> Outcome {
    let (a, sa) = timed_solve(
        &bench(Benchmark::Helmholtz3dBall, None, Some(6.0)),
        ForwardSetup::new(3, 16, 30),
    );
    let (b, sb) = timed_solve(
        &bench(Benchmark::Helmholtz3dBall, None, Some(20.0)),
        ForwardSetup::new(3, 32, 64),
    );
    let (ea, eb) = (a.l2_error.unwrap(), b.l2_error.unwrap());
    Outcome::new(
        ea <= 2e-2 && sa <= 60.0 && eb <= 1.5e-1,
        format!("kappa 6: {ea:.4e} ({sa:.2}s), kappa 20 [slow]: {eb:.4e} ({sb:.2}s)"),
    )
}

fn c6_allen_cahn() -> Outcome {
    let problem = bench(Benchmark::AllenCahn, Some(0.01), None);
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, n, lo, hi) in [(1, 40, 2.4e-2, 9.5e-2), (2, 20, 5e-2, 2.2e-1)] {
        let (sol, secs) = timed_solve(&problem, ForwardSetup::new(p, n, 60));
        let e = sol.l2_error.unwrap();
        let it = sol.report.iterations;
        pass &= within(e, lo, hi) && it <= 20;
        parts.push(format!("p{p} n{n}: {e:.4e}, {it} it ({secs:.2}s)"));
    }
    Outcome::new(pass, parts.join(", "))
}

fn c7_odil_fd() -> Outcome {
    let problem = bench(Benchmark::Poisson2d, None, None);
    let ns = [25usize, 50, 100];
    let mut errors = Vec::new();
    let mut iters = 0;
    for &n in &ns {
        let sol = odil_solve(
            n,
            &problem,
            &GramOperator::identity((n - 2) * (n - 2)),
            &GnConfig::default(),
        )
        .expect("odil solve");
        errors.push(sol.l2_error.unwrap());
        iters = sol.report.iterations;
    }
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let rate = observed_rate(&errors, &hs).unwrap();
    let e = errors[2];
    Outcome::new(
        within(e, 2e-4, 9e-4) && iters == 1 && (rate - 2.0).abs() <= 0.3,
        format!("n100: {e:.4e} in {iters} it, rate {rate:.3}"),
    )
}

fn c8_rates() -> Outcome {
    let problem = bench(Benchmark::Poisson2d, None, None);
    let ns = [8usize, 16, 32, 64];
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [2usize, 3] {
        let t = Instant::now();
        let errors: Vec<f64> = ns
            .iter()
            .map(|&n| {
                solve_forward(&problem, &ForwardSetup::new(p, n, 2 * n), &GnConfig::default())
                    .expect("solve")
                    .l2_error
                    .unwrap()
            })
            .collect();
        let secs = t.elapsed().as_secs_f64();
        let rate = observed_rate(&errors, &hs).unwrap();
        pass &= rate >= (p - 1) as f64 && secs <= 60.0;
        parts.push(format!("p{p}: rate {rate:.3} ({secs:.2}s)"));
    }
    Outcome::new(pass, parts.join(", "))
}

fn c9_inverse() -> Outcome {
    let t = Instant::now();
    let sol = solve_inverse(&InverseSetup::default(), &default_inverse_config()).expect("inverse");
    let secs = t.elapsed().as_secs_f64();
    let mut monotone = true;
    let mut prev = sol.report.initial_loss;
    for &l in &sol.report.loss_history {
        monotone &= l <= prev * (1.0 + 1e-10);
        prev = l;
    }
    let err = (sol.kappa - 2.0).abs();
    Outcome::new(
        err <= 1e-2 && monotone && sol.report.iterations <= 100 && secs <= 60.0,
        format!(
            "kappa {:.6} (|err| {err:.2e}), {} it, monotone {monotone} ({secs:.2}s)",
            sol.kappa, sol.report.iterations
        ),
    )
}

fn partition_of_unity(rng: &mut ChaCha8Rng) -> bool {
    (1..=6).all(|p| {
        let s = SplineSpace1D::uniform(p, 13, 0.0, 1.0).unwrap();
        (0..1000).all(|_| {
            let d = s.eval_derivatives(rng.gen()).unwrap();
            (d.order(0).iter().sum::<f64>() - 1.0).abs() < 1e-12
                && d.order(1).iter().sum::<f64>().abs() < 1e-10
                && d.order(2).iter().sum::<f64>().abs() < 1e-8
        })
    })
}

fn allen_cahn_jacobian(rng: &mut ChaCha8Rng) -> bool {
    let problem = bench(Benchmark::AllenCahn, Some(0.1), None);
    let sp = vec![SplineSpace1D::uniform(2, 5, 0.0, 1.0).unwrap(); 2];
    let colloc = uniform_collocation(9, 2).unwrap();
    let dofs = apply_dirichlet(&problem, &sp).unwrap();
    let x: Vec<f64> = (0..dofs.n_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let eval = |x: &[f64]| {
        assemble(&problem, &dofs.field_with_interior(&sp, x).unwrap(), &colloc, &dofs).unwrap()
    };
    let j = eval(&x).jacobian.to_dense();
    let h = 1e-6;
    (0..x.len()).all(|c| {
        let mut xp = x.clone();
        xp[c] += h;
        let rp = eval(&xp).residual;
        xp[c] -= 2.0 * h;
        let rm = eval(&xp).residual;
        (0..colloc.len()).all(|k| {
            let fd = (rp[k] - rm[k]) / (2.0 * h);
            (fd - j[k][c]).abs() <= 1e-6 * j[k][c].abs().max(1.0)
        })
    })
}

fn kappa_column(rng: &mut ChaCha8Rng) -> bool {
    let colloc = uniform_collocation(10, 2).unwrap();
    let inv = InverseProblem::new(2.0, 1.0, &colloc).unwrap();
    let sp = vec![SplineSpace1D::uniform(3, 6, 0.0, 1.0).unwrap(); 2];
    let dofs = apply_dirichlet(&inv.pde(1.0), &sp).unwrap();
    let c: Vec<f64> = (0..dofs.n_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let field = dofs.field_with_interior(&sp, &c).unwrap();
    let kappa = 1.4;
    let col = assemble_inverse(&inv, &field, kappa, &colloc, &dofs)
        .unwrap()
        .jacobian
        .column(dofs.n_interior());
    let h = 1e-6;
    let rp = assemble_inverse(&inv, &field, kappa + h, &colloc, &dofs).unwrap().residual;
    let rm = assemble_inverse(&inv, &field, kappa - h, &colloc, &dofs).unwrap().residual;
    (0..100).all(|_| {
        let k = rng.gen_range(0..rp.len());
        let fd = (rp[k] - rm[k]) / (2.0 * h);
        (fd - col[k]).abs() <= 1e-7 * col[k].abs().max(1.0)
    })
}

fn sparse_vs_qr(rng: &mut ChaCha8Rng) -> bool {
    [(20usize, 8usize), (50, 31)].iter().all(|&(m, n)| {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if j == i % n || rng.gen::<f64>() < 0.25 {
                            rng.gen_range(-1.0..1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let j = CsrMatrix::from_dense(&rows, n);
        let r: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = solve_linear_normal_equations(&j, &r, &GramOperator::identity(m), 0.0).unwrap();
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let oracle = qr_least_squares(&rows, &neg);
        max_abs_diff(&d, &oracle) <= 1e-8 * inf_norm(&oracle).max(1.0)
    })
}

fn robust_loss_dense(rng: &mut ChaCha8Rng) -> bool {
    [3usize, 4].iter().all(|&nc| {
        let colloc = uniform_collocation(nc, 2).unwrap();
        let g = build_gram(GramKind::DiscreteH1, &colloc).unwrap();
        let dense = g.matrix().unwrap().to_dense();
        let m = colloc.len();
        let l = common::cholesky(&dense);
        (0..20).all(|_| {
            let r: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = common::forward_substitute(&l, &r);
            let oracle = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
            (robust_loss(&g, &r).unwrap() - oracle).abs() <= 1e-10 * oracle.max(1e-3)
        })
    })
}

fn determinism() -> bool {
    let problem = bench(Benchmark::AllenCahn, Some(0.05), None);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                solve_forward(&problem, &ForwardSetup::new(3, 16, 32), &GnConfig::default())
                    .unwrap()
            })
    };
    let a = run(1);
    let b = run(4);
    a.field
        .coefficients()
        .iter()
        .zip(b.field.coefficients())
        .all(|(x, y)| x.to_bits() == y.to_bits())
        && a.report.loss_history == b.report.loss_history
}

fn c10_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let checks = [
        ("partition of unity", partition_of_unity(&mut rng)),
        ("allen-cahn jacobian", allen_cahn_jacobian(&mut rng)),
        ("kappa column", kappa_column(&mut rng)),
        ("sparse vs qr", sparse_vs_qr(&mut rng)),
        ("robust loss oracle", robust_loss_dense(&mut rng)),
        ("determinism", determinism()),
    ];
    let pass = checks.iter().all(|c| c.1);
    let detail = checks
        .iter()
        .map(|(n, ok)| format!("{n} {}", if *ok { "ok" } else { "FAILED" }))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(pass, detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("poisson table", c1_poisson_table),
        ("linear one-step convergence", c2_linear_one_step),
        ("eriksson-johnson table", c3_eriksson_johnson),
        ("helmholtz 2d", c4_helmholtz_2d),
        ("helmholtz 3d ball", c5_helmholtz_ball),
        ("allen-cahn table", c6_allen_cahn),
        ("odil-fd baseline", c7_odil_fd),
        ("convergence rates", c8_rates),
        ("inverse recovery", c9_inverse),
        ("property suites", c10_properties),
    ];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = pool.install(run);
        if !out.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if out.pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail
        );
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var("IGAODIL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
