use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::problem::{Model, VariableSpec};

fn quadratic(a: Vec<f64>) -> ProblemDefinition {
    let n = a.len();
    let vars = VariableSpec::new().with("x", &[n]).unwrap();
    ProblemDefinition::new(vars, move |v| {
        let a = v.tape().constant(Tensor::vector(a.clone()));
        let r = v["x"].sub(&a)?;
        Ok(Model::new(r.square().sum()))
    })
    .unwrap()
}

fn hyperplane(n: usize) -> ProblemDefinition {
    let vars = VariableSpec::new().with("x", &[n]).unwrap();
    ProblemDefinition::new(vars, |v| {
        let x = &v["x"];
        let c = x.index(&[0])?.add_scalar(-1.0);
        Ok(Model::new(x.square().sum()).eq("x1", c))
    })
    .unwrap()
}

fn record(
    grad_f: Vec<f64>,
    ci: Vec<f64>,
    ci_jac: Vec<Vec<f64>>,
    ce: Vec<f64>,
    ce_jac: Vec<Vec<f64>>,
) -> EvalRecord {
    EvalRecord {
        f: 0.0,
        grad_f,
        ci,
        ci_jac,
        ce,
        ce_jac,
    }
}

#[test]
fn default_options_are_valid() {
    SolverOptions::default().validate().unwrap();
}

#[test]
fn invalid_options_name_the_key() {
    let cases: Vec<(SolverOptions, &str)> = vec![
        (
            SolverOptions {
                opt_tol: 0.0,
                ..Default::default()
            },
            "opt_tol",
        ),
        (
            SolverOptions {
                wolfe_c1: 0.6,
                ..Default::default()
            },
            "wolfe_c2",
        ),
        (
            SolverOptions {
                steering_c_mu: 1.0,
                ..Default::default()
            },
            "steering_c_mu",
        ),
        (
            SolverOptions {
                max_iter: 0,
                ..Default::default()
            },
            "max_iter",
        ),
        (
            SolverOptions {
                gradient_cache_size: Some(0),
                ..Default::default()
            },
            "gradient_cache_size",
        ),
    ];
    for (opts, key) in cases {
        match opts.validate() {
            Err(SolverError::InvalidOption { key: k, .. }) => assert_eq!(k, key),
            other => panic!("expected error on {key}, got {other:?}"),
        }
    }
}

#[test]
fn penalty_gradient_in_strict_interior_is_scaled_objective_gradient() {
    let rec = record(
        vec![1.0, -2.0],
        vec![-1.0, -0.5],
        vec![vec![3.0, 3.0], vec![4.0, 4.0]],
        vec![],
        vec![],
    );
    let g = assemble_penalty_gradient(&rec, 0.25);
    assert_eq!(g.as_slice(), &[0.25, -0.5]);
}

#[test]
fn penalty_gradient_adds_violated_constraint_gradient() {
    // c = x₁ − 1 at x₁ = 2
    let rec = record(
        vec![0.5, 0.5],
        vec![1.0],
        vec![vec![1.0, 0.0]],
        vec![],
        vec![],
    );
    let g = assemble_penalty_gradient(&rec, 1.0);
    assert_eq!(g.as_slice(), &[1.5, 0.5]);
    assert_eq!(penalty_value(&rec, 1.0), 1.0);
}

#[test]
fn penalty_gradient_uses_sign_of_equalities() {
    let rec = record(
        vec![0.0, 0.0],
        vec![0.0],
        vec![vec![7.0, 7.0]],
        vec![-2.0, 0.0, 3.0],
        vec![vec![1.0, 0.0], vec![5.0, 5.0], vec![0.0, 1.0]],
    );
    let g = assemble_penalty_gradient(&rec, 1.0);
    assert_eq!(g.as_slice(), &[-1.0, 1.0]);
    assert_eq!(penalty_value(&rec, 1.0), 5.0);
}

fn scalar_eval<F: Fn(f64) -> (f64, f64)>(
    f: F,
) -> impl FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>, ())> {
    move |x| {
        let (v, g) = f(x[0]);
        Some((v, DVector::from_element(1, g), ()))
    }
}

#[test]
fn linesearch_accepts_unit_step_on_parabola() {
    let x = DVector::from_element(1, 1.0);
    let d = DVector::from_element(1, -1.0);
    let step = weak_wolfe_linesearch(
        scalar_eval(|x| (x * x, 2.0 * x)),
        &x,
        &d,
        1.0,
        -2.0,
        1e-4,
        0.5,
        50,
    )
    .unwrap();
    assert_eq!(step.t, 1.0);
    assert_eq!(step.phi, 0.0);
}

#[test]
fn linesearch_on_abs_satisfies_both_conditions() {
    let x = DVector::from_element(1, 1.0);
    let d = DVector::from_element(1, -1.0);
    let abs = |x: f64| {
        (
            x.abs(),
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            },
        )
    };
    let step = weak_wolfe_linesearch(scalar_eval(abs), &x, &d, 1.0, -1.0, 1e-4, 0.5, 50).unwrap();
    let (phi, g) = abs(1.0 - step.t);
    assert!(phi <= 1.0 - 1e-4 * step.t);
    assert!(-g >= -0.5);
}

#[test]
fn linesearch_doubles_when_unit_step_is_too_short() {
    // φ(x) = (x − 10)², from 0 along +1
    let x = DVector::from_element(1, 0.0);
    let d = DVector::from_element(1, 1.0);
    let f = |x: f64| ((x - 10.0).powi(2), 2.0 * (x - 10.0));
    let step = weak_wolfe_linesearch(scalar_eval(f), &x, &d, 100.0, -20.0, 1e-4, 0.5, 50).unwrap();
    assert!(step.t > 1.0);
    let (phi, g) = f(step.t);
    assert!(phi <= 100.0 - 1e-4 * step.t * 20.0);
    assert!(g >= 0.5 * -20.0);
}

#[test]
fn linesearch_random_piecewise_quadratics_satisfy_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        // convex: maximum of a few quadratics a(x − b)² + c with a > 0
        let pieces: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.1..5.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let f = move |x: f64| {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for &(a, b, c) in &pieces {
                let v = a * (x - b).powi(2) + c;
                if v > best.0 {
                    best = (v, 2.0 * a * (x - b));
                }
            }
            best
        };
        let x0 = rng.random_range(-5.0..5.0);
        let (phi0, g0) = f(x0);
        if g0 == 0.0 {
            continue;
        }
        let dir = -g0.signum() * rng.random_range(0.1..4.0);
        let slope = g0 * dir;
        let x = DVector::from_element(1, x0);
        let d = DVector::from_element(1, dir);
        let step =
            weak_wolfe_linesearch(scalar_eval(&f), &x, &d, phi0, slope, 1e-4, 0.5, 50).unwrap();
        let (phi, g) = f(x0 + step.t * dir);
        assert!(phi <= phi0 + 1e-4 * step.t * slope);
        assert!(g * dir >= 0.5 * slope);
    }
}

#[test]
fn linesearch_reports_failure_when_budget_runs_out() {
    // ascent direction: Armijo never holds
    let x = DVector::from_element(1, 1.0);
    let d = DVector::from_element(1, 1.0);
    let fail = weak_wolfe_linesearch(
        scalar_eval(|x| (x * x, 2.0 * x)),
        &x,
        &d,
        1.0,
        -2.0,
        1e-4,
        0.5,
        10,
    )
    .unwrap_err();
    assert!(fail.best_armijo.is_none());
    assert!(!fail.unbounded);
}

#[test]
fn linesearch_flags_unbounded_direction() {
    let x = DVector::from_element(1, 0.0);
    let d = DVector::from_element(1, 1.0);
    let fail = weak_wolfe_linesearch(
        scalar_eval(|x| (-x * x, -2.0 * x)),
        &x,
        &d,
        0.0,
        -1e-3,
        1e-4,
        0.5,
        10,
    )
    .unwrap_err();
    assert!(fail.unbounded);
    assert_eq!(fail.best_armijo.unwrap().t, 1024.0);
}

#[test]
fn linesearch_treats_unevaluable_points_as_too_long() {
    let x = DVector::from_element(1, 1.0);
    let d = DVector::from_element(1, -1.0);
    let step = weak_wolfe_linesearch(
        |x: &DVector<f64>| {
            let v = x[0];
            (v > 0.2).then(|| {
                (
                    (v - 0.5).powi(2),
                    DVector::from_element(1, 2.0 * (v - 0.5)),
                    (),
                )
            })
        },
        &x,
        &d,
        0.25,
        -1.0,
        1e-4,
        0.5,
        50,
    )
    .unwrap();
    assert!(1.0 - step.t > 0.2);
}

#[test]
fn bfgs_fixed_point() {
    let mut h = DMatrix::identity(2, 2);
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    bfgs_update(&mut h, &e1, &e1);
    assert!((h - DMatrix::identity(2, 2)).amax() < 1e-15);
}

#[test]
fn bfgs_direct_formula() {
    let mut h = DMatrix::identity(2, 2);
    let s = DVector::from_vec(vec![0.0, 1.0]);
    let y = DVector::from_vec(vec![0.0, 2.0]);
    bfgs_update(&mut h, &s, &y);
    assert!((&h - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]))).amax() < 1e-15);
    assert!((&h * &y - &s).amax() < 1e-15);
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * 0.1
}

#[test]
fn bfgs_secant_identity_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 50 {
        let n = rng.random_range(2..8);
        let mut h = random_spd(&mut rng, n);
        let s = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if s.dot(&y) <= 0.1 * s.norm() * y.norm() {
            continue;
        }
        bfgs_update(&mut h, &s, &y);
        assert!((&h * &y - &s).amax() <= 1e-10 * s.amax().max(1.0));
        assert!((&h - h.transpose()).amax() == 0.0);
        checked += 1;
    }
}

#[test]
fn skip_rule_leaves_h_unchanged() {
    let mut h = InverseHessianApprox::identity(2, 0);
    let s = DVector::from_vec(vec![1.0, 0.0]);
    let y = DVector::from_vec(vec![0.0, 1.0]);
    assert!(!h.update(&s, &y));
    assert!(!h.update(&s, &-&s));
    assert_eq!(h, InverseHessianApprox::identity(2, 0));
}

#[test]
fn dense_update_without_cholesky_factor_is_skipped() {
    let start = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
    let mut h = InverseHessianApprox::Dense(start.clone());
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    assert!(!h.update(&e1, &e1));
    assert_eq!(h, InverseHessianApprox::Dense(start));
}

#[test]
fn limited_memory_matches_dense_before_pairs_are_dropped() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 5;
    let mut dense = InverseHessianApprox::identity(n, 0);
    let mut limited = InverseHessianApprox::identity(n, 4);
    let mut added = 0;
    while added < 4 {
        let s = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let y = &s + DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3));
        assert_eq!(dense.update(&s, &y), limited.update(&s, &y));
        added += 1;
    }
    let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    assert!((dense.apply(&v) - limited.apply(&v)).amax() < 1e-12);
    assert!((dense.to_dense() - limited.to_dense()).amax() < 1e-12);
}

#[test]
fn limited_memory_keeps_newest_pairs() {
    let mut h = InverseHessianApprox::identity(2, 2);
    for k in 1..=3 {
        let s = DVector::from_vec(vec![k as f64, 1.0]);
        h.update(&s, &s);
    }
    match &h {
        InverseHessianApprox::Limited { pairs, .. } => {
            assert_eq!(pairs.len(), 2);
            assert_eq!(pairs[0].0[0], 2.0);
            assert_eq!(pairs[1].0[0], 3.0);
        }
        _ => unreachable!(),
    }
}

#[test]
fn strongly_convex_quadratic_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
    let p = quadratic(a.clone());
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.termination, Termination::Converged);
    assert!(sol.iterations() <= 50, "{}", sol.iterations());
    let err = sol
        .last
        .x
        .0
        .iter()
        .zip(&a)
        .map(|(x, a)| (x - a).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "{err}");
    assert!(sol.convergence_certified());
}

#[test]
fn projection_onto_hyperplane() {
    let p = hyperplane(4);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(
        sol.termination,
        Termination::Converged,
        "{:?}",
        sol.log.last()
    );
    let x = &sol.last.x.0;
    assert!((x[0] - 1.0).abs() <= 1e-6, "{x:?}");
    assert!(x[1..].iter().all(|v| v.abs() <= 1e-6), "{x:?}");
    assert!((sol.last.f - 1.0).abs() <= 1e-6);
    assert!(sol.last.viol_eq <= 1e-8);
}

#[test]
fn limited_memory_variant_converges() {
    let a: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
    let p = quadratic(a.clone());
    let opts = SolverOptions {
        limited_memory_pairs: 3,
        ..Default::default()
    };
    let sol = solve(&p, &opts).unwrap();
    assert_eq!(sol.termination, Termination::Converged);
    let err = sol
        .last
        .x
        .0
        .iter()
        .zip(&a)
        .map(|(x, a)| (x - a).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6);
}

#[test]
fn solver_invariants_hold_on_constrained_run() {
    // nonsmooth objective, one inequality and one equality
    let vars = VariableSpec::new().with("x", &[3]).unwrap();
    let p = ProblemDefinition::new(vars, |v| {
        let x = &v["x"];
        let t = v.tape();
        let shift = t.constant(Tensor::vector(vec![2.0, -1.0, 0.5]));
        let f = x.sub(&shift)?.abs().sum();
        let ci = x.square().sum().add_scalar(-1.0);
        let ce = x.index(&[0])?.sub(&x.index(&[1])?)?;
        Ok(Model::new(f).ineq("ball", ci).eq("diag", ce))
    })
    .unwrap();
    let opts = SolverOptions {
        track_hessian_spectrum: true,
        seed: 4,
        max_iter: 300,
        ..Default::default()
    };
    let sol = solve(&p, &opts).unwrap();
    assert!(sol.log.len() == sol.iterations() && !sol.log.is_empty());
    for w in sol.log.windows(2) {
        assert!(w[1].mu <= w[0].mu);
        if w[1].mu == w[0].mu && w[0].step > 0.0 {
            assert!(w[1].phi <= w[0].phi, "{:?} -> {:?}", w[0], w[1]);
        }
    }
    assert!(sol.log.iter().all(|r| r.phi.is_finite() && r.mu > 0.0));
    assert!(sol.hessian_min_eigenvalues.iter().all(|&e| e > 0.0));
    if sol.termination == Termination::Converged {
        assert!(sol.convergence_certified());
    }
    assert!(sol.best.max_violation() <= 1e-6, "{:?}", sol.termination);
}

#[test]
fn solve_is_deterministic() {
    let p = hyperplane(3);
    let opts = SolverOptions {
        seed: 11,
        ..Default::default()
    };
    let a = solve(&p, &opts).unwrap();
    let b = solve(&p, &opts).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.last.x, b.last.x);
}

#[test]
fn max_iter_is_reported() {
    let vars = VariableSpec::new().with("x", &[2]).unwrap();
    let p = ProblemDefinition::new(vars, |v| {
        let x = &v["x"];
        let (a, b) = (x.index(&[0])?, x.index(&[1])?);
        let f = a
            .neg()
            .add_scalar(1.0)
            .square()
            .add(&b.sub(&a.square())?.square().scale(100.0))?;
        Ok(Model::new(f))
    })
    .unwrap();
    let opts = SolverOptions {
        max_iter: 2,
        ..Default::default()
    };
    let sol = solve(&p, &opts).unwrap();
    assert_eq!(sol.termination, Termination::MaxIter);
    assert_eq!(sol.iterations(), 2);
}

#[test]
fn non_finite_start_is_a_numerical_error() {
    let vars = VariableSpec::new().with("x", &[1]).unwrap();
    let p = ProblemDefinition::new(vars, |v| Ok(Model::new(v["x"].log()?.sum()))).unwrap();
    let opts = SolverOptions {
        x0: Some(PackedPoint(vec![-1.0])),
        ..Default::default()
    };
    let sol = solve(&p, &opts).unwrap();
    assert_eq!(sol.termination, Termination::NumericalError);
}

#[test]
fn infeasible_stationary_point_is_detected() {
    // x² + 1 ≤ 0 has no solution and x = 0 minimizes its violation
    let vars = VariableSpec::new().with("x", &[1]).unwrap();
    let p = ProblemDefinition::new(vars, |v| {
        let x = &v["x"];
        Ok(Model::new(x.sum()).ineq("c", x.square().add_scalar(1.0).sum()))
    })
    .unwrap();
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(
        sol.termination,
        Termination::StationaryInfeasible,
        "{:?}",
        sol.log.last()
    );
}

#[test]
fn wrong_start_length_is_rejected() {
    let p = quadratic(vec![0.0; 3]);
    let opts = SolverOptions {
        x0: Some(PackedPoint(vec![0.0; 2])),
        ..Default::default()
    };
    assert!(matches!(solve(&p, &opts), Err(SolverError::Problem(_))));
}
