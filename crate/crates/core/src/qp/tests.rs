use super::*;
use crate::problem::EvalRecord;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INF: f64 = f64::INFINITY;

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * 0.1
}

#[test]
fn unconstrained_stationary_point() {
    let d = QpData::unconstrained(
        DMatrix::identity(2, 2) * 2.0,
        DVector::from_vec(vec![-2.0, -4.0]),
    )
    .unwrap();
    let s = solve_qp(&d, DEFAULT_TOL, DEFAULT_MAX_ITER);
    assert_eq!(s.status, QpStatus::Solved);
    assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 2.0).abs() < 1e-9);
}

#[test]
fn clipped_scalar_optimum() {
    let d = QpData::new(
        DMatrix::identity(1, 1),
        DVector::from_vec(vec![-1.0]),
        DMatrix::identity(1, 1),
        DVector::from_vec(vec![0.0]),
        DVector::from_vec(vec![0.5]),
    )
    .unwrap();
    let s = solve_qp(&d, DEFAULT_TOL, DEFAULT_MAX_ITER);
    assert_eq!(s.status, QpStatus::Solved);
    assert!((s.x[0] - 0.5).abs() < 1e-9);
    assert!((s.y[0] - 0.5).abs() < 1e-9, "multiplier {}", s.y[0]);
    assert!(s.primal_residual <= DEFAULT_TOL && s.dual_residual <= DEFAULT_TOL);
}

#[test]
fn invalid_data_is_rejected() {
    let bad_sym = QpData::unconstrained(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
        DVector::zeros(2),
    );
    assert!(matches!(bad_sym, Err(QpError::Invalid(_))));
    let bad_bounds = QpData::new(
        DMatrix::identity(1, 1),
        DVector::zeros(1),
        DMatrix::identity(1, 1),
        DVector::from_vec(vec![1.0]),
        DVector::from_vec(vec![0.0]),
    );
    assert!(matches!(bad_bounds, Err(QpError::Invalid(_))));
}

#[test]
fn detects_primal_infeasibility() {
    // x ≥ 1 and x ≤ 0
    let d = QpData::new(
        DMatrix::identity(1, 1),
        DVector::zeros(1),
        DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
        DVector::from_vec(vec![1.0, -INF]),
        DVector::from_vec(vec![INF, 0.0]),
    )
    .unwrap();
    assert_eq!(
        solve_qp(&d, DEFAULT_TOL, DEFAULT_MAX_ITER).status,
        QpStatus::PrimalInfeasible
    );
}

#[test]
fn detects_dual_infeasibility() {
    // min x s.t. x ≤ 1: unbounded below
    let d = QpData::new(
        DMatrix::zeros(1, 1),
        DVector::from_vec(vec![1.0]),
        DMatrix::identity(1, 1),
        DVector::from_vec(vec![-INF]),
        DVector::from_vec(vec![1.0]),
    )
    .unwrap();
    assert_eq!(
        solve_qp(&d, DEFAULT_TOL, DEFAULT_MAX_ITER).status,
        QpStatus::DualInfeasible
    );
}

#[test]
fn max_iter_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 4;
    let d = QpData::new(
        random_spd(&mut rng, n),
        DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0)),
        DMatrix::identity(n, n),
        DVector::from_element(n, -0.1),
        DVector::from_element(n, 0.1),
    )
    .unwrap();
    let admm = Admm::new(AdmmSettings {
        polish: false,
        ..AdmmSettings::default()
    });
    let s = admm.solve(&d, 1e-14, 3);
    assert_eq!(s.status, QpStatus::MaxIter);
    assert_eq!(s.iterations, 3);
}

#[test]
fn row_permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = 5;
        let m = 7;
        let p = random_spd(&mut rng, n);
        let q = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let l = DVector::from_fn(m, |i, _| {
            if i % 3 == 0 {
                -INF
            } else {
                rng.random_range(-1.0..-0.1)
            }
        });
        let u = DVector::from_fn(m, |i, _| {
            if i % 3 == 1 {
                INF
            } else {
                rng.random_range(0.1..1.0)
            }
        });
        let d = QpData::new(p.clone(), q.clone(), a.clone(), l.clone(), u.clone()).unwrap();
        let mut perm: Vec<usize> = (0..m).collect();
        perm.reverse();
        perm.swap(1, 4);
        let dp = QpData::new(
            p,
            q,
            DMatrix::from_fn(m, n, |i, j| a[(perm[i], j)]),
            DVector::from_fn(m, |i, _| l[perm[i]]),
            DVector::from_fn(m, |i, _| u[perm[i]]),
        )
        .unwrap();
        let s1 = solve_qp(&d, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let s2 = solve_qp(&dp, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert_eq!(s1.status, QpStatus::Solved);
        assert_eq!(s2.status, QpStatus::Solved);
        assert!(
            (&s1.x - &s2.x).amax() <= 1e-10,
            "{}",
            (&s1.x - &s2.x).amax()
        );
    }
}

#[test]
fn hull_of_repeated_column_is_its_norm() {
    let g = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, -2.0, 1.0, 2.0, -2.0]);
    let (m, lambda) = min_norm_in_hull(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!((m - 3.0).abs() < 1e-9);
    assert!((lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn hull_of_opposite_columns_is_zero() {
    let g = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
    let (m, lambda) = min_norm_in_hull(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(m < 1e-9);
    assert!((lambda[0] - 0.5).abs() < 1e-9 && (lambda[1] - 0.5).abs() < 1e-9);
}

#[test]
fn hull_invariant_under_permutation_and_duplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let g = DMatrix::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0) + 0.5);
        let (m0, _) = min_norm_in_hull(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let gp = DMatrix::from_fn(4, 5, |i, j| g[(i, perm[j])]);
        let (m1, _) = min_norm_in_hull(&gp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let gd = DMatrix::from_fn(4, 6, |i, j| g[(i, if j == 5 { 2 } else { j })]);
        let (m2, _) = min_norm_in_hull(&gd, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((m0 - m1).abs() < 1e-8, "{m0} {m1}");
        assert!((m0 - m2).abs() < 1e-8, "{m0} {m2}");
    }
}

/// 0 lies in the convex hull of planar points iff no open half-plane through
/// the origin contains them all, i.e. the largest angular gap is at most π.
fn origin_in_planar_hull(pts: &[(f64, f64)]) -> (bool, f64) {
    let mut angles: Vec<f64> = pts.iter().map(|&(x, y)| y.atan2(x)).collect();
    angles.sort_by(f64::total_cmp);
    let mut gap: f64 = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    (
        gap <= std::f64::consts::PI,
        (gap - std::f64::consts::PI).abs(),
    )
}

#[test]
fn hull_zero_iff_origin_inside_planar_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut inside_seen = 0;
    let mut outside_seen = 0;
    while inside_seen + outside_seen < 60 {
        let k = rng.random_range(2..6);
        let pts: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let (inside, margin) = origin_in_planar_hull(&pts);
        if margin < 1e-2 {
            continue;
        }
        let g = DMatrix::from_fn(2, k, |i, j| if i == 0 { pts[j].0 } else { pts[j].1 });
        let (m, _) = min_norm_in_hull(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        if inside {
            inside_seen += 1;
            assert!(m < 1e-8, "origin inside but measure {m}");
        } else {
            outside_seen += 1;
            assert!(m > 1e-6, "origin outside but measure {m}");
        }
    }
    assert!(inside_seen > 5 && outside_seen > 5);
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
fn steering_without_constraints_is_gradient_step() {
    let h = DMatrix::identity(3, 3);
    let rec = record(vec![1.0, -2.0, 0.5], vec![], vec![], vec![], vec![]);
    let qp = SteeringQp::new(&h, &rec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let step = qp.solve(1.0).unwrap();
    assert_eq!(step.d.as_slice(), &[-1.0, 2.0, -0.5]);
    assert_eq!(step.status, None);
}

#[test]
fn pure_feasibility_step_reduces_violation() {
    // c(x) = aᵀx − b = 0.7 > 0 at the current point
    let h = DMatrix::identity(2, 2);
    let rec = record(
        vec![0.3, 0.1],
        vec![0.7],
        vec![vec![1.0, 2.0]],
        vec![],
        vec![],
    );
    let qp = SteeringQp::new(&h, &rec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let step = qp.solve(0.0).unwrap();
    assert!(step.predicted_reduction > 0.0);
    assert!((step.predicted_reduction - 0.7).abs() < 1e-8);
}

#[test]
fn steering_rejects_indefinite_h() {
    let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
    let rec = record(
        vec![0.0, 0.0],
        vec![1.0],
        vec![vec![1.0, 0.0]],
        vec![],
        vec![],
    );
    assert!(matches!(
        SteeringQp::new(&h, &rec, DEFAULT_TOL, DEFAULT_MAX_ITER),
        Err(QpError::NotPositiveDefinite)
    ));
}

/// Brute-force minimizer of the piecewise-quadratic model on a grid,
/// refined coarse-to-fine (the model is convex).
fn grid_minimize(model: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    let mut best_v = f64::INFINITY;
    let mut center = (0.0, 0.0);
    for (half, step) in [(5.0, 1e-2), (0.05, 1e-3)] {
        let steps = (2.0 * half / step) as i64;
        for i in 0..=steps {
            for j in 0..=steps {
                let d = (
                    center.0 - half + i as f64 * step,
                    center.1 - half + j as f64 * step,
                );
                let v = model(d.0, d.1);
                if v < best_v {
                    best_v = v;
                    best = d;
                }
            }
        }
        center = best;
    }
    best
}

#[test]
fn steering_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let hm = random_spd(&mut rng, 2);
        let b = hm.clone().try_inverse().unwrap();
        let g = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let ai = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let ae = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let ci = rng.random_range(-0.5..0.5);
        let ce = rng.random_range(-0.5..0.5);
        let mu = 0.7;
        let rec = record(
            g.to_vec(),
            vec![ci],
            vec![ai.to_vec()],
            vec![ce],
            vec![ae.to_vec()],
        );
        let qp = SteeringQp::new(&hm, &rec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let step = qp.solve(mu).unwrap();
        let model = |d0: f64, d1: f64| {
            let quad =
                0.5 * (b[(0, 0)] * d0 * d0 + 2.0 * b[(0, 1)] * d0 * d1 + b[(1, 1)] * d1 * d1);
            mu * (g[0] * d0 + g[1] * d1)
                + quad
                + (ci + ai[0] * d0 + ai[1] * d1).max(0.0)
                + (ce + ae[0] * d0 + ae[1] * d1).abs()
        };
        let (g0, g1) = grid_minimize(model);
        assert!(
            (step.d[0] - g0).abs() <= 1e-2 && (step.d[1] - g1).abs() <= 1e-2,
            "qp {:?} grid {:?}",
            step.d.as_slice(),
            (g0, g1)
        );
    }
}

#[test]
fn large_penalty_recovers_quasi_newton_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let n = 4;
        let h = random_spd(&mut rng, n);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // strictly feasible: inequalities at -1, no equalities
        let ci = vec![-1.0, -1.5];
        let ci_jac: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let rec = record(g.clone(), ci, ci_jac, vec![], vec![]);
        let qp = SteeringQp::new(&h, &rec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let mu = 1e8;
        let step = qp.solve(mu).map_err(|e| format!("{e}")).unwrap();
        let qn = -(&h * DVector::from_vec(g));
        let diff = (&step.d / mu - qn).amax();
        assert!(diff <= 1e-6, "{diff}");
    }
}
