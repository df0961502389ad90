use nalgebra::{DMatrix, DVector};

use super::{QpData, QpError, QpSolution, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Exact primal active-set solver for `min ½xᵀPx + qᵀx  s.t.  l ≤ x ≤ u`
/// with finite bounds and `P` positive semidefinite, possibly singular.
///
/// Each iteration minimizes over the free variables with the others fixed
/// at their bounds, moving until a bound blocks. When the reduced gradient
/// has a component in the null space of the reduced `P`, that component
/// is followed instead, which is a zero-curvature descent direction. At a
/// subspace minimizer the bound with the most negative multiplier is
/// released. `tol` is the multiplier sign tolerance.
///
/// The returned `y` follows the convention of [`QpData`] with `A = I`.
pub fn solve_box_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution, QpError> {
    let n = q.len();
    let data = QpData::new(
        p.clone(),
        q.clone(),
        DMatrix::identity(n, n),
        l.clone(),
        u.clone(),
    )?;
    if l.iter().chain(u.iter()).any(|b| !b.is_finite()) {
        return Err(QpError::Invalid("box QP needs finite bounds".into()));
    }
    let mut x = DVector::from_fn(n, |i, _| 0.0f64.clamp(l[i], u[i]));
    let mut state: Vec<Bound> = (0..n)
        .map(|i| {
            if l[i] == u[i] {
                Bound::Lower
            } else {
                Bound::Free
            }
        })
        .collect();

    let finish = |x: DVector<f64>, state: &[Bound], status: QpStatus, it: usize| {
        let g = p * &x + q;
        let y = DVector::from_fn(n, |i, _| if state[i] == Bound::Free { 0.0 } else { -g[i] });
        QpSolution {
            primal_residual: data.primal_residual(&x, &y),
            dual_residual: data.dual_residual(&x, &y),
            x,
            y,
            status,
            iterations: it,
        }
    };

    let mut at_minimizer = false;
    for it in 1..=max_iter {
        let g = p * &x + q;
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        let (dir, full_step) = subspace_direction(p, &g, &free, tol);

        if at_minimizer || dir.iter().all(|v| v.abs() <= 1e-15 * (1.0 + x.amax())) {
            let worst = (0..n)
                .filter(|&i| l[i] < u[i])
                .filter_map(|i| match state[i] {
                    Bound::Lower if g[i] < -tol => Some((i, -g[i])),
                    Bound::Upper if g[i] > tol => Some((i, g[i])),
                    _ => None,
                })
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                None => return Ok(finish(x, &state, QpStatus::Solved, it)),
                Some((i, _)) => {
                    state[i] = Bound::Free;
                    at_minimizer = false;
                    continue;
                }
            }
        }

        let mut step = if full_step { 1.0 } else { f64::INFINITY };
        let mut blocking = None;
        for (k, &i) in free.iter().enumerate() {
            let di = dir[k];
            let room = if di < 0.0 {
                (l[i] - x[i]) / di
            } else if di > 0.0 {
                (u[i] - x[i]) / di
            } else {
                continue;
            };
            if room < step {
                step = room.max(0.0);
                blocking = Some((i, if di < 0.0 { Bound::Lower } else { Bound::Upper }));
            }
        }
        for (k, &i) in free.iter().enumerate() {
            x[i] = (x[i] + step * dir[k]).clamp(l[i], u[i]);
        }
        if let Some((i, side)) = blocking {
            x[i] = if side == Bound::Lower { l[i] } else { u[i] };
            state[i] = side;
        }
        at_minimizer = full_step && blocking.is_none();
    }
    Ok(finish(x, &state, QpStatus::MaxIter, max_iter))
}

/// Direction on the free variables and whether the full step of length
/// one is the subspace minimizer (`false` for a zero-curvature ray).
fn subspace_direction(
    p: &DMatrix<f64>,
    g: &DVector<f64>,
    free: &[usize],
    tol: f64,
) -> (DVector<f64>, bool) {
    let k = free.len();
    if k == 0 {
        return (DVector::zeros(0), true);
    }
    let pf = DMatrix::from_fn(k, k, |a, b| p[(free[a], free[b])]);
    let gf = DVector::from_fn(k, |a, _| g[free[a]]);
    let eig = pf.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let cutoff = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut newton = DVector::zeros(k);
    let mut null = DVector::zeros(k);
    for (j, &w) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(j);
        let c = v.dot(&gf);
        if w > cutoff {
            newton.axpy(-c / w, &v, 1.0);
        } else {
            null.axpy(-c, &v, 1.0);
        }
    }
    if null.amax() > tol {
        (null, false)
    } else {
        (newton, true)
    }
}
