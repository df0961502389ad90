use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{QpBackend, QpData, QpSolution, QpStatus};

/// ADMM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    /// Iterations between penalty adaptation, polishing and infeasibility
    /// checks.
    pub check_every: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Multiplier applied to `rho` on equality rows.
    pub eq_rho_scale: f64,
    pub infeasibility_tol: f64,
    pub polish: bool,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            check_every: 25,
            rho_min: 1e-6,
            rho_max: 1e6,
            eq_rho_scale: 1e3,
            infeasibility_tol: 1e-5,
            polish: true,
        }
    }
}

/// Operator-splitting QP solver with a dense cached factorization of
/// `P + σI + AᵀRA`, adaptive `ρ` and active-set polishing.
#[derive(Debug, Clone, Default)]
pub struct Admm {
    pub settings: AdmmSettings,
}

impl Admm {
    pub fn new(settings: AdmmSettings) -> Self {
        Self { settings }
    }
}

fn row_rho(d: &QpData, rho: f64, s: &AdmmSettings) -> DVector<f64> {
    DVector::from_fn(d.m(), |i, _| {
        let (l, u) = (d.l[i], d.u[i]);
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            s.rho_min
        } else if u - l <= 1e-12 * l.abs().max(1.0) {
            (rho * s.eq_rho_scale).min(s.rho_max)
        } else {
            rho
        }
    })
}

fn factor(d: &QpData, rho: &DVector<f64>, sigma: f64) -> Cholesky<f64, Dyn> {
    let n = d.n();
    let mut k = d.p.clone();
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    if d.m() > 0 {
        let ra = DMatrix::from_fn(d.m(), n, |i, j| rho[i] * d.a[(i, j)]);
        k += d.a.tr_mul(&ra);
    }
    let mut shift = sigma;
    loop {
        if let Some(c) = Cholesky::new(k.clone()) {
            return c;
        }
        // P is PSD, so this only triggers on rounding; add a little more σ.
        shift *= 10.0;
        for i in 0..n {
            k[(i, i)] += shift;
        }
    }
}

fn project(v: f64, l: f64, u: f64) -> f64 {
    v.clamp(l, u)
}

struct Residuals {
    primal: f64,
    dual: f64,
}

fn residuals(d: &QpData, x: &DVector<f64>, y: &DVector<f64>) -> Residuals {
    Residuals {
        primal: d.primal_residual(x, y),
        dual: d.dual_residual(x, y),
    }
}

/// Solves the equality-constrained QP on a guessed active set, refining
/// against the unregularized KKT matrix.
fn polish(d: &QpData, z: &DVector<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = d.n();
    let mut active = Vec::new();
    for i in 0..d.m() {
        let (l, u) = (d.l[i], d.u[i]);
        if l == u || (l > f64::NEG_INFINITY && z[i] - l < -y[i]) {
            active.push((i, l));
        } else if u < f64::INFINITY && u - z[i] < y[i] {
            active.push((i, u));
        }
    }
    let k = active.len();
    let dim = n + k;
    let delta = 1e-9;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&d.p);
    for (r, &(i, _)) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = d.a[(i, j)];
            kkt[(j, n + r)] = d.a[(i, j)];
        }
    }
    let exact = kkt.clone();
    for i in 0..n {
        kkt[(i, i)] += delta;
    }
    for r in 0..k {
        kkt[(n + r, n + r)] -= delta;
    }
    let lu = kkt.lu();
    let mut rhs = DVector::zeros(dim);
    for j in 0..n {
        rhs[j] = -d.q[j];
    }
    for (r, &(_, b)) in active.iter().enumerate() {
        rhs[n + r] = b;
    }
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let r = &rhs - &exact * &sol;
        let Some(step) = lu.solve(&r) else { break };
        sol += step;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = sol.rows(0, n).into_owned();
    let mut y_out = DVector::zeros(d.m());
    for (r, &(i, _)) in active.iter().enumerate() {
        y_out[i] = sol[n + r];
    }
    Some((x, y_out))
}

fn primal_infeasible(d: &QpData, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = dy.amax();
    if norm <= 1e-30 {
        return false;
    }
    if d.a.tr_mul(dy).amax() > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..d.m() {
        let v = dy[i];
        if v > eps * norm {
            if d.u[i] == f64::INFINITY {
                return false;
            }
            support += d.u[i] * v;
        } else if v < -eps * norm {
            if d.l[i] == f64::NEG_INFINITY {
                return false;
            }
            support += d.l[i] * v;
        }
    }
    support < -eps * norm
}

fn dual_infeasible(d: &QpData, dx: &DVector<f64>, eps: f64) -> bool {
    let norm = dx.amax();
    if norm <= 1e-30 {
        return false;
    }
    if (&d.p * dx).amax() > eps * norm || d.q.dot(dx) >= -eps * norm {
        return false;
    }
    let adx = &d.a * dx;
    (0..d.m()).all(|i| {
        let v = adx[i];
        let lo_ok = d.l[i] == f64::NEG_INFINITY || v >= -eps * norm;
        let hi_ok = d.u[i] == f64::INFINITY || v <= eps * norm;
        lo_ok && hi_ok
    })
}

impl QpBackend for Admm {
    fn solve(&self, d: &QpData, tol: f64, max_iter: usize) -> QpSolution {
        let s = &self.settings;
        let (n, m) = (d.n(), d.m());
        let mut rho = s.rho;
        let mut rho_vec = row_rho(d, rho, s);
        let mut chol = factor(d, &rho_vec, s.sigma);

        let mut x = DVector::zeros(n);
        let mut z = DVector::<f64>::zeros(m);
        for i in 0..m {
            z[i] = project(0.0, d.l[i], d.u[i]);
        }
        let mut y = DVector::zeros(m);

        let finish = |x: DVector<f64>, y: DVector<f64>, status: QpStatus, it: usize| {
            let r = residuals(d, &x, &y);
            QpSolution {
                x,
                y,
                status,
                primal_residual: r.primal,
                dual_residual: r.dual,
                iterations: it,
            }
        };

        if s.polish {
            // Cheap first attempt: the unconstrained / all-inactive guess.
            if let Some((px, py)) = polish(d, &z, &y) {
                let r = residuals(d, &px, &py);
                if r.primal <= tol && r.dual <= tol {
                    return finish(px, py, QpStatus::Solved, 0);
                }
            }
        }

        for it in 1..=max_iter {
            let rhs = s.sigma * &x - &d.q + d.a.tr_mul(&(rho_vec.component_mul(&z) - &y));
            let x_tilde = chol.solve(&rhs);
            let z_tilde = &d.a * &x_tilde;
            let x_next = s.alpha * &x_tilde + (1.0 - s.alpha) * &x;
            let z_hat = s.alpha * &z_tilde + (1.0 - s.alpha) * &z;
            let mut z_next = DVector::zeros(m);
            for i in 0..m {
                z_next[i] = project(z_hat[i] + y[i] / rho_vec[i], d.l[i], d.u[i]);
            }
            let y_next = &y + rho_vec.component_mul(&(&z_hat - &z_next));
            let dx = &x_next - &x;
            let dy = &y_next - &y;
            x = x_next;
            z = z_next;
            y = y_next;

            let r = residuals(d, &x, &y);
            if r.primal <= tol && r.dual <= tol {
                return finish(x, y, QpStatus::Solved, it);
            }

            if it % s.check_every == 0 {
                if primal_infeasible(d, &dy, s.infeasibility_tol) {
                    return finish(x, y, QpStatus::PrimalInfeasible, it);
                }
                if dual_infeasible(d, &dx, s.infeasibility_tol) {
                    return finish(x, y, QpStatus::DualInfeasible, it);
                }
                if s.polish {
                    if let Some((px, py)) = polish(d, &z, &y) {
                        let pr = residuals(d, &px, &py);
                        if pr.primal <= tol && pr.dual <= tol {
                            return finish(px, py, QpStatus::Solved, it);
                        }
                    }
                }
                if m > 0 {
                    let ax = &d.a * &x;
                    let prim_scale = ax.amax().max(z.amax()).max(1e-30);
                    let aty = d.a.tr_mul(&y);
                    let dual_scale = (&d.p * &x)
                        .amax()
                        .max(aty.amax())
                        .max(d.q.amax())
                        .max(1e-30);
                    let rp = (&ax - &z).amax() / prim_scale;
                    let rd = (&d.p * &x + &d.q + aty).amax() / dual_scale;
                    if rd > 0.0 && rp > 0.0 {
                        let new_rho = (rho * (rp / rd).sqrt()).clamp(s.rho_min, s.rho_max);
                        if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                            rho = new_rho;
                            rho_vec = row_rho(d, rho, s);
                            chol = factor(d, &rho_vec, s.sigma);
                        }
                    }
                }
            }
        }
        finish(x, y, QpStatus::MaxIter, max_iter)
    }
}
