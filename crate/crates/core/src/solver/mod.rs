//! BFGS-SQP driver for `min f(x) s.t. cᵢ(x) ≤ 0, cₑ(x) = 0`.
//!
//! Each iteration works on the exact penalty `φ(x; μ) = μf(x) + v(x)`:
//! a steering QP proposes a direction and lowers `μ` when the direction
//! does not make enough progress toward feasibility, a weak-Wolfe line
//! search picks the step, and a BFGS update refreshes the inverse-Hessian
//! approximation. Stationarity is measured as the smallest norm in the
//! convex hull of recent penalty gradients.

mod bfgs;
mod linesearch;
mod penalty;

use std::collections::VecDeque;
use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::problem::{EvalRecord, PackedPoint, ProblemDefinition, ProblemError};
use crate::qp::{self, min_norm_in_hull, QpError, SteeringQp};
use crate::tensor::Tensor;

pub use bfgs::{bfgs_update, scaled_min_eigenvalue, InverseHessianApprox, SKIP_THRESHOLD};
pub use linesearch::{weak_wolfe_linesearch, LineSearchFailure, Step};
pub use penalty::{assemble_penalty_gradient, penalty_value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid option `{key}`: {reason}")]
    InvalidOption { key: &'static str, reason: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub opt_tol: f64,
    pub viol_ineq_tol: f64,
    pub viol_eq_tol: f64,
    pub max_iter: usize,
    pub mu0: f64,
    pub steering_c_v: f64,
    pub steering_c_mu: f64,
    pub steering_max_trials: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub linesearch_max_bisections: usize,
    /// Number of cached penalty gradients; `None` means `min(50, n + 10)`.
    pub gradient_cache_size: Option<usize>,
    /// `0` keeps a dense inverse Hessian, `k > 0` uses L-BFGS with `k` pairs.
    pub limited_memory_pairs: usize,
    /// Cached gradients enter the stationarity measure only if their point
    /// lies within this distance of the current iterate.
    pub stationarity_radius: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    /// Record [`scaled_min_eigenvalue`] of `H` after every accepted update.
    pub track_hessian_spectrum: bool,
    pub seed: u64,
    /// Starting point; standard-normal entries drawn from `seed` if absent.
    pub x0: Option<PackedPoint>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            opt_tol: 1e-8,
            viol_ineq_tol: 1e-8,
            viol_eq_tol: 1e-8,
            max_iter: 1000,
            mu0: 1.0,
            steering_c_v: 0.1,
            steering_c_mu: 0.5,
            steering_max_trials: 10,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.5,
            linesearch_max_bisections: 50,
            gradient_cache_size: None,
            limited_memory_pairs: 0,
            stationarity_radius: 1e-4,
            qp_tol: qp::DEFAULT_TOL,
            qp_max_iter: qp::DEFAULT_MAX_ITER,
            track_hessian_spectrum: false,
            seed: 0,
            x0: None,
        }
    }
}

fn invalid(key: &'static str, reason: impl Into<String>) -> SolverError {
    SolverError::InvalidOption {
        key,
        reason: reason.into(),
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("opt_tol", self.opt_tol),
            ("viol_ineq_tol", self.viol_ineq_tol),
            ("viol_eq_tol", self.viol_eq_tol),
            ("mu0", self.mu0),
            ("stationarity_radius", self.stationarity_radius),
            ("qp_tol", self.qp_tol),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(
                    key,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        let unit = [
            ("steering_c_v", self.steering_c_v),
            ("steering_c_mu", self.steering_c_mu),
            ("wolfe_c1", self.wolfe_c1),
            ("wolfe_c2", self.wolfe_c2),
        ];
        for (key, v) in unit {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(key, format!("must lie in (0, 1), got {v}")));
            }
        }
        if self.wolfe_c1 >= self.wolfe_c2 {
            return Err(invalid(
                "wolfe_c2",
                format!(
                    "must exceed wolfe_c1 = {}, got {}",
                    self.wolfe_c1, self.wolfe_c2
                ),
            ));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if self.qp_max_iter == 0 {
            return Err(invalid("qp_max_iter", "must be at least 1"));
        }
        if self.gradient_cache_size == Some(0) {
            return Err(invalid("gradient_cache_size", "must be at least 1"));
        }
        if let Some(x0) = &self.x0 {
            if x0.0.iter().any(|v| !v.is_finite()) {
                return Err(invalid("x0", "has non-finite entries"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    MaxIter,
    LineSearchFailed,
    StationaryInfeasible,
    NumericalError,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::LineSearchFailed => "line_search_failed",
            Termination::StationaryInfeasible => "stationary_infeasible",
            Termination::NumericalError => "numerical_error",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the iterate log. The values describe the iterate the step
/// was taken from, at the penalty parameter used for that step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub mu: f64,
    pub phi: f64,
    pub f: f64,
    /// Largest inequality violation.
    pub viol_ineq: f64,
    /// Largest equality violation.
    pub viol_eq: f64,
    /// `None` when the stationarity QP failed.
    pub stationarity: Option<f64>,
    /// Accepted step length, `0` if no step was taken.
    pub step: f64,
    pub qp_status: &'static str,
}

/// A point visited by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: PackedPoint,
    pub variables: Vec<(String, Tensor)>,
    pub f: f64,
    pub viol_ineq: f64,
    pub viol_eq: f64,
}

impl Iterate {
    pub fn max_violation(&self) -> f64 {
        self.viol_ineq.max(self.viol_eq)
    }

    fn new(p: &ProblemDefinition, x: &DVector<f64>, eval: Option<&EvalRecord>) -> Self {
        let x = PackedPoint(x.as_slice().to_vec());
        let variables = p.vars().unpack(&x).unwrap_or_default();
        let (f, viol_ineq, viol_eq) = match eval {
            Some(e) => (e.f, e.max_ineq_violation(), e.max_eq_violation()),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        Self {
            x,
            variables,
            f,
            viol_ineq,
            viol_eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub termination: Termination,
    /// Feasible iterate with the lowest objective, or the least infeasible
    /// iterate if none was feasible.
    pub best: Iterate,
    /// The iterate the solver stopped at.
    pub last: Iterate,
    /// Stationarity measure at `last`.
    pub stationarity: Option<f64>,
    /// `max(1, ‖∇φ(x₀; μ₀)‖₂)`; convergence requires
    /// `stationarity ≤ opt_tol · stationarity_scale`.
    pub stationarity_scale: f64,
    pub opt_tol: f64,
    pub viol_ineq_tol: f64,
    pub viol_eq_tol: f64,
    pub mu: f64,
    pub log: Vec<IterRecord>,
    /// Smallest eigenvalue of the unit-diagonal scaling of `H` after each
    /// accepted update, if tracked; see [`scaled_min_eigenvalue`].
    pub hessian_min_eigenvalues: Vec<f64>,
    pub wall_time: Duration,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    /// Re-derives the convergence claim from the recorded values.
    pub fn convergence_certified(&self) -> bool {
        self.last.viol_ineq <= self.viol_ineq_tol
            && self.last.viol_eq <= self.viol_eq_tol
            && self
                .stationarity
                .is_some_and(|m| m <= self.opt_tol * self.stationarity_scale)
    }
}

fn initial_point(p: &ProblemDefinition, opts: &SolverOptions) -> Result<DVector<f64>, SolverError> {
    let n = p.dim();
    match &opts.x0 {
        Some(x0) if x0.len() != n => Err(ProblemError::LengthMismatch {
            expected: n,
            got: x0.len(),
        }
        .into()),
        Some(x0) => Ok(DVector::from_column_slice(x0.as_slice())),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            Ok(DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
        }
    }
}

fn evaluate(p: &ProblemDefinition, x: &DVector<f64>) -> Result<EvalRecord, ProblemError> {
    p.evaluate(&PackedPoint(x.as_slice().to_vec()))
}

fn qp_error_status(e: &QpError) -> &'static str {
    match e {
        QpError::Failed(s) => s.as_str(),
        QpError::NotPositiveDefinite => "not_positive_definite",
        QpError::Invalid(_) => "invalid",
    }
}

struct Steering {
    /// `None` when the QP failed and the caller must fall back.
    d: Option<DVector<f64>>,
    status: &'static str,
    /// Predicted violation reduction of the `μ = 0` direction.
    pred0: Option<f64>,
}

fn steer(
    h: &DMatrix<f64>,
    eval: &EvalRecord,
    mu: &mut f64,
    feasible: bool,
    opts: &SolverOptions,
) -> Steering {
    let qp = match SteeringQp::new(h, eval, opts.qp_tol, opts.qp_max_iter) {
        Ok(qp) => qp,
        Err(e) => {
            return Steering {
                d: None,
                status: qp_error_status(&e),
                pred0: None,
            }
        }
    };
    let mut pred0 = None;
    let mut step = qp.solve(*mu);
    if qp.has_constraints() && !feasible {
        pred0 = qp.solve(0.0).ok().map(|s| s.predicted_reduction);
        if let Some(p0) = pred0 {
            for _ in 0..opts.steering_max_trials {
                match &step {
                    Ok(s) if s.predicted_reduction < opts.steering_c_v * p0 => {
                        *mu *= opts.steering_c_mu;
                        step = qp.solve(*mu);
                    }
                    _ => break,
                }
            }
        }
    }
    match step {
        Ok(s) => Steering {
            d: Some(s.d),
            status: s.status.map_or("none", |st| st.as_str()),
            pred0,
        },
        Err(e) => Steering {
            d: None,
            status: qp_error_status(&e),
            pred0,
        },
    }
}

/// Gradient cache of accepted iterates, oldest first.
struct GradientCache {
    capacity: usize,
    entries: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl GradientCache {
    fn push(&mut self, x: &DVector<f64>, g: &DVector<f64>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((x.clone(), g.clone()));
    }

    fn clear(&mut self) {
        self.entries.clear();
    }

    fn measure(&self, x: &DVector<f64>, radius: f64, tol: f64, max_iter: usize) -> Option<f64> {
        let cols: Vec<&DVector<f64>> = self
            .entries
            .iter()
            .filter(|(xj, _)| (xj - x).norm() <= radius)
            .map(|(_, g)| g)
            .collect();
        if cols.is_empty() {
            return None;
        }
        let g = DMatrix::from_columns(&cols.iter().map(|c| (*c).clone()).collect::<Vec<_>>());
        min_norm_in_hull(&g, tol, max_iter).ok().map(|(m, _)| m)
    }
}

struct BestTracker {
    best: Option<(bool, f64, Iterate)>,
}

impl BestTracker {
    fn offer(&mut self, it: &Iterate, opts: &SolverOptions, total_violation: f64) {
        let feasible = it.viol_ineq <= opts.viol_ineq_tol && it.viol_eq <= opts.viol_eq_tol;
        let key = if feasible { it.f } else { total_violation };
        let better = match &self.best {
            None => true,
            Some((bf, bk, _)) => match (feasible, *bf) {
                (true, false) => true,
                (false, true) => false,
                _ => key < *bk,
            },
        };
        if better {
            self.best = Some((feasible, key, it.clone()));
        }
    }
}

fn min_eigenvalue(h: &InverseHessianApprox) -> f64 {
    scaled_min_eigenvalue(&h.to_dense())
}

/// Runs BFGS-SQP on `p`.
///
/// Fails only on invalid options or a malformed problem; every numerical
/// outcome is reported through [`Solution::termination`].
pub fn solve(p: &ProblemDefinition, opts: &SolverOptions) -> Result<Solution, SolverError> {
    opts.validate()?;
    let start = Instant::now();
    let n = p.dim();
    let mut x = initial_point(p, opts)?;
    let mut mu = opts.mu0;
    let mut log = Vec::new();
    let mut hessian_min_eigenvalues = Vec::new();

    let mut eval = match evaluate(p, &x) {
        Ok(e) => e,
        Err(e) if e.is_numerical() => {
            let it = Iterate::new(p, &x, None);
            return Ok(Solution {
                termination: Termination::NumericalError,
                best: it.clone(),
                last: it,
                stationarity: None,
                stationarity_scale: 1.0,
                opt_tol: opts.opt_tol,
                viol_ineq_tol: opts.viol_ineq_tol,
                viol_eq_tol: opts.viol_eq_tol,
                mu,
                log,
                hessian_min_eigenvalues,
                wall_time: start.elapsed(),
            });
        }
        Err(e) => return Err(e.into()),
    };

    let mut h = InverseHessianApprox::identity(n, opts.limited_memory_pairs);
    let mut phi = penalty_value(&eval, mu);
    let mut grad = assemble_penalty_gradient(&eval, mu);
    let stationarity_scale = grad.norm().max(1.0);
    let mut cache = GradientCache {
        capacity: opts.gradient_cache_size.unwrap_or((n + 10).min(50)),
        entries: VecDeque::new(),
    };
    let mut tracker = BestTracker { best: None };
    let mut failures = 0;
    let mut reset_used = false;

    let mut last;
    let mut measure;
    let termination = loop {
        last = Iterate::new(p, &x, Some(&eval));
        tracker.offer(&last, opts, eval.total_violation());
        cache.push(&x, &grad);
        let radius = opts.stationarity_radius;
        measure = cache.measure(&x, radius, opts.qp_tol, opts.qp_max_iter);
        let feasible = last.viol_ineq <= opts.viol_ineq_tol && last.viol_eq <= opts.viol_eq_tol;
        let mut record = IterRecord {
            iter: log.len() + 1,
            mu,
            phi,
            f: eval.f,
            viol_ineq: last.viol_ineq,
            viol_eq: last.viol_eq,
            stationarity: measure,
            step: 0.0,
            qp_status: "none",
        };
        if feasible && measure.is_some_and(|m| m <= opts.opt_tol * stationarity_scale) {
            log.push(record);
            break Termination::Converged;
        }
        if log.len() == opts.max_iter {
            break Termination::MaxIter;
        }

        let mu_before = mu;
        let mut steering = steer(&h.to_dense(), &eval, &mut mu, feasible, opts);
        // μ is only lowered, and stationarity of the violation only declared,
        // when the test also fails with H = I
        let stalled = !feasible && steering.pred0.is_some_and(|p0| p0 <= opts.opt_tol);
        let retry = (mu < mu_before || stalled) && !h.is_identity();
        if retry || steering.status == "not_positive_definite" {
            mu = mu_before;
            h.reset();
            steering = steer(&h.to_dense(), &eval, &mut mu, feasible, opts);
        }
        record.qp_status = steering.status;
        if mu != mu_before {
            phi = penalty_value(&eval, mu);
            grad = assemble_penalty_gradient(&eval, mu);
            cache.clear();
            cache.push(&x, &grad);
            measure = cache.measure(&x, radius, opts.qp_tol, opts.qp_max_iter);
            record.mu = mu;
            record.phi = phi;
            record.stationarity = measure;
        }
        if !feasible && steering.pred0.is_some_and(|p0| p0 <= opts.opt_tol) {
            log.push(record);
            break Termination::StationaryInfeasible;
        }

        let mut d = steering.d.unwrap_or_else(|| -h.apply(&grad));
        let mut slope = grad.dot(&d);
        if !(slope < 0.0) {
            h.reset();
            d = -&grad;
            slope = -grad.norm_squared();
        }
        if d.iter().any(|v| !v.is_finite()) || !slope.is_finite() {
            log.push(record);
            break Termination::NumericalError;
        }
        if !(slope < 0.0) {
            log.push(record);
            break Termination::LineSearchFailed;
        }

        let search = weak_wolfe_linesearch(
            |xt| {
                let e = evaluate(p, xt).ok()?;
                let value = penalty_value(&e, mu);
                let g = assemble_penalty_gradient(&e, mu);
                (value.is_finite() && g.iter().all(|v| v.is_finite())).then_some((value, g, e))
            },
            &x,
            &d,
            phi,
            slope,
            opts.wolfe_c1,
            opts.wolfe_c2,
            opts.linesearch_max_bisections,
        );
        let accepted = match search {
            Ok(step) => {
                failures = 0;
                reset_used = false;
                Some(step)
            }
            Err(fail) => {
                failures += 1;
                fail.best_armijo.filter(|_| !fail.unbounded)
            }
        };
        if let Some(step) = accepted {
            record.step = step.t;
            let s = &step.x - &x;
            let y = &step.grad - &grad;
            if h.update(&s, &y) && opts.track_hessian_spectrum {
                hessian_min_eigenvalues.push(min_eigenvalue(&h));
            }
            x = step.x;
            phi = step.phi;
            grad = step.grad;
            eval = step.payload;
        }
        log.push(record);
        if failures >= 2 {
            if reset_used {
                last = Iterate::new(p, &x, Some(&eval));
                tracker.offer(&last, opts, eval.total_violation());
                measure = None;
                break Termination::LineSearchFailed;
            }
            h.reset();
            reset_used = true;
            failures = 0;
        }
    };

    let best = tracker
        .best
        .map(|(_, _, it)| it)
        .unwrap_or_else(|| last.clone());
    Ok(Solution {
        termination,
        best,
        last,
        stationarity: measure,
        stationarity_scale,
        opt_tol: opts.opt_tol,
        viol_ineq_tol: opts.viol_ineq_tol,
        viol_eq_tol: opts.viol_eq_tol,
        mu,
        log,
        hessian_min_eigenvalues,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests;
