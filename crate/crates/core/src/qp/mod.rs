//! Convex quadratic programming.
//!
//! Solves `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u` with an ADMM operator-splitting
//! method ([`Admm`]), box-constrained QPs exactly by an active-set method
//! ([`solve_box_qp`]), and builds the two QPs the BFGS-SQP driver needs:
//! the min-norm element of a convex hull of gradients ([`min_norm_in_hull`])
//! and the penalty-steering search direction ([`SteeringQp`]).

mod admm;
mod boxqp;
mod hull;
mod steering;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use admm::{Admm, AdmmSettings};
pub use boxqp::solve_box_qp;
pub use hull::min_norm_in_hull;
pub use steering::{SteeringQp, SteeringStep};

/// Default absolute tolerance on the KKT residuals.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("invalid QP data: {0}")]
    Invalid(String),
    #[error("QP solve ended with status {0}")]
    Failed(QpStatus),
    #[error("inverse Hessian approximation is not positive definite")]
    NotPositiveDefinite,
}

/// Convex QP instance `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpData {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

impl QpData {
    pub fn new(
        p: DMatrix<f64>,
        q: DVector<f64>,
        a: DMatrix<f64>,
        l: DVector<f64>,
        u: DVector<f64>,
    ) -> Result<Self, QpError> {
        let d = Self { p, q, a, l, u };
        d.validate()?;
        Ok(d)
    }

    /// Unconstrained instance.
    pub fn unconstrained(p: DMatrix<f64>, q: DVector<f64>) -> Result<Self, QpError> {
        let n = q.len();
        Self::new(
            p,
            q,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DVector::zeros(0),
        )
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.q.len();
        let m = self.l.len();
        if self.p.shape() != (n, n) {
            return Err(QpError::Invalid(format!(
                "P is {:?}, expected {n}x{n}",
                self.p.shape()
            )));
        }
        if self.a.shape() != (m, n) || self.u.len() != m {
            return Err(QpError::Invalid(format!(
                "A is {:?}, l has {m} rows, u has {} rows, n = {n}",
                self.a.shape(),
                self.u.len()
            )));
        }
        if self
            .p
            .iter()
            .chain(self.q.iter())
            .chain(self.a.iter())
            .any(|v| !v.is_finite())
        {
            return Err(QpError::Invalid("non-finite entry in P, q or A".into()));
        }
        let scale = self.p.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (self.p[(i, j)] - self.p[(j, i)]).abs() > 1e-12 * scale {
                    return Err(QpError::Invalid(format!(
                        "P is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        for i in 0..m {
            let (l, u) = (self.l[i], self.u[i]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(QpError::Invalid(format!(
                    "bounds of row {i} are [{l}, {u}]"
                )));
            }
        }
        Ok(())
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    /// `‖Px + q + Aᵀy‖∞`.
    pub fn dual_residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let r = &self.p * x + &self.q + self.a.tr_mul(y);
        r.amax()
    }

    /// `‖Ax − Π_[l,u](Ax + y)‖∞`, which vanishes iff `x` is feasible and `y`
    /// is complementary with the correct signs.
    pub fn primal_residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let ax = &self.a * x;
        (0..self.m())
            .map(|i| (ax[i] - (ax[i] + y[i]).clamp(self.l[i], self.u[i])).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIter,
    PrimalInfeasible,
    DualInfeasible,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Solved => "solved",
            QpStatus::MaxIter => "max_iter",
            QpStatus::PrimalInfeasible => "primal_infeasible",
            QpStatus::DualInfeasible => "dual_infeasible",
        }
    }
}

impl fmt::Display for QpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// A convex QP solver.
pub trait QpBackend {
    fn solve(&self, data: &QpData, tol: f64, max_iter: usize) -> QpSolution;
}

/// Solves a QP with the default ADMM backend.
pub fn solve_qp(data: &QpData, tol: f64, max_iter: usize) -> QpSolution {
    Admm::default().solve(data, tol, max_iter)
}

#[cfg(test)]
mod tests;
