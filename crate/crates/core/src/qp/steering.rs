use nalgebra::{DMatrix, DVector};

use super::{solve_box_qp, QpError, QpStatus};
use crate::problem::EvalRecord;

/// Search direction from the penalty-steering subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringStep {
    pub d: DVector<f64>,
    /// `v(x) − v_lin(d)`: decrease of total violation predicted by the
    /// linearized constraints.
    pub predicted_reduction: f64,
    /// `None` when there are no constraints and no QP was needed.
    pub status: Option<QpStatus>,
}

/// The direction subproblem
///
/// `min_d μ∇fᵀd + ½dᵀBd + Σᵢ max(cᵢ + ∇cᵢᵀd, 0) + Σₑ |cₑ + ∇cₑᵀd|`
///
/// with `B = H⁻¹`. It is solved through its dual, the box-constrained QP
///
/// `min_λ ½λᵀJHJᵀλ + (μJH∇f − c)ᵀλ`,  `0 ≤ λᵢ ≤ 1`,  `−1 ≤ λₑ ≤ 1`,
///
/// after which `d = −H(μ∇f + Jᵀλ)`. The dual is solved exactly by
/// [`solve_box_qp`].
pub struct SteeringQp<'a> {
    h: &'a DMatrix<f64>,
    grad_f: DVector<f64>,
    ci: &'a [f64],
    ce: &'a [f64],
    /// Stacked constraint Jacobian `[∇cᵢ; ∇cₑ]`.
    jac: DMatrix<f64>,
    /// `JH`.
    jh: DMatrix<f64>,
    /// `JHJᵀ`.
    p: DMatrix<f64>,
    tol: f64,
    max_iter: usize,
}

impl<'a> SteeringQp<'a> {
    pub fn new(
        h: &'a DMatrix<f64>,
        eval: &'a EvalRecord,
        tol: f64,
        max_iter: usize,
    ) -> Result<Self, QpError> {
        let n = eval.grad_f.len();
        if h.shape() != (n, n) {
            return Err(QpError::Invalid(format!(
                "H is {:?}, expected {n}x{n}",
                h.shape()
            )));
        }
        if h.clone().cholesky().is_none() {
            return Err(QpError::NotPositiveDefinite);
        }
        let rows: Vec<&Vec<f64>> = eval.ci_jac.iter().chain(eval.ce_jac.iter()).collect();
        let jac = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        let jh = &jac * h;
        let p = &jh * jac.transpose();
        let p = (&p + p.transpose()) * 0.5;
        Ok(Self {
            h,
            grad_f: DVector::from_column_slice(&eval.grad_f),
            ci: &eval.ci,
            ce: &eval.ce,
            jac,
            jh,
            p,
            tol,
            max_iter,
        })
    }

    pub fn has_constraints(&self) -> bool {
        !self.ci.is_empty() || !self.ce.is_empty()
    }

    /// Total violation `v(x)`.
    pub fn violation(&self) -> f64 {
        self.ci.iter().map(|c| c.max(0.0)).sum::<f64>()
            + self.ce.iter().map(|c| c.abs()).sum::<f64>()
    }

    /// Violation of the linearized constraints at step `d`.
    pub fn linearized_violation(&self, d: &DVector<f64>) -> f64 {
        let lin = &self.jac * d;
        let p = self.ci.len();
        let vi: f64 = self
            .ci
            .iter()
            .enumerate()
            .map(|(i, c)| (c + lin[i]).max(0.0))
            .sum();
        let ve: f64 = self
            .ce
            .iter()
            .enumerate()
            .map(|(e, c)| (c + lin[p + e]).abs())
            .sum();
        vi + ve
    }

    /// Solves the subproblem at penalty parameter `mu`.
    pub fn solve(&self, mu: f64) -> Result<SteeringStep, QpError> {
        if !self.has_constraints() {
            return Ok(SteeringStep {
                d: -(self.h * &self.grad_f) * mu,
                predicted_reduction: 0.0,
                status: None,
            });
        }
        let (p, m) = (self.ci.len(), self.jac.nrows());
        let c = DVector::from_iterator(m, self.ci.iter().chain(self.ce.iter()).copied());
        let q = (&self.jh * &self.grad_f) * mu - c;
        let l = DVector::from_fn(m, |i, _| if i < p { 0.0 } else { -1.0 });
        let u = DVector::from_element(m, 1.0);
        let tol = self.tol * q.amax().max(self.p.amax()).max(1.0);
        let sol = solve_box_qp(&self.p, &q, &l, &u, tol, self.max_iter)?;
        if sol.status != QpStatus::Solved {
            return Err(QpError::Failed(sol.status));
        }
        let lambda = DVector::from_fn(m, |i, _| sol.x[i].clamp(l[i], u[i]));
        let d = -(self.h * (&self.grad_f * mu + self.jac.tr_mul(&lambda)));
        let predicted_reduction = self.violation() - self.linearized_violation(&d);
        Ok(SteeringStep {
            d,
            predicted_reduction,
            status: Some(sol.status),
        })
    }
}
