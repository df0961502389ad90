use nalgebra::DVector;

use crate::problem::EvalRecord;

/// Exact penalty `φ(x; μ) = μ·f(x) + v(x)`.
pub fn penalty_value(eval: &EvalRecord, mu: f64) -> f64 {
    mu * eval.f + eval.total_violation()
}

/// `∇φ = μ∇f + Σᵢ 1[cᵢ > 0]·∇cᵢ + Σₑ sign(cₑ)·∇cₑ`, with `sign(0) = 0`.
pub fn assemble_penalty_gradient(eval: &EvalRecord, mu: f64) -> DVector<f64> {
    let mut g = DVector::from_column_slice(&eval.grad_f) * mu;
    for (c, row) in eval.ci.iter().zip(&eval.ci_jac) {
        if *c > 0.0 {
            g += DVector::from_column_slice(row);
        }
    }
    for (c, row) in eval.ce.iter().zip(&eval.ce_jac) {
        let s = if *c > 0.0 {
            1.0
        } else if *c < 0.0 {
            -1.0
        } else {
            continue;
        };
        g += DVector::from_column_slice(row) * s;
    }
    g
}
