use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Pairs with `sᵀy` at or below this fraction of `‖s‖‖y‖` are skipped.
pub const SKIP_THRESHOLD: f64 = 1e-10;

/// Smallest eigenvalue of `D^(-1/2) H D^(-1/2)` with `D = diag(H)`, or
/// `-∞` when a diagonal entry is not positive. The scaled matrix has unit
/// diagonal and the same inertia as `H`, so its eigenvalues measure
/// definiteness without the rounding error of a large `‖H‖`.
pub fn scaled_min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    let d: Vec<f64> = (0..n).map(|i| h[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return f64::NEG_INFINITY;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| h[(i, j)] / (d[i] * d[j]).sqrt());
    SymmetricEigen::new(scaled).eigenvalues.min()
}

/// Inverse-Hessian approximation: dense, or limited memory with the newest
/// pair last.
#[derive(Debug, Clone, PartialEq)]
pub enum InverseHessianApprox {
    Dense(DMatrix<f64>),
    Limited {
        n: usize,
        capacity: usize,
        pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
    },
}

impl InverseHessianApprox {
    /// Identity of size `n`; `memory = 0` selects the dense form.
    pub fn identity(n: usize, memory: usize) -> Self {
        if memory == 0 {
            InverseHessianApprox::Dense(DMatrix::identity(n, n))
        } else {
            InverseHessianApprox::Limited {
                n,
                capacity: memory,
                pairs: VecDeque::with_capacity(memory),
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InverseHessianApprox::Dense(h) => h.nrows(),
            InverseHessianApprox::Limited { n, .. } => *n,
        }
    }

    /// Whether the approximation is exactly the identity.
    pub fn is_identity(&self) -> bool {
        match self {
            InverseHessianApprox::Dense(h) => h.is_identity(0.0),
            InverseHessianApprox::Limited { pairs, .. } => pairs.is_empty(),
        }
    }

    pub fn reset(&mut self) {
        match self {
            InverseHessianApprox::Dense(h) => {
                let n = h.nrows();
                *h = DMatrix::identity(n, n);
            }
            InverseHessianApprox::Limited { pairs, .. } => pairs.clear(),
        }
    }

    /// `H·v`; the limited-memory form uses the two-loop recursion with
    /// `H₀ = I`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            InverseHessianApprox::Dense(h) => h * v,
            InverseHessianApprox::Limited { pairs, .. } => {
                let mut q = v.clone();
                let mut alpha = Vec::with_capacity(pairs.len());
                for (s, y) in pairs.iter().rev() {
                    let rho = 1.0 / s.dot(y);
                    let a = rho * s.dot(&q);
                    q.axpy(-a, y, 1.0);
                    alpha.push(a);
                }
                for ((s, y), a) in pairs.iter().zip(alpha.iter().rev()) {
                    let rho = 1.0 / s.dot(y);
                    let b = rho * y.dot(&q);
                    q.axpy(a - b, s, 1.0);
                }
                q
            }
        }
    }

    /// The approximation as an explicit matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            InverseHessianApprox::Dense(h) => h.clone(),
            InverseHessianApprox::Limited { n, .. } => {
                let mut h = DMatrix::zeros(*n, *n);
                for j in 0..*n {
                    let mut e = DVector::zeros(*n);
                    e[j] = 1.0;
                    h.set_column(j, &self.apply(&e));
                }
                (&h + h.transpose()) * 0.5
            }
        }
    }

    /// Inverse BFGS update from the step `s` and gradient change `y`.
    /// Returns `false` when the pair was skipped: it fails the curvature
    /// test, or the dense result has a [`scaled_min_eigenvalue`] that is
    /// not positive.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        let sy = s.dot(y);
        if !(sy > SKIP_THRESHOLD * s.norm() * y.norm()) {
            return false;
        }
        match self {
            InverseHessianApprox::Dense(h) => {
                let mut next = h.clone();
                bfgs_update(&mut next, s, y);
                if !(scaled_min_eigenvalue(&next) > 0.0) {
                    return false;
                }
                *h = next;
            }
            InverseHessianApprox::Limited {
                capacity, pairs, ..
            } => {
                if pairs.len() == *capacity {
                    pairs.pop_front();
                }
                pairs.push_back((s.clone(), y.clone()));
            }
        }
        true
    }
}

/// Dense inverse BFGS update `H⁺ = (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ` with
/// `ρ = 1/sᵀy`, applied in place. The caller is responsible for the skip
/// rule; see [`InverseHessianApprox::update`].
pub fn bfgs_update(h: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let rho = 1.0 / s.dot(y);
    let n = s.len();
    let mut v = DMatrix::identity(n, n);
    v.ger(-rho, s, y, 1.0);
    let mut next = &v * &*h * v.transpose();
    next.ger(rho, s, s, 1.0);
    *h = (&next + next.transpose()) * 0.5;
}
