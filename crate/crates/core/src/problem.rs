//! Problem definitions over named tensor variables.
//!
//! A [`ProblemDefinition`] pairs an ordered list of variables with a
//! callback that builds the objective and constraint expressions on a fresh
//! tape. The solver only ever sees the flat [`PackedPoint`] form; variables
//! are concatenated in declaration order, each flattened row-major.

use std::collections::HashMap;
use std::fmt;
use std::ops::Index;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::ad::{AdError, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("variable `{0}` is declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` has a zero-sized dimension")]
    ZeroDimension(String),
    #[error("no variables declared")]
    NoVariables,
    #[error("variable `{0}` is missing")]
    MissingVariable(String),
    #[error("variable `{name}` has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("packed point has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("objective must have a single element, got shape {0:?}")]
    NonScalarObjective(Vec<usize>),
    #[error("{kind} constraint count changed from {expected} to {got}")]
    ConstraintCount {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {what} at the evaluated point")]
    NonFinite { what: String, x: Vec<f64> },
    #[error(transparent)]
    Ad(#[from] AdError),
}

impl ProblemError {
    /// Whether this error reflects a numerical breakdown at a particular
    /// point rather than a malformed problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ProblemError::NonFinite { .. } | ProblemError::Ad(AdError::Domain { .. })
        )
    }
}

/// Ordered `(name, shape)` declarations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VariableSpec {
    vars: Vec<(String, Vec<usize>)>,
}

impl VariableSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a variable. An empty shape declares a scalar.
    pub fn with(mut self, name: &str, shape: &[usize]) -> Result<Self, ProblemError> {
        if self.vars.iter().any(|(n, _)| n == name) {
            return Err(ProblemError::DuplicateVariable(name.to_string()));
        }
        if shape.contains(&0) {
            return Err(ProblemError::ZeroDimension(name.to_string()));
        }
        self.vars.push((name.to_string(), shape.to_vec()));
        Ok(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.vars.iter().map(|(n, s)| (n.as_str(), s.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Total number of scalar unknowns.
    pub fn dim(&self) -> usize {
        self.vars
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }

    /// Flattens named tensors into one vector in declaration order.
    pub fn pack(&self, values: &[(String, Tensor)]) -> Result<PackedPoint, ProblemError> {
        let lookup: HashMap<&str, &Tensor> = values.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let mut x = Vec::with_capacity(self.dim());
        for (name, shape) in &self.vars {
            let t = lookup
                .get(name.as_str())
                .ok_or_else(|| ProblemError::MissingVariable(name.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(ProblemError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    got: t.shape().to_vec(),
                });
            }
            x.extend_from_slice(t.data());
        }
        Ok(PackedPoint(x))
    }

    /// Splits a flat vector back into named tensors.
    pub fn unpack(&self, x: &PackedPoint) -> Result<Vec<(String, Tensor)>, ProblemError> {
        let n = self.dim();
        if x.len() != n {
            return Err(ProblemError::LengthMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut offset = 0;
        Ok(self
            .vars
            .iter()
            .map(|(name, shape)| {
                let len: usize = shape.iter().product();
                let t = Tensor::from_vec(shape.clone(), x.0[offset..offset + len].to_vec());
                offset += len;
                (name.clone(), t)
            })
            .collect())
    }
}

/// Flat solver-side representation of all variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedPoint(pub Vec<f64>);

impl PackedPoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for PackedPoint {
    fn from(v: Vec<f64>) -> Self {
        PackedPoint(v)
    }
}

/// The named leaves handed to a problem callback.
pub struct Vars {
    tape: Tape,
    leaves: Vec<(String, Var)>,
}

impl Vars {
    /// The tape the leaves live on, for building constants.
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.leaves.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn leaf_vars(&self) -> Vec<Var> {
        self.leaves.iter().map(|(_, v)| v.clone()).collect()
    }
}

impl Index<&str> for Vars {
    type Output = Var;

    fn index(&self, name: &str) -> &Var {
        self.get(name)
            .unwrap_or_else(|| panic!("no variable named `{name}`"))
    }
}

/// Objective plus named inequality (`c ≤ 0`) and equality (`c = 0`)
/// expressions. Tensor-valued constraints count one scalar constraint per
/// element, row-major.
pub struct Model {
    pub objective: Var,
    pub ineq: Vec<(String, Var)>,
    pub eq: Vec<(String, Var)>,
}

impl Model {
    /// An unconstrained model.
    pub fn new(objective: Var) -> Self {
        Self {
            objective,
            ineq: Vec::new(),
            eq: Vec::new(),
        }
    }

    pub fn ineq(mut self, name: &str, c: Var) -> Self {
        self.ineq.push((name.to_string(), c));
        self
    }

    pub fn eq(mut self, name: &str, c: Var) -> Self {
        self.eq.push((name.to_string(), c));
        self
    }
}

type EvalFn = dyn Fn(&Vars) -> Result<Model, AdError> + Send + Sync;

/// Variables plus the callback producing objective and constraints.
#[derive(Clone)]
pub struct ProblemDefinition {
    vars: VariableSpec,
    eval: Arc<EvalFn>,
    counts: Arc<OnceLock<(usize, usize)>>,
}

impl fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("vars", &self.vars)
            .field("counts", &self.counts.get())
            .finish()
    }
}

/// Values and first derivatives of a problem at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub f: f64,
    pub grad_f: Vec<f64>,
    pub ci: Vec<f64>,
    pub ci_jac: Vec<Vec<f64>>,
    pub ce: Vec<f64>,
    pub ce_jac: Vec<Vec<f64>>,
}

impl EvalRecord {
    /// Largest inequality violation `max(0, max cᵢ)`.
    pub fn max_ineq_violation(&self) -> f64 {
        self.ci.iter().fold(0.0, |m, &c| m.max(c))
    }

    /// Largest equality violation `max |cₑ|`.
    pub fn max_eq_violation(&self) -> f64 {
        self.ce.iter().fold(0.0, |m, &c| m.max(c.abs()))
    }

    /// Total violation `Σ max(cᵢ, 0) + Σ |cₑ|`.
    pub fn total_violation(&self) -> f64 {
        self.ci.iter().map(|c| c.max(0.0)).sum::<f64>()
            + self.ce.iter().map(|c| c.abs()).sum::<f64>()
    }

    pub fn n_constraints(&self) -> usize {
        self.ci.len() + self.ce.len()
    }
}

impl ProblemDefinition {
    pub fn new<F>(vars: VariableSpec, eval: F) -> Result<Self, ProblemError>
    where
        F: Fn(&Vars) -> Result<Model, AdError> + Send + Sync + 'static,
    {
        if vars.dim() == 0 {
            return Err(ProblemError::NoVariables);
        }
        Ok(Self {
            vars,
            eval: Arc::new(eval),
            counts: Arc::new(OnceLock::new()),
        })
    }

    pub fn vars(&self) -> &VariableSpec {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.dim()
    }

    /// Scalar constraint counts `(inequalities, equalities)` once known.
    pub fn constraint_counts(&self) -> Option<(usize, usize)> {
        self.counts.get().copied()
    }

    /// Runs the callback on a fresh tape and returns the expressions.
    pub fn build(&self, x: &PackedPoint) -> Result<(Vars, Model), ProblemError> {
        let values = self.vars.unpack(x)?;
        let tape = Tape::new();
        let mut leaves = Vec::with_capacity(values.len());
        for (name, t) in values {
            let v = tape.leaf(&name, t)?;
            leaves.push((name, v));
        }
        let vars = Vars { tape, leaves };
        let model = (self.eval)(&vars)?;
        Ok((vars, model))
    }

    /// Objective, constraints and their gradients at `x`.
    pub fn evaluate(&self, x: &PackedPoint) -> Result<EvalRecord, ProblemError> {
        let (vars, model) = self.build(x)?;
        let leaves = vars.leaf_vars();
        let non_finite = |what: String| ProblemError::NonFinite {
            what,
            x: x.0.clone(),
        };

        let obj = model.objective.value();
        if obj.len() != 1 {
            return Err(ProblemError::NonScalarObjective(obj.shape().to_vec()));
        }
        let f = obj.item();
        if !f.is_finite() {
            return Err(non_finite("objective".into()));
        }
        let grad_f = model.objective.element_gradient(0, &leaves);
        if grad_f.iter().any(|g| !g.is_finite()) {
            return Err(non_finite("objective gradient".into()));
        }

        let flatten = |exprs: &[(String, Var)]| -> Result<(Vec<f64>, Vec<Vec<f64>>), ProblemError> {
            let mut vals = Vec::new();
            let mut rows = Vec::new();
            for (name, e) in exprs {
                let v = e.value();
                for (k, &c) in v.data().iter().enumerate() {
                    if !c.is_finite() {
                        return Err(non_finite(format!("constraint `{name}`[{k}]")));
                    }
                    let row = e.element_gradient(k, &leaves);
                    if row.iter().any(|g| !g.is_finite()) {
                        return Err(non_finite(format!("gradient of constraint `{name}`[{k}]")));
                    }
                    vals.push(c);
                    rows.push(row);
                }
            }
            Ok((vals, rows))
        };
        let (ci, ci_jac) = flatten(&model.ineq)?;
        let (ce, ce_jac) = flatten(&model.eq)?;

        let (p, q) = *self.counts.get_or_init(|| (ci.len(), ce.len()));
        if ci.len() != p {
            return Err(ProblemError::ConstraintCount {
                kind: "inequality",
                expected: p,
                got: ci.len(),
            });
        }
        if ce.len() != q {
            return Err(ProblemError::ConstraintCount {
                kind: "equality",
                expected: q,
                got: ce.len(),
            });
        }
        Ok(EvalRecord {
            f,
            grad_f,
            ci,
            ci_jac,
            ce,
            ce_jac,
        })
    }

    /// Objective and constraint values only (no gradients).
    pub fn values(&self, x: &PackedPoint) -> Result<(f64, Vec<f64>, Vec<f64>), ProblemError> {
        let (_, model) = self.build(x)?;
        let flat = |exprs: &[(String, Var)]| -> Vec<f64> {
            exprs
                .iter()
                .flat_map(|(_, e)| e.value().into_data())
                .collect()
        };
        Ok((
            model.objective.value().item(),
            flat(&model.ineq),
            flat(&model.eq),
        ))
    }
}

/// Largest deviation between autodiff gradients and central differences
/// over the objective and every constraint, at one point.
///
/// The error of each gradient row is `‖g − g_fd‖∞ / max(1, ‖g‖∞)`.
pub fn gradient_check(p: &ProblemDefinition, x: &PackedPoint, h: f64) -> Result<f64, ProblemError> {
    let rec = p.evaluate(x)?;
    let n = x.len();
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.clone();
        xp.0[j] += h;
        let mut xm = x.clone();
        xm.0[j] -= h;
        plus.push(p.values(&xp)?);
        minus.push(p.values(&xm)?);
    }
    let row_error = |g: &[f64], fd: &[f64]| -> f64 {
        let scale = g.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        g.iter()
            .zip(fd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale
    };
    let fd_f: Vec<f64> = (0..n)
        .map(|j| (plus[j].0 - minus[j].0) / (2.0 * h))
        .collect();
    let mut worst = row_error(&rec.grad_f, &fd_f);
    for (i, row) in rec.ci_jac.iter().enumerate() {
        let fd: Vec<f64> = (0..n)
            .map(|j| (plus[j].1[i] - minus[j].1[i]) / (2.0 * h))
            .collect();
        worst = worst.max(row_error(row, &fd));
    }
    for (i, row) in rec.ce_jac.iter().enumerate() {
        let fd: Vec<f64> = (0..n)
            .map(|j| (plus[j].2[i] - minus[j].2[i]) / (2.0 * h))
            .collect();
        worst = worst.max(row_error(row, &fd));
    }
    Ok(worst)
}
