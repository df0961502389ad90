//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Every operation evaluates its forward value eagerly and appends a node to
//! the tape, so the tape is always in topological order. [`Tape::backward`]
//! walks it in reverse and accumulates adjoints.
//!
//! ```
//! use nonsmooth_sqp::ad::Tape;
//! use nonsmooth_sqp::Tensor;
//!
//! let tape = Tape::new();
//! let q = tape.leaf("q", Tensor::vector(vec![0.5, -0.2, 0.1])).unwrap();
//! let f = q.pnorm(1.0).unwrap();
//! let grads = tape.backward(&f).unwrap();
//! assert_eq!(grads.get("q").unwrap().data(), &[1.0, -1.0, 1.0]);
//! ```
//!
//! Kinks use fixed subgradient selections: `d|t|/dt = 0` and
//! `d relu(t)/dt = 0` at `t = 0`, `max` routes the adjoint to the lowest
//! flat index among ties, and the same holds for the maximal-magnitude entry
//! of the infinity norm.

mod backward;

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::tensor::{matmul_raw, transpose_raw, Tensor};

pub use backward::Gradients;

/// Errors raised while building or differentiating an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: invalid input of shape {shape:?}: {reason}")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },
    #[error("{op}: input {value} is outside the domain")]
    Domain { op: &'static str, value: f64 },
    #[error("backward requires a rank-0 root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("leaf name `{0}` is already used on this tape")]
    DuplicateLeaf(String),
    #[error("unsupported norm order {0} (expected 1, 2 or infinity)")]
    UnsupportedNorm(f64),
    #[error("expression mixes nodes from different tapes")]
    ForeignTape,
}

pub type Result<T> = std::result::Result<T, AdError>;

/// Norm orders supported by [`Var::norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf {
        name: String,
        requires_grad: bool,
    },
    Const,
    Add(usize, usize),
    Sub(usize, usize),
    Neg(usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    MatMul {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    Transpose(usize),
    Reshape(usize),
    Sum(usize),
    Mean(usize),
    Dot(usize, usize),
    Abs(usize),
    Relu(usize),
    Maximum(usize, usize),
    Max {
        input: usize,
        argmax: usize,
    },
    Norm1(usize),
    Norm2(usize),
    NormInf {
        input: usize,
        argmax: usize,
    },
    Square(usize),
    Sqrt(usize),
    Exp(usize),
    Log(usize),
    Slice {
        input: usize,
        offset: usize,
    },
    Concat(Vec<usize>),
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) value: Tensor,
}

#[derive(Default)]
pub(crate) struct TapeInner {
    pub(crate) nodes: Vec<Node>,
    leaf_names: HashMap<String, usize>,
}

/// Records a differentiable computation.
///
/// A tape is single-threaded (it is neither `Send` nor `Sync`); build a fresh
/// one per evaluation point.
#[derive(Clone, Default)]
pub struct Tape {
    pub(crate) inner: Rc<RefCell<TapeInner>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    id: usize,
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({:?})", self.id, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, value: Tensor) -> Var {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { op, value });
        Var {
            tape: self.clone(),
            id: inner.nodes.len() - 1,
        }
    }

    /// A named input that gradients are reported for.
    pub fn leaf(&self, name: &str, value: Tensor) -> Result<Var> {
        self.named_leaf(name, value, true)
    }

    /// A named input excluded from [`Gradients`].
    pub fn frozen_leaf(&self, name: &str, value: Tensor) -> Result<Var> {
        self.named_leaf(name, value, false)
    }

    fn named_leaf(&self, name: &str, value: Tensor, requires_grad: bool) -> Result<Var> {
        if self.inner.borrow().leaf_names.contains_key(name) {
            return Err(AdError::DuplicateLeaf(name.to_string()));
        }
        let var = self.push(
            Op::Leaf {
                name: name.to_string(),
                requires_grad,
            },
            value,
        );
        self.inner
            .borrow_mut()
            .leaf_names
            .insert(name.to_string(), var.id);
        Ok(var)
    }

    /// An anonymous constant.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(Op::Const, value)
    }

    pub fn scalar(&self, value: f64) -> Var {
        self.constant(Tensor::scalar(value))
    }

    /// Concatenates along the first axis. Rank-0 inputs count as length-1
    /// vectors; all inputs must share their trailing dimensions.
    pub fn concat(&self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(AdError::InvalidShape {
                op: "concat",
                shape: vec![],
                reason: "no inputs".into(),
            });
        };
        let as_rows = |s: &[usize]| -> Vec<usize> {
            if s.is_empty() {
                vec![1]
            } else {
                s.to_vec()
            }
        };
        let first_shape = as_rows(&first.shape());
        let tail = first_shape[1..].to_vec();
        let mut rows = 0;
        let mut data = Vec::new();
        let mut ids = Vec::with_capacity(parts.len());
        for p in parts {
            if !Rc::ptr_eq(&p.tape.inner, &self.inner) {
                return Err(AdError::ForeignTape);
            }
            let s = as_rows(&p.shape());
            if s[1..] != tail[..] {
                return Err(AdError::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape(),
                    rhs: p.shape(),
                });
            }
            rows += s[0];
            data.extend_from_slice(p.value().data());
            ids.push(p.id);
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        Ok(self.push(Op::Concat(ids), Tensor::from_vec(shape, data)))
    }

    /// Gradients of a rank-0 `root` with respect to every leaf created with
    /// [`Tape::leaf`].
    pub fn backward(&self, root: &Var) -> Result<Gradients> {
        root.backward()
    }
}

fn broadcast_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Vec<usize>> {
    if a.shape() == b.shape() || b.is_scalar() {
        Ok(a.shape().to_vec())
    } else if a.is_scalar() {
        Ok(b.shape().to_vec())
    } else {
        Err(AdError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        })
    }
}

fn broadcast_zip(a: &Tensor, b: &Tensor, shape: Vec<usize>, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let n: usize = shape.iter().product();
    let pick = |t: &Tensor, i: usize| {
        if t.is_scalar() {
            t.data()[0]
        } else {
            t.data()[i]
        }
    };
    let data = (0..n).map(|i| f(pick(a, i), pick(b, i))).collect();
    Tensor::from_vec(shape, data)
}

/// First index attaining the maximum of `key` over `data`.
fn first_argmax(data: &[f64], key: impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    for (i, &v) in data.iter().enumerate().skip(1) {
        if key(v) > key(data[best]) {
            best = i;
        }
    }
    best
}

impl Var {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Forward value (a copy).
    pub fn value(&self) -> Tensor {
        self.tape.inner.borrow().nodes[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id]
            .value
            .shape()
            .to_vec()
    }

    /// Value of a single-element expression.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    fn same_tape(&self, other: &Var) -> Result<()> {
        if Rc::ptr_eq(&self.tape.inner, &other.tape.inner) {
            Ok(())
        } else {
            Err(AdError::ForeignTape)
        }
    }

    fn unary(&self, op: Op, value: Tensor) -> Var {
        self.tape.push(op, value)
    }

    fn binary_elementwise(
        &self,
        other: &Var,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        self.same_tape(other)?;
        let (a, b) = (self.value(), other.value());
        let shape = broadcast_shape(name, &a, &b)?;
        let value = broadcast_zip(&a, &b, shape, f);
        Ok(self.tape.push(op, value))
    }

    pub fn add(&self, other: &Var) -> Result<Var> {
        self.binary_elementwise(other, "add", Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        self.binary_elementwise(other, "sub", Op::Sub(self.id, other.id), |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Var) -> Result<Var> {
        self.binary_elementwise(other, "mul", Op::Mul(self.id, other.id), |a, b| a * b)
    }

    /// Elementwise quotient.
    pub fn div(&self, other: &Var) -> Result<Var> {
        self.binary_elementwise(other, "div", Op::Div(self.id, other.id), |a, b| a / b)
    }

    /// Elementwise maximum; ties route the adjoint to `self`.
    pub fn maximum(&self, other: &Var) -> Result<Var> {
        self.binary_elementwise(other, "maximum", Op::Maximum(self.id, other.id), f64::max)
    }

    pub fn neg(&self) -> Var {
        self.unary(Op::Neg(self.id), self.value().map(|v| -v))
    }

    /// Multiplication by a constant.
    pub fn scale(&self, c: f64) -> Var {
        self.unary(Op::Scale(self.id, c), self.value().map(|v| c * v))
    }

    /// Adds a constant to every element.
    pub fn add_scalar(&self, c: f64) -> Var {
        self.unary(Op::AddScalar(self.id), self.value().map(|v| v + c))
    }

    /// Matrix product. Rank-1 operands act as a row (left) or column (right)
    /// vector and the corresponding output axis is dropped.
    pub fn matmul(&self, other: &Var) -> Result<Var> {
        self.same_tape(other)?;
        let (a, b) = (self.value(), other.value());
        let mismatch = || AdError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        };
        let (m, k) = match a.shape() {
            [m, k] => (*m, *k),
            [k] => (1, *k),
            _ => return Err(mismatch()),
        };
        let (k2, n) = match b.shape() {
            [k2, n] => (*k2, *n),
            [k2] => (*k2, 1),
            _ => return Err(mismatch()),
        };
        if k != k2 {
            return Err(mismatch());
        }
        let mut shape = Vec::new();
        if a.rank() == 2 {
            shape.push(m);
        }
        if b.rank() == 2 {
            shape.push(n);
        }
        let data = matmul_raw(a.data(), b.data(), m, k, n);
        Ok(self.tape.push(
            Op::MatMul {
                a: self.id,
                b: other.id,
                m,
                k,
                n,
            },
            Tensor::from_vec(shape, data),
        ))
    }

    /// Transpose of a matrix.
    pub fn t(&self) -> Result<Var> {
        let v = self.value();
        match *v.shape() {
            [r, c] => Ok(self.unary(
                Op::Transpose(self.id),
                Tensor::from_vec([c, r], transpose_raw(v.data(), r, c)),
            )),
            _ => Err(AdError::InvalidShape {
                op: "transpose",
                shape: v.shape().to_vec(),
                reason: "expected a matrix".into(),
            }),
        }
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var> {
        let v = self.value();
        match v.reshaped(shape.to_vec()) {
            Some(r) => Ok(self.unary(Op::Reshape(self.id), r)),
            None => Err(AdError::ShapeMismatch {
                op: "reshape",
                lhs: v.shape().to_vec(),
                rhs: shape.to_vec(),
            }),
        }
    }

    /// Sum of all elements (rank 0).
    pub fn sum(&self) -> Var {
        let s = self.value().sum();
        self.unary(Op::Sum(self.id), Tensor::scalar(s))
    }

    pub fn mean(&self) -> Var {
        let v = self.value();
        let m = v.sum() / v.len() as f64;
        self.unary(Op::Mean(self.id), Tensor::scalar(m))
    }

    /// Inner product of two tensors of identical shape.
    pub fn dot(&self, other: &Var) -> Result<Var> {
        self.same_tape(other)?;
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(AdError::ShapeMismatch {
                op: "dot",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let s = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
        Ok(self
            .tape
            .push(Op::Dot(self.id, other.id), Tensor::scalar(s)))
    }

    pub fn abs(&self) -> Var {
        self.unary(Op::Abs(self.id), self.value().map(f64::abs))
    }

    pub fn relu(&self) -> Var {
        self.unary(Op::Relu(self.id), self.value().map(|v| v.max(0.0)))
    }

    /// Largest element (rank 0).
    pub fn max(&self) -> Var {
        let v = self.value();
        let argmax = first_argmax(v.data(), |x| x);
        self.unary(
            Op::Max {
                input: self.id,
                argmax,
            },
            Tensor::scalar(v.data()[argmax]),
        )
    }

    /// Norm over all elements.
    pub fn norm(&self, p: Norm) -> Var {
        let v = self.value();
        match p {
            Norm::L1 => {
                let s = v.data().iter().map(|x| x.abs()).sum();
                self.unary(Op::Norm1(self.id), Tensor::scalar(s))
            }
            Norm::L2 => {
                let s = v.data().iter().map(|x| x * x).sum::<f64>().sqrt();
                self.unary(Op::Norm2(self.id), Tensor::scalar(s))
            }
            Norm::Inf => {
                let argmax = first_argmax(v.data(), f64::abs);
                self.unary(
                    Op::NormInf {
                        input: self.id,
                        argmax,
                    },
                    Tensor::scalar(v.data()[argmax].abs()),
                )
            }
        }
    }

    /// `p`-norm for `p` in {1, 2, ∞}.
    pub fn pnorm(&self, p: f64) -> Result<Var> {
        let order = if p == 1.0 {
            Norm::L1
        } else if p == 2.0 {
            Norm::L2
        } else if p == f64::INFINITY {
            Norm::Inf
        } else {
            return Err(AdError::UnsupportedNorm(p));
        };
        Ok(self.norm(order))
    }

    pub fn square(&self) -> Var {
        self.unary(Op::Square(self.id), self.value().map(|v| v * v))
    }

    /// Elementwise square root; negative inputs are a domain error.
    pub fn sqrt(&self) -> Result<Var> {
        let v = self.value();
        if let Some(&bad) = v.data().iter().find(|&&x| x < 0.0 || x.is_nan()) {
            return Err(AdError::Domain {
                op: "sqrt",
                value: bad,
            });
        }
        Ok(self.unary(Op::Sqrt(self.id), v.map(f64::sqrt)))
    }

    pub fn exp(&self) -> Var {
        self.unary(Op::Exp(self.id), self.value().map(f64::exp))
    }

    /// Elementwise natural log; non-positive inputs are a domain error.
    pub fn log(&self) -> Result<Var> {
        let v = self.value();
        if let Some(&bad) = v.data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(AdError::Domain {
                op: "log",
                value: bad,
            });
        }
        Ok(self.unary(Op::Log(self.id), v.map(f64::ln)))
    }

    /// Single element at a multi-index (rank 0).
    pub fn index(&self, index: &[usize]) -> Result<Var> {
        let v = self.value();
        let flat = v.flat_index(index).ok_or_else(|| AdError::InvalidShape {
            op: "index",
            shape: v.shape().to_vec(),
            reason: format!("index {index:?} out of bounds"),
        })?;
        Ok(self.unary(
            Op::Slice {
                input: self.id,
                offset: flat,
            },
            Tensor::scalar(v.data()[flat]),
        ))
    }

    /// Rows `start..end` along the first axis.
    pub fn slice(&self, start: usize, end: usize) -> Result<Var> {
        let v = self.value();
        let shape = v.shape();
        if shape.is_empty() || start >= end || end > shape[0] {
            return Err(AdError::InvalidShape {
                op: "slice",
                shape: shape.to_vec(),
                reason: format!("range {start}..{end} is empty or out of bounds"),
            });
        }
        let inner: usize = shape[1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape[0] = end - start;
        let data = v.data()[start * inner..end * inner].to_vec();
        Ok(self.unary(
            Op::Slice {
                input: self.id,
                offset: start * inner,
            },
            Tensor::from_vec(out_shape, data),
        ))
    }

    /// Flattens to a rank-1 vector.
    pub fn flatten(&self) -> Var {
        let n = self.value().len();
        self.reshape(&[n]).expect("flatten preserves element count")
    }
}

/// Fault injection used to check that gradient verification catches a broken
/// derivative rule.
#[doc(hidden)]
pub mod fault {
    use std::cell::Cell;

    thread_local! {
        static FLIP_ABS: Cell<bool> = const { Cell::new(false) };
    }

    /// Flips the sign of the `abs`/`norm1` derivative on the current thread.
    pub fn set_abs_gradient_flipped(on: bool) {
        FLIP_ABS.with(|c| c.set(on));
    }

    pub(crate) fn abs_sign() -> f64 {
        if FLIP_ABS.with(Cell::get) {
            -1.0
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests;
