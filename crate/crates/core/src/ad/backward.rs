use super::{fault, AdError, Node, Op, Result, Var};
use crate::tensor::{matmul_raw, transpose_raw, Tensor};

/// Leaf gradients returned by [`Var::backward`], in leaf creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    entries: Vec<(String, Tensor)>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, g)| (n.as_str(), g))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn accumulate(slot: &mut Option<Tensor>, contrib: Tensor) {
    match slot {
        Some(acc) => {
            for (a, c) in acc.data_mut().iter_mut().zip(contrib.data()) {
                *a += c;
            }
        }
        None => *slot = Some(contrib),
    }
}

/// Reduces an adjoint of the (possibly broadcast) output back to an input's
/// shape.
fn unbroadcast(g: Tensor, input: &Tensor) -> Tensor {
    if input.is_scalar() && !g.is_scalar() {
        Tensor::scalar(g.sum())
    } else {
        g
    }
}

fn pick(t: &Tensor, i: usize) -> f64 {
    if t.is_scalar() {
        t.data()[0]
    } else {
        t.data()[i]
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn scatter(shape: &[usize], offset: usize, g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(shape.to_vec());
    out.data_mut()[offset..offset + g.len()].copy_from_slice(g.data());
    out
}

/// Propagates `seed` from node `root` down to every node it depends on.
pub(crate) fn adjoints(nodes: &[Node], root: usize, seed: Tensor) -> Vec<Option<Tensor>> {
    let mut adj: Vec<Option<Tensor>> = vec![None; root + 1];
    adj[root] = Some(seed);
    for id in (0..=root).rev() {
        let Some(g) = adj[id].take() else { continue };
        let node = &nodes[id];
        let val = |i: usize| &nodes[i].value;
        match &node.op {
            Op::Leaf { .. } | Op::Const => {
                adj[id] = Some(g);
                continue;
            }
            Op::Add(a, b) => {
                accumulate(&mut adj[*a], unbroadcast(g.clone(), val(*a)));
                accumulate(&mut adj[*b], unbroadcast(g, val(*b)));
            }
            Op::Sub(a, b) => {
                accumulate(&mut adj[*a], unbroadcast(g.clone(), val(*a)));
                accumulate(&mut adj[*b], unbroadcast(g.map(|v| -v), val(*b)));
            }
            Op::Neg(a) => accumulate(&mut adj[*a], g.map(|v| -v)),
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let ga = Tensor::from_vec(
                    g.shape().to_vec(),
                    (0..g.len()).map(|i| g.data()[i] * pick(bv, i)).collect(),
                );
                let gb = Tensor::from_vec(
                    g.shape().to_vec(),
                    (0..g.len()).map(|i| g.data()[i] * pick(av, i)).collect(),
                );
                accumulate(&mut adj[*a], unbroadcast(ga, av));
                accumulate(&mut adj[*b], unbroadcast(gb, bv));
            }
            Op::Div(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let ga = Tensor::from_vec(
                    g.shape().to_vec(),
                    (0..g.len()).map(|i| g.data()[i] / pick(bv, i)).collect(),
                );
                let gb = Tensor::from_vec(
                    g.shape().to_vec(),
                    (0..g.len())
                        .map(|i| {
                            let d = pick(bv, i);
                            -g.data()[i] * pick(av, i) / (d * d)
                        })
                        .collect(),
                );
                accumulate(&mut adj[*a], unbroadcast(ga, av));
                accumulate(&mut adj[*b], unbroadcast(gb, bv));
            }
            Op::Scale(a, c) => accumulate(&mut adj[*a], g.map(|v| v * c)),
            Op::AddScalar(a) => accumulate(&mut adj[*a], g),
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                // dA = G Bᵀ, dB = Aᵀ G in the 2-D views.
                let bt = transpose_raw(val(*b).data(), k, n);
                let ga = matmul_raw(g.data(), &bt, m, n, k);
                let at = transpose_raw(val(*a).data(), m, k);
                let gb = matmul_raw(&at, g.data(), k, m, n);
                accumulate(&mut adj[*a], Tensor::from_vec(val(*a).shape().to_vec(), ga));
                accumulate(&mut adj[*b], Tensor::from_vec(val(*b).shape().to_vec(), gb));
            }
            Op::Transpose(a) => {
                let (r, c) = (g.shape()[0], g.shape()[1]);
                accumulate(
                    &mut adj[*a],
                    Tensor::from_vec([c, r], transpose_raw(g.data(), r, c)),
                );
            }
            Op::Reshape(a) => {
                let shape = val(*a).shape().to_vec();
                accumulate(&mut adj[*a], Tensor::from_vec(shape, g.into_data()));
            }
            Op::Sum(a) => {
                let s = g.item();
                accumulate(&mut adj[*a], Tensor::full(val(*a).shape().to_vec(), s));
            }
            Op::Mean(a) => {
                let x = val(*a);
                let s = g.item() / x.len() as f64;
                accumulate(&mut adj[*a], Tensor::full(x.shape().to_vec(), s));
            }
            Op::Dot(a, b) => {
                let s = g.item();
                let (av, bv) = (val(*a).clone(), val(*b).clone());
                accumulate(&mut adj[*a], bv.map(|v| v * s));
                accumulate(&mut adj[*b], av.map(|v| v * s));
            }
            Op::Abs(a) => {
                let flip = fault::abs_sign();
                accumulate(
                    &mut adj[*a],
                    g.zip_map(val(*a), |gv, x| gv * flip * sign(x)),
                );
            }
            Op::Relu(a) => {
                accumulate(
                    &mut adj[*a],
                    g.zip_map(val(*a), |gv, x| if x > 0.0 { gv } else { 0.0 }),
                );
            }
            Op::Maximum(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let take_a: Vec<bool> = (0..g.len()).map(|i| pick(av, i) >= pick(bv, i)).collect();
                let ga = Tensor::from_vec(
                    g.shape().to_vec(),
                    (0..g.len())
                        .map(|i| if take_a[i] { g.data()[i] } else { 0.0 })
                        .collect(),
                );
                let gb = Tensor::from_vec(
                    g.shape().to_vec(),
                    (0..g.len())
                        .map(|i| if take_a[i] { 0.0 } else { g.data()[i] })
                        .collect(),
                );
                accumulate(&mut adj[*a], unbroadcast(ga, av));
                accumulate(&mut adj[*b], unbroadcast(gb, bv));
            }
            Op::Max { input, argmax } => {
                let mut out = Tensor::zeros(val(*input).shape().to_vec());
                out.data_mut()[*argmax] = g.item();
                accumulate(&mut adj[*input], out);
            }
            Op::Norm1(a) => {
                let s = g.item() * fault::abs_sign();
                accumulate(&mut adj[*a], val(*a).map(|x| s * sign(x)));
            }
            Op::Norm2(a) => {
                let norm = node.value.item();
                let s = if norm > 0.0 { g.item() / norm } else { 0.0 };
                accumulate(&mut adj[*a], val(*a).map(|x| s * x));
            }
            Op::NormInf { input, argmax } => {
                let x = val(*input);
                let mut out = Tensor::zeros(x.shape().to_vec());
                out.data_mut()[*argmax] = g.item() * sign(x.data()[*argmax]);
                accumulate(&mut adj[*input], out);
            }
            Op::Square(a) => accumulate(&mut adj[*a], g.zip_map(val(*a), |gv, x| 2.0 * x * gv)),
            Op::Sqrt(a) => {
                let r = &node.value;
                accumulate(
                    &mut adj[*a],
                    g.zip_map(r, |gv, s| if s > 0.0 { gv / (2.0 * s) } else { 0.0 }),
                );
            }
            Op::Exp(a) => accumulate(&mut adj[*a], g.zip_map(&node.value, |gv, e| gv * e)),
            Op::Log(a) => accumulate(&mut adj[*a], g.zip_map(val(*a), |gv, x| gv / x)),
            Op::Slice { input, offset } => {
                accumulate(&mut adj[*input], scatter(val(*input).shape(), *offset, &g));
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let shape = val(p).shape().to_vec();
                    let len = val(p).len();
                    let piece = g.data()[offset..offset + len].to_vec();
                    accumulate(&mut adj[p], Tensor::from_vec(shape, piece));
                    offset += len;
                }
            }
        }
    }
    adj
}

impl Var {
    /// Reverse-mode gradients of this rank-0 expression.
    pub fn backward(&self) -> Result<Gradients> {
        let shape = self.shape();
        if !shape.is_empty() {
            return Err(AdError::NonScalarRoot(shape));
        }
        Ok(self.backward_seeded(Tensor::scalar(1.0)))
    }

    /// Vector-Jacobian product with an explicit output adjoint of the same
    /// shape as this node.
    pub(crate) fn backward_seeded(&self, seed: Tensor) -> Gradients {
        let inner = self.tape().inner.borrow();
        let adj = adjoints(&inner.nodes, self.id(), seed);
        let entries = inner
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match &n.op {
                Op::Leaf {
                    name,
                    requires_grad: true,
                } => {
                    let g = adj
                        .get(i)
                        .and_then(Clone::clone)
                        .unwrap_or_else(|| Tensor::zeros(n.value.shape().to_vec()));
                    Some((name.clone(), g))
                }
                _ => None,
            })
            .collect();
        Gradients { entries }
    }

    /// Gradient of element `flat` of this node, flattened and concatenated
    /// over `leaves` in order.
    pub(crate) fn element_gradient(&self, flat: usize, leaves: &[Var]) -> Vec<f64> {
        let inner = self.tape().inner.borrow();
        let value = &inner.nodes[self.id()].value;
        let mut seed = Tensor::zeros(value.shape().to_vec());
        seed.data_mut()[flat] = 1.0;
        let adj = adjoints(&inner.nodes, self.id(), seed);
        let mut out = Vec::new();
        for leaf in leaves {
            match adj.get(leaf.id()).and_then(Option::as_ref) {
                Some(g) => out.extend_from_slice(g.data()),
                None => out.extend(std::iter::repeat_n(0.0, inner.nodes[leaf.id()].value.len())),
            }
        }
        out
    }
}
