//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] is rebuilt for every forward pass: layouts differ between
//! instances, so the graph is dynamic. Nodes are appended in execution
//! order, which makes the tape topologically sorted by construction.
//! Parameters are registered by name and deduplicated, so every use of a
//! tied parameter within one pass feeds the same node and its gradient is
//! the sum over uses.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::scalar::Scalar;
use crate::tensor::{self, Activation, BinaryOp, Tensor};

/// Clamp applied inside the negative log-likelihood.
pub const NLL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<S> {
    Constant,
    Param(String),
    Binary(BinaryOp),
    Act(Activation),
    MatVec { bias: bool },
    MatVecT,
    MaskedSoftmax(Vec<bool>),
    Sum,
    AddConst(S),
    Scale(S),
    DivScalar,
    Concat,
    StackRows,
    GatherRow(usize),
    Reshape(Vec<usize>),
    Nll(usize),
}

impl<S> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Binary(BinaryOp::Add) => "add",
            Op::Binary(BinaryOp::Mul) => "mul",
            Op::Act(Activation::Relu) => "relu",
            Op::Act(Activation::Sigmoid) => "sigmoid",
            Op::Act(Activation::Tanh) => "tanh",
            Op::MatVec { .. } => "matvec",
            Op::MatVecT => "matvec_t",
            Op::MaskedSoftmax(_) => "masked_softmax",
            Op::Sum => "sum",
            Op::AddConst(_) => "add_const",
            Op::Scale(_) => "scale",
            Op::DivScalar => "div_scalar",
            Op::Concat => "concat",
            Op::StackRows => "stack_rows",
            Op::GatherRow(_) => "gather_row",
            Op::Reshape(_) => "reshape",
            Op::Nll(_) => "nll",
        }
    }
}

#[derive(Debug, Clone)]
struct Node<S> {
    op: Op<S>,
    inputs: Vec<NodeId>,
    value: Tensor<S>,
    needs_grad: bool,
}

/// One recorded primitive application, as exposed for inspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub op: &'static str,
    /// Parameter name for parameter leaves.
    pub param: Option<String>,
    pub inputs: Vec<NodeId>,
    pub output: NodeId,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    params: BTreeMap<String, NodeId>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        self.nodes.iter().enumerate().map(|(i, n)| Record {
            op: n.op.name(),
            param: match &n.op {
                Op::Param(name) => Some(name.clone()),
                _ => None,
            },
            inputs: n.inputs.clone(),
            output: NodeId(i),
        })
    }

    /// Node holding the named parameter, if it was registered on this tape.
    pub fn param_node(&self, name: &str) -> Option<NodeId> {
        self.params.get(name).copied()
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    fn push(&mut self, op: Op<S>, inputs: Vec<NodeId>, value: Tensor<S>) -> NodeId {
        let needs_grad = match op {
            Op::Param(_) => true,
            Op::Constant => false,
            _ => inputs.iter().any(|i| self.nodes[i.0].needs_grad),
        };
        self.nodes.push(Node {
            op,
            inputs,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.push(Op::Constant, Vec::new(), value)
    }

    /// Registers a parameter; repeated calls with the same name return the same node.
    pub fn param(&mut self, name: &str, store: &ParameterStore<S>) -> Result<NodeId> {
        if let Some(&id) = self.params.get(name) {
            return Ok(id);
        }
        let value = store.get(name)?.clone();
        let id = self.push(Op::Param(name.to_string()), Vec::new(), value);
        self.params.insert(name.to_string(), id);
        Ok(id)
    }

    fn apply(&mut self, op: Op<S>, inputs: Vec<NodeId>) -> Result<NodeId> {
        let value = {
            let vals: Vec<&Tensor<S>> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
            forward(&op, &vals)?
        };
        Ok(self.push(op, inputs, value))
    }

    pub fn binary(&mut self, op: BinaryOp, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Binary(op), vec![a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn activation(&mut self, kind: Activation, x: NodeId) -> NodeId {
        self.apply(Op::Act(kind), vec![x])
            .expect("activations accept any shape")
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.activation(Activation::Relu, x)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.activation(Activation::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.activation(Activation::Tanh, x)
    }

    /// `w·x (+ b)`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let mut inputs = vec![w, x];
        inputs.extend(b);
        self.apply(Op::MatVec { bias: b.is_some() }, inputs)
    }

    /// `mᵀ·x`.
    pub fn matvec_t(&mut self, m: NodeId, x: NodeId) -> Result<NodeId> {
        self.apply(Op::MatVecT, vec![m, x])
    }

    pub fn masked_softmax(&mut self, scores: NodeId, mask: &[bool]) -> Result<NodeId> {
        self.apply(Op::MaskedSoftmax(mask.to_vec()), vec![scores])
    }

    pub fn softmax(&mut self, scores: NodeId) -> Result<NodeId> {
        let n = self.value(scores).numel();
        self.masked_softmax(scores, &vec![true; n])
    }

    /// Sum of all entries, as a one-element tensor.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        self.apply(Op::Sum, vec![x]).expect("sum accepts any shape")
    }

    pub fn add_const(&mut self, x: NodeId, c: S) -> NodeId {
        self.apply(Op::AddConst(c), vec![x]).expect("any shape")
    }

    pub fn scale(&mut self, x: NodeId, c: S) -> NodeId {
        self.apply(Op::Scale(c), vec![x]).expect("any shape")
    }

    /// `x / s` for a one-element `s`.
    pub fn div_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        self.apply(Op::DivScalar, vec![x, s])
    }

    /// Flattened concatenation into a vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.apply(Op::Concat, parts.to_vec())
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        self.apply(Op::StackRows, rows.to_vec())
    }

    pub fn gather_row(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        self.apply(Op::GatherRow(row), vec![table])
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.apply(Op::Reshape(shape.to_vec()), vec![x])
    }

    /// `-ln(max(p[target], 1e-12))`.
    pub fn nll(&mut self, p: NodeId, target: usize) -> Result<NodeId> {
        self.apply(Op::Nll(target), vec![p])
    }

    /// Recomputes every node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor<S>>> {
        let mut values: Vec<Tensor<S>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Constant | Op::Param(_) => node.value.clone(),
                _ => {
                    let ins: Vec<&Tensor<S>> = node.inputs.iter().map(|i| &values[i.0]).collect();
                    forward(&node.op, &ins)?
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    pub fn backward(&self, loss: NodeId) -> Result<Gradients<S>> {
        self.backward_scaled(loss, S::one())
    }

    /// Back-propagates `seed · d(loss)`.
    pub fn backward_scaled(&self, loss: NodeId, seed: S) -> Result<Gradients<S>> {
        let lv = &self.nodes[loss.0].value;
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![seed]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || node.inputs.is_empty() {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let ins: Vec<&Tensor<S>> = node.inputs.iter().map(|i| &self.nodes[i.0].value).collect();
            let wants: Vec<bool> = node.inputs.iter().map(|i| self.nodes[i.0].needs_grad).collect();
            let input_grads = backward_op(&node.op, &ins, &node.value, &g, &wants);
            for ((input, wanted), ig) in node.inputs.iter().zip(&wants).zip(input_grads) {
                if !wanted {
                    continue;
                }
                let Some(ig) = ig else { continue };
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, &v)| *a += v),
                    slot @ None => *slot = Some(ig),
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
            shapes: self.nodes.iter().map(|n| n.value.numel()).collect(),
        })
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    grads: Vec<Option<Vec<S>>>,
    params: BTreeMap<String, NodeId>,
    shapes: Vec<usize>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient with respect to a node; `None` if the loss does not depend on it.
    pub fn wrt(&self, id: NodeId) -> Option<&[S]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradient for a named parameter, zeros when it was registered but unreachable.
    pub fn param(&self, name: &str) -> Option<Vec<S>> {
        let id = *self.params.get(name)?;
        Some(
            self.wrt(id)
                .map(<[S]>::to_vec)
                .unwrap_or_else(|| vec![S::zero(); self.shapes[id.0]]),
        )
    }

    /// Adds `scale · grad` into each parameter's gradient slot; parameters
    /// absent from the tape get a zero slot.
    pub fn accumulate_into(&self, store: &mut ParameterStore<S>, scale: S) {
        for (name, t) in store.iter_mut() {
            match self.params.get(name).and_then(|&id| self.wrt(id)) {
                Some(g) => t.accumulate_grad(g, scale),
                None => {
                    if t.grad().is_none() {
                        t.zero_grad();
                    }
                }
            }
        }
    }

    /// Overwrites every gradient slot in `store` with this pass's gradients.
    pub fn write_into(&self, store: &mut ParameterStore<S>) {
        store.zero_grad();
        self.accumulate_into(store, S::one());
    }
}

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

fn forward<S: Scalar>(op: &Op<S>, ins: &[&Tensor<S>]) -> Result<Tensor<S>> {
    match op {
        Op::Constant | Op::Param(_) => unreachable!("leaves are not recomputed"),
        Op::Binary(b) => tensor::elementwise_binary(*b, ins[0], ins[1]),
        Op::Act(a) => Ok(tensor::activation(*a, ins[0])),
        Op::MatVec { bias } => tensor::matvec(ins[0], ins[1], if *bias { Some(ins[2]) } else { None }),
        Op::MatVecT => tensor::matvec_transposed(ins[0], ins[1]),
        Op::MaskedSoftmax(mask) => tensor::masked_softmax(ins[0], mask),
        Op::Sum => Ok(Tensor::scalar(ins[0].data().iter().copied().sum())),
        Op::AddConst(c) => Ok(ins[0].map(|v| v + *c)),
        Op::Scale(c) => Ok(ins[0].map(|v| v * *c)),
        Op::DivScalar => {
            if !ins[1].is_scalar() {
                return Err(shape_err("div_scalar", ins[0].shape(), ins[1].shape()));
            }
            let s = ins[1].item();
            Ok(ins[0].map(|v| v / s))
        }
        Op::Concat => {
            if ins.is_empty() {
                return Err(Error::InvalidArgument("concat of nothing".into()));
            }
            let data: Vec<S> = ins.iter().flat_map(|t| t.data().iter().copied()).collect();
            Ok(Tensor::vector(data))
        }
        Op::StackRows => {
            let Some(first) = ins.first() else {
                return Err(Error::InvalidArgument("stack of nothing".into()));
            };
            let d = first.numel();
            if let Some(bad) = ins.iter().find(|t| t.numel() != d) {
                return Err(shape_err("stack_rows", first.shape(), bad.shape()));
            }
            let data: Vec<S> = ins.iter().flat_map(|t| t.data().iter().copied()).collect();
            Tensor::matrix(ins.len(), d, data)
        }
        Op::GatherRow(row) => {
            let t = ins[0];
            if t.rank() != 2 || *row >= t.shape()[0] {
                return Err(shape_err("gather_row", t.shape(), &[*row]));
            }
            let d = t.shape()[1];
            Ok(Tensor::vector(t.data()[row * d..(row + 1) * d].to_vec()))
        }
        Op::Reshape(shape) => {
            if shape.iter().product::<usize>() != ins[0].numel() {
                return Err(shape_err("reshape", ins[0].shape(), shape));
            }
            ins[0].reshaped(shape.clone())
        }
        Op::Nll(target) => {
            let p = ins[0];
            if *target >= p.numel() {
                return Err(shape_err("nll", p.shape(), &[*target]));
            }
            let pt = p.data()[*target].max(S::lit(NLL_FLOOR));
            Ok(Tensor::scalar(-pt.ln()))
        }
    }
}

/// Per-input gradients given the output gradient `g`; `None` where not wanted.
fn backward_op<S: Scalar>(
    op: &Op<S>,
    ins: &[&Tensor<S>],
    out: &Tensor<S>,
    g: &[S],
    wants: &[bool],
) -> Vec<Option<Vec<S>>> {
    let want = |i: usize| wants.get(i).copied().unwrap_or(false);
    match op {
        Op::Constant | Op::Param(_) => Vec::new(),
        Op::Binary(BinaryOp::Add) => vec![Some(g.to_vec()), Some(g.to_vec())],
        Op::Binary(BinaryOp::Mul) => {
            let (a, b) = (ins[0].data(), ins[1].data());
            vec![
                want(0).then(|| g.iter().zip(b).map(|(&gi, &bi)| gi * bi).collect()),
                want(1).then(|| g.iter().zip(a).map(|(&gi, &ai)| gi * ai).collect()),
            ]
        }
        Op::Act(kind) => {
            let gx = g
                .iter()
                .zip(ins[0].data())
                .zip(out.data())
                .map(|((&gi, &x), &y)| gi * kind.derivative(x, y))
                .collect();
            vec![Some(gx)]
        }
        Op::MatVec { bias } => {
            let (w, x) = (ins[0], ins[1]);
            let (m, n) = (w.shape()[0], w.shape()[1]);
            let gw = want(0).then(|| {
                let mut gw = Vec::with_capacity(m * n);
                for &gi in g.iter().take(m) {
                    gw.extend(x.data().iter().map(|&xj| gi * xj));
                }
                gw
            });
            let gx = want(1).then(|| {
                let mut gx = vec![S::zero(); n];
                for (i, &gi) in g.iter().enumerate().take(m) {
                    let row = &w.data()[i * n..(i + 1) * n];
                    for (o, &wij) in gx.iter_mut().zip(row) {
                        *o += wij * gi;
                    }
                }
                gx
            });
            let mut res = vec![gw, gx];
            if *bias {
                res.push(want(2).then(|| g.to_vec()));
            }
            res
        }
        Op::MatVecT => {
            let (mat, x) = (ins[0], ins[1]);
            let (rows, cols) = (mat.shape()[0], mat.shape()[1]);
            let gm = want(0).then(|| {
                let mut gm = Vec::with_capacity(rows * cols);
                for &xi in x.data() {
                    gm.extend(g.iter().map(|&gj| xi * gj));
                }
                gm
            });
            let gx = want(1).then(|| {
                (0..rows)
                    .map(|i| {
                        let row = &mat.data()[i * cols..(i + 1) * cols];
                        row.iter().zip(g).map(|(&mij, &gj)| mij * gj).sum()
                    })
                    .collect()
            });
            vec![gm, gx]
        }
        Op::MaskedSoftmax(_) => {
            let y = out.data();
            let dot: S = y.iter().zip(g).map(|(&yi, &gi)| yi * gi).sum();
            vec![Some(y.iter().zip(g).map(|(&yi, &gi)| yi * (gi - dot)).collect())]
        }
        Op::Sum => vec![Some(vec![g[0]; ins[0].numel()])],
        Op::AddConst(_) | Op::Reshape(_) => vec![Some(g.to_vec())],
        Op::Scale(c) => vec![Some(g.iter().map(|&gi| gi * *c).collect())],
        Op::DivScalar => {
            let s = ins[1].item();
            let gx = want(0).then(|| g.iter().map(|&gi| gi / s).collect());
            let gs = want(1).then(|| {
                let num: S = g.iter().zip(ins[0].data()).map(|(&gi, &xi)| gi * xi).sum();
                vec![-num / (s * s)]
            });
            vec![gx, gs]
        }
        Op::Concat | Op::StackRows => {
            let mut offset = 0;
            ins.iter()
                .enumerate()
                .map(|(i, t)| {
                    let n = t.numel();
                    let part = want(i).then(|| g[offset..offset + n].to_vec());
                    offset += n;
                    part
                })
                .collect()
        }
        Op::GatherRow(row) => {
            let d = ins[0].shape()[1];
            let mut gt = vec![S::zero(); ins[0].numel()];
            gt[row * d..(row + 1) * d].copy_from_slice(g);
            vec![Some(gt)]
        }
        Op::Nll(target) => {
            let p = ins[0].data();
            let mut gp = vec![S::zero(); p.len()];
            if p[*target] > S::lit(NLL_FLOOR) {
                gp[*target] = -g[0] / p[*target];
            }
            vec![Some(gp)]
        }
    }
}
