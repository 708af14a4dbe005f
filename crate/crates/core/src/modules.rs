//! The four neural modules and layout execution.
//!
//! Attention maps live on the tape as flat `[H·W]` vectors in row-major
//! order; [`ImageContext::attention_map`] reshapes one back to `[H, W]`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layout::{type_check, Layout, ModuleKind};
use crate::params::{glorot_matrix, glorot_with_bias, ParameterStore};
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

pub const DESCRIBE_EPS: f64 = 1e-8;
pub const UNK_WORD: &str = "<unk>";
pub const DEFAULT_MEASURE_HIDDEN: usize = 256;

/// A `D×H×W` feature grid (channels first).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<S> {
    features: Tensor<S>,
}

impl<S: Scalar> ImageGrid<S> {
    pub fn new(features: Tensor<S>) -> Result<Self> {
        if features.rank() != 3 {
            return Err(Error::Dimension(format!(
                "image grid must be D×H×W, got shape {:?}",
                features.shape()
            )));
        }
        Ok(Self { features })
    }

    pub fn from_vec(d: usize, h: usize, w: usize, data: Vec<S>) -> Result<Self> {
        Self::new(Tensor::new(vec![d, h, w], data)?)
    }

    pub fn features(&self) -> &Tensor<S> {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut Tensor<S> {
        &mut self.features
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.features.shape();
        (s[0], s[1], s[2])
    }

    pub fn channels(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn positions(&self) -> usize {
        self.features.shape()[1] * self.features.shape()[2]
    }

    /// Feature vector at grid cell `(y, x)`.
    pub fn at(&self, y: usize, x: usize) -> Vec<S> {
        let (d, h, w) = self.dims();
        (0..d).map(|c| self.features.data()[c * h * w + y * w + x]).collect()
    }
}

/// Tape constants derived once per image: `[D, H·W]` features and the
/// `[H·W, D+1]` per-position rows with a trailing 1 for the Find bias.
#[derive(Debug, Clone, Copy)]
pub struct ImageContext {
    pub features: NodeId,
    pub positions: NodeId,
    pub dims: (usize, usize, usize),
}

impl ImageContext {
    pub fn new<S: Scalar>(tape: &mut Tape<S>, image: &ImageGrid<S>) -> Self {
        let (d, h, w) = image.dims();
        let hw = h * w;
        let flat = image.features().reshaped(vec![d, hw]).expect("same size");
        let src = image.features().data();
        let mut rows = Vec::with_capacity(hw * (d + 1));
        for p in 0..hw {
            for c in 0..d {
                rows.push(src[c * hw + p]);
            }
            rows.push(S::one());
        }
        let positions = Tensor::matrix(hw, d + 1, rows).expect("sized above");
        Self {
            features: tape.constant(flat),
            positions: tape.constant(positions),
            dims: (d, h, w),
        }
    }

    pub fn attention_map<S: Scalar>(&self, tape: &Tape<S>, att: NodeId) -> Result<Tensor<S>> {
        tape.value(att).reshaped(vec![self.dims.1, self.dims.2])
    }
}

pub fn find_param(word: &str) -> String {
    format!("find/{word}")
}

/// Parameter used for `word`: its own if trained, else the shared unknown-word one.
pub fn find_param_for<S: Scalar>(params: &ParameterStore<S>, word: &str) -> String {
    let own = find_param(word);
    if params.contains(&own) {
        own
    } else {
        find_param(UNK_WORD)
    }
}

/// Creates `find/<word>` (a `[D+1]` vector, bias last) unless it already exists.
/// Weights ~ U(0, s), bias 0.
pub fn ensure_find<S: Scalar, R: Rng>(store: &mut ParameterStore<S>, rng: &mut R, word: &str, channels: usize) {
    let name = find_param(word);
    if !store.contains(&name) {
        let w = glorot_with_bias::<S, R>(rng, 1, channels, 1).map(|v| v.abs());
        store.insert(name, w.reshaped(vec![channels + 1]).expect("same size"));
    }
}

pub fn init_describe<S: Scalar, R: Rng>(store: &mut ParameterStore<S>, rng: &mut R, channels: usize, answers: usize) {
    store.insert("describe/W", glorot_matrix(rng, answers, channels));
    store.insert("describe/b", Tensor::zeros(&[answers]));
}

pub fn init_measure<S: Scalar, R: Rng>(
    store: &mut ParameterStore<S>,
    rng: &mut R,
    positions: usize,
    hidden: usize,
    answers: usize,
) {
    store.insert("measure/W1", glorot_matrix(rng, hidden, positions));
    store.insert("measure/b1", Tensor::zeros(&[hidden]));
    store.insert("measure/W2", glorot_matrix(rng, answers, hidden));
    store.insert("measure/b2", Tensor::zeros(&[answers]));
}

/// `att[p] = relu(w · image[:, p] + b)`, a 1×1 convolution.
pub fn find_forward<S: Scalar>(
    tape: &mut Tape<S>,
    ctx: &ImageContext,
    word: &str,
    params: &ParameterStore<S>,
) -> Result<NodeId> {
    let name = find_param_for(params, word);
    let w = tape.param(&name, params)?;
    let expected = ctx.dims.0 + 1;
    if tape.value(w).shape() != [expected] {
        return Err(Error::Dimension(format!(
            "{name} has shape {:?}, image has {} channels",
            tape.value(w).shape(),
            ctx.dims.0
        )));
    }
    let scores = tape.matvec(ctx.positions, w, None)?;
    Ok(tape.relu(scores))
}

pub fn and_forward<S: Scalar>(tape: &mut Tape<S>, a: NodeId, b: NodeId) -> Result<NodeId> {
    tape.mul(a, b)
}

/// Attention-weighted mean feature, then `W_desc · v + b_desc`.
pub fn describe_forward<S: Scalar>(
    tape: &mut Tape<S>,
    ctx: &ImageContext,
    att: NodeId,
    params: &ParameterStore<S>,
) -> Result<NodeId> {
    let weighted = tape.matvec(ctx.features, att, None)?;
    let mass = tape.sum(att);
    let mass = tape.add_const(mass, S::lit(DESCRIBE_EPS));
    let v = tape.div_scalar(weighted, mass)?;
    let w = tape.param("describe/W", params)?;
    let b = tape.param("describe/b", params)?;
    tape.matvec(w, v, Some(b))
}

/// `W2 · relu(W1 · att + b1) + b2` on the flattened map.
pub fn measure_forward<S: Scalar>(tape: &mut Tape<S>, att: NodeId, params: &ParameterStore<S>) -> Result<NodeId> {
    let w1 = tape.param("measure/W1", params)?;
    let trained = tape.value(w1).shape()[1];
    let got = tape.value(att).numel();
    if trained != got {
        return Err(Error::Dimension(format!(
            "Measure was trained on {trained} grid positions, attention has {got}"
        )));
    }
    let b1 = tape.param("measure/b1", params)?;
    let w2 = tape.param("measure/W2", params)?;
    let b2 = tape.param("measure/b2", params)?;
    let hidden = tape.matvec(w1, att, Some(b1))?;
    let hidden = tape.relu(hidden);
    tape.matvec(w2, hidden, Some(b2))
}

/// Type-checks `layout`, then executes it bottom-up and returns the root's
/// pre-softmax label scores.
pub fn assemble_and_run<S: Scalar>(
    tape: &mut Tape<S>,
    layout: &Layout,
    ctx: &ImageContext,
    params: &ParameterStore<S>,
) -> Result<NodeId> {
    type_check(layout)?;
    run_node(tape, layout, ctx, params, "root")
}

fn run_node<S: Scalar>(
    tape: &mut Tape<S>,
    node: &Layout,
    ctx: &ImageContext,
    params: &ParameterStore<S>,
    path: &str,
) -> Result<NodeId> {
    let mut inputs = Vec::with_capacity(node.children.len());
    for (i, child) in node.children.iter().enumerate() {
        inputs.push(run_node(tape, child, ctx, params, &format!("{path}.{i}"))?);
    }
    let out = match node.kind {
        ModuleKind::Find => find_forward(tape, ctx, node.word.as_deref().unwrap_or(UNK_WORD), params),
        ModuleKind::And => and_forward(tape, inputs[0], inputs[1]),
        ModuleKind::Describe => describe_forward(tape, ctx, inputs[0], params),
        ModuleKind::Measure => measure_forward(tape, inputs[0], params),
    };
    out.map_err(|e| match e {
        e @ Error::Module { .. } => e,
        e => Error::Module {
            path: path.to_string(),
            source: Box::new(e),
        },
    })
}
