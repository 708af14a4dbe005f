//! Word embeddings, the LSTM sequence encoder and the context projections.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{glorot_matrix, glorot_with_bias, ParameterStore};
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD: usize = 0;
pub const UNK: usize = 1;

/// Parameter holding the trainable `[vocab, d_emb]` embedding matrix.
pub const EMBED_PARAM: &str = "embed/words";

/// Token ↔ row mapping. Row 0 is `<pad>`, row 1 is `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    /// Builds a vocabulary from tokens; order is sorted and deduplicated.
    pub fn from_tokens<I, T>(tokens: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut words: Vec<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        words.sort();
        words.dedup();
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(words);
        Self::from_ordered(all).expect("pad and unk lead")
    }

    /// Restores a vocabulary from its exact row order (as saved in checkpoints).
    pub fn from_ordered(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Malformed("word vocabulary must start with <pad>, <unk>".into()));
        }
        let index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(Error::Malformed("duplicate token in word vocabulary".into()));
        }
        Ok(Self { tokens, index })
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Token ids padded or truncated to `max_len`, with the real-token mask.
///
/// Out-of-vocabulary tokens map to `<unk>`; an empty sequence becomes a
/// single `<unk>` marked real.
pub fn token_ids<T: AsRef<str>>(tokens: &[T], vocab: &WordVocab, max_len: usize) -> Result<(Vec<usize>, Vec<bool>)> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    if tokens.is_empty() {
        let mut ids = vec![PAD; max_len];
        let mut mask = vec![false; max_len];
        ids[0] = UNK;
        mask[0] = true;
        return Ok((ids, mask));
    }
    let mut ids: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.id(t.as_ref())).collect();
    let mut mask = vec![true; ids.len()];
    ids.resize(max_len, PAD);
    mask.resize(max_len, false);
    Ok((ids, mask))
}

/// Token → vector table. `<pad>` is always the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S> {
    vocab: WordVocab,
    vectors: Tensor<S>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(vocab: WordVocab, vectors: Tensor<S>) -> Result<Self> {
        if vectors.rank() != 2 || vectors.shape()[0] != vocab.len() {
            return Err(Error::Dimension(format!(
                "embedding matrix {:?} does not match vocabulary of {}",
                vectors.shape(),
                vocab.len()
            )));
        }
        let mut vectors = vectors;
        let d = vectors.shape()[1];
        vectors.data_mut()[PAD * d..(PAD + 1) * d]
            .iter_mut()
            .for_each(|v| *v = S::zero());
        Ok(Self { vocab, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn vocab(&self) -> &WordVocab {
        &self.vocab
    }

    pub fn matrix(&self) -> &Tensor<S> {
        &self.vectors
    }

    pub fn row(&self, id: usize) -> &[S] {
        let d = self.dim();
        &self.vectors.data()[id * d..(id + 1) * d]
    }

    /// Vector for an in-vocabulary token; `None` for unknown tokens.
    pub fn lookup(&self, token: &str) -> Option<&[S]> {
        self.vocab.index.get(token).map(|&i| self.row(i))
    }

    /// Embeds a token sequence as a `[max_len, d_emb]` matrix (one row per
    /// position) plus the real-token mask.
    pub fn embed<T: AsRef<str>>(&self, tokens: &[T], max_len: usize) -> Result<(Tensor<S>, Vec<bool>)> {
        let (ids, mask) = token_ids(tokens, &self.vocab, max_len)?;
        let d = self.dim();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in &ids {
            data.extend_from_slice(self.row(id));
        }
        Ok((Tensor::matrix(ids.len(), d, data)?, mask))
    }
}

/// Reads `token v1 v2 ... vd` lines. The table gains `<pad>` and `<unk>`
/// rows (zero) unless the file defines them.
pub fn read_embedding_file(path: &Path) -> Result<EmbeddingTable<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable<f64>> {
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let Some(token) = parts.next() else { continue };
        let values = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Malformed(format!("embedding line {}: {e}", lineno + 1)))?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::Malformed(format!("embedding line {} has no values", lineno + 1)))
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Dimension(format!(
                    "embedding line {} has {} values, expected {d}",
                    lineno + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        entries.push((token.to_string(), values));
    }
    let d = dim.ok_or_else(|| Error::Empty("embedding file has no vectors".into()))?;
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    let mut data = vec![0.0; 2 * d];
    for (token, values) in entries {
        if token == PAD_TOKEN {
            continue;
        }
        if token == UNK_TOKEN {
            data[d..2 * d].copy_from_slice(&values);
            continue;
        }
        tokens.push(token);
        data.extend(values);
    }
    let vocab = WordVocab::from_ordered(tokens)?;
    let n = vocab.len();
    EmbeddingTable::new(vocab, Tensor::matrix(n, d, data)?)
}

/// Writes a table in the embedding file format (skipping `<pad>`).
pub fn format_embeddings(table: &EmbeddingTable<f64>) -> String {
    let mut out = String::new();
    for (i, token) in table.vocab().tokens().iter().enumerate().skip(1) {
        out.push_str(token);
        for v in table.row(i) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

/// Initial `[vocab, d]` embedding matrix: rows copied from `pretrained`
/// where the token is known there, uniform noise otherwise, `<pad>` zero.
pub fn init_embeddings<S: Scalar, R: Rng>(
    rng: &mut R,
    vocab: &WordVocab,
    dim: usize,
    pretrained: Option<&EmbeddingTable<f64>>,
) -> Result<Tensor<S>> {
    if let Some(p) = pretrained {
        if p.dim() != dim {
            return Err(Error::Dimension(format!(
                "pretrained embeddings have dimension {}, model expects {dim}",
                p.dim()
            )));
        }
    }
    let init: Tensor<S> = glorot_matrix(rng, vocab.len(), dim);
    let mut init = init.into_data();
    // each row is a lookup, so fan-in is 1
    let s = crate::params::glorot_limit(1, dim);
    let scale = S::lit(s / crate::params::glorot_limit(dim, vocab.len()));
    init.iter_mut().for_each(|v| *v *= scale);
    for (i, token) in vocab.tokens().iter().enumerate() {
        let row = &mut init[i * dim..(i + 1) * dim];
        if i == PAD {
            row.iter_mut().for_each(|v| *v = S::zero());
        } else if let Some(src) = pretrained.and_then(|p| p.lookup(token)) {
            for (r, &v) in row.iter_mut().zip(src) {
                *r = S::lit(v);
            }
        }
    }
    Tensor::matrix(vocab.len(), dim, init)
}

/// Gathers embedding rows for `ids` from the tape's embedding node.
pub fn embed_on_tape<S: Scalar>(tape: &mut Tape<S>, table: NodeId, ids: &[usize]) -> Result<Vec<NodeId>> {
    ids.iter().map(|&id| tape.gather_row(table, id)).collect()
}

pub const GATES: [&str; 4] = ["i", "f", "o", "g"];

pub fn lstm_param(which: &str, gate: &str) -> String {
    format!("lstm/{which}/{gate}")
}

/// Creates the four gate tensors `lstm/<which>/{i,f,o,g}`, each `[h, d + h + 1]`
/// laid out as `[W_x | W_h | b]`.
pub fn init_lstm<S: Scalar, R: Rng>(
    store: &mut ParameterStore<S>,
    rng: &mut R,
    which: &str,
    input: usize,
    hidden: usize,
) {
    for gate in GATES {
        store.insert(
            lstm_param(which, gate),
            glorot_with_bias(rng, hidden, input + hidden, 1),
        );
    }
}

/// Hidden size of the encoder `which`, read off its gate shapes.
pub fn lstm_dims<S: Scalar>(params: &ParameterStore<S>, which: &str) -> Result<(usize, usize)> {
    let w = params.get(&lstm_param(which, "i"))?;
    let hidden = w.shape()[0];
    let input = w
        .shape()
        .get(1)
        .and_then(|c| c.checked_sub(hidden + 1))
        .ok_or_else(|| Error::Dimension(format!("malformed LSTM gate for {which}")))?;
    Ok((input, hidden))
}

/// Runs the LSTM over the unmasked positions and returns the final hidden state.
///
/// The initial hidden state is `h0` (zeros if absent); the initial cell is zero.
/// Masked positions are skipped, so trailing padding never changes the result.
pub fn lstm_encode<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    which: &str,
    inputs: &[NodeId],
    mask: &[bool],
    h0: Option<NodeId>,
) -> Result<NodeId> {
    if inputs.len() != mask.len() {
        return Err(Error::Dimension(format!(
            "{} inputs but mask of length {}",
            inputs.len(),
            mask.len()
        )));
    }
    let (input_dim, hidden) = lstm_dims(params, which)?;
    let mut h = match h0 {
        Some(h0) => {
            if tape.value(h0).numel() != hidden {
                return Err(Error::Dimension(format!(
                    "initial hidden state has {} entries, {which} LSTM has {hidden}",
                    tape.value(h0).numel()
                )));
            }
            h0
        }
        None => tape.constant(Tensor::zeros(&[hidden])),
    };
    let mut c = tape.constant(Tensor::zeros(&[hidden]));
    let one = tape.constant(Tensor::scalar(S::one()));
    let gates: Vec<NodeId> = GATES
        .iter()
        .map(|g| tape.param(&lstm_param(which, g), params))
        .collect::<Result<_>>()?;
    for (&x, _) in inputs.iter().zip(mask).filter(|(_, &m)| m) {
        if tape.value(x).numel() != input_dim {
            return Err(Error::Dimension(format!(
                "{which} LSTM expects inputs of {input_dim}, got {}",
                tape.value(x).numel()
            )));
        }
        let xh = tape.concat(&[x, h, one])?;
        let zi = tape.matvec(gates[0], xh, None)?;
        let zf = tape.matvec(gates[1], xh, None)?;
        let zo = tape.matvec(gates[2], xh, None)?;
        let zg = tape.matvec(gates[3], xh, None)?;
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let o = tape.sigmoid(zo);
        let g = tape.tanh(zg);
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        h = tape.mul(o, tc)?;
    }
    Ok(h)
}

/// Which encoder a context vector summarises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextRole {
    Question,
    Caption,
}

impl ContextRole {
    pub fn weight(self) -> &'static str {
        match self {
            ContextRole::Question => "fusion/q_proj_W",
            ContextRole::Caption => "fusion/c_proj_W",
        }
    }

    pub fn bias(self) -> &'static str {
        match self {
            ContextRole::Question => "fusion/q_proj_b",
            ContextRole::Caption => "fusion/c_proj_b",
        }
    }
}

pub fn init_projection<S: Scalar, R: Rng>(
    store: &mut ParameterStore<S>,
    rng: &mut R,
    weight: &str,
    bias: &str,
    input: usize,
    output: usize,
) {
    store.insert(weight, glorot_matrix(rng, output, input));
    store.insert(bias, Tensor::zeros(&[output]));
}

/// `m = W_proj · hidden + b_proj`, a vector in answer space.
pub fn project_context<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    hidden: NodeId,
    role: ContextRole,
) -> Result<NodeId> {
    let w = tape.param(role.weight(), params)?;
    let b = tape.param(role.bias(), params)?;
    tape.matvec(w, hidden, Some(b))
}
