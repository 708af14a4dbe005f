//! Answer heads: combine NMN scores with question, caption and knowledge context.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{glorot_matrix, ParameterStore};
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

pub const HEAD_W: &str = "fusion/head_W";
pub const HEAD_B: &str = "fusion/head_b";
pub const CHAT_PROJ_W: &str = "fusion/chat_proj_W";
pub const CHAT_PROJ_B: &str = "fusion/chat_proj_b";
pub const ATTN_WQ: &str = "fusion/attn_WQ";
pub const ATTN_WC: &str = "fusion/attn_WC";
pub const ATTN_WH: &str = "fusion/attn_Wh";
pub const SEED_PROJ: &str = "kb/seed_proj";
pub const SEED_BIAS: &str = "kb/seed_bias";

pub fn init_head<S: Scalar, R: Rng>(store: &mut ParameterStore<S>, rng: &mut R, answers: usize) {
    store.insert(HEAD_W, glorot_matrix(rng, answers, answers));
    store.insert(HEAD_B, Tensor::zeros(&[answers]));
}

/// `W_Q: [k, |answers|]`, `W_C: [k, d_emb]`, `W_h: [1, k]`, plus the
/// `[|answers|, d_emb]` lift for the attended caption vector.
pub fn init_attention<S: Scalar, R: Rng>(
    store: &mut ParameterStore<S>,
    rng: &mut R,
    k: usize,
    answers: usize,
    emb: usize,
) {
    store.insert(ATTN_WQ, glorot_matrix(rng, k, answers));
    store.insert(ATTN_WC, glorot_matrix(rng, k, emb));
    store.insert(ATTN_WH, glorot_matrix(rng, 1, k));
    store.insert(CHAT_PROJ_W, glorot_matrix(rng, answers, emb));
    store.insert(CHAT_PROJ_B, Tensor::zeros(&[answers]));
}

pub fn init_kb_seed<S: Scalar, R: Rng>(store: &mut ParameterStore<S>, rng: &mut R, kb_dim: usize, hidden: usize) {
    store.insert(SEED_PROJ, glorot_matrix(rng, hidden, kb_dim));
    store.insert(SEED_BIAS, Tensor::zeros(&[hidden]));
}

fn check_same_len<S: Scalar>(tape: &Tape<S>, what: &str, a: NodeId, b: NodeId) -> Result<()> {
    let (la, lb) = (tape.value(a).numel(), tape.value(b).numel());
    if la != lb {
        return Err(Error::Dimension(format!("{what}: {la} vs {lb} entries")));
    }
    Ok(())
}

/// `softmax(W · relu(pred_nmn + m_q + extra) + b)`, summed left to right.
pub fn fused_head<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    pred_nmn: NodeId,
    m_q: NodeId,
    extra: NodeId,
) -> Result<NodeId> {
    check_same_len(tape, "question context vs NMN scores", pred_nmn, m_q)?;
    check_same_len(tape, "caption context vs NMN scores", pred_nmn, extra)?;
    let sum = tape.add(pred_nmn, m_q)?;
    let sum = tape.add(sum, extra)?;
    let hidden = tape.relu(sum);
    let w = tape.param(HEAD_W, params)?;
    let b = tape.param(HEAD_B, params)?;
    let logits = tape.matvec(w, hidden, Some(b))?;
    tape.softmax(logits)
}

/// Caption-information head.
pub fn caption_info_head<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    pred_nmn: NodeId,
    m_q: NodeId,
    m_c: NodeId,
) -> Result<NodeId> {
    fused_head(tape, params, pred_nmn, m_q, m_c)
}

/// The baseline head: the caption-information head with a zero caption term.
pub fn nmn_head<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    pred_nmn: NodeId,
    m_q: NodeId,
) -> Result<NodeId> {
    let n = tape.value(pred_nmn).numel();
    let zero = tape.constant(Tensor::zeros(&[n]));
    caption_info_head(tape, params, pred_nmn, m_q, zero)
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionResult {
    /// Weights over caption positions; masked positions are exactly 0.
    pub weights: NodeId,
    /// Attended caption embedding.
    pub c_hat: NodeId,
    /// `[N, k]`: row `i` is `h_i`.
    pub interactions: NodeId,
}

/// `h_i = σ(W_Q m_Q) ⊙ σ(W_C c_i)`, `a = softmax_masked(W_h h_i)`, `ĉ = Σ a_i c_i`.
///
/// `caption` holds one embedding node per position.
pub fn caption_attention<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    m_q: NodeId,
    caption: &[NodeId],
    mask: &[bool],
) -> Result<AttentionResult> {
    if caption.len() != mask.len() {
        return Err(Error::Dimension(format!(
            "{} caption positions but mask of length {}",
            caption.len(),
            mask.len()
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }
    let wq = tape.param(ATTN_WQ, params)?;
    let wc = tape.param(ATTN_WC, params)?;
    let wh = tape.param(ATTN_WH, params)?;
    let q = tape.matvec(wq, m_q, None)?;
    let q = tape.sigmoid(q);
    let mut hs = Vec::with_capacity(caption.len());
    let mut scores = Vec::with_capacity(caption.len());
    for &c in caption {
        let z = tape.matvec(wc, c, None)?;
        let z = tape.sigmoid(z);
        let h = tape.mul(q, z)?;
        scores.push(tape.matvec(wh, h, None)?);
        hs.push(h);
    }
    let interactions = tape.stack_rows(&hs)?;
    let scores = tape.concat(&scores)?;
    let weights = tape.masked_softmax(scores, mask)?;
    let embeds = tape.stack_rows(caption)?;
    let c_hat = tape.matvec_t(embeds, weights)?;
    Ok(AttentionResult {
        weights,
        c_hat,
        interactions,
    })
}

/// Lifts `ĉ` into answer space.
pub fn project_c_hat<S: Scalar>(tape: &mut Tape<S>, params: &ParameterStore<S>, c_hat: NodeId) -> Result<NodeId> {
    let w = tape.param(CHAT_PROJ_W, params)?;
    let b = tape.param(CHAT_PROJ_B, params)?;
    tape.matvec(w, c_hat, Some(b))
}

/// Caption-attention head.
pub fn caption_attn_head<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    pred_nmn: NodeId,
    m_q: NodeId,
    attn: &AttentionResult,
) -> Result<NodeId> {
    let lifted = project_c_hat(tape, params, attn.c_hat)?;
    fused_head(tape, params, pred_nmn, m_q, lifted)
}

/// Caption-only ablation: the attention head with a zero NMN term.
pub fn caption_only_head<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParameterStore<S>,
    m_q: NodeId,
    attn: &AttentionResult,
) -> Result<NodeId> {
    let n = tape.value(m_q).numel();
    let zero = tape.constant(Tensor::zeros(&[n]));
    caption_attn_head(tape, params, zero, m_q, attn)
}

/// `h0 = tanh(W_seed · kb + b_seed)`.
pub fn kb_seed<S: Scalar>(tape: &mut Tape<S>, params: &ParameterStore<S>, kb: NodeId) -> Result<NodeId> {
    let w = tape.param(SEED_PROJ, params)?;
    let b = tape.param(SEED_BIAS, params)?;
    let z = tape.matvec(w, kb, Some(b))?;
    Ok(tape.tanh(z))
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax<S: Scalar>(dist: &[S]) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for (i, &p) in dist.iter().enumerate() {
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i)
}

pub fn predict_answer<'a, S: Scalar, T: AsRef<str>>(dist: &[S], vocab: &'a [T]) -> Result<&'a str> {
    if vocab.is_empty() || dist.len() != vocab.len() {
        return Err(Error::Dimension(format!(
            "distribution over {} entries, vocabulary of {}",
            dist.len(),
            vocab.len()
        )));
    }
    Ok(vocab[argmax(dist).expect("non-empty")].as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_head(n: usize) -> ParameterStore<f64> {
        let mut p = ParameterStore::new();
        let mut w = vec![0.0; n * n];
        (0..n).for_each(|i| w[i * n + i] = 1.0);
        p.insert(HEAD_W, Tensor::matrix(n, n, w).unwrap());
        p.insert(HEAD_B, Tensor::zeros(&[n]));
        p
    }

    fn sum(v: &[f64]) -> f64 {
        v.iter().sum()
    }

    #[test]
    fn info_head_hand_example() {
        let params = identity_head(3);
        let mut tape = Tape::new();
        let nmn = tape.constant(Tensor::vector(vec![1.0, -2.0, 0.5]));
        let mq = tape.constant(Tensor::vector(vec![0.5, 1.0, -1.0]));
        let mc = tape.constant(Tensor::vector(vec![0.0, 0.5, 0.0]));
        let p = caption_info_head(&mut tape, &params, nmn, mq, mc).unwrap();
        // relu(1.5, -0.5, -0.5) = (1.5, 0, 0)
        let e = 1.5f64.exp();
        let expect = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
        for (a, b) in tape.value(p).data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_caption_term_reduces_to_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ParameterStore::new();
        init_head(&mut params, &mut rng, 5);
        let mut tape = Tape::new();
        let nmn = tape.constant(Tensor::vector((0..5).map(|i| i as f64 * 0.3 - 0.4).collect()));
        let mq = tape.constant(Tensor::vector((0..5).map(|i| 0.2 - i as f64 * 0.1).collect()));
        let zero = tape.constant(Tensor::zeros(&[5]));
        let a = caption_info_head(&mut tape, &params, nmn, mq, zero).unwrap();
        let b = nmn_head(&mut tape, &params, nmn, mq).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
        assert!((sum(tape.value(a).data()) - 1.0).abs() < 1e-12);
        let short = tape.constant(Tensor::zeros(&[4]));
        assert!(caption_info_head(&mut tape, &params, nmn, mq, short).is_err());
    }

    fn attn_params(k: usize, answers: usize, emb: usize) -> ParameterStore<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = ParameterStore::new();
        init_head(&mut p, &mut rng, answers);
        init_attention(&mut p, &mut rng, k, answers, emb);
        p
    }

    #[test]
    fn singleton_and_identical_captions() {
        let params = attn_params(4, 3, 2);
        let mut tape = Tape::new();
        let mq = tape.constant(Tensor::vector(vec![0.1, -0.3, 0.8]));
        let c = tape.constant(Tensor::vector(vec![0.6, -1.2]));
        let r = caption_attention(&mut tape, &params, mq, &[c], &[true]).unwrap();
        assert_eq!(tape.value(r.weights).data(), &[1.0]);
        assert_eq!(tape.value(r.c_hat).data(), &[0.6, -1.2]);

        let pad = tape.constant(Tensor::zeros(&[2]));
        let r = caption_attention(&mut tape, &params, mq, &[c, c, c, pad], &[true, true, true, false]).unwrap();
        let w = tape.value(r.weights).data();
        assert_eq!(w[3], 0.0);
        for &x in &w[..3] {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        for (a, b) in tape.value(r.c_hat).data().iter().zip([0.6, -1.2]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(tape.value(r.interactions).shape(), &[4, 4]);
        assert!(matches!(
            caption_attention(&mut tape, &params, mq, &[c], &[false]),
            Err(Error::AllMasked)
        ));
    }

    #[test]
    fn attention_hand_example() {
        // k = 2, answers = 2, emb = 2
        let mut p = ParameterStore::new();
        p.insert(ATTN_WQ, Tensor::matrix(2, 2, vec![0.0, 0.0, 0.0, 0.0]).unwrap());
        p.insert(ATTN_WC, Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        p.insert(ATTN_WH, Tensor::matrix(1, 2, vec![2.0, -2.0]).unwrap());
        let mut tape = Tape::new();
        let mq = tape.constant(Tensor::vector(vec![3.0, 4.0]));
        let c1 = tape.constant(Tensor::vector(vec![0.0, 0.0]));
        let c2 = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        let r = caption_attention(&mut tape, &p, mq, &[c1, c2], &[true, true]).unwrap();
        // σ(W_Q m) = 0.5; h1 = (0.25, 0.25) -> score 0; h2 = (0.5σ(1), 0.25) -> σ(1) - 0.5
        let sig1 = 1.0 / (1.0 + (-1.0f64).exp());
        let s2 = sig1 - 0.5;
        let a2 = s2.exp() / (1.0 + s2.exp());
        let w = tape.value(r.weights).data();
        assert!((w[0] - (1.0 - a2)).abs() < 1e-15);
        assert!((w[1] - a2).abs() < 1e-15);
        assert!((tape.value(r.c_hat).data()[0] - a2).abs() < 1e-15);
        assert_eq!(tape.value(r.c_hat).data()[1], 0.0);
    }

    #[test]
    fn attention_is_permutation_equivariant() {
        let params = attn_params(5, 3, 3);
        let vecs = [[0.2, -0.1, 0.9], [1.0, 0.3, -0.4], [-0.6, 0.5, 0.05]];
        let run = |order: &[usize]| {
            let mut tape = Tape::new();
            let mq = tape.constant(Tensor::vector(vec![0.4, 0.1, -0.7]));
            let cs: Vec<NodeId> = order
                .iter()
                .map(|&i| tape.constant(Tensor::vector(vecs[i].to_vec())))
                .collect();
            let r = caption_attention(&mut tape, &params, mq, &cs, &[true; 3]).unwrap();
            (
                tape.value(r.weights).data().to_vec(),
                tape.value(r.c_hat).data().to_vec(),
            )
        };
        let (w0, c0) = run(&[0, 1, 2]);
        let (w1, c1) = run(&[2, 0, 1]);
        for (pos, &orig) in [2, 0, 1].iter().enumerate() {
            assert!((w1[pos] - w0[orig]).abs() < 1e-12);
        }
        for (a, b) in c0.iter().zip(&c1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_projection_and_caption_only() {
        let mut params = attn_params(4, 3, 2);
        params.insert(CHAT_PROJ_W, Tensor::zeros(&[3, 2]));
        let mut tape = Tape::new();
        let nmn = tape.constant(Tensor::vector(vec![0.3, 0.1, -0.2]));
        let mq = tape.constant(Tensor::vector(vec![0.1, -0.3, 0.8]));
        let c = tape.constant(Tensor::vector(vec![0.6, -1.2]));
        let r = caption_attention(&mut tape, &params, mq, &[c], &[true]).unwrap();
        let a = caption_attn_head(&mut tape, &params, nmn, mq, &r).unwrap();
        let b = nmn_head(&mut tape, &params, nmn, mq).unwrap();
        assert_eq!(tape.value(a), tape.value(b));

        let only = caption_only_head(&mut tape, &params, mq, &r).unwrap();
        let zero = tape.constant(Tensor::zeros(&[3]));
        let manual = caption_attn_head(&mut tape, &params, zero, mq, &r).unwrap();
        assert_eq!(tape.value(only), tape.value(manual));
        assert!((sum(tape.value(only).data()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kb_seed_examples() {
        let mut p = ParameterStore::new();
        p.insert(
            SEED_PROJ,
            Tensor::matrix(2, 3, vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5]).unwrap(),
        );
        p.insert(SEED_BIAS, Tensor::zeros(&[2]));
        let mut tape = Tape::new();
        let zero = tape.constant(Tensor::zeros(&[3]));
        let h = kb_seed(&mut tape, &p, zero).unwrap();
        assert_eq!(tape.value(h).data(), &[0.0, 0.0]);
        let kb = tape.constant(Tensor::vector(vec![2.0, 1.0, 1.0]));
        let h = kb_seed(&mut tape, &p, kb).unwrap();
        assert_eq!(tape.value(h).data(), &[1.0f64.tanh(), 2.0f64.tanh()]);
        let big = tape.constant(Tensor::vector(vec![50.0, -80.0, 3.0]));
        let h = kb_seed(&mut tape, &p, big).unwrap();
        assert!(tape.value(h).data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn predict_answer_ties_and_argmax() {
        let vocab = ["a", "b", "c"];
        assert_eq!(predict_answer(&[0.2, 0.5, 0.3], &vocab).unwrap(), "b");
        assert_eq!(predict_answer(&[1.0 / 3.0; 3], &vocab).unwrap(), "a");
        assert_eq!(predict_answer(&[0.0, 0.0, 1.0], &vocab).unwrap(), "c");
        assert!(predict_answer::<f64, &str>(&[], &[]).is_err());
    }

    #[test]
    fn argmax_ignores_constant_logit_shift() {
        let logits = [0.3, 2.5, -1.0, 2.4];
        let shifted: Vec<f64> = logits.iter().map(|v| v + 123.0).collect();
        let p1 = crate::tensor::softmax(&Tensor::vector(logits.to_vec())).unwrap();
        let p2 = crate::tensor::softmax(&Tensor::vector(shifted)).unwrap();
        assert_eq!(argmax(p1.data()), argmax(p2.data()));
    }
}
