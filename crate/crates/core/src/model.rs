//! The full question-answering model: encoders, module network and head.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, Variant};
use crate::data::{check_dims, normalize_features, Instance};
use crate::encoders::{
    embed_on_tape, init_embeddings, init_lstm, init_projection, lstm_encode, project_context, token_ids, ContextRole,
    EmbeddingTable, WordVocab, EMBED_PARAM,
};
use crate::error::{Error, Result};
use crate::fusion::{
    caption_attention, caption_attn_head, caption_info_head, caption_only_head, init_attention, init_head,
    init_kb_seed, kb_seed, nmn_head,
};
use crate::knowledge::KbIndex;
use crate::layout::{compile_from_parse, Layout, TopModule};
use crate::metrics::{categorize, majority_answer, AnswerVocab, Category};
use crate::modules::{assemble_and_run, ensure_find, init_describe, init_measure, ImageContext, ImageGrid, UNK_WORD};
use crate::params::ParameterStore;
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

pub const QUESTION: &str = "question";
pub const CAPTION: &str = "caption";

/// Layout for an instance: the precompiled string if present, else compiled
/// from its dependency parse. `None` for variants without a module network.
pub fn instance_layout(inst: &Instance, config: &RunConfig) -> Result<Option<Layout>> {
    if !config.variant.uses_nmn() {
        return Ok(None);
    }
    if let Some(text) = &inst.layout {
        return text.parse().map(Some);
    }
    match &inst.dep_parse {
        Some(parse) => compile_from_parse(parse, config.parse_mode, TopModule::Auto(config.measure_for)).map(Some),
        None => Err(Error::Malformed(format!(
            "instance {} has neither a layout nor a dependency parse",
            inst.id
        ))),
    }
}

fn lowercase(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

/// An instance resolved against a model's vocabularies.
#[derive(Debug, Clone)]
pub struct Prepared<S> {
    pub id: String,
    pub layout: Option<Layout>,
    pub image: ImageGrid<S>,
    pub question: (Vec<usize>, Vec<bool>),
    pub caption: (Vec<usize>, Vec<bool>),
    pub kb: Option<Vec<S>>,
    pub target: usize,
    pub answers: Vec<String>,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub config: RunConfig,
    pub dims: (usize, usize, usize),
    pub answers: AnswerVocab,
    pub words: WordVocab,
    pub params: ParameterStore<S>,
}

impl<S: Scalar> Model<S> {
    /// Builds vocabularies from `train` and initializes every parameter the
    /// variant needs from `config.seed`. Values are rounded to checkpoint
    /// precision.
    pub fn init(config: RunConfig, train: &[Instance], embeddings: Option<&EmbeddingTable<f64>>) -> Result<Self> {
        config.validate()?;
        let dims = check_dims(train)?;
        if config.variant.uses_kb() && config.kb_dim == 0 {
            return Err(Error::InvalidArgument(
                "nmn+kb needs an index with document vectors".into(),
            ));
        }
        let answers = AnswerVocab::build(train.iter().map(|i| i.answers.as_slice()), config.answers_k)?;
        let words = WordVocab::from_tokens(
            train
                .iter()
                .flat_map(|i| lowercase(&i.question).into_iter().chain(lowercase(&i.caption))),
        );
        let mut find_words = BTreeSet::new();
        for inst in train {
            if let Some(layout) = instance_layout(inst, &config)? {
                find_words.extend(layout.find_words().into_iter().map(str::to_string));
            }
        }

        let (d, h, w) = dims;
        let classes = answers.num_classes();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParameterStore::new();
        params.insert(
            EMBED_PARAM,
            init_embeddings(&mut rng, &words, config.emb_dim, embeddings)?,
        );
        init_lstm(&mut params, &mut rng, QUESTION, config.emb_dim, config.q_hidden);
        let q = ContextRole::Question;
        init_projection(&mut params, &mut rng, q.weight(), q.bias(), config.q_hidden, classes);
        init_head(&mut params, &mut rng, classes);
        if config.variant.uses_nmn() {
            ensure_find(&mut params, &mut rng, UNK_WORD, d);
            for word in &find_words {
                ensure_find(&mut params, &mut rng, word, d);
            }
            init_describe(&mut params, &mut rng, d, classes);
            init_measure(&mut params, &mut rng, h * w, config.measure_hidden, classes);
        }
        if config.variant.uses_caption_lstm() {
            init_lstm(&mut params, &mut rng, CAPTION, config.emb_dim, config.c_hidden);
            let c = ContextRole::Caption;
            init_projection(&mut params, &mut rng, c.weight(), c.bias(), config.c_hidden, classes);
        }
        if config.variant.uses_caption_attention() {
            init_attention(&mut params, &mut rng, config.attn_k, classes, config.emb_dim);
        }
        if config.variant.uses_kb() {
            init_kb_seed(&mut params, &mut rng, config.kb_dim, config.q_hidden);
        }
        params.round_to_storage();
        Ok(Self {
            config,
            dims,
            answers,
            words,
            params,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.answers.num_classes()
    }

    pub fn prepare(&self, inst: &Instance, kb: Option<&KbIndex>) -> Result<Prepared<S>> {
        if inst.dims() != self.dims {
            return Err(Error::Dimension(format!(
                "instance {} has features {:?}, model was trained on {:?}",
                inst.id,
                inst.dims(),
                self.dims
            )));
        }
        let normalized = normalize_features(&inst.features);
        let (d, h, w) = self.dims;
        let image = ImageGrid::from_vec(
            d,
            h,
            w,
            normalized.features().data().iter().map(|&v| S::lit(v)).collect(),
        )?;
        let kb = if self.config.variant.uses_kb() {
            let index = kb.ok_or_else(|| Error::InvalidArgument("nmn+kb needs a knowledge index".into()))?;
            if index.dim() != self.config.kb_dim {
                return Err(Error::Dimension(format!(
                    "index vectors have dimension {}, model expects {}",
                    index.dim(),
                    self.config.kb_dim
                )));
            }
            let v = index.kb_vector_for_question(&inst.question, self.config.kb_topk)?;
            Some(v.into_iter().map(S::lit).collect())
        } else {
            None
        };
        let majority = majority_answer(&inst.answers).expect("validated non-empty");
        Ok(Prepared {
            id: inst.id.clone(),
            layout: instance_layout(inst, &self.config)?,
            image,
            question: token_ids(&lowercase(&inst.question), &self.words, self.config.max_question_len)?,
            caption: token_ids(&lowercase(&inst.caption), &self.words, self.config.max_caption_len)?,
            kb,
            target: self.answers.target(majority),
            answers: inst.answers.clone(),
            category: categorize(&inst.question),
        })
    }

    pub fn prepare_all(&self, instances: &[Instance], kb: Option<&KbIndex>) -> Result<Vec<Prepared<S>>> {
        instances.iter().map(|i| self.prepare(i, kb)).collect()
    }

    /// Records the forward pass on `tape`; returns the answer distribution node.
    pub fn forward(&self, tape: &mut Tape<S>, prep: &Prepared<S>) -> Result<NodeId> {
        let params = &self.params;
        let variant = self.config.variant;
        let table = tape.param(EMBED_PARAM, params)?;
        let q_inputs = embed_on_tape(tape, table, &prep.question.0)?;
        let h0 = match (&prep.kb, variant.uses_kb()) {
            (Some(kb), true) => {
                let v = tape.constant(Tensor::vector(kb.clone()));
                Some(kb_seed(tape, params, v)?)
            }
            (None, true) => {
                return Err(Error::InvalidArgument(
                    "instance was prepared without a knowledge vector".into(),
                ))
            }
            _ => None,
        };
        let hq = lstm_encode(tape, params, QUESTION, &q_inputs, &prep.question.1, h0)?;
        let m_q = project_context(tape, params, hq, ContextRole::Question)?;

        let pred_nmn = if variant.uses_nmn() {
            let layout = prep
                .layout
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("instance {} has no layout", prep.id)))?;
            let ctx = ImageContext::new(tape, &prep.image);
            Some(assemble_and_run(tape, layout, &ctx, params)?)
        } else {
            None
        };
        let caption = |tape: &mut Tape<S>| embed_on_tape(tape, table, &prep.caption.0);
        match variant {
            Variant::Nmn | Variant::NmnKb => nmn_head(tape, params, pred_nmn.expect("nmn"), m_q),
            Variant::NmnCap => {
                let c_inputs = caption(tape)?;
                let hc = lstm_encode(tape, params, CAPTION, &c_inputs, &prep.caption.1, None)?;
                let m_c = project_context(tape, params, hc, ContextRole::Caption)?;
                caption_info_head(tape, params, pred_nmn.expect("nmn"), m_q, m_c)
            }
            Variant::NmnCapAttn => {
                let c_inputs = caption(tape)?;
                let attn = caption_attention(tape, params, m_q, &c_inputs, &prep.caption.1)?;
                caption_attn_head(tape, params, pred_nmn.expect("nmn"), m_q, &attn)
            }
            Variant::CapOnly => {
                let c_inputs = caption(tape)?;
                let attn = caption_attention(tape, params, m_q, &c_inputs, &prep.caption.1)?;
                caption_only_head(tape, params, m_q, &attn)
            }
        }
    }

    /// Cross-entropy of the distribution against the instance's target.
    pub fn loss(&self, tape: &mut Tape<S>, prep: &Prepared<S>) -> Result<(NodeId, NodeId)> {
        let dist = self.forward(tape, prep)?;
        let loss = tape.nll(dist, prep.target)?;
        Ok((dist, loss))
    }

    pub fn distribution(&self, prep: &Prepared<S>) -> Result<Vec<S>> {
        let mut tape = Tape::new();
        let dist = self.forward(&mut tape, prep)?;
        Ok(tape.value(dist).data().to_vec())
    }

    /// Argmax answer (ties to the lowest index) and the full distribution.
    pub fn predict(&self, prep: &Prepared<S>) -> Result<(String, Vec<S>)> {
        let dist = self.distribution(prep)?;
        let labels = self.answers.labels();
        let answer = crate::fusion::predict_answer(&dist, &labels)?.to_string();
        Ok((answer, dist))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn tiny(variant: Variant) -> (Model<f64>, Vec<Instance>) {
        let data = generate(&SynthConfig {
            n: 12,
            ..SynthConfig::default()
        })
        .instances;
        let config = RunConfig {
            variant,
            emb_dim: 6,
            q_hidden: 5,
            c_hidden: 4,
            attn_k: 3,
            measure_hidden: 4,
            kb_dim: if variant.uses_kb() { 6 } else { 0 },
            ..RunConfig::default()
        };
        (Model::init(config, &data, None).unwrap(), data)
    }

    #[test]
    fn every_variant_yields_a_distribution() {
        for v in [Variant::Nmn, Variant::NmnCap, Variant::NmnCapAttn, Variant::CapOnly] {
            let (model, data) = tiny(v);
            for inst in &data {
                let prep = model.prepare(inst, None).unwrap();
                let dist = model.distribution(&prep).unwrap();
                assert_eq!(dist.len(), model.num_classes());
                assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{v}");
                assert!(dist.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn init_is_seeded_and_rounded() {
        let (a, data) = tiny(Variant::NmnCapAttn);
        let b = Model::<f64>::init(a.config.clone(), &data, None).unwrap();
        assert_eq!(a, b);
        for (_, t) in a.params.iter() {
            assert!(t.data().iter().all(|&v| v == (v as f32) as f64));
        }
        assert!(a.params.contains("find/<unk>"));
        assert!(!a.params.contains("lstm/caption/i"));
    }

    #[test]
    fn kb_variant_requires_index() {
        let (model, data) = tiny(Variant::NmnKb);
        assert!(model.prepare(&data[0], None).is_err());
        let (plain, _) = tiny(Variant::Nmn);
        let mut cfg = plain.config.clone();
        cfg.variant = Variant::NmnKb;
        assert!(Model::<f64>::init(cfg, &data, None).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (model, data) = tiny(Variant::Nmn);
        let mut other = data[0].clone();
        other.features = ImageGrid::from_vec(2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(model.prepare(&other, None), Err(Error::Dimension(_))));
    }
}
