//! Run configuration: model variant, hyperparameters and input paths.
//! Serialized verbatim into checkpoint headers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{ParseMode, TopPolicy};
use crate::metrics::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Nmn,
    NmnCap,
    NmnCapAttn,
    NmnKb,
    CapOnly,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Nmn,
        Variant::NmnCap,
        Variant::NmnCapAttn,
        Variant::NmnKb,
        Variant::CapOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nmn => "nmn",
            Variant::NmnCap => "nmn+cap",
            Variant::NmnCapAttn => "nmn+capattn",
            Variant::NmnKb => "nmn+kb",
            Variant::CapOnly => "cap-only",
        }
    }

    pub fn uses_nmn(self) -> bool {
        self != Variant::CapOnly
    }

    pub fn uses_caption_lstm(self) -> bool {
        self == Variant::NmnCap
    }

    pub fn uses_caption_attention(self) -> bool {
        matches!(self, Variant::NmnCapAttn | Variant::CapOnly)
    }

    pub fn uses_kb(self) -> bool {
        self == Variant::NmnKb
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model variant `{s}`")))
    }
}

impl Serialize for Variant {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    pub answers_k: usize,
    pub emb_dim: usize,
    pub q_hidden: usize,
    pub c_hidden: usize,
    pub attn_k: usize,
    pub measure_hidden: usize,
    pub max_question_len: usize,
    pub max_caption_len: usize,
    pub kb_topk: usize,
    /// Document-vector dimension; 0 unless the variant uses the knowledge base.
    pub kb_dim: usize,
    pub parse_mode: ParseMode,
    pub measure_for: TopPolicy,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub metric: Metric,
    pub seed: u64,
    pub data: Option<String>,
    pub val: Option<String>,
    pub embeddings: Option<String>,
    pub abstracts: Option<String>,
    pub index: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Nmn,
            answers_k: 64,
            emb_dim: 64,
            q_hidden: 128,
            c_hidden: 64,
            attn_k: 200,
            measure_hidden: crate::modules::DEFAULT_MEASURE_HIDDEN,
            max_question_len: 32,
            max_caption_len: 32,
            kb_topk: crate::knowledge::DEFAULT_KB_TOPK,
            kb_dim: 0,
            parse_mode: ParseMode::Short,
            measure_for: TopPolicy::None,
            batch: 32,
            epochs: 12,
            patience: 1,
            metric: Metric::Exact,
            seed: 0,
            data: None,
            val: None,
            embeddings: None,
            abstracts: None,
            index: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("answers-k", self.answers_k),
            ("emb-dim", self.emb_dim),
            ("q-hidden", self.q_hidden),
            ("c-hidden", self.c_hidden),
            ("attn-k", self.attn_k),
            ("measure-hidden", self.measure_hidden),
            ("max-question-len", self.max_question_len),
            ("max-caption-len", self.max_caption_len),
            ("kb-topk", self.kb_topk),
            ("batch", self.batch),
            ("epochs", self.epochs),
            ("patience", self.patience),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("--{name} must be at least 1")));
            }
        }
        Ok(())
    }
}
