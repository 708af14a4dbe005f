//! Model checkpoints.
//!
//! Layout: magic `MODNET01`, header length as u64 LE, JSON header, then every
//! tensor of the manifest in order as f32 LE row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::Instance;
use crate::encoders::WordVocab;
use crate::error::{Error, Result};
use crate::metrics::AnswerVocab;
use crate::model::Model;
use crate::params::ParameterStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MODNET01";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub version: u32,
    pub dims: [usize; 3],
    pub answers: Vec<String>,
    pub words: Vec<String>,
    pub config: RunConfig,
    pub tensors: Vec<TensorEntry>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn to_bytes<S: Scalar>(model: &Model<S>) -> Result<Vec<u8>> {
    let (d, h, w) = model.dims;
    let header = Header {
        version: VERSION,
        dims: [d, h, w],
        answers: model.answers.answers().to_vec(),
        words: model.words.tokens().to_vec(),
        config: model.config.clone(),
        tensors: model
            .params
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * model.params.num_values());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in model.params.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes<S: Scalar>(bytes: &[u8]) -> Result<Model<S>> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if len > body.len() {
        return Err(bad(format!("header claims {len} bytes, file has {}", body.len())));
    }
    let header: Header = serde_json::from_slice(&body[..len]).map_err(|e| bad(format!("header: {e}")))?;
    if header.version != VERSION {
        return Err(bad(format!(
            "unsupported version {} (expected {VERSION})",
            header.version
        )));
    }
    let payload = &body[len..];
    let expected: usize = header.tensors.iter().map(|e| e.shape.iter().product::<usize>()).sum();
    if payload.len() != 4 * expected {
        return Err(bad(format!(
            "payload has {} bytes, manifest needs {}",
            payload.len(),
            4 * expected
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| S::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64));
    let mut params = ParameterStore::new();
    for e in &header.tensors {
        if params.contains(&e.name) {
            return Err(bad(format!("duplicate tensor `{}`", e.name)));
        }
        let n = e.shape.iter().product();
        let data: Vec<S> = values.by_ref().take(n).collect();
        params.insert(
            e.name.clone(),
            Tensor::new(e.shape.clone(), data).map_err(|err| bad(err.to_string()))?,
        );
    }
    let [d, h, w] = header.dims;
    Ok(Model {
        config: header.config,
        dims: (d, h, w),
        answers: AnswerVocab::from_answers(header.answers).map_err(|e| bad(e.to_string()))?,
        words: WordVocab::from_ordered(header.words).map_err(|e| bad(e.to_string()))?,
        params,
    })
}

pub fn save<S: Scalar>(model: &Model<S>, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load<S: Scalar>(path: &Path) -> Result<Model<S>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Rejects data whose feature grid differs from the checkpoint's.
pub fn check_data_dims<S>(model: &Model<S>, instances: &[Instance]) -> Result<()> {
    match instances.iter().find(|i| i.dims() != model.dims) {
        Some(i) => Err(Error::Dimension(format!(
            "instance {} has features {:?}, checkpoint expects {:?}",
            i.id,
            i.dims(),
            model.dims
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Variant;
    use crate::synth::{generate, SynthConfig};

    fn model() -> (Model<f64>, Vec<Instance>) {
        let data = generate(&SynthConfig {
            n: 10,
            ..SynthConfig::default()
        })
        .instances;
        let config = RunConfig {
            variant: Variant::NmnCapAttn,
            emb_dim: 6,
            q_hidden: 5,
            attn_k: 4,
            measure_hidden: 4,
            ..RunConfig::default()
        };
        (Model::init(config, &data, None).unwrap(), data)
    }

    #[test]
    fn save_load_save_is_identical() {
        let (m, data) = model();
        let bytes = to_bytes(&m).unwrap();
        let back: Model<f64> = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back).unwrap(), bytes);
        for inst in &data {
            let a = m.distribution(&m.prepare(inst, None).unwrap()).unwrap();
            let b = back.distribution(&back.prepare(inst, None).unwrap()).unwrap();
            assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (m, data) = model();
        let bytes = to_bytes(&m).unwrap();
        for cut in [0, 7, 15, 40, bytes.len() - 1] {
            assert!(
                matches!(from_bytes::<f64>(&bytes[..cut]), Err(Error::Checkpoint(_))),
                "cut {cut}"
            );
        }
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(from_bytes::<f64>(&magic).is_err());
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 4]);
        assert!(from_bytes::<f64>(&extra).is_err());
        let key = b"\"version\":1";
        let at = bytes.windows(key.len()).position(|w| w == key).unwrap();
        let mut wrong = bytes.clone();
        wrong[at + key.len() - 1] = b'2';
        match from_bytes::<f64>(&wrong) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("version"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(check_data_dims(&m, &data).is_ok());
        let small = generate(&SynthConfig {
            n: 2,
            width: 3,
            ..SynthConfig::default()
        })
        .instances;
        assert!(matches!(check_data_dims(&m, &small), Err(Error::Dimension(_))));
    }
}
