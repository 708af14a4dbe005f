//! Instances, feature normalization and the on-disk data formats.
//!
//! `instances.jsonl` holds one object per line:
//!
//! ```json
//! {"id": "q1", "question": ["what", "color", "is", "the", "circle"],
//!  "caption": ["a", "red", "circle"], "answers": ["red", "red"],
//!  "features": {"shape": [16, 5, 5], "data": [0.1, ...]},
//!  "dep_parse": [{"index": 1, "form": "what", "head": 3, "relation": "attr", "pos": "WH"}],
//!  "layout": "Describe(Find(circle))"}
//! ```
//!
//! Instead of `features`, a line may carry `"features_ref": "file.feat#7"`,
//! the 7th grid of a packed feature file resolved relative to the JSONL
//! file. Packed files are `"FEATPK01"`, then `D`, `H`, `W` as u32 and the
//! grid count as u64, then `count·D·H·W` f32 values, all little-endian.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::DepToken;
use crate::modules::ImageGrid;

pub const FEATURES_MAGIC: &[u8; 8] = b"FEATPK01";
pub const MAX_ANSWERS: usize = 10;
pub const STD_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub question: Vec<String>,
    pub caption: Vec<String>,
    pub answers: Vec<String>,
    pub features: ImageGrid<f64>,
    pub dep_parse: Option<Vec<DepToken>>,
    pub layout: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeaturesJson {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    id: String,
    question: Vec<String>,
    #[serde(default)]
    caption: Vec<String>,
    answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<FeaturesJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dep_parse: Option<Vec<DepToken>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<String>,
}

impl Instance {
    /// `(D, H, W)` of the feature grid.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.features.dims()
    }

    pub fn validate(&self) -> Result<()> {
        if self.answers.is_empty() || self.answers.len() > MAX_ANSWERS {
            return Err(Error::Malformed(format!(
                "instance {} has {} answers, expected 1 to {MAX_ANSWERS}",
                self.id,
                self.answers.len()
            )));
        }
        if self.question.is_empty() {
            return Err(Error::Malformed(format!("instance {} has an empty question", self.id)));
        }
        Ok(())
    }

    /// JSON line with inline features.
    pub fn to_json_line(&self) -> Result<String> {
        let f = self.features.features();
        let record = InstanceJson {
            id: self.id.clone(),
            question: self.question.clone(),
            caption: self.caption.clone(),
            answers: self.answers.clone(),
            features: Some(FeaturesJson {
                shape: f.shape().to_vec(),
                data: f.data().to_vec(),
            }),
            features_ref: None,
            dep_parse: self.dep_parse.clone(),
            layout: self.layout.clone(),
        };
        Ok(serde_json::to_string(&record)?)
    }
}

/// Checks that every instance shares the first one's `(D, H, W)`.
pub fn check_dims(instances: &[Instance]) -> Result<(usize, usize, usize)> {
    let first = instances
        .first()
        .ok_or_else(|| Error::Empty("dataset has no instances".into()))?
        .dims();
    for inst in instances {
        if inst.dims() != first {
            return Err(Error::Dimension(format!(
                "instance {} has features {:?}, dataset has {:?}",
                inst.id,
                inst.dims(),
                first
            )));
        }
    }
    Ok(first)
}

/// `(x - mean) / max(std, 1e-8)` over every entry, population std.
pub fn normalize_features(grid: &ImageGrid<f64>) -> ImageGrid<f64> {
    let data = grid.features().data();
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(STD_GUARD);
    let mut out = grid.clone();
    out.features_mut()
        .data_mut()
        .iter_mut()
        .for_each(|v| *v = (*v - mean) / std);
    out
}

/// Packed feature grids sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedFeatures {
    pub dims: (usize, usize, usize),
    pub data: Vec<f32>,
}

impl PackedFeatures {
    pub fn len(&self) -> usize {
        let (d, h, w) = self.dims;
        self.data.len() / (d * h * w)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn grid(&self, i: usize) -> Result<ImageGrid<f64>> {
        let (d, h, w) = self.dims;
        let n = d * h * w;
        if i >= self.len() {
            return Err(Error::Malformed(format!(
                "feature index {i} out of range ({} grids)",
                self.len()
            )));
        }
        ImageGrid::from_vec(
            d,
            h,
            w,
            self.data[i * n..(i + 1) * n].iter().map(|&v| v as f64).collect(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (d, h, w) = self.dims;
        let mut out = Vec::with_capacity(28 + self.data.len() * 4);
        out.extend_from_slice(FEATURES_MAGIC);
        for v in [d, h, w] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 28 || &bytes[..8] != FEATURES_MAGIC {
            return Err(Error::Malformed("packed feature file lacks FEATPK01 header".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let dims = (u32_at(8), u32_at(12), u32_at(16));
        let count = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes")) as usize;
        let n = dims.0 * dims.1 * dims.2;
        if n == 0 || bytes.len() != 28 + count * n * 4 {
            return Err(Error::Malformed(
                "packed feature file size disagrees with its header".into(),
            ));
        }
        let data = bytes[28..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { dims, data })
    }
}

pub fn read_packed_features(path: &Path) -> Result<PackedFeatures> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    PackedFeatures::from_bytes(&bytes)
}

fn resolve_ref(reference: &str, base: &Path, cache: &mut HashMap<PathBuf, PackedFeatures>) -> Result<ImageGrid<f64>> {
    let (file, index) = reference
        .rsplit_once('#')
        .ok_or_else(|| Error::Malformed(format!("features_ref `{reference}` lacks `#index`")))?;
    let index: usize = index
        .parse()
        .map_err(|_| Error::Malformed(format!("features_ref `{reference}` has a bad index")))?;
    let path = base.join(file);
    if !cache.contains_key(&path) {
        let packed = read_packed_features(&path)?;
        cache.insert(path.clone(), packed);
    }
    cache[&path].grid(index)
}

/// Parses JSONL text; `base` resolves `features_ref` paths.
pub fn parse_instances(text: &str, base: &Path) -> Result<Vec<Instance>> {
    let mut cache = HashMap::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| Error::Malformed(format!("line {}: {msg}", lineno + 1));
        let record: InstanceJson = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let features = match (record.features, record.features_ref) {
            (Some(f), None) => {
                let shape = f.shape.clone();
                let t = crate::tensor::Tensor::new(f.shape, f.data).map_err(|e| at(e.to_string()))?;
                ImageGrid::new(t).map_err(|_| at(format!("features shape {shape:?} is not [D, H, W]")))?
            }
            (None, Some(r)) => resolve_ref(&r, base, &mut cache).map_err(|e| match e {
                e @ Error::Io { .. } => e,
                e => at(e.to_string()),
            })?,
            _ => return Err(at("exactly one of features and features_ref is required".into())),
        };
        let inst = Instance {
            id: record.id,
            question: record.question,
            caption: record.caption,
            answers: record.answers,
            features,
            dep_parse: record.dep_parse,
            layout: record.layout,
        };
        inst.validate().map_err(|e| at(e.to_string()))?;
        if let Some(p) = &inst.dep_parse {
            crate::layout::validate_parse(p).map_err(|e| at(e.to_string()))?;
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_instances(&text, base)
}

pub fn write_instances(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut out = Vec::new();
    for inst in instances {
        out.extend_from_slice(inst.to_json_line()?.as_bytes());
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
