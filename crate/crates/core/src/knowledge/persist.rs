//! Index file layout (all integers little-endian):
//!
//! ```text
//! "KBINDEX1"                      8 bytes
//! header length                   u64
//! header                          UTF-8 JSON, see `Header`
//! postings                        (doc_id: u32, tf: u32) pairs, terms in header order
//! document vectors                num_docs × dim f64, row-major
//! ```
//!
//! Each header term entry is `[term, first_pair, pair_count]`, indexing the
//! postings section in pairs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::index::{Bm25, KbIndex};

pub const INDEX_MAGIC: &[u8; 8] = b"KBINDEX1";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    k1: f64,
    b: f64,
    num_docs: usize,
    avg_doc_len: f64,
    dim: usize,
    titles: Vec<String>,
    doc_lengths: Vec<u32>,
    terms: Vec<(String, usize, usize)>,
}

pub fn index_to_bytes(index: &KbIndex) -> Result<Vec<u8>> {
    let mut terms = Vec::with_capacity(index.postings.len());
    let mut payload = Vec::new();
    let mut offset = 0;
    for (term, list) in &index.postings {
        terms.push((term.clone(), offset, list.len()));
        offset += list.len();
        for &(d, tf) in list {
            payload.extend_from_slice(&d.to_le_bytes());
            payload.extend_from_slice(&tf.to_le_bytes());
        }
    }
    for v in &index.vectors {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let header = Header {
        version: INDEX_VERSION,
        k1: index.params.k1,
        b: index.params.b,
        num_docs: index.num_docs(),
        avg_doc_len: index.avg_doc_len,
        dim: index.dim,
        titles: index.titles.clone(),
        doc_lengths: index.doc_lengths.clone(),
        terms,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn index_from_bytes(bytes: &[u8]) -> Result<KbIndex> {
    let bad = |m: &str| Error::IndexFile(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != INDEX_MAGIC {
        return Err(bad("missing KBINDEX1 magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if hlen > body.len() {
        return Err(bad("header length exceeds file size"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(&format!("header: {e}")))?;
    if header.version != INDEX_VERSION {
        return Err(bad(&format!("unsupported version {}", header.version)));
    }
    if header.titles.len() != header.num_docs || header.doc_lengths.len() != header.num_docs {
        return Err(bad("document table length disagrees with num_docs"));
    }
    let payload = &body[hlen..];
    let pairs: usize = header.terms.iter().map(|t| t.2).sum();
    let expected = pairs * 8 + header.num_docs * header.dim * 8;
    if payload.len() != expected {
        return Err(bad(&format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let u32_at = |i: usize| u32::from_le_bytes(payload[i..i + 4].try_into().expect("4 bytes"));
    let mut postings = BTreeMap::new();
    let mut next = 0;
    for (term, first, count) in header.terms {
        if first != next {
            return Err(bad(&format!("postings for `{term}` are out of order")));
        }
        next += count;
        let list: Vec<(u32, u32)> = (first..first + count)
            .map(|p| (u32_at(p * 8), u32_at(p * 8 + 4)))
            .collect();
        if list.windows(2).any(|w| w[0].0 >= w[1].0) || list.iter().any(|&(d, _)| d as usize >= header.num_docs) {
            return Err(bad(&format!("postings for `{term}` are not sorted doc ids in range")));
        }
        postings.insert(term, list);
    }
    let vectors = payload[pairs * 8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(KbIndex {
        params: Bm25 {
            k1: header.k1,
            b: header.b,
        },
        titles: header.titles,
        doc_lengths: header.doc_lengths,
        avg_doc_len: header.avg_doc_len,
        postings,
        dim: header.dim,
        vectors,
    })
}

pub fn write_index(index: &KbIndex, path: &Path) -> Result<()> {
    let bytes = index_to_bytes(index)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<KbIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    index_from_bytes(&bytes)
}
