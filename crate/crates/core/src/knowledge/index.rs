use std::collections::{BTreeMap, HashMap};

use crate::encoders::EmbeddingTable;
use crate::error::{Error, Result};

use super::{extract_query_nouns, AbstractDoc};

pub const DEFAULT_KB_TOPK: usize = 3;

/// BM25 constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25 {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25 {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25 {
    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive.
    pub fn idf(&self, num_docs: usize, df: usize) -> f64 {
        let (n, df) = (num_docs as f64, df as f64);
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// One term's contribution for a document of length `dl`.
    pub fn term_score(&self, idf: f64, tf: u32, dl: u32, avg_dl: f64) -> f64 {
        let tf = tf as f64;
        let norm = if avg_dl > 0.0 { dl as f64 / avg_dl } else { 0.0 };
        idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * norm))
    }
}

/// Inverted index with per-document unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct KbIndex {
    pub(super) params: Bm25,
    pub(super) titles: Vec<String>,
    pub(super) doc_lengths: Vec<u32>,
    pub(super) avg_doc_len: f64,
    /// term -> (doc_id, tf), sorted by doc_id
    pub(super) postings: BTreeMap<String, Vec<(u32, u32)>>,
    pub(super) dim: usize,
    /// `num_docs × dim`, row-major
    pub(super) vectors: Vec<f64>,
}

impl KbIndex {
    /// Builds the index; document vectors are computed when `embeddings` is given.
    pub fn build(docs: &[AbstractDoc], embeddings: Option<&EmbeddingTable<f64>>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Empty("cannot index an empty corpus".into()));
        }
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut tokenized = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            if doc.doc_id != i {
                return Err(Error::Malformed(format!(
                    "doc ids must be dense, found {} at {i}",
                    doc.doc_id
                )));
            }
            let tokens = doc.tokens();
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, n) in tf {
                postings.entry(term.to_string()).or_default().push((i as u32, n));
            }
            doc_lengths.push(tokens.len() as u32);
            tokenized.push(tokens);
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_len = total as f64 / docs.len() as f64;
        let mut index = Self {
            params: Bm25::default(),
            titles: docs.iter().map(|d| d.title.clone()).collect(),
            doc_lengths,
            avg_doc_len,
            postings,
            dim: 0,
            vectors: Vec::new(),
        };
        if let Some(table) = embeddings {
            let vectors: Vec<f64> = tokenized
                .iter()
                .flat_map(|tokens| doc_vector(tokens, table, |t| index.idf(t)))
                .collect();
            index.dim = table.dim();
            index.vectors = vectors;
        }
        Ok(index)
    }

    pub fn num_docs(&self) -> usize {
        self.titles.len()
    }

    pub fn title(&self, doc: usize) -> &str {
        &self.titles[doc]
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_length(&self, doc: usize) -> u32 {
        self.doc_lengths[doc]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bm25(&self) -> Bm25 {
        self.params
    }

    pub fn postings(&self, term: &str) -> &[(u32, u32)] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// Inverse document frequency; zero for terms not in the corpus.
    pub fn idf(&self, term: &str) -> f64 {
        match self.doc_freq(term) {
            0 => 0.0,
            df => self.params.idf(self.num_docs(), df),
        }
    }

    pub fn term_freq(&self, term: &str, doc: usize) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&(doc as u32), |&(d, _)| d)
            .map_or(0, |i| list[i].1)
    }

    pub fn doc_vector(&self, doc: usize) -> Option<&[f64]> {
        (self.dim > 0).then(|| &self.vectors[doc * self.dim..(doc + 1) * self.dim])
    }

    /// BM25 over the distinct terms (in first-occurrence order), OR semantics.
    /// Returns up to `k` `(doc_id, score)` pairs, best first, ties to the lower id.
    pub fn search<T: AsRef<str>>(&self, terms: &[T], k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in dedup(terms) {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = self.params.idf(self.num_docs(), list.len());
            for &(doc, tf) in list {
                let s = self
                    .params
                    .term_score(idf, tf, self.doc_lengths[doc as usize], self.avg_doc_len);
                *scores.entry(doc).or_insert(0.0) += s;
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().map(|(d, s)| (d as usize, s)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked)
    }

    /// Unweighted mean of the top-`k` documents' vectors for the question's
    /// nouns; the zero vector when nothing is retrieved.
    pub fn kb_vector_for_question<T: AsRef<str>>(&self, question: &[T], k: usize) -> Result<Vec<f64>> {
        if self.dim == 0 {
            return Err(Error::Dimension(
                "index was built without embeddings; no document vectors".into(),
            ));
        }
        let nouns = extract_query_nouns(question);
        let hits = self.search(&nouns, k)?;
        let mut out = vec![0.0; self.dim];
        if hits.is_empty() {
            return Ok(out);
        }
        for &(doc, _) in &hits {
            for (o, &v) in out.iter_mut().zip(self.doc_vector(doc).expect("dim > 0")) {
                *o += v;
            }
        }
        let n = hits.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }
}

fn dedup<T: AsRef<str>>(terms: &[T]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for t in terms {
        if !out.contains(&t.as_ref()) {
            out.push(t.as_ref());
        }
    }
    out
}

/// idf-weighted mean of the embeddings of `tokens`, scaled to unit length.
/// Tokens without an embedding are skipped; if none remain (or the weighted
/// sum vanishes) the result is the zero vector.
pub fn doc_vector<T: AsRef<str>>(tokens: &[T], table: &EmbeddingTable<f64>, idf: impl Fn(&str) -> f64) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim()];
    let mut weight = 0.0;
    for t in tokens {
        let Some(e) = table.lookup(t.as_ref()) else { continue };
        let w = idf(t.as_ref());
        for (a, &v) in acc.iter_mut().zip(e) {
            *a += w * v;
        }
        weight += w;
    }
    if weight <= 0.0 {
        return vec![0.0; table.dim()];
    }
    acc.iter_mut().for_each(|a| *a /= weight);
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return vec![0.0; table.dim()];
    }
    acc.into_iter().map(|v| v / norm).collect()
}
