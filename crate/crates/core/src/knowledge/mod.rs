//! Background-knowledge retrieval: abstract ingestion, BM25 search and
//! document vectors for seeding the question encoder.

mod index;
pub mod lexicon;
mod persist;

use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

pub use index::{doc_vector, Bm25, KbIndex, DEFAULT_KB_TOPK};
pub use persist::{read_index, write_index, INDEX_MAGIC, INDEX_VERSION};

/// Lowercases, splits on non-alphanumeric characters and drops empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractDoc {
    pub doc_id: usize,
    pub title: String,
    pub text: String,
    pub token_count: usize,
}

impl AbstractDoc {
    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    pub docs: Vec<AbstractDoc>,
    /// Well-formed lines whose title failed the noun filter.
    pub dropped: usize,
    /// Lines without a title and a text separated by a tab.
    pub malformed: usize,
}

/// True when every title word is capitalized or a listed common noun.
pub fn title_is_noun(title: &str) -> bool {
    let mut words = title
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .peekable();
    if words.peek().is_none() {
        return false;
    }
    words.all(|w| w.chars().next().is_some_and(char::is_uppercase) || lexicon::is_common_noun(&w.to_lowercase()))
}

/// Parses `title<TAB>text` lines, keeping noun-titled articles with dense ids.
pub fn parse_abstracts(text: &str) -> Result<Ingested> {
    let mut docs = Vec::new();
    let (mut dropped, mut malformed) = (0, 0);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some((title, body)) = line.split_once('\t') else {
            warn!("abstracts line {}: no tab separator, skipped", lineno + 1);
            malformed += 1;
            continue;
        };
        let title = title.trim();
        if title.is_empty() {
            warn!("abstracts line {}: empty title, skipped", lineno + 1);
            malformed += 1;
            continue;
        }
        if !title_is_noun(title) {
            dropped += 1;
            continue;
        }
        let token_count = tokenize(body).len();
        docs.push(AbstractDoc {
            doc_id: docs.len(),
            title: title.to_string(),
            text: body.to_string(),
            token_count,
        });
    }
    if docs.is_empty() {
        return Err(Error::Empty(format!(
            "no abstracts kept ({dropped} dropped by the title filter, {malformed} malformed)"
        )));
    }
    Ok(Ingested {
        docs,
        dropped,
        malformed,
    })
}

pub fn ingest_abstracts(path: &Path) -> Result<Ingested> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_abstracts(&text)
}

/// Content words of a question, lowercased, in order, without repeats.
pub fn extract_query_nouns<T: AsRef<str>>(question: &[T]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for token in question {
        for t in tokenize(token.as_ref()) {
            if !lexicon::is_query_filler(&t) && !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_rules() {
        assert_eq!(
            tokenize("Pizza is an Italian dish, (flat-bread)!"),
            vec!["pizza", "is", "an", "italian", "dish", "flat", "bread"]
        );
        assert!(tokenize(" ,; ").is_empty());
    }

    #[test]
    fn title_filter() {
        assert!(title_is_noun("Pizza"));
        assert!(title_is_noun("New York City"));
        assert!(title_is_noun("pizza"));
        assert!(!title_is_noun("let it be"));
        assert!(!title_is_noun(""));
    }

    #[test]
    fn toy_file_keeps_two() {
        let text = "Pizza\tPizza is a dish.\nno tab here\nBread\tBread is baked.\n";
        let got = parse_abstracts(text).unwrap();
        assert_eq!(got.docs.len(), 2);
        assert_eq!(got.malformed, 1);
        assert_eq!(got.docs.iter().map(|d| d.doc_id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(got.docs[0].token_count, 4);
        assert!(parse_abstracts("let it be\tsong\n").is_err());
    }

    #[test]
    fn query_nouns() {
        let q = |s: &str| extract_query_nouns(&s.split(' ').collect::<Vec<_>>());
        assert_eq!(q("what toppings are on the pizza"), vec!["toppings", "pizza"]);
        assert!(q("is it").is_empty());
        assert_eq!(q("why are the people wearing helmets"), vec!["people", "helmets"]);
        assert_eq!(q("What pizza has pizza"), vec!["pizza"]);
    }
}
