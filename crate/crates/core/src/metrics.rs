//! Answer vocabulary, accuracy metrics and question categories.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::AUXILIARIES;

pub const OTHER_ANSWER: &str = "<other>";

/// The `K` most frequent training answers plus a reserved `<other>` class
/// at index `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerVocab {
    answers: Vec<String>,
    index: HashMap<String, usize>,
}

impl AnswerVocab {
    pub fn from_answers(answers: Vec<String>) -> Result<Self> {
        if answers.is_empty() {
            return Err(Error::Empty("answer vocabulary".into()));
        }
        let mut index = HashMap::with_capacity(answers.len());
        for (i, a) in answers.iter().enumerate() {
            if a == OTHER_ANSWER || index.insert(a.clone(), i).is_some() {
                return Err(Error::Malformed(format!("answer `{a}` is duplicated or reserved")));
            }
        }
        Ok(Self { answers, index })
    }

    /// Top-`k` answers by count over every human answer; ties in lexicographic order.
    pub fn build<'a, I>(answer_lists: I, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "answer vocabulary size must be at least 1".into(),
            ));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for list in answer_lists {
            for a in list {
                *counts.entry(a.as_str()).or_default() += 1;
            }
        }
        counts.remove(OTHER_ANSWER);
        if counts.is_empty() {
            return Err(Error::Empty("no answers to build a vocabulary from".into()));
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        // stable sort keeps lexicographic order within equal counts
        ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
        Self::from_answers(ranked.into_iter().take(k).map(|(a, _)| a.to_string()).collect())
    }

    /// Number of real answers `K`.
    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    /// Output dimension of the model: `K + 1`.
    pub fn num_classes(&self) -> usize {
        self.answers.len() + 1
    }

    pub fn other_index(&self) -> usize {
        self.answers.len()
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn get(&self, answer: &str) -> Option<usize> {
        self.index.get(answer).copied()
    }

    /// Training target: the answer's index, or `<other>`.
    pub fn target(&self, answer: &str) -> usize {
        self.get(answer).unwrap_or(self.other_index())
    }

    pub fn label(&self, class: usize) -> &str {
        self.answers.get(class).map_or(OTHER_ANSWER, String::as_str)
    }

    /// Class labels in output order, `<other>` last.
    pub fn labels(&self) -> Vec<&str> {
        self.answers.iter().map(String::as_str).chain([OTHER_ANSWER]).collect()
    }
}

/// Most frequent human answer; ties go to the lexicographically smallest.
pub fn majority_answer(answers: &[String]) -> Option<&str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in answers {
        *counts.entry(a.as_str()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (a, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((a, c));
        }
    }
    best.map(|(a, _)| a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Exact,
    Consensus,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Metric::Exact),
            "consensus" => Ok(Metric::Consensus),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Exact => "exact",
            Metric::Consensus => "consensus",
        })
    }
}

/// `min(matching humans / 3, 1)`.
pub fn consensus_score(prediction: &str, answers: &[String]) -> f64 {
    let matches = answers.iter().filter(|a| *a == prediction).count();
    (matches as f64 / 3.0).min(1.0)
}

pub fn exact_score(prediction: &str, answers: &[String]) -> f64 {
    match majority_answer(answers) {
        Some(a) if a == prediction => 1.0,
        _ => 0.0,
    }
}

impl Metric {
    pub fn score(self, prediction: &str, answers: &[String]) -> f64 {
        match self {
            Metric::Exact => exact_score(prediction, answers),
            Metric::Consensus => consensus_score(prediction, answers),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "yes/no")]
    YesNo,
    #[serde(rename = "number")]
    Number,
    #[serde(rename = "other")]
    Other,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::YesNo, Category::Number, Category::Other];

    pub fn name(self) -> &'static str {
        match self {
            Category::YesNo => "yes/no",
            Category::Number => "number",
            Category::Other => "other",
        }
    }
}

/// yes/no if the question opens with an auxiliary, number if it opens with
/// "how many", other otherwise.
pub fn categorize<T: AsRef<str>>(question: &[T]) -> Category {
    let first = question.first().map(|t| t.as_ref().to_lowercase());
    let second = question.get(1).map(|t| t.as_ref().to_lowercase());
    match (first.as_deref(), second.as_deref()) {
        (Some(w), _) if AUXILIARIES.contains(&w) => Category::YesNo,
        (Some("how"), Some("many")) => Category::Number,
        _ => Category::Other,
    }
}

/// Mean score overall and per category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accuracy {
    pub overall: f64,
    pub count: usize,
    pub per_category: BTreeMap<Category, (f64, usize)>,
}

#[derive(Debug, Default)]
pub struct AccuracyTally {
    total: f64,
    count: usize,
    per_category: BTreeMap<Category, (f64, usize)>,
}

impl AccuracyTally {
    pub fn add(&mut self, category: Category, score: f64) {
        self.total += score;
        self.count += 1;
        let e = self.per_category.entry(category).or_default();
        e.0 += score;
        e.1 += 1;
    }

    pub fn finish(self) -> Accuracy {
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        Accuracy {
            overall: mean(self.total, self.count),
            count: self.count,
            per_category: self
                .per_category
                .into_iter()
                .map(|(c, (s, n))| (c, (mean(s, n), n)))
                .collect(),
        }
    }
}
