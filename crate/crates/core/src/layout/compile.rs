//! Dependency parse → layout compilation.
//!
//! Words are collected around the wh-phrase: the first WH-tagged token
//! together with the WH tokens immediately following it ("how many",
//! "what color"), or the first token when nothing is tagged WH. NOUN and
//! VERB tokens within [`MAX_HOPS`] tree edges of that phrase become Find
//! modules; an ADP token in range contributes its NOUN dependents at the
//! ADP's distance.

use std::collections::VecDeque;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::deps::{validate_sentence, DepToken, Pos};
use super::{Layout, ModuleKind};
use crate::error::{Error, Result};

pub const MAX_HOPS: usize = 2;

/// First tokens that mark a yes/no question.
pub const AUXILIARIES: [&str; 12] = [
    "is", "are", "does", "do", "was", "were", "has", "have", "can", "could", "will", "would",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    #[default]
    Short,
    Longest,
}

impl FromStr for ParseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(ParseMode::Short),
            "longest" => Ok(ParseMode::Longest),
            _ => Err(Error::InvalidArgument(format!("unknown parse mode `{s}`"))),
        }
    }
}

/// Which question families get a Measure module on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopPolicy {
    #[default]
    None,
    Count,
    YesNo,
    Both,
}

impl TopPolicy {
    pub fn counting(self) -> bool {
        matches!(self, TopPolicy::Count | TopPolicy::Both)
    }

    pub fn yes_no(self) -> bool {
        matches!(self, TopPolicy::YesNo | TopPolicy::Both)
    }
}

impl FromStr for TopPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TopPolicy::None),
            "count" => Ok(TopPolicy::Count),
            "yesno" => Ok(TopPolicy::YesNo),
            "both" => Ok(TopPolicy::Both),
            _ => Err(Error::InvalidArgument(format!("unknown measure policy `{s}`"))),
        }
    }
}

/// Top module selection: decided by [`top_module_policy`] or forced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopModule {
    Auto(TopPolicy),
    Describe,
    Measure,
}

/// Describe, or Measure for the question families enabled in `policy`.
pub fn top_module_policy<T: AsRef<str>>(question: &[T], policy: TopPolicy) -> ModuleKind {
    let word = |i: usize| question.get(i).map(|t| t.as_ref().to_lowercase());
    let first = word(0);
    let yes_no = first.as_deref().is_some_and(|w| AUXILIARIES.contains(&w));
    let counting = first.as_deref() == Some("how") && word(1).as_deref() == Some("many");
    if (policy.yes_no() && yes_no) || (policy.counting() && counting) {
        ModuleKind::Measure
    } else {
        ModuleKind::Describe
    }
}

struct Candidate {
    index: usize,
    hops: usize,
    word: String,
    noun: bool,
}

pub fn compile_from_parse(tokens: &[DepToken], mode: ParseMode, top: TopModule) -> Result<Layout> {
    validate_sentence(tokens)?;
    if !tokens.iter().any(|t| t.pos == Pos::Noun) {
        return Err(Error::Uncompilable(format!(
            "no noun in `{}`",
            tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ")
        )));
    }
    let n = tokens.len();
    let anchors = wh_phrase(tokens);
    let hops = distances(tokens, &anchors);

    let mut found: Vec<Candidate> = Vec::new();
    let add = |index: usize, hops: usize, noun: bool, found: &mut Vec<Candidate>| match found
        .iter_mut()
        .find(|c| c.index == index)
    {
        Some(c) => c.hops = c.hops.min(hops),
        None => found.push(Candidate {
            index,
            hops,
            word: tokens[index].form.to_lowercase(),
            noun,
        }),
    };
    for (i, t) in tokens.iter().enumerate() {
        if anchors.contains(&i) || hops[i] > MAX_HOPS {
            continue;
        }
        match t.pos {
            Pos::Noun => add(i, hops[i], true, &mut found),
            Pos::Verb => add(i, hops[i], false, &mut found),
            Pos::Adp => {
                for (j, dep) in tokens.iter().enumerate() {
                    if dep.head == t.index && dep.pos == Pos::Noun && !anchors.contains(&j) {
                        add(j, hops[i], true, &mut found);
                    }
                }
            }
            Pos::Wh | Pos::Other => {}
        }
    }
    if !found.iter().any(|c| c.noun) {
        // Nothing nominal near the wh-phrase: fall back to the nearest noun anywhere.
        let (i, _) = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.pos == Pos::Noun)
            .map(|(i, _)| (i, hops[i]))
            .min_by_key(|&(i, h)| (h, i))
            .expect("a noun exists");
        add(i, hops[i], true, &mut found);
    }
    debug_assert!(found.iter().all(|c| c.index < n));

    let words: Vec<&str> = match mode {
        ParseMode::Short => {
            let nearest = found
                .iter()
                .filter(|c| c.noun)
                .min_by_key(|c| (c.hops, c.index))
                .expect("at least one noun collected");
            vec![nearest.word.as_str()]
        }
        ParseMode::Longest => {
            found.sort_by_key(|c| c.index);
            found.iter().map(|c| c.word.as_str()).collect()
        }
    };
    let mut att = Layout::find(words[0]);
    for w in &words[1..] {
        att = Layout::and(att, Layout::find(w));
    }
    let kind = match top {
        TopModule::Auto(policy) => {
            let forms: Vec<&str> = tokens.iter().map(|t| t.form.as_str()).collect();
            top_module_policy(&forms, policy)
        }
        TopModule::Describe => ModuleKind::Describe,
        TopModule::Measure => ModuleKind::Measure,
    };
    Ok(match kind {
        ModuleKind::Measure => Layout::measure(att),
        _ => Layout::describe(att),
    })
}

/// Positions (0-based) of the wh-phrase.
fn wh_phrase(tokens: &[DepToken]) -> Vec<usize> {
    match tokens.iter().position(|t| t.pos == Pos::Wh) {
        Some(start) => (start..tokens.len())
            .take_while(|&i| tokens[i].pos == Pos::Wh)
            .collect(),
        None => vec![0],
    }
}

/// Undirected tree distance from the nearest anchor.
fn distances(tokens: &[DepToken], anchors: &[usize]) -> Vec<usize> {
    let n = tokens.len();
    let mut adj = vec![Vec::new(); n];
    for (i, t) in tokens.iter().enumerate() {
        if t.head > 0 {
            adj[i].push(t.head - 1);
            adj[t.head - 1].push(i);
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &a in anchors {
        dist[a] = 0;
        queue.push_back(a);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}
