//! Typed module layouts: the tree a question compiles into.
//!
//! The textual form is `Describe(And(Find(person), Find(playing)))`:
//! module names are case-insensitive on input and capitalised on output,
//! Find words are lowercased.

mod compile;
mod deps;
mod sexpr;
mod typecheck;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use compile::{compile_from_parse, top_module_policy, ParseMode, TopModule, TopPolicy, AUXILIARIES};
pub use deps::{parse_dep_parses, validate_sentence as validate_parse, DepToken, Pos};
pub use sexpr::parse_layout_sexpr;
pub use typecheck::type_check;

/// Value types flowing between modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortType {
    ImageGrid,
    AttentionMap,
    LabelScores,
}

impl fmt::Display for PortType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortType::ImageGrid => "ImageGrid",
            PortType::AttentionMap => "AttentionMap",
            PortType::LabelScores => "LabelScores",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModuleKind {
    Find,
    And,
    Describe,
    Measure,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 4] = [
        ModuleKind::Find,
        ModuleKind::And,
        ModuleKind::Describe,
        ModuleKind::Measure,
    ];

    /// Port types of the explicit (child) inputs. Find and Describe also
    /// read the image grid implicitly.
    pub fn child_inputs(self) -> &'static [PortType] {
        match self {
            ModuleKind::Find => &[],
            ModuleKind::And => &[PortType::AttentionMap, PortType::AttentionMap],
            ModuleKind::Describe | ModuleKind::Measure => &[PortType::AttentionMap],
        }
    }

    pub fn reads_image(self) -> bool {
        matches!(self, ModuleKind::Find | ModuleKind::Describe)
    }

    pub fn output(self) -> PortType {
        match self {
            ModuleKind::Find | ModuleKind::And => PortType::AttentionMap,
            ModuleKind::Describe | ModuleKind::Measure => PortType::LabelScores,
        }
    }

    pub fn arity(self) -> usize {
        self.child_inputs().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModuleKind::Find => "Find",
            ModuleKind::And => "And",
            ModuleKind::Describe => "Describe",
            ModuleKind::Measure => "Measure",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    pub kind: ModuleKind,
    /// Argument word; present exactly for Find.
    pub word: Option<String>,
    pub children: Vec<Layout>,
}

impl Layout {
    pub fn find(word: &str) -> Self {
        Self {
            kind: ModuleKind::Find,
            word: Some(word.to_lowercase()),
            children: Vec::new(),
        }
    }

    pub fn and(a: Layout, b: Layout) -> Self {
        Self {
            kind: ModuleKind::And,
            word: None,
            children: vec![a, b],
        }
    }

    pub fn describe(att: Layout) -> Self {
        Self {
            kind: ModuleKind::Describe,
            word: None,
            children: vec![att],
        }
    }

    pub fn measure(att: Layout) -> Self {
        Self {
            kind: ModuleKind::Measure,
            word: None,
            children: vec![att],
        }
    }

    /// Find words in left-to-right order (with repeats).
    pub fn find_words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let Some(w) = &self.word {
            out.push(w);
        }
        for c in &self.children {
            c.collect_words(out);
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Layout::depth).max().unwrap_or(0)
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind.name())?;
        if let Some(w) = &self.word {
            f.write_str(w)?;
        }
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl std::str::FromStr for Layout {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_layout_sexpr(s)
    }
}
