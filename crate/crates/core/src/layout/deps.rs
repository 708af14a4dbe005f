use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarse part-of-speech tag carried by parse tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Verb,
    Adp,
    Wh,
    Other,
}

impl Pos {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NOUN" => Some(Pos::Noun),
            "VERB" => Some(Pos::Verb),
            "ADP" => Some(Pos::Adp),
            "WH" => Some(Pos::Wh),
            "OTHER" => Some(Pos::Other),
            _ => None,
        }
    }
}

/// One token of a dependency parse. `index` is 1-based; `head == 0` marks the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepToken {
    pub index: usize,
    pub form: String,
    pub head: usize,
    pub relation: String,
    pub pos: Pos,
}

impl DepToken {
    pub fn new(index: usize, form: &str, head: usize, relation: &str, pos: Pos) -> Self {
        Self {
            index,
            form: form.to_string(),
            head,
            relation: relation.to_string(),
            pos,
        }
    }
}

/// Checks indices are 1..=n in order, heads are in range and there is one root.
pub fn validate_sentence(tokens: &[DepToken]) -> Result<()> {
    let n = tokens.len();
    if n == 0 {
        return Err(Error::Empty("dependency parse with no tokens".into()));
    }
    for (i, t) in tokens.iter().enumerate() {
        if t.index != i + 1 {
            return Err(Error::Malformed(format!(
                "token {} has index {}, expected {}",
                t.form,
                t.index,
                i + 1
            )));
        }
        if t.head > n || t.head == t.index {
            return Err(Error::Malformed(format!(
                "token {} has head {} outside [0, {n}]",
                t.form, t.head
            )));
        }
    }
    let roots = tokens.iter().filter(|t| t.head == 0).count();
    if roots != 1 {
        return Err(Error::Malformed(format!(
            "parse has {roots} root tokens, expected exactly one"
        )));
    }
    Ok(())
}

/// Reads tab-separated `index form head relation pos` lines; sentences are
/// separated by blank lines and `#` lines are comments.
pub fn parse_dep_parses(text: &str) -> Result<Vec<Vec<DepToken>>> {
    let mut sentences = Vec::new();
    let mut current: Vec<DepToken> = Vec::new();
    let mut start_line = 1;
    let flush = |current: &mut Vec<DepToken>, sentences: &mut Vec<Vec<DepToken>>, line: usize| -> Result<()> {
        if current.is_empty() {
            return Ok(());
        }
        validate_sentence(current).map_err(|e| Error::DepParse {
            line,
            msg: e.to_string(),
        })?;
        sentences.push(std::mem::take(current));
        Ok(())
    };
    for (lineno, raw) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut current, &mut sentences, start_line)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if current.is_empty() {
            start_line = lineno;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::DepParse {
                line: lineno,
                msg: format!("expected 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::DepParse {
            line: lineno,
            msg: format!("bad {what}"),
        };
        let index = fields[0].parse().map_err(|_| bad("index"))?;
        let head = fields[2].parse().map_err(|_| bad("head"))?;
        let pos = Pos::parse(fields[4]).ok_or_else(|| bad("pos tag"))?;
        if fields[1].is_empty() {
            return Err(bad("form"));
        }
        current.push(DepToken::new(index, fields[1], head, fields[3], pos));
    }
    flush(&mut current, &mut sentences, start_line)?;
    Ok(sentences)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PERSON: &str = "1\tWhat\t5\tdobj\tWH\n2\tis\t5\taux\tOTHER\n3\tthis\t4\tdet\tOTHER\n4\tperson\t5\tnsubj\tNOUN\n5\tplaying\t0\troot\tVERB\n";

    #[test]
    fn reads_sentences_and_comments() {
        let text = format!("# first\n{PERSON}\n\n1\tdogs\t0\troot\tnoun\n");
        let s = parse_dep_parses(&text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0][4], DepToken::new(5, "playing", 0, "root", Pos::Verb));
        assert_eq!(s[1][0].pos, Pos::Noun);
    }

    #[test]
    fn rejects_two_roots_and_bad_heads() {
        assert!(parse_dep_parses("1\ta\t0\troot\tNOUN\n2\tb\t0\troot\tNOUN\n").is_err());
        assert!(parse_dep_parses("1\ta\t3\tx\tNOUN\n2\tb\t0\troot\tNOUN\n").is_err());
        assert!(parse_dep_parses("1\ta\t0\troot\n").is_err());
        assert!(parse_dep_parses("1\ta\t0\troot\tADJ\n").is_err());
        assert!(parse_dep_parses("2\ta\t0\troot\tNOUN\n").is_err());
    }
}
