use super::{Layout, ModuleKind};
use crate::error::{Error, Result};

/// Parses the parenthesised layout syntax, e.g. `Describe(Find(person))`.
///
/// Positions in errors are character offsets into `text`.
pub fn parse_layout_sexpr(text: &str) -> Result<Layout> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let layout = p.layout()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("trailing input after layout"));
    }
    Ok(layout)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

fn is_word_char(c: char) -> bool {
    !(c.is_whitespace() || matches!(c, '(' | ')' | ','))
}

impl Parser {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::LayoutSyntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(found) if found == c => {
                self.pos += 1;
                Ok(())
            }
            Some(found) => Err(self.error(format!("expected `{c}`, found `{found}`"))),
            None => Err(self.error(format!("expected `{c}`, found end of input"))),
        }
    }

    fn word(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(is_word_char) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn layout(&mut self) -> Result<Layout> {
        self.skip_ws();
        let start = self.pos;
        let name = self.word()?;
        let kind = ModuleKind::from_name(&name).ok_or_else(|| Error::LayoutSyntax {
            pos: start,
            msg: format!("unknown module `{name}`"),
        })?;
        self.expect('(')?;
        if kind == ModuleKind::Find {
            let word = self.word()?;
            self.expect(')')?;
            return Ok(Layout::find(&word));
        }
        let mut children = Vec::new();
        self.skip_ws();
        if self.peek() != Some(')') {
            loop {
                children.push(self.layout()?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    _ => break,
                }
            }
        }
        self.expect(')')?;
        if children.len() != kind.arity() {
            return Err(Error::LayoutSyntax {
                pos: start,
                msg: format!(
                    "{} takes {} argument(s), got {}",
                    kind.name(),
                    kind.arity(),
                    children.len()
                ),
            });
        }
        Ok(Layout {
            kind,
            word: None,
            children,
        })
    }
}
