use super::{Layout, ModuleKind, PortType};
use crate::error::{Error, Result};

/// Accepts a layout iff every port composes and the root yields label scores.
///
/// Paths in errors read `root`, `root.0`, `root.0.1`, ... (child indices).
pub fn type_check(layout: &Layout) -> Result<()> {
    let out = infer(layout, &mut vec![])?;
    if out != PortType::LabelScores {
        return Err(Error::LayoutType {
            path: "root".into(),
            expected: PortType::LabelScores.to_string(),
            actual: out.to_string(),
        });
    }
    Ok(())
}

fn path_string(path: &[usize]) -> String {
    let mut s = String::from("root");
    for i in path {
        s.push('.');
        s.push_str(&i.to_string());
    }
    s
}

fn infer(node: &Layout, path: &mut Vec<usize>) -> Result<PortType> {
    let kind = node.kind;
    if node.children.len() != kind.arity() {
        return Err(Error::LayoutType {
            path: path_string(path),
            expected: format!("{} child(ren) for {}", kind.arity(), kind.name()),
            actual: format!("{} child(ren)", node.children.len()),
        });
    }
    match (&node.word, kind) {
        (None, ModuleKind::Find) => {
            return Err(Error::LayoutType {
                path: path_string(path),
                expected: "Find with a word".into(),
                actual: "Find without a word".into(),
            })
        }
        (Some(w), k) if k != ModuleKind::Find => {
            return Err(Error::LayoutType {
                path: path_string(path),
                expected: format!("{} without a word", k.name()),
                actual: format!("word `{w}`"),
            })
        }
        _ => {}
    }
    for (i, (child, &want)) in node.children.iter().zip(kind.child_inputs()).enumerate() {
        path.push(i);
        let got = infer(child, path)?;
        if got != want {
            return Err(Error::LayoutType {
                path: path_string(path),
                expected: want.to_string(),
                actual: got.to_string(),
            });
        }
        path.pop();
    }
    Ok(kind.output())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_canonical_layouts() {
        type_check(&Layout::describe(Layout::find("w"))).unwrap();
        type_check(&Layout::measure(Layout::and(Layout::find("a"), Layout::find("b")))).unwrap();
    }

    #[test]
    fn measure_of_describe_is_rejected() {
        let l = Layout::measure(Layout::describe(Layout::find("w")));
        match type_check(&l) {
            Err(Error::LayoutType { path, expected, actual }) => {
                assert_eq!(path, "root.0");
                assert_eq!(expected, "AttentionMap");
                assert_eq!(actual, "LabelScores");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn attention_root_is_rejected() {
        assert!(type_check(&Layout::find("w")).is_err());
        assert!(type_check(&Layout::and(Layout::find("a"), Layout::find("b"))).is_err());
    }

    #[test]
    fn arity_and_word_violations_are_rejected() {
        let bad = Layout {
            kind: ModuleKind::And,
            word: None,
            children: vec![Layout::find("a")],
        };
        assert!(type_check(&Layout::describe(bad)).is_err());
        let wordless = Layout {
            kind: ModuleKind::Find,
            word: None,
            children: vec![],
        };
        assert!(type_check(&Layout::describe(wordless)).is_err());
    }
}
