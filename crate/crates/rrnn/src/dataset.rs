//! Labeled documents stored one per line as `LABEL<TAB>text`.

use std::fmt::Write as _;
use std::path::Path;

use rrnn_core::{Example, Label};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_TOKENS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDoc {
    pub tokens: Vec<String>,
    pub label: Label,
}

impl LabeledDoc {
    pub fn to_example(&self, table: &EmbeddingTable) -> Example {
        Example {
            inputs: table.embed(&self.tokens),
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub docs: Vec<LabeledDoc>,
    /// Lines dropped for having fewer than the minimum number of tokens.
    pub dropped: usize,
}

impl Dataset {
    pub fn to_examples(&self, table: &EmbeddingTable) -> Vec<Example> {
        self.docs.iter().map(|d| d.to_example(table)).collect()
    }
}

/// Whitespace split followed by lowercasing.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn parse_label(field: &str) -> Option<Label> {
    match field.trim() {
        "1" | "+1" => Some(Label::Positive),
        "-1" => Some(Label::Negative),
        _ => None,
    }
}

pub fn parse_dataset(text: &str, path: &Path, min_tokens: usize) -> Result<Dataset> {
    let mut data = Dataset::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n + 1, "expected LABEL<TAB>text"))?;
        let label = parse_label(label)
            .ok_or_else(|| Error::parse(path, n + 1, format!("label {label:?} is not 1 or -1")))?;
        let tokens = tokenize(body);
        if tokens.len() < min_tokens.max(1) {
            data.dropped += 1;
            continue;
        }
        data.docs.push(LabeledDoc { tokens, label });
    }
    if data.docs.is_empty() && data.dropped == 0 {
        log::warn!("{}: dataset is empty", path.display());
    }
    if data.dropped > 0 {
        log::info!(
            "{}: dropped {} documents shorter than {min_tokens} tokens",
            path.display(),
            data.dropped
        );
    }
    Ok(data)
}

pub fn load_dataset(path: &Path, min_tokens: usize) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path, min_tokens)
}

pub fn dataset_to_text(docs: &[LabeledDoc]) -> String {
    let mut out = String::new();
    for doc in docs {
        let label = match doc.label {
            Label::Positive => "1",
            Label::Negative => "-1",
        };
        writeln!(out, "{label}\t{}", doc.tokens.join(" ")).expect("writing to a String");
    }
    out
}

pub fn save_dataset(path: &Path, docs: &[LabeledDoc]) -> Result<()> {
    std::fs::write(path, dataset_to_text(docs)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, min_tokens: usize) -> Result<Dataset> {
        parse_dataset(text, Path::new("data.tsv"), min_tokens)
    }

    #[test]
    fn one_positive_line() {
        let d = parse("1\tgreat product works\n", 2).unwrap();
        assert_eq!(d.docs.len(), 1);
        assert_eq!(d.docs[0].label, Label::Positive);
        assert_eq!(d.docs[0].tokens, ["great", "product", "works"]);
    }

    #[test]
    fn short_documents_are_dropped() {
        let d = parse("-1\ttoo short to keep\n1\tthis one has five tokens\n", 5).unwrap();
        assert_eq!(d.dropped, 1);
        assert_eq!(d.docs.len(), 1);
    }

    #[test]
    fn empty_file_gives_empty_dataset() {
        assert_eq!(parse("", 5).unwrap(), Dataset::default());
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let err = parse("1\tfine line here ok yes\nno tab here\n", 1).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("3\tbad label\n", 1).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn tokenizer_is_idempotent() {
        let once = tokenize("  Hello   WORLD\tFoo ");
        assert_eq!(once, ["hello", "world", "foo"]);
        assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn text_round_trip() {
        let docs = vec![
            LabeledDoc {
                tokens: tokenize("a b c"),
                label: Label::Negative,
            },
            LabeledDoc {
                tokens: tokenize("d e"),
                label: Label::Positive,
            },
        ];
        assert_eq!(parse(&dataset_to_text(&docs), 1).unwrap().docs, docs);
    }

    #[test]
    fn embedded_documents_have_uniform_dimension() {
        let table = EmbeddingTable::parse("a 1 2 3\nb 4 5 6\n", Path::new("e")).unwrap();
        let ex = LabeledDoc {
            tokens: tokenize("a zzz b"),
            label: Label::Positive,
        }
        .to_example(&table);
        assert!(ex.inputs.iter().all(|v| v.len() == 3));
        assert_eq!(ex.inputs[1], [0.0; 3]);
    }
}
