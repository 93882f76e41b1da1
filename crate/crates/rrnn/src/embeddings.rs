//! Word embedding tables in the plain text format: one token per line
//! followed by its space-separated components.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    unk: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Later duplicates replace earlier ones.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("embedding dimension must be positive".into()));
        }
        let mut table = EmbeddingTable {
            dim,
            tokens: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            unk: vec![0.0; dim],
        };
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(Error::Format(format!(
                    "vector for {token:?} has {} components, expected {dim}",
                    vector.len()
                )));
            }
            table.insert(token, vector);
        }
        Ok(table)
    }

    fn insert(&mut self, token: String, vector: Vec<f64>) {
        match self.index.get(&token) {
            Some(&i) => self.vectors[i] = vector,
            None => {
                self.index.insert(token.clone(), self.tokens.len());
                self.tokens.push(token);
                self.vectors.push(vector);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn unk_vector(&self) -> &[f64] {
        &self.unk
    }

    /// The token's vector, or the all-zero unknown vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        match self.index.get(token) {
            Some(&i) => &self.vectors[i],
            None => &self.unk,
        }
    }

    pub fn embed(&self, tokens: &[String]) -> Vec<Vec<f64>> {
        tokens.iter().map(|t| self.lookup(t).to_vec()).collect()
    }

    /// Tokens in file order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut dim = None;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("line is not blank").to_string();
            let vector = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(path, line_no, format!("unparseable float {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            match dim {
                None if vector.is_empty() => {
                    return Err(Error::parse(path, line_no, format!("token {token:?} has no vector")));
                }
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("dimension mismatch: expected {d}, found {}", vector.len()),
                    ));
                }
                Some(_) => {}
            }
            entries.push((token, vector));
        }
        let dim = dim.ok_or_else(|| Error::parse(path, 0, "embedding file is empty"))?;
        EmbeddingTable::new(dim, entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Text form, with floats written in their shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (token, vector) in self.tokens.iter().zip(&self.vectors) {
            out.push_str(token);
            for x in vector {
                write!(out, " {x:?}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EmbeddingTable> {
        EmbeddingTable::parse(text, Path::new("emb.txt"))
    }

    #[test]
    fn two_lines() {
        let t = parse("the 0.1 0.2 0.3\ncat -1 0 1e-3\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.lookup("cat"), &[-1.0, 0.0, 1e-3]);
    }

    #[test]
    fn unknown_token_is_zero() {
        let t = parse("a 1 2\n").unwrap();
        assert_eq!(t.lookup("zzz"), &[0.0, 0.0]);
        assert_eq!(t.unk_vector(), &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_names_line() {
        let err = parse("a 1 2\nb 1 2\nc 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn bad_float_names_line() {
        let err = parse("a 1 2\nb 1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse("a 1 NaN\n").is_err());
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(parse("").is_err());
        assert!(parse("lonely\n").is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = EmbeddingTable::new(
            2,
            [
                ("x".to_string(), vec![0.1 + 0.2, -1e-300]),
                ("y".to_string(), vec![std::f64::consts::PI, 5.0]),
            ],
        )
        .unwrap();
        assert_eq!(parse(&t.to_text()).unwrap(), t);
    }
}
