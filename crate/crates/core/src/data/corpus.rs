//! JSON-lines corpora: one `{"text": ..., "label": 0|1}` object per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Document, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub text: String,
    pub label: Label,
}

pub fn read_corpus(path: &Path, feat_dim: usize) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    read_corpus_str(&text, &name, path, feat_dim)
}

/// Parses corpus text; `origin` only labels error messages. Blank lines are
/// skipped.
pub fn read_corpus_str(text: &str, name: &str, origin: &Path, feat_dim: usize) -> Result<Dataset> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let corpus_err = |message: String| Error::Corpus {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: CorpusRecord = serde_json::from_str(line).map_err(|e| corpus_err(e.to_string()))?;
        if rec.label > 1 {
            return Err(corpus_err(format!("label must be 0 or 1, got {}", rec.label)));
        }
        docs.push(Document::new(rec.text, rec.label, feat_dim)?);
    }
    Dataset::new(name, docs).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", origin.display())),
        other => other,
    })
}

pub fn write_corpus<'a, I>(path: &Path, records: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, Label)>,
{
    let mut out = String::new();
    for (text, label) in records {
        let line = serde_json::to_string(&CorpusRecord {
            text: text.to_owned(),
            label,
        })?;
        writeln!(out, "{line}").expect("writing to a String cannot fail");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
