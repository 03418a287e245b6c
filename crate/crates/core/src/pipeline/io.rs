//! CSV/JSON artefacts written by experiments.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::StepLog;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::metrics::Projection;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Columns: step, epoch, c, carol, recon, total.
pub fn write_training_log(path: &Path, steps: &[StepLog]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "epoch", "c", "carol", "recon", "total"])?;
    for s in steps {
        w.write_record([
            s.step.to_string(),
            s.epoch.to_string(),
            s.loss.c.to_string(),
            s.loss.carol.to_string(),
            s.loss.recon.to_string(),
            s.loss.total.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns: label, e0, e1, ...
pub fn write_embeddings(path: &Path, embeddings: &[Vec<f64>], labels: &[Label]) -> Result<()> {
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut w = writer(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..dim).map(|i| format!("e{i}")));
    w.write_record(&header)?;
    for (e, l) in embeddings.iter().zip(labels) {
        let mut rec = vec![l.to_string()];
        rec.extend(e.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("label") || headers.len() < 2 {
        return Err(Error::Data(format!(
            "{}: expected a header 'label,e0,e1,...'",
            path.display()
        )));
    }
    let mut embeddings = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| Error::Corpus {
            path: path.to_path_buf(),
            line,
            message,
        };
        let label: Label = rec[0]
            .parse()
            .ok()
            .filter(|l| *l <= 1)
            .ok_or_else(|| bad(format!("invalid label '{}'", &rec[0])))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(format!("invalid value '{v}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        labels.push(label);
        embeddings.push(values);
    }
    Ok((embeddings, labels))
}

/// Columns: x, y, label.
pub fn write_projection(path: &Path, projection: &Projection, labels: &[Label]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "label"])?;
    for (p, l) in projection.points.iter().zip(labels) {
        let x = p.first().copied().unwrap_or(0.0);
        let y = p.get(1).copied().unwrap_or(0.0);
        w.write_record([x.to_string(), y.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
