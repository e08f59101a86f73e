//! LIBSVM text format: one sample per line, `label idx:val idx:val ...` with
//! 1-based feature indices. Text after `#` is ignored.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use visolve_core::dataset::{SparseDataset, SparseRow};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LibsvmOptions {
    /// Declared feature count; the dataset dimension is the larger of this and
    /// the largest index seen.
    pub dim: Option<usize>,
    /// Map labels `-1 → 0` and `+1 → 1`. Other labels pass through.
    pub binary_labels: bool,
}

fn line_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Libsvm {
        line,
        reason: reason.into(),
    }
}

fn parse_line(text: &str, line: usize, opts: &LibsvmOptions) -> Result<Option<(f64, SparseRow)>> {
    let body = text.split('#').next().unwrap_or("");
    let mut tokens = body.split_whitespace();
    let Some(label) = tokens.next() else {
        return Ok(None);
    };
    let mut label: f64 = label
        .parse()
        .map_err(|_| line_err(line, format!("bad label `{label}`")))?;
    if !label.is_finite() {
        return Err(line_err(line, "label is not finite"));
    }
    if opts.binary_labels {
        if label == -1.0 {
            label = 0.0;
        } else if label == 1.0 {
            label = 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| line_err(line, format!("token `{tok}` is not idx:val")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| line_err(line, format!("bad index in `{tok}`")))?;
        if idx == 0 {
            return Err(line_err(line, "indices are 1-based"));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| line_err(line, format!("bad value in `{tok}`")))?;
        if !val.is_finite() {
            return Err(line_err(line, format!("value in `{tok}` is not finite")));
        }
        if let Some(&(prev, _)) = entries.last() {
            if idx - 1 <= prev {
                return Err(line_err(
                    line,
                    format!("index {idx} does not increase over {}", prev + 1),
                ));
            }
        }
        entries.push((idx - 1, val));
    }
    Ok(Some((label, SparseRow { entries })))
}

pub fn parse_libsvm<R: BufRead>(reader: R, opts: &LibsvmOptions) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut last = 0;
    for (k, text) in reader.lines().enumerate() {
        last = k + 1;
        let text = text.map_err(|e| line_err(last, e.to_string()))?;
        if let Some((label, row)) = parse_line(&text, last, opts)? {
            labels.push(label);
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(line_err(last.max(1), "no samples in input"));
    }
    let seen = rows
        .iter()
        .filter_map(SparseRow::max_index)
        .map(|k| k + 1)
        .max()
        .unwrap_or(0);
    let dim = opts.dim.map_or(seen, |d| d.max(seen));
    Ok(SparseDataset::new(rows, labels, Some(dim))?)
}

pub fn parse_libsvm_str(text: &str, opts: &LibsvmOptions) -> Result<SparseDataset> {
    parse_libsvm(text.as_bytes(), opts)
}

pub fn load_libsvm(path: &Path, opts: &LibsvmOptions) -> Result<SparseDataset> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_libsvm(BufReader::new(file), opts)
}
