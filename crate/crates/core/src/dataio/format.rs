//! Binary (`IQEM` / `IQLB`) and CSV embedding files.
//!
//! Binary embedding layout, little-endian:
//!
//! ```text
//! 0..4    magic "IQEM"
//! 4..8    version (u32) = 1
//! 8..16   n (u64)
//! 16..20  d (u32)
//! 20      dtype code, 0 = f32
//! 21..24  zero padding
//! 24..    n*d f32, row-major
//! ```
//!
//! Binary label layout: magic "IQLB", version (u32) = 1, n (u64), then n i64.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::embedding::{EmbeddingSet, Label, LabeledEmbeddingSet};
use crate::error::{IqError, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"IQEM";
pub const LABEL_MAGIC: &[u8; 4] = b"IQLB";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;
pub const EMBEDDING_HEADER_LEN: usize = 24;
pub const LABEL_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Binary,
    Csv,
}

impl std::str::FromStr for FileFormat {
    type Err = IqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" => Ok(FileFormat::Binary),
            "csv" => Ok(FileFormat::Csv),
            other => Err(IqError::Config(format!("unknown file format '{other}'"))),
        }
    }
}

/// Reads a labeled set. Binary mode needs the companion label file; CSV mode
/// carries labels in its last column and ignores `labels`.
pub fn read_embedding_file(
    path: &Path,
    labels: Option<&Path>,
    format: FileFormat,
) -> Result<LabeledEmbeddingSet> {
    match format {
        FileFormat::Binary => {
            let labels = labels.ok_or_else(|| {
                IqError::Config("binary embedding files need a label file".to_string())
            })?;
            let emb_bytes = fs::read(path).map_err(|e| IqError::io(path, e))?;
            let lab_bytes = fs::read(labels).map_err(|e| IqError::io(labels, e))?;
            let embeddings = decode_embeddings(&emb_bytes)?;
            let labels = decode_labels(&lab_bytes)?;
            LabeledEmbeddingSet::new(embeddings, labels)
        }
        FileFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| IqError::io(path, e))?;
            parse_csv(&text)
        }
    }
}

/// Writes a labeled set. Binary mode writes `path` and the label file.
pub fn write_embedding_file(
    set: &LabeledEmbeddingSet,
    path: &Path,
    labels: Option<&Path>,
    format: FileFormat,
) -> Result<()> {
    match format {
        FileFormat::Binary => {
            let labels = labels.ok_or_else(|| {
                IqError::Config("binary embedding files need a label file".to_string())
            })?;
            fs::write(path, encode_embeddings(set.embeddings()))
                .map_err(|e| IqError::io(path, e))?;
            fs::write(labels, encode_labels(set.labels())?).map_err(|e| IqError::io(labels, e))
        }
        FileFormat::Csv => fs::write(path, render_csv(set)).map_err(|e| IqError::io(path, e)),
    }
}

pub fn encode_embeddings(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMBEDDING_HEADER_LEN + set.data().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.n() as u64).to_le_bytes());
    out.extend_from_slice(&(set.d() as u32).to_le_bytes());
    out.extend_from_slice(&[DTYPE_F32, 0, 0, 0]);
    for v in set.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < EMBEDDING_HEADER_LEN {
        return Err(IqError::format("byte 0", "truncated embedding header"));
    }
    if &bytes[0..4] != EMBEDDING_MAGIC {
        return Err(IqError::format("byte 0", "bad magic, expected IQEM"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(IqError::format(
            "byte 4",
            format!("unsupported version {version}"),
        ));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as u64;
    if bytes[20] != DTYPE_F32 {
        return Err(IqError::format(
            "byte 20",
            format!("unsupported dtype code {}", bytes[20]),
        ));
    }
    if bytes[21..24] != [0, 0, 0] {
        return Err(IqError::format("byte 21", "nonzero header padding"));
    }
    if n == 0 || d == 0 {
        return Err(IqError::format("byte 8", format!("empty shape {n} x {d}")));
    }
    let payload = &bytes[EMBEDDING_HEADER_LEN..];
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| IqError::format("byte 8", "dimension overflow"))?;
    if payload.len() as u64 != expected {
        return Err(IqError::format(
            format!("byte {}", EMBEDDING_HEADER_LEN),
            format!(
                "payload has {} bytes, header implies {expected}",
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingSet::new(n as usize, d as usize, data)
}

pub fn encode_labels(labels: &[Label]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(LABEL_HEADER_LEN + labels.len() * 8);
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u64).to_le_bytes());
    for &l in labels {
        let v = i64::try_from(l)
            .map_err(|_| IqError::Config(format!("label {l} does not fit a signed 64-bit id")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<Label>> {
    if bytes.len() < LABEL_HEADER_LEN {
        return Err(IqError::format("byte 0", "truncated label header"));
    }
    if &bytes[0..4] != LABEL_MAGIC {
        return Err(IqError::format("byte 0", "bad magic, expected IQLB"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(IqError::format(
            "byte 4",
            format!("unsupported version {version}"),
        ));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let payload = &bytes[LABEL_HEADER_LEN..];
    if Some(payload.len() as u64) != n.checked_mul(8) {
        return Err(IqError::format(
            format!("byte {LABEL_HEADER_LEN}"),
            format!(
                "payload has {} bytes, header implies {n} labels",
                payload.len()
            ),
        ));
    }
    payload
        .chunks_exact(8)
        .enumerate()
        .map(|(i, c)| {
            let v = i64::from_le_bytes(c.try_into().unwrap());
            u64::try_from(v).map_err(|_| {
                IqError::format(
                    format!("byte {}", LABEL_HEADER_LEN + 8 * i),
                    "negative label",
                )
            })
        })
        .collect()
}

/// Parses CSV text: `d` numeric columns then one label column. A first row
/// whose leading fields are not all numeric is treated as a header.
///
/// Labels that all parse as non-negative integers are kept verbatim; any
/// other label column is mapped to dense ids in first-appearance order.
pub fn parse_csv(text: &str) -> Result<LabeledEmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| IqError::format(format!("line {}", line + 1), e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push((line + 1, rec));
    }
    let looks_like_header = |rec: &csv::StringRecord| {
        rec.len() >= 2
            && rec
                .iter()
                .take(rec.len() - 1)
                .any(|f| f.parse::<f64>().is_err())
    };
    if rows.first().is_some_and(|(_, r)| looks_like_header(r)) {
        rows.remove(0);
    }
    let Some((_, first)) = rows.first() else {
        return Err(IqError::format("line 1", "no data rows"));
    };
    if first.len() < 2 {
        return Err(IqError::format(
            "line 1",
            "need at least one value column and a label",
        ));
    }
    let d = first.len() - 1;

    let mut data = Vec::with_capacity(rows.len() * d);
    let mut raw_labels = Vec::with_capacity(rows.len());
    for (row, (line, rec)) in rows.iter().enumerate() {
        if rec.len() != d + 1 {
            return Err(IqError::format(
                format!("line {line}"),
                format!("expected {} fields, found {}", d + 1, rec.len()),
            ));
        }
        for col in 0..d {
            let v: f32 = rec[col].parse().map_err(|_| {
                IqError::format(
                    format!("line {line}"),
                    format!("column {col} is not numeric"),
                )
            })?;
            if !v.is_finite() {
                return Err(IqError::NonFiniteValue { row, col });
            }
            data.push(v);
        }
        raw_labels.push(rec[d].to_string());
    }

    let embeddings = EmbeddingSet::new(rows.len(), d, data)?;
    let numeric: Option<Vec<Label>> = raw_labels.iter().map(|s| s.parse::<Label>().ok()).collect();
    match numeric {
        Some(labels) => LabeledEmbeddingSet::new(embeddings, labels),
        None => {
            let mut ids: HashMap<&str, Label> = HashMap::new();
            let mut names = Vec::new();
            let labels = raw_labels
                .iter()
                .map(|s| {
                    *ids.entry(s.as_str()).or_insert_with(|| {
                        names.push(s.clone());
                        (names.len() - 1) as Label
                    })
                })
                .collect();
            Ok(LabeledEmbeddingSet::new(embeddings, labels)?.with_label_names(names))
        }
    }
}

/// Renders a set as CSV without a header. Mapped string labels are written
/// back by name.
pub fn render_csv(set: &LabeledEmbeddingSet) -> String {
    let mut out = String::new();
    for (i, row) in set.embeddings().rows().enumerate() {
        for v in row {
            out.push_str(&v.to_string());
            out.push(',');
        }
        let label = set.labels()[i];
        match set
            .label_names()
            .and_then(|names| names.get(label as usize))
        {
            Some(name) => out.push_str(name),
            None => out.push_str(&label.to_string()),
        }
        out.push('\n');
    }
    out
}
