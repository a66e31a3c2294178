//! Embedding matrices, identity labels and row normalization.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{IqError, Result};
use crate::kernel;

/// Identity label. Labels are opaque; string identities are mapped to
/// integers at ingestion time.
pub type Label = u64;

/// Rows whose norm is within this distance of 1 count as unit length.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

/// Rows with a norm at or below this are rejected by [`l2_normalize_rows`].
pub const MIN_ROW_NORM: f64 = 1e-12;

/// Dense row-major `n x d` matrix of f32 embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n: usize,
    d: usize,
    data: Vec<f32>,
    unit_normalized: bool,
}

impl EmbeddingSet {
    /// Builds a set from row-major data. Rejects empty shapes and non-finite
    /// entries. The unit-norm flag is detected from the data.
    pub fn new(n: usize, d: usize, data: Vec<f32>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(IqError::Shape(format!(
                "need n >= 1 and d >= 1, got {n} x {d}"
            )));
        }
        if data.len() != n * d {
            return Err(IqError::Shape(format!(
                "{} values do not fill a {n} x {d} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(IqError::NonFiniteValue {
                row: pos / d,
                col: pos % d,
            });
        }
        let unit_normalized = data
            .chunks_exact(d)
            .all(|row| (kernel::norm_sq(row).sqrt() - 1.0).abs() <= UNIT_NORM_TOLERANCE);
        Ok(Self {
            n,
            d,
            data,
            unit_normalized,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(IqError::Shape(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn unit_normalized(&self) -> bool {
        self.unit_normalized
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.d)
    }

    /// Gathers the given rows into a new set, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.d);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        let mut out = Self::new(rows.len(), self.d, data)?;
        out.unit_normalized = self.unit_normalized;
        Ok(out)
    }

    /// Multiplies every entry by `s`; the unit-norm flag is recomputed.
    pub fn scaled(&self, s: f32) -> Result<Self> {
        Self::new(self.n, self.d, self.data.iter().map(|v| v * s).collect())
    }
}

/// Scales every row to unit Euclidean norm.
pub fn l2_normalize_rows(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let d = set.d;
    let mut data = Vec::with_capacity(set.data.len());
    for (i, row) in set.rows().enumerate() {
        let norm = kernel::norm_sq(row).sqrt();
        if norm <= MIN_ROW_NORM {
            return Err(IqError::ZeroNormRow(i));
        }
        data.extend(row.iter().map(|&v| (v as f64 / norm) as f32));
    }
    Ok(EmbeddingSet {
        n: set.n,
        d,
        data,
        unit_normalized: true,
    })
}

/// An embedding set with one identity label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddingSet {
    embeddings: EmbeddingSet,
    labels: Vec<Label>,
    identity_index: BTreeMap<Label, Vec<usize>>,
    source_ids: Option<Vec<u64>>,
    label_names: Option<Vec<String>>,
}

impl LabeledEmbeddingSet {
    pub fn new(embeddings: EmbeddingSet, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != embeddings.n() {
            return Err(IqError::LabelCountMismatch {
                labels: labels.len(),
                rows: embeddings.n(),
            });
        }
        let identity_index = build_index(&labels);
        Ok(Self {
            embeddings,
            labels,
            identity_index,
            source_ids: None,
            label_names: None,
        })
    }

    /// Attaches per-row source ids (e.g. row numbers in the originating file).
    pub fn with_source_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.labels.len() {
            return Err(IqError::LengthMismatch {
                expected: self.labels.len(),
                actual: ids.len(),
            });
        }
        self.source_ids = Some(ids);
        Ok(self)
    }

    /// Attaches the string name of each integer label (index = label).
    pub fn with_label_names(mut self, names: Vec<String>) -> Self {
        self.label_names = Some(names);
        self
    }

    pub fn embeddings(&self) -> &EmbeddingSet {
        &self.embeddings
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn identity_index(&self) -> &BTreeMap<Label, Vec<usize>> {
        &self.identity_index
    }

    pub fn source_ids(&self) -> Option<&[u64]> {
        self.source_ids.as_deref()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn n(&self) -> usize {
        self.embeddings.n()
    }

    pub fn d(&self) -> usize {
        self.embeddings.d()
    }

    pub fn num_identities(&self) -> usize {
        self.identity_index.len()
    }

    /// Source id of row `i`: the attached id if present, else `i` itself.
    pub fn source_id(&self, i: usize) -> u64 {
        self.source_ids.as_ref().map_or(i as u64, |ids| ids[i])
    }

    /// Gathers rows in the given order. Source ids follow the rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let embeddings = self.embeddings.select_rows(rows)?;
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        let ids = rows.iter().map(|&r| self.source_id(r)).collect();
        let mut out = Self::new(embeddings, labels)?.with_source_ids(ids)?;
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Same rows with a replacement label vector.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        let mut out = Self::new(self.embeddings.clone(), labels)?;
        out.source_ids = self.source_ids.clone();
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Same labels with replacement embeddings of identical row count.
    pub fn with_embeddings(&self, embeddings: EmbeddingSet) -> Result<Self> {
        let mut out = Self::new(embeddings, self.labels.clone())?;
        out.source_ids = self.source_ids.clone();
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Row-normalized copy.
    pub fn normalized(&self) -> Result<Self> {
        self.with_embeddings(l2_normalize_rows(&self.embeddings)?)
    }

    /// SHA-256 over shape, raw f32 bits and labels, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.d() as u64).to_le_bytes());
        for v in self.embeddings.data() {
            h.update(v.to_le_bytes());
        }
        for l in &self.labels {
            h.update(l.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn build_index(labels: &[Label]) -> BTreeMap<Label, Vec<usize>> {
    let mut index: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        index.entry(l).or_default().push(i);
    }
    index
}
