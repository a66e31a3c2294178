//! Greedy near-duplicate removal inside each identity.

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingSet, LabeledEmbeddingSet};
use crate::error::{IqError, Result};
use crate::kernel;

/// One dropped row and the kept row that triggered the drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupRemoval {
    pub row: usize,
    pub kept_row: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupLog {
    pub threshold: f64,
    pub removed: Vec<DedupRemoval>,
}

/// Drops rows whose cosine similarity to an already kept row of the same
/// identity is at least `threshold`. Rows are scanned in index order and kept
/// rows stay in their original relative order. Log indices refer to `set`.
pub fn dedup_within_identity(
    set: &LabeledEmbeddingSet,
    threshold: f64,
) -> Result<(LabeledEmbeddingSet, DedupLog)> {
    check_threshold(threshold)?;
    if !set.embeddings().unit_normalized() {
        return Err(IqError::NotNormalized);
    }
    let mut keep = vec![true; set.n()];
    let mut removed = Vec::new();
    for rows in set.identity_index().values() {
        let (_, dropped) = dedup_pool(set.embeddings(), rows, threshold);
        for r in dropped {
            keep[r.row] = false;
            removed.push(r);
        }
    }
    removed.sort_by_key(|r| r.row);
    let kept: Vec<usize> = (0..set.n()).filter(|&i| keep[i]).collect();
    Ok((set.select_rows(&kept)?, DedupLog { threshold, removed }))
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(IqError::Config(format!(
            "dedup threshold must lie in (0, 1], got {threshold}"
        )));
    }
    Ok(())
}

/// Greedy scan over one pool of row indices. Cosine is computed with the
/// row norms, so unnormalized input is handled too.
pub(crate) fn dedup_pool(
    set: &EmbeddingSet,
    rows: &[usize],
    threshold: f64,
) -> (Vec<usize>, Vec<DedupRemoval>) {
    let unit = set.unit_normalized();
    let norm = |i: usize| {
        if unit {
            1.0
        } else {
            kernel::norm_sq(set.row(i)).sqrt()
        }
    };
    let mut kept: Vec<(usize, f64)> = Vec::with_capacity(rows.len());
    let mut removed = Vec::new();
    for &i in rows {
        let ni = norm(i);
        let hit = kept.iter().find_map(|&(j, nj)| {
            let denom = ni * nj;
            let sim = if denom > 0.0 {
                kernel::dot(set.row(i), set.row(j)) / denom
            } else {
                0.0
            };
            (sim >= threshold).then_some((j, sim))
        });
        match hit {
            Some((j, sim)) => removed.push(DedupRemoval {
                row: i,
                kept_row: j,
                similarity: sim,
            }),
            None => kept.push((i, ni)),
        }
    }
    (kept.into_iter().map(|(i, _)| i).collect(), removed)
}
