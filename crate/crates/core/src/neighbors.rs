//! Exact cosine k-nearest-neighbor retrieval and neighbor-consistency.
//!
//! Similarities are computed tile by tile: a block of query rows against a
//! block of candidate rows, with a running top-k per query. Candidate blocks
//! are always visited in ascending order and every similarity comes from the
//! same fixed-order dot kernel, so the table is bit-identical for any tile
//! size or worker count.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingSet, Label, LabeledEmbeddingSet};
use crate::error::{IqError, Result};
use crate::kernel;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_BINS: usize = 20;

/// Tile shape for [`exact_topk_cosine_tiled`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileShape {
    pub query_block: usize,
    pub candidate_block: usize,
}

impl Default for TileShape {
    fn default() -> Self {
        Self {
            query_block: 64,
            candidate_block: 256,
        }
    }
}

/// Neighbor lists, self excluded, sorted by descending similarity with ties
/// broken by ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    k: usize,
    n: usize,
    indices: Vec<usize>,
    similarities: Vec<f64>,
}

impl NeighborTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn similarities(&self, i: usize) -> &[f64] {
        &self.similarities[i * self.k..(i + 1) * self.k]
    }

    /// `row,rank,neighbor,similarity` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,rank,neighbor,similarity\n");
        for i in 0..self.n {
            for (rank, (j, s)) in self
                .neighbors(i)
                .iter()
                .zip(self.similarities(i))
                .enumerate()
            {
                let _ = writeln!(out, "{i},{rank},{j},{s}");
            }
        }
        out
    }
}

#[inline]
fn ranks_before(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn rank_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Bounded sorted list of the best `k` candidates seen so far.
struct TopK<'a> {
    sims: &'a mut [f64],
    idx: &'a mut [usize],
    len: usize,
}

impl TopK<'_> {
    #[inline]
    fn offer(&mut self, sim: f64, j: usize) {
        let k = self.sims.len();
        if self.len == k && !ranks_before((sim, j), (self.sims[k - 1], self.idx[k - 1])) {
            return;
        }
        let mut pos = if self.len < k { self.len } else { k - 1 };
        while pos > 0 && ranks_before((sim, j), (self.sims[pos - 1], self.idx[pos - 1])) {
            self.sims[pos] = self.sims[pos - 1];
            self.idx[pos] = self.idx[pos - 1];
            pos -= 1;
        }
        self.sims[pos] = sim;
        self.idx[pos] = j;
        if self.len < k {
            self.len += 1;
        }
    }
}

fn check_pool(set: &EmbeddingSet, k: usize) -> Result<usize> {
    if set.n() < 2 {
        return Err(IqError::EmptyPool(set.n()));
    }
    if !set.unit_normalized() {
        return Err(IqError::NotNormalized);
    }
    if k == 0 {
        return Err(IqError::Config("k must be positive".to_string()));
    }
    Ok(k.min(set.n() - 1))
}

/// Exact top-k cosine neighbors with the default tile shape.
pub fn exact_topk_cosine(set: &EmbeddingSet, k: usize) -> Result<NeighborTable> {
    exact_topk_cosine_tiled(set, k, TileShape::default())
}

/// Exact top-k cosine neighbors. Query blocks run in parallel on the current
/// rayon pool; `k` is clamped to `n - 1`.
pub fn exact_topk_cosine_tiled(
    set: &EmbeddingSet,
    k: usize,
    tiles: TileShape,
) -> Result<NeighborTable> {
    let k = check_pool(set, k)?;
    let n = set.n();
    let qb = tiles.query_block.max(1);
    let cb = tiles.candidate_block.max(1);
    let mut indices = vec![0usize; n * k];
    let mut similarities = vec![f64::NEG_INFINITY; n * k];

    indices
        .par_chunks_mut(qb * k)
        .zip(similarities.par_chunks_mut(qb * k))
        .enumerate()
        .for_each(|(block, (idx_block, sim_block))| {
            let q0 = block * qb;
            let rows = idx_block.len() / k;
            let mut lens = vec![0usize; rows];
            for c0 in (0..n).step_by(cb) {
                let c1 = (c0 + cb).min(n);
                for (qi, (idx, sims)) in idx_block
                    .chunks_exact_mut(k)
                    .zip(sim_block.chunks_exact_mut(k))
                    .enumerate()
                {
                    let q = q0 + qi;
                    let query = set.row(q);
                    let mut top = TopK {
                        sims,
                        idx,
                        len: lens[qi],
                    };
                    for j in c0..c1 {
                        if j != q {
                            top.offer(kernel::dot(query, set.row(j)), j);
                        }
                    }
                    lens[qi] = top.len;
                }
            }
        });

    Ok(NeighborTable {
        k,
        n,
        indices,
        similarities,
    })
}

/// Brute-force reference: full similarity row, full sort, truncate.
/// Single-threaded, no tiling.
pub fn naive_topk_cosine(set: &EmbeddingSet, k: usize) -> Result<NeighborTable> {
    let k = check_pool(set, k)?;
    let n = set.n();
    let mut indices = Vec::with_capacity(n * k);
    let mut similarities = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut row: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (kernel::dot(set.row(i), set.row(j)), j))
            .collect();
        row.sort_by(rank_order);
        for &(s, j) in &row[..k] {
            indices.push(j);
            similarities.push(s);
        }
    }
    Ok(NeighborTable {
        k,
        n,
        indices,
        similarities,
    })
}

/// Per-sample fraction of neighbors sharing the sample's label.
///
/// Raw mode divides by `k`. Ceiling mode divides by `min(k, n_y - 1)`, the
/// most same-label neighbors row `i` could possibly have, and scores 1 when
/// that is 0.
pub fn per_sample_agreement(
    table: &NeighborTable,
    labels: &[Label],
    ceiling_normalized: bool,
) -> Result<Vec<f64>> {
    if labels.len() != table.n() {
        return Err(IqError::LengthMismatch {
            expected: table.n(),
            actual: labels.len(),
        });
    }
    let counts = if ceiling_normalized {
        let mut counts = std::collections::HashMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        Some(counts)
    } else {
        None
    };
    Ok((0..table.n())
        .map(|i| {
            let y = labels[i];
            let hits = table
                .neighbors(i)
                .iter()
                .filter(|&&j| labels[j] == y)
                .count();
            let denom = match &counts {
                None => table.k(),
                Some(c) => table.k().min(c[&y] - 1),
            };
            if denom == 0 {
                1.0
            } else {
                hits as f64 / denom as f64
            }
        })
        .collect())
}

/// Arithmetic mean in row order with f64 accumulation.
pub fn mean_consistency(agreement: &[f64]) -> Result<f64> {
    if agreement.is_empty() {
        return Err(IqError::EmptyVector);
    }
    Ok(agreement.iter().sum::<f64>() / agreement.len() as f64)
}

/// Uniform bins over [0, 1]; values of exactly 1 land in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (b, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.edges[b], self.edges[b + 1], c);
        }
        out
    }
}

pub fn agreement_histogram(agreement: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(IqError::Config(
            "histogram needs at least one bin".to_string(),
        ));
    }
    let edges = (0..=bins).map(|b| b as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in agreement {
        let b = ((v.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Neighbor-consistency summary for one labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsisSummary {
    pub agreement: Vec<f64>,
    pub mean_consis: f64,
    pub k_used: usize,
    pub ceiling_normalized: bool,
    pub histogram: Histogram,
}

/// k-NN retrieval plus agreement statistics, with the set as its own pool.
pub fn consistency(
    set: &LabeledEmbeddingSet,
    k: usize,
    ceiling_normalized: bool,
    bins: usize,
) -> Result<ConsisSummary> {
    let table = exact_topk_cosine(set.embeddings(), k)?;
    summarize(&table, set.labels(), ceiling_normalized, bins)
}

pub fn summarize(
    table: &NeighborTable,
    labels: &[Label],
    ceiling_normalized: bool,
    bins: usize,
) -> Result<ConsisSummary> {
    let agreement = per_sample_agreement(table, labels, ceiling_normalized)?;
    Ok(ConsisSummary {
        mean_consis: mean_consistency(&agreement)?,
        histogram: agreement_histogram(&agreement, bins)?,
        k_used: table.k(),
        ceiling_normalized,
        agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[[f32; 2]]) -> EmbeddingSet {
        EmbeddingSet::from_rows(rows).unwrap()
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let s = set(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let t = exact_topk_cosine(&s, 1).unwrap();
        assert_eq!(t.neighbors(0), &[1]);
        assert_eq!(t.neighbors(1), &[0]);
        assert_eq!(t.neighbors(2), &[0]);
        assert_eq!(t, naive_topk_cosine(&s, 1).unwrap());
    }

    #[test]
    fn k_is_clamped() {
        let s = set(&[[1.0, 0.0], [0.0, 1.0]]);
        let t = exact_topk_cosine(&s, 5).unwrap();
        assert_eq!(t.k(), 1);
        assert_eq!(t.neighbors(0), &[1]);
        assert_eq!(t.neighbors(1), &[0]);
        assert_eq!(t, naive_topk_cosine(&s, 5).unwrap());
    }

    #[test]
    fn full_k_is_a_permutation() {
        let s = set(&[[1.0, 0.0], [0.6, 0.8], [0.0, 1.0], [-0.8, 0.6], [-1.0, 0.0]]);
        let t = exact_topk_cosine(&s, 4).unwrap();
        for i in 0..5 {
            let mut got = t.neighbors(i).to_vec();
            got.sort();
            let want: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            assert_eq!(got, want);
            assert!(t.similarities(i).windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn duplicate_is_found_with_similarity_one() {
        let s = set(&[[0.6, 0.8], [1.0, 0.0], [0.6, 0.8]]);
        let t = naive_topk_cosine(&s, 1).unwrap();
        assert_eq!(t.neighbors(0), &[2]);
        assert!((t.similarities(0)[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn pool_errors() {
        assert!(matches!(
            exact_topk_cosine(&set(&[[1.0, 0.0]]), 1),
            Err(IqError::EmptyPool(1))
        ));
        assert!(matches!(
            exact_topk_cosine(&set(&[[2.0, 0.0], [0.0, 1.0]]), 1),
            Err(IqError::NotNormalized)
        ));
        assert!(matches!(
            naive_topk_cosine(&set(&[[1.0, 0.0]]), 1),
            Err(IqError::EmptyPool(1))
        ));
    }

    #[test]
    fn tiny_tiles_match_default() {
        let rows: Vec<[f32; 2]> = (0..23)
            .map(|i| {
                let a = i as f32 * 0.37;
                [a.cos(), a.sin()]
            })
            .collect();
        let s = set(&rows);
        let a = exact_topk_cosine(&s, 3).unwrap();
        let b = exact_topk_cosine_tiled(
            &s,
            3,
            TileShape {
                query_block: 1,
                candidate_block: 2,
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn agreement_with_duplicates() {
        let s = set(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
        let t = exact_topk_cosine(&s, 1).unwrap();
        assert_eq!(
            per_sample_agreement(&t, &[0, 0, 1, 1], false).unwrap(),
            vec![1.0; 4]
        );

        let t = exact_topk_cosine(&s, 2).unwrap();
        assert_eq!(t.neighbors(0), &[1, 2]);
        let c = per_sample_agreement(&t, &[0, 1, 0, 1], false).unwrap();
        assert_eq!(c[0], 0.5);
    }

    #[test]
    fn distinct_labels_score_zero() {
        let s = set(&[[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]]);
        let t = exact_topk_cosine(&s, 2).unwrap();
        assert_eq!(
            per_sample_agreement(&t, &[0, 1, 2], false).unwrap(),
            vec![0.0; 3]
        );
        // ceiling mode: no same-label neighbor is possible, so every row scores 1
        assert_eq!(
            per_sample_agreement(&t, &[0, 1, 2], true).unwrap(),
            vec![1.0; 3]
        );
    }

    #[test]
    fn ceiling_mode_uses_identity_size() {
        // two identities of size 2, k = 3: raw caps at 1/3, ceiling at 1
        let s = set(&[[1.0, 0.0], [0.99, 0.141], [0.0, 1.0], [0.141, 0.99]]);
        let s = crate::embedding::l2_normalize_rows(&s).unwrap();
        let t = exact_topk_cosine(&s, 3).unwrap();
        let raw = per_sample_agreement(&t, &[0, 0, 1, 1], false).unwrap();
        let ceil = per_sample_agreement(&t, &[0, 0, 1, 1], true).unwrap();
        assert!(raw.iter().all(|&c| (c - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(ceil, vec![1.0; 4]);
    }

    #[test]
    fn agreement_length_mismatch() {
        let t = exact_topk_cosine(&set(&[[1.0, 0.0], [0.0, 1.0]]), 1).unwrap();
        assert!(matches!(
            per_sample_agreement(&t, &[0], false),
            Err(IqError::LengthMismatch {
                expected: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_consistency(&[1.0; 4]).unwrap(), 1.0);
        assert_eq!(mean_consistency(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((mean_consistency(&[0.5, 1.0, 0.9, 0.6]).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(mean_consistency(&[]), Err(IqError::EmptyVector)));
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(
            agreement_histogram(&[0.0, 1.0], 2).unwrap().counts,
            vec![1, 1]
        );
        let h = agreement_histogram(&[1.0; 3], 10).unwrap();
        assert_eq!(h.counts[9], 3);
        assert_eq!(h.edges.len(), 11);
        let vals: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.618).fract()).collect();
        for bins in [1, 7, 20] {
            assert_eq!(
                agreement_histogram(&vals, bins)
                    .unwrap()
                    .counts
                    .iter()
                    .sum::<usize>(),
                10_000
            );
        }
        assert!(agreement_histogram(&[0.5], 0).is_err());
    }

    #[test]
    fn table_csv_has_one_line_per_neighbor() {
        let t = exact_topk_cosine(&set(&[[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]]), 2).unwrap();
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 1 + 3 * 2);
        assert!(csv.starts_with("row,rank,neighbor,similarity\n0,0,2,"));
    }
}
