//! Identity-stratified subset selection.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::dataio::dedup::{check_threshold, dedup_pool, DedupRemoval};
use crate::dataio::{rng_for, RngStream, SCHEMA_VERSION};
use crate::embedding::{Label, LabeledEmbeddingSet};
use crate::error::{IqError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub target_identities: usize,
    pub per_identity: usize,
    pub seed: u64,
    pub dedup_threshold: f64,
    pub min_identity_size: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            target_identities: 1000,
            per_identity: 10,
            seed: 0,
            dedup_threshold: 0.9999,
            min_identity_size: 2,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_identities == 0 || self.per_identity == 0 || self.min_identity_size == 0 {
            return Err(IqError::Config(
                "target identities, per-identity count and minimum identity size must be positive"
                    .to_string(),
            ));
        }
        check_threshold(self.dedup_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityDraw {
    pub label: Label,
    /// Pool size before dedup.
    pub pool_size: usize,
    /// Row indices into the input set, ascending.
    pub rows: Vec<usize>,
    /// Source ids of the chosen rows.
    pub source_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedIdentity {
    pub label: Label,
    pub size: usize,
}

/// Record of one sampling run; enough to rebuild the subset from the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingManifest {
    pub schema_version: u32,
    pub config: SamplingConfig,
    pub source_fingerprint: String,
    pub source_rows: usize,
    pub eligible_identities: usize,
    pub identities: Vec<IdentityDraw>,
    pub excluded: Vec<ExcludedIdentity>,
    pub dedup_removed: Vec<DedupRemoval>,
    pub total_rows: usize,
}

/// Selects `min(M, eligible)` identities by seeded shuffle, dedups each
/// selected pool, then draws `min(m, pool)` rows from it. Output rows are
/// grouped by identity in selection order, ascending row order inside.
pub fn stratified_sample(
    set: &LabeledEmbeddingSet,
    cfg: &SamplingConfig,
) -> Result<(LabeledEmbeddingSet, SamplingManifest)> {
    cfg.validate()?;
    let mut eligible: Vec<Label> = Vec::new();
    let mut excluded = Vec::new();
    for (&label, rows) in set.identity_index() {
        if rows.len() >= cfg.min_identity_size {
            eligible.push(label);
        } else {
            excluded.push(ExcludedIdentity {
                label,
                size: rows.len(),
            });
        }
    }
    if eligible.is_empty() {
        return Err(IqError::NoEligibleIdentity {
            min_size: cfg.min_identity_size,
        });
    }
    let eligible_count = eligible.len();

    let mut pick_ids = rng_for(cfg.seed, RngStream::IdentitySelection);
    eligible.shuffle(&mut pick_ids);
    eligible.truncate(cfg.target_identities);

    let mut pick_rows = rng_for(cfg.seed, RngStream::RowSelection);
    let mut identities = Vec::with_capacity(eligible.len());
    let mut dedup_removed = Vec::new();
    let mut all_rows = Vec::new();
    for label in eligible {
        let pool = &set.identity_index()[&label];
        let (kept, removed) = dedup_pool(set.embeddings(), pool, cfg.dedup_threshold);
        dedup_removed.extend(removed);
        let take = cfg.per_identity.min(kept.len());
        let mut rows: Vec<usize> = index::sample(&mut pick_rows, kept.len(), take)
            .into_iter()
            .map(|i| kept[i])
            .collect();
        rows.sort_unstable();
        all_rows.extend_from_slice(&rows);
        identities.push(IdentityDraw {
            label,
            pool_size: pool.len(),
            source_ids: rows.iter().map(|&r| set.source_id(r)).collect(),
            rows,
        });
    }

    let subset = set.select_rows(&all_rows)?;
    let manifest = SamplingManifest {
        schema_version: SCHEMA_VERSION,
        config: *cfg,
        source_fingerprint: set.fingerprint(),
        source_rows: set.n(),
        eligible_identities: eligible_count,
        identities,
        excluded,
        dedup_removed,
        total_rows: all_rows.len(),
    };
    Ok((subset, manifest))
}
