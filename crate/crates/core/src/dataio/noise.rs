//! Closed-set uniform label flipping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{rng_for, RngStream, SCHEMA_VERSION};
use crate::embedding::{Label, LabeledEmbeddingSet};
use crate::error::{IqError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub flip_ratio: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_ratio) {
            return Err(IqError::Config(format!(
                "flip ratio must lie in [0, 1], got {}",
                self.flip_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flip {
    pub row: usize,
    pub old_label: Label,
    pub new_label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipLog {
    pub schema_version: u32,
    pub config: NoiseConfig,
    pub rows: usize,
    pub source_fingerprint: String,
    pub flips: Vec<Flip>,
}

impl FlipLog {
    pub fn flip_fraction(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.flips.len() as f64 / self.rows as f64
        }
    }
}

/// Flips each row's label with probability `flip_ratio`. A flipped label is
/// drawn uniformly from the other labels present in the set.
///
/// Flip decisions take one draw per row, in row order, from a dedicated
/// stream; replacement labels come from a second stream.
pub fn inject_uniform_flip_noise(
    set: &LabeledEmbeddingSet,
    cfg: &NoiseConfig,
) -> Result<(LabeledEmbeddingSet, FlipLog)> {
    cfg.validate()?;
    let distinct: Vec<Label> = set.identity_index().keys().copied().collect();
    if cfg.flip_ratio > 0.0 && distinct.len() < 2 {
        return Err(IqError::SingleIdentity);
    }
    let mut decide = rng_for(cfg.seed, RngStream::FlipDecision);
    let mut target = rng_for(cfg.seed, RngStream::FlipTarget);
    let mut labels = set.labels().to_vec();
    let mut flips = Vec::new();
    for (row, label) in labels.iter_mut().enumerate() {
        let u: f64 = decide.random();
        if u < cfg.flip_ratio {
            let pos = distinct
                .binary_search(label)
                .expect("label present in index");
            let mut pick = target.random_range(0..distinct.len() - 1);
            if pick >= pos {
                pick += 1;
            }
            let new_label = distinct[pick];
            flips.push(Flip {
                row,
                old_label: *label,
                new_label,
            });
            *label = new_label;
        }
    }
    let log = FlipLog {
        schema_version: SCHEMA_VERSION,
        config: *cfg,
        rows: set.n(),
        source_fingerprint: set.fingerprint(),
        flips,
    };
    Ok((set.with_labels(labels)?, log))
}
