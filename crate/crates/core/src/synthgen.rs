//! Synthetic labeled worlds with known cluster structure.
//!
//! Each identity gets a center drawn uniformly from the unit sphere; each of
//! its samples is `normalize(center + dispersion * g)` with
//! `g ~ N(0, I / dim)`, so `dispersion` is the expected length of the
//! perturbation relative to the unit center. This is a Gaussian-then-project
//! model, not an exact von Mises-Fisher draw.
//!
//! Scenarios can also simulate how a proxy model reacts to corrupted labels:
//! a flipped row's identity component is shifted toward the center of its new
//! identity while its within-identity dispersion stays (see
//! [`ScenarioSeries::proxy_pull`]).

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    inject_uniform_flip_noise, rng_for, Flip, NoiseConfig, RngStream, SamplingConfig,
};
use crate::embedding::{EmbeddingSet, Label, LabeledEmbeddingSet};
use crate::error::{IqError, Result};
use crate::iqfuse::FusionWeights;
use crate::report::{compute_report, IqReport, PipelineConfig};

pub const MAX_DISPERSION: f64 = 10.0;
pub const DEFAULT_PROXY_PULL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterWorldConfig {
    pub num_identities: usize,
    pub per_identity: usize,
    pub dim: usize,
    pub dispersion: f64,
    pub seed: u64,
}

impl Default for ClusterWorldConfig {
    fn default() -> Self {
        Self {
            num_identities: 1000,
            per_identity: 10,
            dim: 128,
            dispersion: 0.3,
            seed: 0,
        }
    }
}

impl ClusterWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_identities == 0 || self.per_identity == 0 || self.dim == 0 {
            return Err(IqError::Config(
                "identities, per-identity count and dimension must be positive".to_string(),
            ));
        }
        if !(0.0..MAX_DISPERSION).contains(&self.dispersion) {
            return Err(IqError::Config(format!(
                "dispersion must lie in [0, {MAX_DISPERSION}), got {}",
                self.dispersion
            )));
        }
        Ok(())
    }
}

/// A generated set plus the identity centers it was drawn around.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub set: LabeledEmbeddingSet,
    /// Row `i` is the center of identity `i`.
    pub centers: EmbeddingSet,
}

fn unit_f32(v: &[f64]) -> Vec<f32> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / norm) as f32).collect()
}

/// Rows are identity-major: identity 0's samples first.
pub fn generate_cluster_world(cfg: &ClusterWorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let d = cfg.dim;
    let mut center_rng = rng_for(cfg.seed, RngStream::WorldCenters);
    let mut sample_rng = rng_for(cfg.seed, RngStream::WorldSamples);
    let scale = cfg.dispersion / (d as f64).sqrt();

    let mut centers = Vec::with_capacity(cfg.num_identities * d);
    let mut data = Vec::with_capacity(cfg.num_identities * cfg.per_identity * d);
    let mut labels = Vec::with_capacity(cfg.num_identities * cfg.per_identity);
    let mut buf = vec![0.0f64; d];
    for id in 0..cfg.num_identities {
        let center = loop {
            for x in buf.iter_mut() {
                *x = center_rng.sample(StandardNormal);
            }
            if buf.iter().any(|&x| x != 0.0) {
                break unit_f32(&buf);
            }
        };
        for _ in 0..cfg.per_identity {
            for (x, &c) in buf.iter_mut().zip(&center) {
                let g: f64 = sample_rng.sample(StandardNormal);
                *x = c as f64 + scale * g;
            }
            data.extend(unit_f32(&buf));
            labels.push(id as Label);
        }
        centers.extend(center);
    }
    let n = labels.len();
    Ok(SyntheticWorld {
        set: LabeledEmbeddingSet::new(EmbeddingSet::new(n, d, data)?, labels)?,
        centers: EmbeddingSet::new(cfg.num_identities, d, centers)?,
    })
}

/// Tries seeds `start..start + tries` and returns the first whose world
/// satisfies `accept`.
pub fn search_seed<F>(
    base: &ClusterWorldConfig,
    start: u64,
    tries: u64,
    mut accept: F,
) -> Result<Option<u64>>
where
    F: FnMut(&SyntheticWorld) -> bool,
{
    for seed in start..start.saturating_add(tries) {
        let world = generate_cluster_world(&ClusterWorldConfig { seed, ..*base })?;
        if accept(&world) {
            return Ok(Some(seed));
        }
    }
    Ok(None)
}

/// Shifts each flipped row's identity component toward its new label:
/// `normalize(e + pull * (center[new] - center[old]))`. The row's own
/// dispersion around its center is kept.
pub fn apply_proxy_pull(
    set: &LabeledEmbeddingSet,
    centers: &EmbeddingSet,
    flips: &[Flip],
    pull: f64,
) -> Result<LabeledEmbeddingSet> {
    if !(0.0..=1.0).contains(&pull) {
        return Err(IqError::Config(format!(
            "proxy pull must lie in [0, 1], got {pull}"
        )));
    }
    if pull == 0.0 || flips.is_empty() {
        return Ok(set.clone());
    }
    let d = set.d();
    let mut data = set.embeddings().data().to_vec();
    let mut buf = vec![0.0f64; d];
    for f in flips {
        let (old, new) = (f.old_label as usize, f.new_label as usize);
        if old.max(new) >= centers.n() {
            return Err(IqError::Config(format!(
                "label {} has no center",
                old.max(new)
            )));
        }
        if f.row >= set.n() {
            return Err(IqError::Shape(format!("flip row {} out of range", f.row)));
        }
        let row = &mut data[f.row * d..(f.row + 1) * d];
        for (((b, &e), &cn), &co) in buf
            .iter_mut()
            .zip(row.iter())
            .zip(centers.row(new))
            .zip(centers.row(old))
        {
            *b = e as f64 + pull * (cn as f64 - co as f64);
        }
        if buf.iter().all(|&x| x == 0.0) {
            continue;
        }
        row.copy_from_slice(&unit_f32(&buf));
    }
    set.with_embeddings(EmbeddingSet::new(set.n(), d, data)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub name: String,
    pub world: ClusterWorldConfig,
    #[serde(default)]
    pub flip_ratio: f64,
}

fn default_pull() -> f64 {
    DEFAULT_PROXY_PULL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSeries {
    pub entries: Vec<ScenarioEntry>,
    /// How far a flipped row moves toward its new identity's center.
    /// 0 leaves embeddings untouched by label noise.
    #[serde(default = "default_pull")]
    pub proxy_pull: f64,
}

impl ScenarioSeries {
    pub fn new(entries: Vec<ScenarioEntry>) -> Result<Self> {
        let s = Self {
            entries,
            proxy_pull: DEFAULT_PROXY_PULL,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_proxy_pull(mut self, pull: f64) -> Result<Self> {
        self.proxy_pull = pull;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(IqError::format("scenario", "series has no entries"));
        }
        let mut names = std::collections::HashSet::new();
        for e in &self.entries {
            if !names.insert(e.name.as_str()) {
                return Err(IqError::format(
                    "scenario",
                    format!("duplicate entry name '{}'", e.name),
                ));
            }
            if !(0.0..=1.0).contains(&e.flip_ratio) {
                return Err(IqError::format(
                    "scenario",
                    format!(
                        "entry '{}' has flip ratio {} outside [0, 1]",
                        e.name, e.flip_ratio
                    ),
                ));
            }
            e.world
                .validate()
                .map_err(|err| IqError::format("scenario", err.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.proxy_pull) {
            return Err(IqError::format("scenario", "proxy_pull must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)
            .map_err(|e| IqError::format(format!("line {}", e.line()), e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// SplitMix64 finalizer; derives per-entry seeds from a base seed.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One clean world per identity count, everything else fixed.
pub fn build_scaling_series(
    base: &ClusterWorldConfig,
    identity_counts: &[usize],
) -> Result<ScenarioSeries> {
    if identity_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IqError::Config(
            "identity counts must be strictly increasing".to_string(),
        ));
    }
    let entries = identity_counts
        .iter()
        .enumerate()
        .map(|(i, &m)| ScenarioEntry {
            name: format!("identities={m}"),
            world: ClusterWorldConfig {
                num_identities: m,
                seed: mix_seed(base.seed, i as u64),
                ..*base
            },
            flip_ratio: 0.0,
        })
        .collect();
    ScenarioSeries::new(entries)
}

/// One entry per flip ratio, all over the same world.
pub fn build_noise_series(base: &ClusterWorldConfig, ratios: &[f64]) -> Result<ScenarioSeries> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(IqError::Config(
            "flip ratios must lie in [0, 1]".to_string(),
        ));
    }
    if ratios.windows(2).any(|w| w[0] > w[1]) {
        return Err(IqError::Config(
            "flip ratios must be nondecreasing".to_string(),
        ));
    }
    let entries = ratios
        .iter()
        .map(|&rho| ScenarioEntry {
            name: format!("noise={rho}"),
            world: *base,
            flip_ratio: rho,
        })
        .collect();
    ScenarioSeries::new(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRow {
    pub name: String,
    pub num_identities: usize,
    pub flip_ratio: f64,
    pub r_norm: f64,
    pub mean_consis: f64,
    pub iq: f64,
    pub rankme: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub reports: Vec<IqReport>,
    pub plane: Vec<PlaneRow>,
}

pub fn plane_csv(rows: &[PlaneRow]) -> String {
    let mut out = String::from("name,num_identities,flip_ratio,r_norm,mean_consis,iq,rankme\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.name, r.num_identities, r.flip_ratio, r.r_norm, r.mean_consis, r.iq, r.rankme
        );
    }
    out
}

/// The labeled set an entry is scored on: world, closed-set flips, proxy pull.
pub fn realize_entry(entry: &ScenarioEntry, proxy_pull: f64) -> Result<LabeledEmbeddingSet> {
    let world = generate_cluster_world(&entry.world)?;
    if entry.flip_ratio == 0.0 {
        return Ok(world.set);
    }
    let noise = NoiseConfig {
        flip_ratio: entry.flip_ratio,
        seed: mix_seed(entry.world.seed, 0x6e6f_6973_65),
    };
    let (noisy, log) = inject_uniform_flip_noise(&world.set, &noise)?;
    apply_proxy_pull(&noisy, &world.centers, &log.flips, proxy_pull)
}

/// Scores every entry: generate, inject noise, sample, then consistency,
/// spectrum, RankMe and IQ.
pub fn run_scenario(
    series: &ScenarioSeries,
    k: usize,
    weights: FusionWeights,
    sampling: &SamplingConfig,
) -> Result<ScenarioOutcome> {
    let cfg = PipelineConfig {
        k,
        weights,
        sampling: Some(*sampling),
        ..Default::default()
    };
    let mut reports = Vec::with_capacity(series.entries.len());
    let mut plane = Vec::with_capacity(series.entries.len());
    for entry in &series.entries {
        let annotate = |e: IqError| IqError::Scenario {
            entry: entry.name.clone(),
            source: Box::new(e),
        };
        let set = realize_entry(entry, series.proxy_pull).map_err(annotate)?;
        let report = compute_report(&set, &cfg).map_err(annotate)?.report;
        plane.push(PlaneRow {
            name: entry.name.clone(),
            num_identities: entry.world.num_identities,
            flip_ratio: entry.flip_ratio,
            r_norm: report.spectrum.r_norm,
            mean_consis: report.consis.mean_consis,
            iq: report.iq,
            rankme: report.rankme_score,
        });
        reports.push(report);
    }
    Ok(ScenarioOutcome { reports, plane })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel;
    use crate::neighbors::{exact_topk_cosine, per_sample_agreement};
    use crate::spectral;

    #[test]
    fn world_shape_and_normalization() {
        let w = generate_cluster_world(&ClusterWorldConfig {
            num_identities: 7,
            per_identity: 3,
            dim: 16,
            dispersion: 0.3,
            seed: 1,
        })
        .unwrap();
        assert_eq!(w.set.n(), 21);
        assert_eq!(w.set.num_identities(), 7);
        assert!(w.set.embeddings().unit_normalized());
        assert!(w.centers.unit_normalized());
        assert_eq!(w.set.labels()[3], 1);
    }

    #[test]
    fn zero_dispersion_reproduces_centers() {
        let cfg = ClusterWorldConfig {
            num_identities: 5,
            per_identity: 4,
            dim: 8,
            dispersion: 0.0,
            seed: 3,
        };
        let w = generate_cluster_world(&cfg).unwrap();
        for i in 0..w.set.n() {
            let id = w.set.labels()[i] as usize;
            for (a, b) in w.set.embeddings().row(i).iter().zip(w.centers.row(id)) {
                assert!((a - b).abs() <= 1e-7);
            }
        }
        // duplicates inside each identity: raw c_i = min(m - 1, k) / k
        let k = 5;
        let t = exact_topk_cosine(w.set.embeddings(), k).unwrap();
        let c = per_sample_agreement(&t, w.set.labels(), false).unwrap();
        assert!(c.iter().all(|&v| (v - 3.0 / 5.0).abs() < 1e-15));
    }

    #[test]
    fn single_identity_has_only_within_dispersion() {
        let w = generate_cluster_world(&ClusterWorldConfig {
            num_identities: 1,
            per_identity: 400,
            dim: 6,
            dispersion: 0.2,
            seed: 8,
        })
        .unwrap();
        assert_eq!(w.set.num_identities(), 1);
        let s = spectral::spectrum_summary(w.set.embeddings()).unwrap();
        // the spread orthogonal to the center dominates, spectrum spans ~d-1 directions
        assert!(s.r_ent > 4.0 && s.r_ent <= 6.0);
    }

    #[test]
    fn two_opposite_points_are_rank_one() {
        let base = ClusterWorldConfig {
            num_identities: 2,
            per_identity: 1,
            dim: 2,
            dispersion: 0.0,
            seed: 0,
        };
        let seed = search_seed(&base, 0, 10_000, |w| {
            let (a, b) = (w.centers.row(0), w.centers.row(1));
            a[0] > 0.99 && b[0] < -0.99
        })
        .unwrap()
        .expect("seed search finds near +-x centers");
        let w = generate_cluster_world(&ClusterWorldConfig { seed, ..base }).unwrap();
        assert!(kernel::dot(w.centers.row(0), w.centers.row(1)) < -0.98);
        let s = spectral::spectrum_summary(w.set.embeddings()).unwrap();
        assert!((s.r_ent - 1.0).abs() < 1e-9);
        assert!(s.r_norm.abs() < 1e-9);
    }

    #[test]
    fn deterministic_generation() {
        let cfg = ClusterWorldConfig {
            num_identities: 20,
            per_identity: 5,
            dim: 12,
            dispersion: 0.4,
            seed: 99,
        };
        assert_eq!(
            generate_cluster_world(&cfg).unwrap(),
            generate_cluster_world(&cfg).unwrap()
        );
        let other = generate_cluster_world(&ClusterWorldConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(generate_cluster_world(&cfg).unwrap(), other);
    }

    #[test]
    fn config_validation() {
        let bad = ClusterWorldConfig {
            dispersion: 10.0,
            ..Default::default()
        };
        assert!(generate_cluster_world(&bad).is_err());
        let bad = ClusterWorldConfig {
            dim: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scaling_series_builder() {
        let base = ClusterWorldConfig::default();
        let s = build_scaling_series(&base, &[100, 300, 1000]).unwrap();
        let counts: Vec<usize> = s.entries.iter().map(|e| e.world.num_identities).collect();
        assert_eq!(counts, vec![100, 300, 1000]);
        assert!(s
            .entries
            .iter()
            .all(|e| e.flip_ratio == 0.0 && e.world.dim == base.dim));
        assert_eq!(build_scaling_series(&base, &[50]).unwrap().entries.len(), 1);
        assert!(build_scaling_series(&base, &[200, 200]).is_err());
    }

    #[test]
    fn noise_series_builder() {
        let base = ClusterWorldConfig::default();
        let s = build_noise_series(&base, &[0.0, 0.02, 0.05, 0.10, 0.20, 0.40]).unwrap();
        assert_eq!(s.entries.len(), 6);
        assert!(s.entries.iter().all(|e| e.world == base));
        assert_eq!(build_noise_series(&base, &[0.0]).unwrap().entries.len(), 1);
        assert!(build_noise_series(&base, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn scenario_json_round_trip_and_validation() {
        let s = build_noise_series(&ClusterWorldConfig::default(), &[0.0, 0.1]).unwrap();
        assert_eq!(ScenarioSeries::from_json(&s.to_json()).unwrap(), s);
        assert!(ScenarioSeries::from_json(r#"{"entries": []}"#).is_err());
        let dup = r#"{"entries": [
            {"name": "a", "world": {"num_identities": 2, "per_identity": 2, "dim": 2, "dispersion": 0.1, "seed": 0}},
            {"name": "a", "world": {"num_identities": 2, "per_identity": 2, "dim": 2, "dispersion": 0.1, "seed": 0}}
        ]}"#;
        assert!(ScenarioSeries::from_json(dup).is_err());
    }

    #[test]
    fn proxy_pull_moves_flipped_rows_only() {
        let w = generate_cluster_world(&ClusterWorldConfig {
            num_identities: 3,
            per_identity: 2,
            dim: 4,
            dispersion: 0.0,
            seed: 2,
        })
        .unwrap();
        let relabeled = w.set.with_labels(vec![0, 2, 1, 1, 2, 2]).unwrap();
        let flips = [Flip {
            row: 1,
            old_label: 0,
            new_label: 2,
        }];
        let pulled = apply_proxy_pull(&relabeled, &w.centers, &flips, 1.0).unwrap();
        for (a, b) in pulled.embeddings().row(1).iter().zip(w.centers.row(2)) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(pulled.embeddings().row(0), w.set.embeddings().row(0));
        assert_eq!(
            apply_proxy_pull(&relabeled, &w.centers, &flips, 0.0).unwrap(),
            relabeled
        );
    }

    #[test]
    fn small_scenario_runs() {
        let base = ClusterWorldConfig {
            num_identities: 40,
            per_identity: 5,
            dim: 16,
            dispersion: 0.3,
            seed: 5,
        };
        let series = build_noise_series(&base, &[0.0, 0.4]).unwrap();
        let out = run_scenario(
            &series,
            4,
            FusionWeights::default(),
            &SamplingConfig::default(),
        )
        .unwrap();
        assert_eq!(out.reports.len(), 2);
        assert!(out.plane[1].mean_consis < out.plane[0].mean_consis);
        assert_eq!(plane_csv(&out.plane).lines().count(), 3);
    }
}
