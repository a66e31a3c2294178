//! End-to-end scoring of one labeled set and the serializable run record.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::{
    dedup_within_identity, stratified_sample, DedupLog, SamplingConfig, SamplingManifest,
    SCHEMA_VERSION,
};
use crate::embedding::LabeledEmbeddingSet;
use crate::error::Result;
use crate::iqfuse::{iq_score, FusionWeights};
use crate::neighbors::{self, ConsisSummary, DEFAULT_BINS, DEFAULT_K};
use crate::spectral::{self, RankMeConfig, SpectrumSummary};

/// Settings for [`compute_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub weights: FusionWeights,
    pub ceiling_normalized: bool,
    pub bins: usize,
    /// Identity-stratified subsetting (which includes dedup). `None` scores
    /// the whole input.
    pub sampling: Option<SamplingConfig>,
    /// Dedup threshold applied when `sampling` is `None`; `None` disables it.
    pub dedup_threshold: Option<f64>,
    pub rankme: RankMeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            weights: FusionWeights::default(),
            ceiling_normalized: false,
            bins: DEFAULT_BINS,
            sampling: Some(SamplingConfig::default()),
            dedup_threshold: Some(SamplingConfig::default().dedup_threshold),
            rankme: RankMeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub r_norm: f64,
    pub mean_consis: f64,
}

/// Wall-clock milliseconds per stage. Kept out of the primary report output
/// because it differs from run to run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub prepare_ms: f64,
    pub neighbors_ms: f64,
    pub spectrum_ms: f64,
    pub rankme_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqReport {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub subset_rows: usize,
    pub subset_identities: usize,
    pub dim: usize,
    /// SHA-256 of the analyzed subset (shape, f32 bits, labels).
    pub input_fingerprint: String,
    pub consis: ConsisSummary,
    pub spectrum: SpectrumSummary,
    pub rankme_score: f64,
    pub iq: f64,
    pub plane_point: PlanePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl IqReport {
    /// Deterministic JSON (timings stripped).
    pub fn to_json(&self) -> String {
        let mut clean = self.clone();
        clean.timings = None;
        serde_json::to_string_pretty(&clean).expect("report serializes")
    }

    /// Recomputes IQ from the stored components.
    pub fn recomputed_iq(&self) -> f64 {
        self.config.weights.alpha * self.consis.mean_consis
            + self.config.weights.beta * self.spectrum.r_norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub report: IqReport,
    pub manifest: Option<SamplingManifest>,
    pub dedup: Option<DedupLog>,
}

/// Normalize, subset, then score: neighbor consistency, covariance spectrum,
/// RankMe and the fused IQ.
pub fn compute_report(set: &LabeledEmbeddingSet, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.weights.validate()?;
    let t0 = Instant::now();
    let normalized = set.normalized()?;
    let (subset, manifest, dedup) = match (&cfg.sampling, cfg.dedup_threshold) {
        (Some(s), _) => {
            let (sub, man) = stratified_sample(&normalized, s)?;
            (sub, Some(man), None)
        }
        (None, Some(threshold)) => {
            let (sub, log) = dedup_within_identity(&normalized, threshold)?;
            (sub, None, Some(log))
        }
        (None, None) => (normalized, None, None),
    };
    let t1 = Instant::now();

    let table = neighbors::exact_topk_cosine(subset.embeddings(), cfg.k)?;
    let consis = neighbors::summarize(&table, subset.labels(), cfg.ceiling_normalized, cfg.bins)?;
    let t2 = Instant::now();

    let spectrum = spectral::spectrum_summary(subset.embeddings())?;
    let t3 = Instant::now();

    let rankme_score = spectral::rankme_score(subset.embeddings(), &cfg.rankme)?;
    let t4 = Instant::now();

    let iq = iq_score(
        consis.mean_consis,
        spectrum.r_norm,
        cfg.weights.alpha,
        cfg.weights.beta,
    )?;
    let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
    let report = IqReport {
        schema_version: SCHEMA_VERSION,
        config: *cfg,
        subset_rows: subset.n(),
        subset_identities: subset.num_identities(),
        dim: subset.d(),
        input_fingerprint: subset.fingerprint(),
        plane_point: PlanePoint {
            r_norm: spectrum.r_norm,
            mean_consis: consis.mean_consis,
        },
        consis,
        spectrum,
        rankme_score,
        iq,
        timings: Some(StageTimings {
            prepare_ms: ms(t0, t1),
            neighbors_ms: ms(t1, t2),
            spectrum_ms: ms(t2, t3),
            rankme_ms: ms(t3, t4),
            total_ms: ms(t0, t4),
        }),
    };
    Ok(PipelineOutput {
        report,
        manifest,
        dedup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingSet;

    fn square() -> LabeledEmbeddingSet {
        let e = EmbeddingSet::from_rows(&[
            [1.0f32, 0.1, 0.0],
            [1.0, 0.0, 0.1],
            [0.0, 1.0, 0.1],
            [0.1, 1.0, 0.0],
            [0.0, 0.1, 1.0],
            [0.1, 0.0, 1.0],
        ])
        .unwrap();
        LabeledEmbeddingSet::new(e, vec![0, 0, 1, 1, 2, 2]).unwrap()
    }

    #[test]
    fn whole_set_report() {
        let cfg = PipelineConfig {
            k: 1,
            sampling: None,
            ..Default::default()
        };
        let out = compute_report(&square(), &cfg).unwrap();
        let r = &out.report;
        assert_eq!(r.subset_rows, 6);
        assert_eq!(r.consis.mean_consis, 1.0);
        assert!((r.iq - r.recomputed_iq()).abs() <= 1e-12);
        assert!(out.dedup.unwrap().removed.is_empty());
        assert!(!r.to_json().contains("timings"));
    }

    #[test]
    fn sampled_report_is_deterministic() {
        let cfg = PipelineConfig {
            k: 2,
            sampling: Some(SamplingConfig {
                target_identities: 2,
                per_identity: 2,
                seed: 4,
                ..Default::default()
            }),
            ..Default::default()
        };
        let a = compute_report(&square(), &cfg).unwrap();
        let b = compute_report(&square(), &cfg).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.report.subset_rows, 4);
        assert_eq!(a.manifest.unwrap().identities.len(), 2);
    }
}
