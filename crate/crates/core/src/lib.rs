//! Validation-free intrinsic quality (IQ) scoring for labeled embedding sets.
//!
//! IQ fuses two signals computed on an identity-stratified subset:
//!
//! * neighbor consistency: the mean fraction of each sample's `k` nearest
//!   cosine neighbors that share its label, and
//! * normalized effective rank: `ln(r_ent) / ln(min(n, d))`, where `r_ent`
//!   is the exponentiated entropy of the centered covariance spectrum.
//!
//! `IQ = alpha * consistency + beta * normalized_rank`, with
//! `alpha = 0.2, beta = 0.8` by default.
//!
//! The crate also ships the surrounding machinery: binary and CSV embedding
//! formats, stratified sampling with dedup, closed-set label noise, RankMe,
//! rank-correlation validation and a synthetic cluster-world generator.

pub mod cli;
pub mod dataio;
pub mod embedding;
pub mod error;
pub mod iqfuse;
pub mod kernel;
pub mod neighbors;
pub mod report;
pub mod spectral;
pub mod synthgen;

pub use embedding::{l2_normalize_rows, EmbeddingSet, Label, LabeledEmbeddingSet};
pub use error::{IqError, Result};
pub use iqfuse::{iq_score, FusionWeights, SettingsSeries};
pub use neighbors::{exact_topk_cosine, naive_topk_cosine, ConsisSummary, NeighborTable};
pub use report::{compute_report, IqReport, PipelineConfig, PipelineOutput};
pub use spectral::{effective_rank, normalized_effective_rank, rankme_score, SpectrumSummary};
