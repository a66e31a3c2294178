//! File formats, sampling, dedup and label-noise injection.

mod dedup;
mod format;
mod noise;
mod sampling;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dedup::{dedup_within_identity, DedupLog, DedupRemoval};
pub use format::{
    decode_embeddings, decode_labels, encode_embeddings, encode_labels, parse_csv,
    read_embedding_file, render_csv, write_embedding_file, FileFormat,
};
pub use noise::{inject_uniform_flip_noise, Flip, FlipLog, NoiseConfig};
pub use sampling::{
    stratified_sample, ExcludedIdentity, IdentityDraw, SamplingConfig, SamplingManifest,
};

/// Version stamped into every JSON document this crate emits.
pub const SCHEMA_VERSION: u32 = 1;

/// Independent random streams derived from one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    IdentitySelection = 1,
    RowSelection = 2,
    FlipDecision = 3,
    FlipTarget = 4,
    WorldCenters = 5,
    WorldSamples = 6,
    ProxyResponse = 7,
}

/// ChaCha8 seeded from `seed`, positioned on the given stream. ChaCha output
/// is specified bit-for-bit, so draws agree across platforms.
pub fn rng_for(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
