//! End-to-end IQ for one labeled set.
//!
//! Reads a binary embedding + label pair when given, otherwise scores a
//! generated cluster world.
//!
//! ```text
//! cargo run --release --example compute_iq -- [embeddings.iqem labels.iqlb]
//! ```

use std::path::PathBuf;

use iqscore::dataio::{read_embedding_file, FileFormat};
use iqscore::synthgen::{generate_cluster_world, ClusterWorldConfig};
use iqscore::{compute_report, PipelineConfig};

fn main() -> iqscore::Result<()> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let set = match args.as_slice() {
        [emb, labels] => read_embedding_file(emb, Some(labels), FileFormat::Binary)?,
        _ => generate_cluster_world(&ClusterWorldConfig::default())?.set,
    };
    let out = compute_report(&set, &PipelineConfig::default())?;
    let r = &out.report;
    println!(
        "rows scored      {} ({} identities, d = {})",
        r.subset_rows, r.subset_identities, r.dim
    );
    println!("consistency      {:.4}", r.consis.mean_consis);
    println!(
        "effective rank   {:.2} of {}",
        r.spectrum.r_ent, r.spectrum.q_cap
    );
    println!("normalized rank  {:.4}", r.spectrum.r_norm);
    println!("RankMe           {:.2}", r.rankme_score);
    println!("IQ               {:.4}", r.iq);
    if let Some(t) = r.timings {
        println!(
            "took {:.0} ms (neighbors {:.0}, spectrum {:.0})",
            t.total_ms, t.neighbors_ms, t.spectrum_ms
        );
    }
    Ok(())
}
