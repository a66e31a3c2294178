//! Per-sample neighbor agreement and its histogram, raw and ceiling-normalized.
//!
//! Identities get uneven sizes here so the two normalizations differ.

use iqscore::neighbors::{exact_topk_cosine, summarize};
use iqscore::synthgen::{generate_cluster_world, ClusterWorldConfig};

fn main() -> iqscore::Result<()> {
    let world = generate_cluster_world(&ClusterWorldConfig {
        num_identities: 200,
        per_identity: 12,
        dim: 64,
        dispersion: 0.6,
        seed: 4,
    })?;
    // keep 3..=12 rows per identity
    let rows: Vec<usize> = (0..world.set.n())
        .filter(|&i| i % 12 < 3 + (i / 12) % 10)
        .collect();
    let set = world.set.select_rows(&rows)?;

    let table = exact_topk_cosine(set.embeddings(), 10)?;
    for ceiling in [false, true] {
        let s = summarize(&table, set.labels(), ceiling, 10)?;
        println!(
            "{} mean consistency {:.4}",
            if ceiling { "ceiling" } else { "raw    " },
            s.mean_consis
        );
        for (b, c) in s.histogram.counts.iter().enumerate() {
            println!(
                "  [{:.1}, {:.1}) {:>5} {}",
                s.histogram.edges[b],
                s.histogram.edges[b + 1],
                c,
                "#".repeat(c / 20)
            );
        }
    }
    println!("\nrow 0 neighbors: {:?}", table.neighbors(0));
    Ok(())
}
