//! Identity-stratified subsets under different budgets and seeds, with the
//! manifest that makes each subset reproducible.

use iqscore::dataio::{stratified_sample, SamplingConfig};
use iqscore::report::{compute_report, PipelineConfig};
use iqscore::synthgen::{generate_cluster_world, ClusterWorldConfig};

fn main() -> iqscore::Result<()> {
    let world = generate_cluster_world(&ClusterWorldConfig {
        num_identities: 3000,
        per_identity: 10,
        ..Default::default()
    })?;
    println!("budget  seed  rows   r_norm  consis  iq");
    for budget in [2_000, 5_000, 10_000] {
        for seed in 0..3 {
            let sampling = SamplingConfig {
                target_identities: budget / 10,
                seed,
                ..Default::default()
            };
            let cfg = PipelineConfig {
                sampling: Some(sampling),
                ..Default::default()
            };
            let r = compute_report(&world.set, &cfg)?.report;
            println!(
                "{budget:>6} {seed:>5} {:>5}  {:.4}  {:.4}  {:.4}",
                r.subset_rows, r.spectrum.r_norm, r.consis.mean_consis, r.iq
            );
        }
    }
    let (_, manifest) = stratified_sample(
        &world.set,
        &SamplingConfig {
            target_identities: 3,
            per_identity: 4,
            ..Default::default()
        },
    )?;
    println!(
        "\n{}",
        serde_json::to_string_pretty(&manifest.identities).unwrap()
    );
    Ok(())
}
