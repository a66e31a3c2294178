//! Closed-set label flips and what they do to consistency.

use iqscore::dataio::{inject_uniform_flip_noise, NoiseConfig};
use iqscore::neighbors::consistency;
use iqscore::synthgen::{generate_cluster_world, ClusterWorldConfig};

fn main() -> iqscore::Result<()> {
    let world = generate_cluster_world(&ClusterWorldConfig {
        num_identities: 500,
        per_identity: 10,
        ..Default::default()
    })?;
    println!("ratio  flipped  consistency");
    for ratio in [0.0, 0.02, 0.05, 0.1, 0.2, 0.4] {
        let (noisy, log) = inject_uniform_flip_noise(
            &world.set,
            &NoiseConfig {
                flip_ratio: ratio,
                seed: 11,
            },
        )?;
        let c = consistency(&noisy, 10, false, 20)?;
        println!("{ratio:>5.2}  {:>7}  {:.4}", log.flips.len(), c.mean_consis);
    }
    let (_, log) = inject_uniform_flip_noise(
        &world.set,
        &NoiseConfig {
            flip_ratio: 0.1,
            seed: 11,
        },
    )?;
    println!("\nfirst flips: {:?}", &log.flips[..3]);
    Ok(())
}
