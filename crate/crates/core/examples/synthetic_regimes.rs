//! Clean scaling vs. label corruption on synthetic cluster worlds.
//!
//! Builds a scaling series (more identities, no noise) and a noise series
//! (fixed world, rising flip ratio), scores both, and prints the averaged
//! trajectories in the (normalized rank, consistency) plane.
//!
//! ```text
//! cargo run --release --example synthetic_regimes -- [seeds]
//! ```

use iqscore::dataio::SamplingConfig;
use iqscore::synthgen::{
    build_noise_series, build_scaling_series, run_scenario, ClusterWorldConfig,
};
use iqscore::FusionWeights;

fn main() -> iqscore::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let ratios = [0.0, 0.1, 0.2, 0.4];
    let counts = [100, 300, 1000];
    let sampling = SamplingConfig::default();

    let mut noise = vec![[0.0f64; 3]; ratios.len()];
    let mut scale = vec![[0.0f64; 3]; counts.len()];
    for seed in 0..seeds {
        let base = ClusterWorldConfig {
            seed,
            ..Default::default()
        };
        let n = run_scenario(
            &build_noise_series(&base, &ratios)?,
            10,
            FusionWeights::default(),
            &sampling,
        )?;
        let s = run_scenario(
            &build_scaling_series(&base, &counts)?,
            10,
            FusionWeights::default(),
            &sampling,
        )?;
        for (acc, row) in noise.iter_mut().zip(&n.plane) {
            acc[0] += row.r_norm / seeds as f64;
            acc[1] += row.mean_consis / seeds as f64;
            acc[2] += row.iq / seeds as f64;
        }
        for (acc, row) in scale.iter_mut().zip(&s.plane) {
            acc[0] += row.r_norm / seeds as f64;
            acc[1] += row.mean_consis / seeds as f64;
            acc[2] += row.iq / seeds as f64;
        }
    }

    println!("noise series (1000 identities, mean over {seeds} seeds)");
    println!(
        "{:>8} {:>10} {:>10} {:>10}",
        "rho", "r_norm", "consis", "iq"
    );
    for (rho, v) in ratios.iter().zip(&noise) {
        println!("{rho:>8.2} {:>10.5} {:>10.5} {:>10.5}", v[0], v[1], v[2]);
    }
    println!("\nscaling series (clean, mean over {seeds} seeds)");
    println!(
        "{:>8} {:>10} {:>10} {:>10}",
        "ids", "r_norm", "consis", "iq"
    );
    for (m, v) in counts.iter().zip(&scale) {
        println!("{m:>8} {:>10.5} {:>10.5} {:>10.5}", v[0], v[1], v[2]);
    }
    Ok(())
}
