//! Spectral entropy effective rank on a few hand-built spectra and on data
//! whose variance is spread over a controlled number of directions.

use iqscore::spectral::{cumulative_explained_variance, effective_rank, spectrum_summary};
use iqscore::EmbeddingSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> iqscore::Result<()> {
    for spectrum in [
        vec![1.0, 0.0, 0.0],
        vec![0.5, 0.5],
        vec![0.7, 0.2, 0.1],
        vec![1.0; 8],
    ] {
        let cev = cumulative_explained_variance(&spectrum)?;
        println!(
            "{spectrum:?}: r_ent = {:.4}, cev = {:?}",
            effective_rank(&spectrum)?,
            cev.cev
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, d) = (2000, 64);
    println!("\nactive dims  r_ent   r_norm");
    for active in [1, 4, 16, 64] {
        let data: Vec<f32> = (0..n * d)
            .map(|i| {
                if i % d < active {
                    rng.sample::<f32, _>(StandardNormal)
                } else {
                    0.0
                }
            })
            .collect();
        let s = spectrum_summary(&EmbeddingSet::new(n, d, data)?)?;
        println!("{active:>11} {:>6.2} {:>8.4}", s.r_ent, s.r_norm);
    }
    Ok(())
}
