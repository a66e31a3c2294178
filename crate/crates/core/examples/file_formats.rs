//! Binary and CSV embedding files: write, read back, compare.

use iqscore::dataio::{read_embedding_file, write_embedding_file, FileFormat};
use iqscore::synthgen::{generate_cluster_world, ClusterWorldConfig};

fn main() -> iqscore::Result<()> {
    let dir = std::env::temp_dir().join("iqscore_file_formats");
    std::fs::create_dir_all(&dir).map_err(|e| iqscore::IqError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let set = generate_cluster_world(&ClusterWorldConfig {
        num_identities: 5,
        per_identity: 3,
        dim: 4,
        dispersion: 0.2,
        seed: 1,
    })?
    .set;

    let (emb, lab, csv) = (
        dir.join("set.iqem"),
        dir.join("set.iqlb"),
        dir.join("set.csv"),
    );
    write_embedding_file(&set, &emb, Some(&lab), FileFormat::Binary)?;
    write_embedding_file(&set, &csv, None, FileFormat::Csv)?;

    let from_bin = read_embedding_file(&emb, Some(&lab), FileFormat::Binary)?;
    let from_csv = read_embedding_file(&csv, None, FileFormat::Csv)?;
    println!("binary round trip exact: {}", from_bin == set);
    println!(
        "csv labels preserved:    {}",
        from_csv.labels() == set.labels()
    );
    println!("fingerprint {}", set.fingerprint());
    println!(
        "\n{}",
        std::fs::read_to_string(&csv)
            .unwrap()
            .lines()
            .take(4)
            .collect::<Vec<_>>()
            .join("\n")
    );
    Ok(())
}
