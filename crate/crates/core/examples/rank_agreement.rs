//! Rank agreement of IQ and its ablations with downstream accuracy, plus the
//! beta sweep, on the bundled eight-setting table.

use iqscore::iqfuse::{beta_sweep, default_beta_grid, rank_agreement_report, SettingsSeries};
use iqscore::FusionWeights;

fn main() -> iqscore::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/settings.csv").to_string()
    });
    let text = std::fs::read_to_string(&path).map_err(|e| iqscore::IqError::Io {
        path: path.into(),
        source: e,
    })?;
    let series = SettingsSeries::from_csv(&text)?;

    for (name, iq) in series
        .names
        .iter()
        .zip(series.iq(FusionWeights::default())?)
    {
        println!("{name:<16} IQ {iq:.4}");
    }
    println!("\n{}", rank_agreement_report(&series)?.to_csv());
    println!("beta  spearman  pearson");
    for row in beta_sweep(&series, &default_beta_grid())? {
        println!(
            "{:.2}  {:>8.3}  {:>7.3}",
            row.beta, row.spearman, row.pearson
        );
    }
    Ok(())
}
