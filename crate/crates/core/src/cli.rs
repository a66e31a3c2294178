//! Command-line front end. The binary only parses arguments and calls [`run`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataio::{
    inject_uniform_flip_noise, read_embedding_file, stratified_sample, write_embedding_file,
    FileFormat, NoiseConfig, SamplingConfig,
};
use crate::error::{IqError, Result};
use crate::iqfuse::{
    beta_sweep, beta_sweep_csv, rank_agreement_report_with, FusionWeights, SettingsSeries,
    DEFAULT_ALPHA, DEFAULT_BETA,
};
use crate::neighbors::{DEFAULT_BINS, DEFAULT_K};
use crate::report::{compute_report, PipelineConfig};
use crate::spectral::{
    log_spectrum, series_csv, RankMeConfig, DEFAULT_LOG_FLOOR, DEFAULT_RANKME_EPSILON,
};
use crate::synthgen::{plane_csv, realize_entry, run_scenario, ScenarioSeries};

#[derive(Debug, Parser)]
#[command(
    name = "iqscore",
    version,
    about = "Intrinsic quality scoring for labeled embedding sets"
)]
pub struct Cli {
    /// Worker threads; output bytes do not depend on this.
    #[arg(long, global = true, env = "IQSCORE_THREADS")]
    pub threads: Option<usize>,

    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score an embedding file: consistency, effective rank, RankMe, IQ.
    Compute(ComputeArgs),
    /// Run a synthetic scenario file.
    Synth(SynthArgs),
    /// Correlation of IQ with accuracy over a grid of beta values.
    SweepBeta(SweepArgs),
    /// Rank-agreement table for ER-only, Consis-only, IQ and RankMe.
    Compare(CompareArgs),
    /// Flip labels uniformly within the closed label set.
    InjectNoise(NoiseArgs),
    /// Identity-stratified subset with per-identity dedup.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Label file (binary format only).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "binary", value_parser = parse_format)]
    pub format: FileFormat,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Identities to sample (M).
    #[arg(long, default_value_t = 1000)]
    pub identities: usize,
    /// Rows per identity (m).
    #[arg(long, default_value_t = 10)]
    pub per_identity: usize,
    /// Cosine similarity at or above which same-identity rows are duplicates.
    #[arg(long, default_value_t = 0.9999)]
    pub dedup: f64,
    #[arg(long, default_value_t = 2)]
    pub min_identity_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SamplingArgs {
    fn config(&self) -> SamplingConfig {
        SamplingConfig {
            target_identities: self.identities,
            per_identity: self.per_identity,
            seed: self.seed,
            dedup_threshold: self.dedup,
            min_identity_size: self.min_identity_size,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
}

impl ScoringArgs {
    fn weights(&self) -> Result<FusionWeights> {
        FusionWeights::new(self.alpha, self.beta)
    }
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Score the whole file instead of a stratified subset.
    #[arg(long)]
    pub no_sample: bool,
    /// Divide agreement by the achievable maximum instead of k.
    #[arg(long)]
    pub ceiling: bool,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_RANKME_EPSILON)]
    pub rankme_epsilon: f64,
    #[arg(long)]
    pub rankme_centered: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for histogram, spectrum, log-spectrum and CEV CSVs.
    #[arg(long)]
    pub sidecar_dir: Option<PathBuf>,
    /// Also write the neighbor table CSV into the sidecar directory.
    #[arg(long)]
    pub neighbors_csv: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Per-stage wall-clock timings (JSON).
    #[arg(long)]
    pub timings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Also write each entry's labeled set in the binary format.
    #[arg(long)]
    pub export_worlds: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// CSV table path; stdout when omitted.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out_embeddings: PathBuf,
    #[arg(long)]
    pub out_labels: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub flip_log: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    pub manifest: PathBuf,
}

fn parse_format(s: &str) -> std::result::Result<FileFormat, String> {
    s.parse().map_err(|e: IqError| e.to_string())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| IqError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| IqError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| IqError::io(path, e))
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    let go = move || match cli.command {
        Command::Compute(a) => cmd_compute(&a, verbose),
        Command::Synth(a) => cmd_synth(&a, verbose),
        Command::SweepBeta(a) => cmd_sweep_beta(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::InjectNoise(a) => cmd_inject_noise(&a),
        Command::Sample(a) => cmd_sample(&a),
    };
    match cli.threads {
        Some(0) => Err(IqError::Config("--threads must be positive".to_string())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| IqError::Config(e.to_string()))?
            .install(go),
        None => go(),
    }
}

pub fn cmd_compute(a: &ComputeArgs, verbose: bool) -> Result<()> {
    let set = read_embedding_file(
        &a.input.embeddings,
        a.input.labels.as_deref(),
        a.input.format,
    )?;
    if verbose {
        eprintln!(
            "loaded {} rows x {} dims, {} identities",
            set.n(),
            set.d(),
            set.num_identities()
        );
    }
    let cfg = PipelineConfig {
        k: a.scoring.k,
        weights: a.scoring.weights()?,
        ceiling_normalized: a.ceiling,
        bins: a.bins,
        sampling: (!a.no_sample).then(|| a.sampling.config()),
        dedup_threshold: Some(a.sampling.dedup),
        rankme: RankMeConfig {
            epsilon: a.rankme_epsilon,
            centered: a.rankme_centered,
        },
    };
    let out = compute_report(&set, &cfg)?;
    let report = &out.report;
    emit(a.out.as_deref(), &(report.to_json() + "\n"))?;

    if let Some(dir) = &a.sidecar_dir {
        write(
            &dir.join("agreement_histogram.csv"),
            report.consis.histogram.to_csv(),
        )?;
        write(
            &dir.join("spectrum.csv"),
            series_csv(&report.spectrum.eigenvalues),
        )?;
        write(
            &dir.join("log_spectrum.csv"),
            series_csv(&log_spectrum(
                &report.spectrum.eigenvalues,
                DEFAULT_LOG_FLOOR,
            )),
        )?;
        write(&dir.join("cev.csv"), series_csv(&report.spectrum.cev))?;
        if a.neighbors_csv {
            let subset = match &out.manifest {
                Some(m) => set.normalized()?.select_rows(
                    &m.identities
                        .iter()
                        .flat_map(|d| d.rows.clone())
                        .collect::<Vec<_>>(),
                )?,
                None => {
                    let normalized = set.normalized()?;
                    crate::dataio::dedup_within_identity(&normalized, a.sampling.dedup)?.0
                }
            };
            let table = crate::neighbors::exact_topk_cosine(subset.embeddings(), cfg.k)?;
            write(&dir.join("neighbors.csv"), table.to_csv())?;
        }
    }
    if let (Some(path), Some(manifest)) = (&a.manifest, &out.manifest) {
        write(path, to_json(manifest))?;
    }
    if let (Some(path), Some(t)) = (&a.timings, &report.timings) {
        write(path, to_json(t))?;
    }
    if verbose {
        eprintln!(
            "consis {:.4}  r_norm {:.4}  iq {:.4}",
            report.consis.mean_consis, report.spectrum.r_norm, report.iq
        );
    }
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs, verbose: bool) -> Result<()> {
    let series = ScenarioSeries::from_json(&read_text(&a.scenario)?)?;
    let outcome = run_scenario(
        &series,
        a.scoring.k,
        a.scoring.weights()?,
        &a.sampling.config(),
    )?;
    for (i, (entry, report)) in series.entries.iter().zip(&outcome.reports).enumerate() {
        let stem = format!("{i:03}_{}", sanitize(&entry.name));
        write(
            &a.out_dir.join(format!("report_{stem}.json")),
            report.to_json() + "\n",
        )?;
        if a.export_worlds {
            let set = realize_entry(entry, series.proxy_pull)?;
            write_embedding_file(
                &set,
                &a.out_dir.join(format!("world_{stem}.iqem")),
                Some(&a.out_dir.join(format!("world_{stem}.iqlb"))),
                FileFormat::Binary,
            )?;
        }
        if verbose {
            eprintln!(
                "{}: consis {:.4} r_norm {:.4}",
                entry.name, report.consis.mean_consis, report.spectrum.r_norm
            );
        }
    }
    write(&a.out_dir.join("plane.csv"), plane_csv(&outcome.plane))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_sweep_beta(a: &SweepArgs) -> Result<()> {
    if !(a.step > 0.0 && a.step <= 1.0) {
        return Err(IqError::Config(format!(
            "step must lie in (0, 1], got {}",
            a.step
        )));
    }
    let series = SettingsSeries::from_csv(&read_text(&a.series)?)?;
    let steps = (1.0 / a.step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * a.step).min(1.0)).collect();
    let rows = beta_sweep(&series, &grid)?;
    emit(a.out.as_deref(), &beta_sweep_csv(&rows))
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let series = SettingsSeries::from_csv(&read_text(&a.series)?)?;
    let report = rank_agreement_report_with(&series, FusionWeights::new(a.alpha, a.beta)?)?;
    if let Some(path) = &a.out_json {
        write(path, to_json(&report))?;
    }
    emit(a.out_csv.as_deref(), &report.to_csv())
}

pub fn cmd_inject_noise(a: &NoiseArgs) -> Result<()> {
    let set = read_embedding_file(
        &a.input.embeddings,
        a.input.labels.as_deref(),
        a.input.format,
    )?;
    let cfg = NoiseConfig {
        flip_ratio: a.ratio,
        seed: a.seed,
    };
    let (noisy, log) = inject_uniform_flip_noise(&set, &cfg)?;
    write_embedding_file(
        &noisy,
        &a.output.out_embeddings,
        Some(&a.output.out_labels),
        FileFormat::Binary,
    )?;
    write(&a.flip_log, to_json(&log))
}

pub fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let set = read_embedding_file(
        &a.input.embeddings,
        a.input.labels.as_deref(),
        a.input.format,
    )?;
    let (subset, manifest) = stratified_sample(&set, &a.sampling.config())?;
    write_embedding_file(
        &subset,
        &a.output.out_embeddings,
        Some(&a.output.out_labels),
        FileFormat::Binary,
    )?;
    write(&a.manifest, to_json(&manifest))
}

/// Single-line JSON error for stderr.
pub fn error_line(err: &IqError) -> String {
    serde_json::json!({
        "error": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    })
    .to_string()
}
