//! Experiment driver: data loading, strategy x seed sweeps, artifact export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;

use crate::checkpoint::save_model;
use crate::config::{serialize_config, AlphabetMode, DataSource, ExperimentConfig};
use crate::encoding::{
    one_hot_encode, parse_fasta_corpus, read_manifest, save_dataset, Alphabet, EncodedDataset,
};
use crate::error::{DwflError, Result};
use crate::federation::{run_federation, AggregationStrategy, FederationOutcome, RoundConfig};
use crate::metrics::{evaluate_runs, metrics_csv, metrics_records, MetricsReport, RunArtifacts};
use crate::nn::{Model, TrainConfig};
use crate::partition::{poison_shard, split_federated, FederatedSplit, SplitPlan};
use crate::seeding::derive_seed;
use crate::synth::{generate_synthetic, synthetic_alphabet};

const SALT_SPLIT: u64 = 0x51;
const SALT_CLIENT: u64 = 0xc1;
const SALT_GLOBAL: u64 = 0x61;
const SALT_POISON: u64 = 0xb0;

/// Aggregate results for one strategy.
#[derive(Debug)]
pub struct StrategyResult {
    pub strategy: AggregationStrategy,
    pub report: MetricsReport,
}

/// Results of the whole strategy sweep.
#[derive(Debug)]
pub struct ExperimentSummary {
    pub strategies: Vec<StrategyResult>,
}

impl ExperimentSummary {
    /// One row per strategy with its multi-run mean metrics.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "strategy,accuracy,precision_weighted,recall_weighted,f1_weighted,f1_macro,roc_auc_macro_ovr,train_seconds\n",
        );
        for s in &self.strategies {
            let a = &s.report.aggregate;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.4}",
                s.strategy.tag(),
                a.accuracy,
                a.precision_weighted,
                a.recall_weighted,
                a.f1_weighted,
                a.f1_macro,
                a.roc_auc_macro_ovr,
                a.train_seconds
            );
        }
        out
    }

    /// Fixed-width comparison table for terminals.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>8} {:>9} {:>9} {:>8} {:>12}",
            "strategy", "acc", "prec_w", "recall_w", "f1_weig", "f1_macro", "roc_auc", "train_s"
        );
        for s in &self.strategies {
            let a = &s.report.aggregate;
            let _ = writeln!(
                out,
                "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>8.4} {:>12.4}",
                s.strategy.tag(),
                a.accuracy,
                a.precision_weighted,
                a.recall_weighted,
                a.f1_weighted,
                a.f1_macro,
                a.roc_auc_macro_ovr,
                a.train_seconds
            );
        }
        out
    }
}

/// Loads or synthesizes the configured corpus.
pub fn load_data(config: &ExperimentConfig) -> Result<(EncodedDataset, Alphabet)> {
    match &config.data {
        DataSource::Synthetic(spec) => {
            let alphabet = synthetic_alphabet(spec)?;
            Ok((generate_synthetic(spec)?, alphabet))
        }
        DataSource::FastaManifest(path) => {
            let entries = read_manifest(path)?;
            match config.alphabet_mode {
                AlphabetMode::DefaultProtein => {
                    let alphabet = Alphabet::default_protein();
                    let corpus = parse_fasta_corpus(&entries, &alphabet)?;
                    Ok((one_hot_encode(&corpus.records, &alphabet)?, alphabet))
                }
                AlphabetMode::DeriveFromData => {
                    // Parse with the permissive default alphabet first, then
                    // restrict to the observed symbol set.
                    let corpus = parse_fasta_corpus(&entries, &Alphabet::default_protein())?;
                    let alphabet = Alphabet::derive_from_records(&corpus.records)?;
                    Ok((one_hot_encode(&corpus.records, &alphabet)?, alphabet))
                }
            }
        }
    }
}

/// The split and round configuration for one (strategy, seed) cell.
pub fn cell_setup(
    config: &ExperimentConfig,
    strategy: AggregationStrategy,
    seed: u64,
    ds: &EncodedDataset,
) -> Result<(FederatedSplit, RoundConfig)> {
    let plan = SplitPlan {
        seed: derive_seed(seed, SALT_SPLIT),
        ..config.split.clone()
    };
    let mut split = split_federated(ds, &plan)?;
    if let Some(poison) = &config.poison {
        split.client_shards[poison.client] = poison_shard(
            &split.client_shards[poison.client],
            poison.mode,
            derive_seed(seed, SALT_POISON),
        );
    }
    let round_config = RoundConfig {
        n_rounds: config.n_rounds,
        strategy,
        client_train: TrainConfig {
            seed: derive_seed(seed, SALT_CLIENT),
            ..config.client_train.clone()
        },
        global_train: TrainConfig {
            seed: derive_seed(seed, SALT_GLOBAL),
            ..config.global_train.clone()
        },
        val_split: config.val_split,
        hidden_widths: config.hidden_widths.clone(),
        dwfl_extremum_mode: config.dwfl_extremum_mode,
    };
    Ok((split, round_config))
}

/// Runs one (strategy, seed) cell and returns the federation outcome with
/// its split and wall-clock training time.
pub fn run_cell(
    config: &ExperimentConfig,
    strategy: AggregationStrategy,
    seed: u64,
    ds: &EncodedDataset,
) -> Result<(FederationOutcome, FederatedSplit, f64)> {
    let (split, round_config) = cell_setup(config, strategy, seed, ds)?;
    let start = Instant::now();
    let outcome = run_federation(&split, &round_config)?;
    let train_seconds = start.elapsed().as_secs_f64();
    Ok((outcome, split, train_seconds))
}

/// Executes the full strategy x seed sweep, writing metric tables, round
/// logs, provenance tables, and weight checkpoints under the output
/// directory with deterministic names.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config
        .validate()
        .map_err(|e| stage("config validation", e))?;
    let out_dir = &config.out_dir;
    fs::create_dir_all(out_dir).map_err(|e| DwflError::io(out_dir.display().to_string(), e))?;
    write_text(&out_dir.join("config.resolved"), &serialize_config(config))?;

    let (ds, alphabet) = load_data(config).map_err(|e| stage("data loading", e))?;
    info!(
        "dataset ready: {} samples, {} classes, input width {}",
        ds.n_samples(),
        ds.n_classes(),
        ds.input_dim()
    );
    save_dataset(&out_dir.join("dataset.dset"), &ds, &alphabet)
        .map_err(|e| stage("dataset export", e))?;

    let mut strategies = Vec::with_capacity(config.strategies.len());
    for &strategy in &config.strategies {
        let report = evaluate_runs(
            |seed| {
                let (outcome, split, train_seconds) = run_cell(config, strategy, seed, &ds)
                    .map_err(|e| stage(&format!("{} seed {seed}", strategy.tag()), e))?;

                let tag = strategy.tag();
                write_text(
                    &out_dir.join(format!("rounds_{tag}_seed{seed}.log")),
                    &outcome.round_log_text(),
                )?;
                write_text(
                    &out_dir.join(format!("provenance_seed{seed}.tsv")),
                    &split.provenance_table(&ds.class_names),
                )?;
                save_model(
                    &out_dir.join(format!("global_{tag}_seed{seed}.ckpt")),
                    &outcome.global_model,
                )?;

                Ok(RunArtifacts {
                    model: outcome.global_model,
                    test: split.test,
                    train_seconds,
                })
            },
            &config.seeds,
        )
        .map_err(|e| stage(&format!("strategy {}", strategy.tag()), e))?;

        write_text(
            &out_dir.join(format!("metrics_{}.csv", strategy.tag())),
            &metrics_csv(&report),
        )?;
        write_text(
            &out_dir.join(format!("metrics_{}.records", strategy.tag())),
            &metrics_records(&report),
        )?;
        strategies.push(StrategyResult { strategy, report });
    }

    let summary = ExperimentSummary { strategies };
    write_text(&out_dir.join("summary.csv"), &summary.summary_csv())?;
    Ok(summary)
}

/// Writes the penultimate-layer activations of every sample plus its label,
/// one CSV row per sample, in inference mode.
pub fn export_activations(model: &Model, ds: &EncodedDataset, path: &Path) -> Result<()> {
    let activations = model.penultimate_activations(&ds.features)?;
    let mut out = String::new();
    for j in 0..activations.cols() {
        let _ = write!(out, "act_{j},");
    }
    out.push_str("label\n");
    for r in 0..activations.rows() {
        for &v in activations.row(r) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", ds.class_names[ds.label_of(r)]);
    }
    write_text(path, &out)
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| DwflError::io(path.display().to_string(), e))
}

fn stage(name: &str, e: DwflError) -> DwflError {
    match e {
        DwflError::Io { path, source } => DwflError::Io {
            path: format!("{name}: {path}"),
            source,
        },
        DwflError::Config(msg) => DwflError::Config(format!("{name}: {msg}")),
        DwflError::Data(msg) => DwflError::Data(format!("{name}: {msg}")),
        other => other,
    }
}

/// Canonical experiment output used by determinism checks: the metric tables
/// with their wall-clock column stripped.
pub fn strip_timing_column(csv: &str) -> String {
    let mut out = String::new();
    for line in csv.lines() {
        match line.rsplit_once(',') {
            Some((rest, _timing)) => {
                out.push_str(rest);
                out.push('\n');
            }
            None => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out
}
