//! `dwfl` command-line driver. All logic lives in the library; this binary
//! only parses arguments and wires subcommands to it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dwfl::config::{parse_config_file, DataSource, ExperimentConfig};
use dwfl::encoding::{load_dataset, save_dataset};
use dwfl::error::{DwflError, Result};
use dwfl::experiment::{export_activations, run_experiment};
use dwfl::federation::AggregationStrategy;
use dwfl::nn::LayerSpec;
use dwfl::synth::{generate_synthetic, synthetic_alphabet};
use dwfl::{load_model, load_weights};

#[derive(Parser)]
#[command(name = "dwfl", version, about = "Dynamic weighted federated learning simulator")]
struct Cli {
    /// Experiment config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's out_dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Replace the config's seed list with this single seed.
    #[arg(long, global = true, value_name = "N")]
    seed_override: Option<u64>,

    /// Strategy to run (repeatable; overrides the config's list).
    #[arg(long = "strategy", global = true, value_name = "TAG")]
    strategies: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment: every strategy x seed cell, with
    /// metric tables, round logs, and checkpoints under the output dir.
    Run,
    /// Generate the configured synthetic dataset and write its container.
    Synth,
    /// Print a summary of a checkpoint, dataset container, or round log.
    Inspect {
        /// File to inspect.
        path: PathBuf,
    },
    /// Export penultimate-layer activations plus labels for external
    /// plotting.
    Activations {
        /// Weight checkpoint of the trained model.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Dataset container to run through the model.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(threads) = std::env::var("DWFL_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: DWFL_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::FAILURE;
            }
        }
    }

    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run => {
            let config = load_config(&cli)?;
            let summary = run_experiment(&config)?;
            print!("{}", summary.summary_table());
            println!("artifacts written to {}", config.out_dir.display());
            Ok(())
        }
        Command::Synth => {
            let config = load_config(&cli)?;
            let spec = match &config.data {
                DataSource::Synthetic(spec) => {
                    let mut spec = spec.clone();
                    if let Some(seed) = cli.seed_override {
                        spec.seed = seed;
                    }
                    spec
                }
                DataSource::FastaManifest(_) => {
                    return Err(DwflError::Config(
                        "synth requires [data] source = synthetic".into(),
                    ))
                }
            };
            let ds = generate_synthetic(&spec)?;
            let alphabet = synthetic_alphabet(&spec)?;
            std::fs::create_dir_all(&config.out_dir)
                .map_err(|e| DwflError::io(config.out_dir.display().to_string(), e))?;
            let path = config.out_dir.join("synthetic.dset");
            save_dataset(&path, &ds, &alphabet)?;
            println!(
                "wrote {} ({} samples, {} classes, input width {})",
                path.display(),
                ds.n_samples(),
                ds.n_classes(),
                ds.input_dim()
            );
            Ok(())
        }
        Command::Inspect { path } => inspect(&path),
        Command::Activations { checkpoint, data } => {
            let model = load_model(&checkpoint)?;
            let (ds, _) = load_dataset(&data)?;
            let out_dir = cli.out.unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| DwflError::io(out_dir.display().to_string(), e))?;
            let out_path = out_dir.join("activations.csv");
            export_activations(&model, &ds, &out_path)?;
            println!("wrote {} ({} rows)", out_path.display(), ds.n_samples());
            Ok(())
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| DwflError::Config("--config PATH is required".into()))?;
    let mut config = parse_config_file(path)?;
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed_override {
        config.seeds = vec![seed];
    }
    if !cli.strategies.is_empty() {
        config.strategies = cli
            .strategies
            .iter()
            .map(|tag| {
                AggregationStrategy::from_tag(tag)
                    .ok_or_else(|| DwflError::Config(format!("unknown strategy {tag:?}")))
            })
            .collect::<Result<_>>()?;
    }
    config.validate()?;
    Ok(config)
}

fn inspect(path: &Path) -> Result<()> {
    let mut magic = [0u8; 8];
    {
        use std::io::Read;
        let mut file = std::fs::File::open(path)
            .map_err(|e| DwflError::io(path.display().to_string(), e))?;
        let n = file
            .read(&mut magic)
            .map_err(|e| DwflError::io(path.display().to_string(), e))?;
        if n < 8 {
            return Err(DwflError::Format(format!(
                "{}: too short to inspect",
                path.display()
            )));
        }
    }
    match &magic {
        b"DWFLCKPT" => {
            let (header, weights) = load_weights(path)?;
            println!("weight checkpoint (format v{})", header.version);
            println!("input_dim: {}", header.input_dim);
            println!("num_classes: {}", header.num_classes);
            println!("layers:");
            for (i, spec) in header.specs.iter().enumerate() {
                match spec {
                    LayerSpec::Dense {
                        input_dim,
                        output_dim,
                        l1_coeff,
                    } => println!("  {i}: dense {input_dim} -> {output_dim} (l1 {l1_coeff})"),
                    LayerSpec::BatchNorm { dim } => println!("  {i}: batch_norm {dim}"),
                    LayerSpec::Dropout { dim, rate } => {
                        println!("  {i}: dropout {dim} (rate {rate})")
                    }
                }
            }
            let trainable: usize = header
                .specs
                .iter()
                .map(LayerSpec::trainable_param_count)
                .sum();
            println!("trainable parameters: {trainable}");
            println!("stored arrays: {}", weights.entries.len());
            println!("checksum: {}", weights.checksum());
        }
        b"DWFLDSET" => {
            let (ds, alphabet) = load_dataset(path)?;
            println!("dataset container");
            println!("samples: {}", ds.n_samples());
            println!("seq_len: {}", ds.seq_len);
            println!(
                "alphabet ({} symbols): {}",
                alphabet.len(),
                alphabet.symbols().iter().collect::<String>()
            );
            println!("input width: {}", ds.input_dim());
            println!("classes:");
            for (name, count) in ds.class_names.iter().zip(ds.class_counts()) {
                println!("  {name}: {count}");
            }
        }
        _ => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| DwflError::io(path.display().to_string(), e))?;
            if !text.lines().any(|l| l.contains("round=")) {
                return Err(DwflError::Format(format!(
                    "{}: not a checkpoint, dataset container, or round log",
                    path.display()
                )));
            }
            let client_lines = text.lines().filter(|l| l.contains("client=")).count();
            println!("round log ({client_lines} client records)");
            for line in text.lines().filter(|l| l.contains("strategy=")) {
                println!("{line}");
            }
        }
    }
    Ok(())
}
