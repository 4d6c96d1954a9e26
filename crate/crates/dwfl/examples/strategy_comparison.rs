//! Compare all six aggregation strategies on the same corpus and seeds,
//! mirroring the federated rows of a results table.
//!
//! ```bash
//! cargo run -p dwfl --example strategy_comparison
//! ```

use dwfl::config::{AlphabetMode, DataSource, ExperimentConfig};
use dwfl::experiment::run_experiment;
use dwfl::federation::{AggregationStrategy, DwflExtremumMode};
use dwfl::nn::TrainConfig;
use dwfl::partition::SplitPlan;
use dwfl::synth::SyntheticSpec;

fn main() -> dwfl::Result<()> {
    let out_dir = std::env::temp_dir().join("dwfl_strategy_comparison");
    let config = ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSpec {
            n_samples: 1200,
            n_classes: 4,
            seq_len: 30,
            alphabet_size: 8,
            separability: 0.75,
            seed: 11,
        }),
        alphabet_mode: AlphabetMode::DefaultProtein,
        split: SplitPlan::default(),
        n_rounds: 1,
        val_split: 0.1,
        hidden_widths: vec![64, 32],
        dwfl_extremum_mode: DwflExtremumMode::ScaledValues,
        client_train: TrainConfig {
            epochs: 6,
            batch_size: 32,
            dropout_rate: 0.3,
            ..TrainConfig::default()
        },
        global_train: TrainConfig {
            epochs: 3,
            batch_size: 32,
            dropout_rate: 0.3,
            ..TrainConfig::default()
        },
        poison: None,
        strategies: AggregationStrategy::ALL.to_vec(),
        seeds: vec![1, 2, 3],
        out_dir: out_dir.clone(),
    };

    let summary = run_experiment(&config)?;
    print!("{}", summary.summary_table());
    println!("\nfull tables and checkpoints under {}", out_dir.display());
    Ok(())
}
