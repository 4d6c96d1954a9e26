//! Show how dynamic weighting reacts to one poor-performing client: shuffle
//! the labels of a single shard and compare dwfl_avg against fedavg.
//!
//! ```bash
//! cargo run -p dwfl --example poisoned_client
//! ```

use dwfl::federation::{run_federation, AggregationStrategy, RoundConfig};
use dwfl::metrics::compute_run_metrics;
use dwfl::nn::TrainConfig;
use dwfl::partition::{poison_shard, split_federated, PoisonMode, SplitPlan};
use dwfl::synth::{generate_synthetic, SyntheticSpec};

fn main() -> dwfl::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec {
        n_samples: 1800,
        n_classes: 4,
        seq_len: 40,
        alphabet_size: 8,
        separability: 0.7,
        seed: 20,
    })?;

    let plan = SplitPlan {
        global_train_fraction: 0.0, // score the aggregated model directly
        seed: 2,
        ..SplitPlan::default()
    };
    let mut split = split_federated(&ds, &plan)?;
    let poisoned_client = 0;
    split.client_shards[poisoned_client] =
        poison_shard(&split.client_shards[poisoned_client], PoisonMode::LabelShuffle, 5);
    println!("client {poisoned_client} got label-shuffled data\n");

    let client_train = TrainConfig {
        epochs: 8,
        batch_size: 32,
        dropout_rate: 0.3,
        seed: 2,
        ..TrainConfig::default()
    };
    for strategy in [AggregationStrategy::DwflAvg, AggregationStrategy::FedAvg] {
        let config = RoundConfig {
            strategy,
            client_train: client_train.clone(),
            global_train: client_train.clone(),
            hidden_widths: vec![64, 32],
            ..RoundConfig::default()
        };
        let outcome = run_federation(&split, &config)?;
        let round = &outcome.rounds[0];
        println!("{strategy}:");
        for client in &round.clients {
            let marker = if client.client_id == poisoned_client {
                "  <- poisoned"
            } else {
                ""
            };
            println!(
                "  client {}: val acc {:.4}, beta {:.4}{marker}",
                client.client_id, client.val_accuracy, client.beta
            );
        }
        let probs = outcome.global_model.forward_infer(&split.test.features)?;
        let y_true: Vec<usize> = (0..split.test.n_samples())
            .map(|r| split.test.label_of(r))
            .collect();
        let metrics = compute_run_metrics(&probs, &y_true, split.test.n_classes(), 0.0)?;
        println!("  test accuracy: {:.4}\n", metrics.accuracy);
    }
    Ok(())
}
