//! Train a single feed-forward model on a synthetic sequence corpus.
//!
//! ```bash
//! cargo run -p dwfl --example train_local
//! ```

use dwfl::nn::{build_model, train, TrainConfig};
use dwfl::partition::stratified_split;
use dwfl::synth::{generate_synthetic, SyntheticSpec};

fn main() -> dwfl::Result<()> {
    let spec = SyntheticSpec {
        n_samples: 600,
        n_classes: 4,
        seq_len: 20,
        alphabet_size: 8,
        separability: 0.8,
        seed: 7,
    };
    let ds = generate_synthetic(&spec)?;
    println!(
        "dataset: {} samples, {} classes, input width {}",
        ds.n_samples(),
        ds.n_classes(),
        ds.input_dim()
    );

    let (train_ds, test_ds) = stratified_split(&ds, 0.3, 1)?;
    let config = TrainConfig {
        epochs: 8,
        batch_size: 32,
        dropout_rate: 0.3,
        seed: 1,
        ..TrainConfig::default()
    };

    // The full reference architecture: five hidden blocks, softmax head.
    let mut model = build_model(ds.input_dim(), ds.n_classes(), &config)?;
    println!("model: {} trainable parameters", model.param_count_trainable());

    let outcome = train(
        &mut model,
        &train_ds.features,
        &train_ds.labels_onehot,
        &config,
        0.1,
    )?;
    for epoch in &outcome.history {
        println!(
            "epoch {:>2}  loss {:.4}  train acc {:.4}",
            epoch.epoch, epoch.loss, epoch.accuracy
        );
    }
    println!(
        "validation accuracy: {:.4} ({} held-out rows)",
        outcome.val_accuracy, outcome.n_validation
    );

    let probs = model.forward_infer(&test_ds.features)?;
    let correct = (0..test_ds.n_samples())
        .filter(|&r| dwfl::nn::argmax(probs.row(r)) == test_ds.label_of(r))
        .count();
    println!(
        "test accuracy: {:.4} ({} samples)",
        correct as f64 / test_ds.n_samples() as f64,
        test_ds.n_samples()
    );
    Ok(())
}
