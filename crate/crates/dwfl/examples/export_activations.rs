//! Export the penultimate-layer activations of a trained model for external
//! visualization (t-SNE, UMAP, plain scatter plots).
//!
//! ```bash
//! cargo run -p dwfl --example export_activations
//! ```

use dwfl::experiment::export_activations;
use dwfl::nn::{build_model, train, TrainConfig};
use dwfl::synth::{generate_synthetic, SyntheticSpec};

fn main() -> dwfl::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec {
        n_samples: 400,
        n_classes: 4,
        seq_len: 16,
        alphabet_size: 8,
        separability: 0.85,
        seed: 9,
    })?;

    let config = TrainConfig {
        epochs: 6,
        batch_size: 32,
        dropout_rate: 0.3,
        seed: 9,
        ..TrainConfig::default()
    };
    // The reference stack ends its hidden blocks at width 32, so the export
    // has 32 activation columns plus the label.
    let mut model = build_model(ds.input_dim(), ds.n_classes(), &config)?;
    let outcome = train(&mut model, &ds.features, &ds.labels_onehot, &config, 0.1)?;
    println!("trained: validation accuracy {:.4}", outcome.val_accuracy);

    let path = std::env::temp_dir().join("dwfl_activations.csv");
    export_activations(&model, &ds, &path)?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| dwfl::DwflError::io(path.display().to_string(), e))?;
    println!("wrote {} ({} rows)", path.display(), text.lines().count() - 1);
    for line in text.lines().take(3) {
        let preview: String = line.chars().take(72).collect();
        println!("  {preview}...");
    }
    Ok(())
}
