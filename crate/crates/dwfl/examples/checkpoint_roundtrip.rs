//! Save a trained model to the versioned checkpoint container, load it back,
//! and verify the round trip is bit-exact.
//!
//! ```bash
//! cargo run -p dwfl --example checkpoint_roundtrip
//! ```

use dwfl::nn::{stack_layer_specs, train, Model, TrainConfig};
use dwfl::synth::{generate_synthetic, SyntheticSpec};
use dwfl::{load_model, save_model};

fn main() -> dwfl::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec {
        n_samples: 300,
        n_classes: 3,
        seq_len: 12,
        alphabet_size: 6,
        separability: 0.8,
        seed: 5,
    })?;

    let config = TrainConfig {
        epochs: 4,
        batch_size: 16,
        dropout_rate: 0.2,
        seed: 5,
        ..TrainConfig::default()
    };
    let specs = stack_layer_specs(
        &[24, 12],
        ds.input_dim(),
        ds.n_classes(),
        config.dropout_rate,
        config.l1_coeff,
    );
    let mut model = Model::from_specs(specs, config.seed)?;
    train(&mut model, &ds.features, &ds.labels_onehot, &config, 0.1)?;

    let path = std::env::temp_dir().join("dwfl_roundtrip.ckpt");
    save_model(&path, &model)?;
    let bytes = std::fs::metadata(&path)
        .map_err(|e| dwfl::DwflError::io(path.display().to_string(), e))?
        .len();
    println!("wrote {} ({bytes} bytes)", path.display());

    let loaded = load_model(&path)?;
    let original_checksum = model.weights().checksum();
    let loaded_checksum = loaded.weights().checksum();
    println!("original checksum: {original_checksum}");
    println!("loaded checksum:   {loaded_checksum}");
    assert_eq!(original_checksum, loaded_checksum, "round trip must be bit-exact");

    // Inference agrees bit-for-bit as well.
    let a = model.forward_infer(&ds.features)?;
    let b = loaded.forward_infer(&ds.features)?;
    assert_eq!(a, b);
    println!("predictions from the loaded model match exactly");
    Ok(())
}
