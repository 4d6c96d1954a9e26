//! Ingest a FASTA corpus through a manifest, one-hot encode it, and train.
//! Writes a tiny corpus to a temp directory first so the example is
//! self-contained.
//!
//! ```bash
//! cargo run -p dwfl --example fasta_pipeline
//! ```

use std::fs;

use dwfl::encoding::{one_hot_encode, parse_fasta_corpus, read_manifest, Alphabet};
use dwfl::nn::{stack_layer_specs, train, Model, TrainConfig};
use dwfl::synth::{generate_records, SyntheticSpec};

fn main() -> dwfl::Result<()> {
    let dir = std::env::temp_dir().join("dwfl_fasta_pipeline");
    fs::create_dir_all(&dir).map_err(|e| dwfl::DwflError::io(dir.display().to_string(), e))?;

    // Write one FASTA file per host label, plus the manifest that maps
    // label -> file. Sequences come from the synthetic generator so they are
    // pre-aligned to one length.
    let records = generate_records(&SyntheticSpec {
        n_samples: 300,
        n_classes: 3,
        seq_len: 24,
        alphabet_size: 10,
        separability: 0.85,
        seed: 13,
    })?;
    let mut manifest_text = String::new();
    for class in ["class_000", "class_001", "class_002"] {
        let path = dir.join(format!("{class}.fasta"));
        let mut fasta = String::new();
        for record in records.iter().filter(|r| r.host_label == class) {
            fasta.push_str(&format!(">{}\n{}\n", record.id, record.residues));
        }
        fs::write(&path, fasta).map_err(|e| dwfl::DwflError::io(path.display().to_string(), e))?;
        manifest_text.push_str(&format!("{class}\t{class}.fasta\n"));
    }
    let manifest_path = dir.join("corpus.tsv");
    fs::write(&manifest_path, manifest_text)
        .map_err(|e| dwfl::DwflError::io(manifest_path.display().to_string(), e))?;
    println!("wrote corpus under {}", dir.display());

    // Parse and encode.
    let entries = read_manifest(&manifest_path)?;
    let alphabet = Alphabet::default_protein();
    let corpus = parse_fasta_corpus(&entries, &alphabet)?;
    println!(
        "parsed {} records ({} symbols mapped to 'X')",
        corpus.records.len(),
        corpus.unknown_mapped
    );
    let ds = one_hot_encode(&corpus.records, &alphabet)?;
    println!(
        "encoded: {} samples x {} features, classes {:?}",
        ds.n_samples(),
        ds.input_dim(),
        ds.class_names
    );

    // Short training run to close the loop.
    let config = TrainConfig {
        epochs: 5,
        batch_size: 32,
        dropout_rate: 0.2,
        seed: 1,
        ..TrainConfig::default()
    };
    let specs = stack_layer_specs(
        &[32],
        ds.input_dim(),
        ds.n_classes(),
        config.dropout_rate,
        config.l1_coeff,
    );
    let mut model = Model::from_specs(specs, config.seed)?;
    let outcome = train(&mut model, &ds.features, &ds.labels_onehot, &config, 0.2)?;
    println!("validation accuracy after {} epochs: {:.4}", config.epochs, outcome.val_accuracy);
    Ok(())
}
