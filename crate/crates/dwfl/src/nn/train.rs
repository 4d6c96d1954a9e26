//! Mini-batch training loop with a held-out validation split.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{DwflError, Result};
use crate::nn::{adam_step, argmax, loss, AdamState, EngineRng, Model, TrainConfig};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Argmax accuracy of the final model on the held-out rows (or on the
    /// training rows when the split is degenerate).
    pub val_accuracy: f64,
    pub history: Vec<EpochStats>,
    pub n_train: usize,
    pub n_validation: usize,
    /// True when zero rows were held out and the training set stood in.
    pub degenerate_validation: bool,
}

/// Trains the model in place. The final `floor(n * val_split)` rows of a
/// seeded shuffle are held out for validation; the rest feed mini-batch Adam
/// for `config.epochs` epochs.
pub fn train(
    model: &mut Model,
    x: &Matrix,
    y_onehot: &Matrix,
    config: &TrainConfig,
    val_split: f64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if !(0.0..1.0).contains(&val_split) {
        return Err(DwflError::Config(format!(
            "val_split must be in [0,1), got {val_split}"
        )));
    }
    let n = x.rows();
    if n == 0 {
        return Err(DwflError::Data("cannot train on an empty dataset".into()));
    }
    if y_onehot.rows() != n {
        return Err(DwflError::Shape(format!(
            "features have {n} rows, labels have {}",
            y_onehot.rows()
        )));
    }
    if n < 2 {
        return Err(DwflError::Data("training needs at least 2 samples".into()));
    }
    if y_onehot.cols() != model.num_classes() {
        return Err(DwflError::Shape(format!(
            "labels have {} classes, model expects {}",
            y_onehot.cols(),
            model.num_classes()
        )));
    }

    let mut rng = EngineRng::seed_from_u64(config.seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_val = (n as f64 * val_split).floor() as usize;
    let n_train = n - n_val;
    let (train_idx, val_idx) = indices.split_at(n_train);
    let mut train_idx = train_idx.to_vec();

    let mut opt = AdamState::new(model, config);
    let mut step = 0usize;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in train_idx.chunks(config.batch_size) {
            let xb = x.select_rows(chunk);
            let yb = y_onehot.select_rows(chunk);
            let (probs, cache) = model.forward_train(&xb, &mut rng)?;
            let batch_loss = loss(&probs, &yb, model)?;
            if !batch_loss.is_finite() {
                return Err(DwflError::Diverged(format!(
                    "non-finite loss at epoch {epoch}, step {step}"
                )));
            }
            let grads = model.backward(&cache, &yb)?;
            model.update_running_stats(&cache)?;
            step += 1;
            adam_step(model, &grads, &mut opt, step)?;

            loss_sum += batch_loss * chunk.len() as f64;
            correct += count_argmax_matches(&probs, &yb);
        }
        history.push(EpochStats {
            epoch,
            loss: loss_sum / n_train as f64,
            accuracy: correct as f64 / n_train as f64,
        });
    }

    let (eval_idx, degenerate) = if n_val > 0 {
        (val_idx, false)
    } else {
        warn!("validation split held out 0 rows; reporting training accuracy instead");
        (&train_idx[..], true)
    };
    let probs = model.forward_infer(&x.select_rows(eval_idx))?;
    let val_accuracy =
        count_argmax_matches(&probs, &y_onehot.select_rows(eval_idx)) as f64 / eval_idx.len() as f64;

    Ok(TrainOutcome {
        val_accuracy,
        history,
        n_train,
        n_validation: n_val,
        degenerate_validation: degenerate,
    })
}

fn count_argmax_matches(probs: &Matrix, y_onehot: &Matrix) -> usize {
    (0..probs.rows())
        .filter(|&r| argmax(probs.row(r)) == argmax(y_onehot.row(r)))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;
    use rand::Rng;

    fn small_stack(input_dim: usize, classes: usize, dropout: f64) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Dense {
                input_dim,
                output_dim: 16,
                l1_coeff: 1e-5,
            },
            LayerSpec::BatchNorm { dim: 16 },
            LayerSpec::Dropout {
                dim: 16,
                rate: dropout,
            },
            LayerSpec::Dense {
                input_dim: 16,
                output_dim: classes,
                l1_coeff: 0.0,
            },
        ]
    }

    /// Two well-separated uniform blobs in 4 dimensions.
    fn separable_blobs(n: usize, seed: u64) -> (Matrix, Matrix) {
        let mut rng = EngineRng::seed_from_u64(seed);
        let mut x = Matrix::zeros(n, 4);
        let mut y = Matrix::zeros(n, 2);
        for r in 0..n {
            let class = r % 2;
            let center = if class == 0 { -1.0 } else { 1.0 };
            for c in 0..4 {
                x.set(r, c, center + rng.gen_range(-0.5..0.5));
            }
            y.set(r, class, 1.0);
        }
        (x, y)
    }

    #[test]
    fn learns_linearly_separable_data() {
        let (x, y) = separable_blobs(200, 17);
        let cfg = TrainConfig {
            epochs: 30,
            dropout_rate: 0.2,
            seed: 3,
            ..TrainConfig::default()
        };
        let mut model = Model::from_specs(small_stack(4, 2, cfg.dropout_rate), cfg.seed).unwrap();
        let outcome = train(&mut model, &x, &y, &cfg, 0.2).unwrap();
        assert_eq!(outcome.history.len(), 30);
        assert!(
            outcome.val_accuracy >= 0.95,
            "val accuracy {}",
            outcome.val_accuracy
        );
    }

    #[test]
    fn random_labels_stay_near_chance() {
        for seed in 1..=5u64 {
            let mut rng = EngineRng::seed_from_u64(seed);
            let n = 400;
            let mut x = Matrix::zeros(n, 6);
            let mut y = Matrix::zeros(n, 4);
            for r in 0..n {
                for c in 0..6 {
                    x.set(r, c, rng.gen_range(-1.0..1.0));
                }
                let label = rng.gen_range(0..4usize);
                y.set(r, label, 1.0);
            }
            let cfg = TrainConfig {
                epochs: 10,
                dropout_rate: 0.2,
                seed,
                ..TrainConfig::default()
            };
            let mut model =
                Model::from_specs(small_stack(6, 4, cfg.dropout_rate), cfg.seed).unwrap();
            let outcome = train(&mut model, &x, &y, &cfg, 0.25).unwrap();
            assert!(
                (0.10..=0.45).contains(&outcome.val_accuracy),
                "seed {seed}: val accuracy {}",
                outcome.val_accuracy
            );
        }
    }

    #[test]
    fn val_split_uses_floor_arithmetic() {
        let (x, y) = separable_blobs(100, 4);
        let cfg = TrainConfig {
            epochs: 1,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let mut model = Model::from_specs(small_stack(4, 2, 0.0), 1).unwrap();
        let outcome = train(&mut model, &x, &y, &cfg, 0.1).unwrap();
        assert_eq!(outcome.n_validation, 10);
        assert_eq!(outcome.n_train, 90);
        assert!(!outcome.degenerate_validation);
    }

    #[test]
    fn zero_val_split_reports_degenerate_training_accuracy() {
        let (x, y) = separable_blobs(40, 9);
        let cfg = TrainConfig {
            epochs: 2,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let mut model = Model::from_specs(small_stack(4, 2, 0.0), 2).unwrap();
        let outcome = train(&mut model, &x, &y, &cfg, 0.0).unwrap();
        assert_eq!(outcome.n_validation, 0);
        assert!(outcome.degenerate_validation);
        assert!((0.0..=1.0).contains(&outcome.val_accuracy));
    }

    #[test]
    fn training_is_deterministic_in_seed() {
        let (x, y) = separable_blobs(64, 21);
        let cfg = TrainConfig {
            epochs: 3,
            dropout_rate: 0.4,
            seed: 77,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model =
                Model::from_specs(small_stack(4, 2, cfg.dropout_rate), cfg.seed).unwrap();
            train(&mut model, &x, &y, &cfg, 0.1).unwrap();
            model.weights()
        };
        let a = run();
        let b = run();
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.checksum(), b.checksum());
    }

    #[test]
    fn empty_and_undersized_datasets_are_rejected() {
        let cfg = TrainConfig::default();
        let mut model = Model::from_specs(small_stack(4, 2, 0.5), 1).unwrap();
        let err = train(
            &mut model,
            &Matrix::zeros(0, 4),
            &Matrix::zeros(0, 2),
            &cfg,
            0.1,
        );
        assert!(matches!(err, Err(DwflError::Data(_))));
        let err = train(
            &mut model,
            &Matrix::zeros(1, 4),
            &Matrix::zeros(1, 2),
            &cfg,
            0.1,
        );
        assert!(matches!(err, Err(DwflError::Data(_))));
    }
}
