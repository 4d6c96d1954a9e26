//! Feed-forward network engine: dense / batch-norm / dropout layers with a
//! softmax head, L1-regularized cross-entropy loss, and Adam.

mod adam;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use model::{loss, ForwardCache, Gradients, Model};
pub use train::{train, EpochStats, TrainOutcome};

use crate::error::{DwflError, Result};
use sha2::{Digest, Sha256};

/// Epsilon added to the variance before normalizing.
pub const BN_EPSILON: f64 = 1e-5;
/// Running statistics update: `running <- 0.99 * running + 0.01 * batch`.
pub const BN_MOMENTUM: f64 = 0.99;
/// Probabilities are clamped to `[CE_CLAMP, 1]` before the log so a confident
/// wrong prediction yields a large finite loss instead of infinity.
pub const CE_CLAMP: f64 = 1e-12;

/// Deterministic generator used everywhere randomness is needed.
pub type EngineRng = rand_chacha::ChaCha8Rng;

/// One layer of the network stack.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        input_dim: usize,
        output_dim: usize,
        l1_coeff: f64,
    },
    /// Normalizes each feature over the batch; preserves dimension.
    BatchNorm { dim: usize },
    Dropout { dim: usize, rate: f64 },
}

impl LayerSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { input_dim, .. } => input_dim,
            LayerSpec::BatchNorm { dim } | LayerSpec::Dropout { dim, .. } => dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { output_dim, .. } => output_dim,
            LayerSpec::BatchNorm { dim } | LayerSpec::Dropout { dim, .. } => dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Dense {
                input_dim,
                output_dim,
                l1_coeff,
            } => {
                if input_dim == 0 || output_dim == 0 {
                    return Err(DwflError::Config("dense layer dimensions must be >= 1".into()));
                }
                if !(l1_coeff >= 0.0 && l1_coeff.is_finite()) {
                    return Err(DwflError::Config("l1_coeff must be finite and >= 0".into()));
                }
            }
            LayerSpec::BatchNorm { dim } => {
                if dim == 0 {
                    return Err(DwflError::Config("batch_norm dimension must be >= 1".into()));
                }
            }
            LayerSpec::Dropout { dim, rate } => {
                if dim == 0 {
                    return Err(DwflError::Config("dropout dimension must be >= 1".into()));
                }
                if !(0.0..1.0).contains(&rate) {
                    return Err(DwflError::Config(format!(
                        "dropout rate must be in [0,1), got {rate}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of trainable parameters the layer contributes.
    pub fn trainable_param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense {
                input_dim,
                output_dim,
                ..
            } => input_dim * output_dim + output_dim,
            LayerSpec::BatchNorm { dim } => 2 * dim, // gamma + beta
            LayerSpec::Dropout { .. } => 0,
        }
    }

    /// Trainable parameters plus batch-norm running statistics.
    pub fn total_param_count(&self) -> usize {
        match *self {
            LayerSpec::BatchNorm { dim } => 4 * dim,
            _ => self.trainable_param_count(),
        }
    }
}

/// Role of one parameter array inside a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamRole {
    Kernel,
    Bias,
    BnGamma,
    BnBeta,
    BnRunningMean,
    BnRunningVar,
}

impl ParamRole {
    pub fn name(self) -> &'static str {
        match self {
            ParamRole::Kernel => "kernel",
            ParamRole::Bias => "bias",
            ParamRole::BnGamma => "bn_gamma",
            ParamRole::BnBeta => "bn_beta",
            ParamRole::BnRunningMean => "bn_running_mean",
            ParamRole::BnRunningVar => "bn_running_var",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            ParamRole::Kernel => 0,
            ParamRole::Bias => 1,
            ParamRole::BnGamma => 2,
            ParamRole::BnBeta => 3,
            ParamRole::BnRunningMean => 4,
            ParamRole::BnRunningVar => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ParamRole::Kernel,
            1 => ParamRole::Bias,
            2 => ParamRole::BnGamma,
            3 => ParamRole::BnBeta,
            4 => ParamRole::BnRunningMean,
            5 => ParamRole::BnRunningVar,
            _ => return None,
        })
    }

    /// Running statistics travel with the weights but receive no gradient.
    pub fn is_trainable(self) -> bool {
        !matches!(self, ParamRole::BnRunningMean | ParamRole::BnRunningVar)
    }
}

/// One flat parameter array, tagged with its position in the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub layer_index: usize,
    pub role: ParamRole,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl WeightEntry {
    pub fn label(&self) -> String {
        format!("layer {} {}", self.layer_index, self.role.name())
    }
}

/// Ordered, shape-tagged parameter arrays for every layer: the unit exchanged
/// between clients and the server.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub entries: Vec<WeightEntry>,
}

impl ModelWeights {
    /// Checks that `other` has the same entry order, roles, and shapes.
    pub fn compatible_with(&self, other: &ModelWeights) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(DwflError::Aggregation(format!(
                "weight sets have {} vs {} entries",
                self.entries.len(),
                other.entries.len()
            )));
        }
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if a.layer_index != b.layer_index || a.role != b.role || a.shape != b.shape {
                return Err(DwflError::Aggregation(format!(
                    "incompatible entry: {} (shape {:?}) vs {} (shape {:?})",
                    a.label(),
                    a.shape,
                    b.label(),
                    b.shape
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical little-endian encoding of all entries.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update((e.layer_index as u64).to_le_bytes());
            hasher.update([e.role.tag()]);
            for &d in &e.shape {
                hasher.update((d as u64).to_le_bytes());
            }
            for v in &e.values {
                hasher.update(v.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|e| e.values.len()).sum()
    }
}

/// Hyperparameters for one training run. Defaults follow common Adam practice;
/// dropout 0.5 matches the reference architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub l1_coeff: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            l1_coeff: 1e-5,
            dropout_rate: 0.5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(DwflError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(DwflError::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DwflError::Config("learning_rate must be positive".into()));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0 < beta && beta < 1.0) {
                return Err(DwflError::Config(format!("{name} must be in (0,1), got {beta}")));
            }
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return Err(DwflError::Config("adam_epsilon must be positive".into()));
        }
        if !(self.l1_coeff >= 0.0 && self.l1_coeff.is_finite()) {
            return Err(DwflError::Config("l1_coeff must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(DwflError::Config(format!(
                "dropout_rate must be in [0,1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Hidden widths of the reference architecture.
pub const REFERENCE_WIDTHS: [usize; 5] = [512, 256, 128, 64, 32];

/// Builds a Dense+BatchNorm+Dropout block per hidden width, then an output
/// dense layer (no L1) feeding the softmax head.
pub fn stack_layer_specs(
    hidden_widths: &[usize],
    input_dim: usize,
    num_classes: usize,
    dropout_rate: f64,
    l1_coeff: f64,
) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden_widths.len() * 3 + 1);
    let mut prev = input_dim;
    for &width in hidden_widths {
        specs.push(LayerSpec::Dense {
            input_dim: prev,
            output_dim: width,
            l1_coeff,
        });
        specs.push(LayerSpec::BatchNorm { dim: width });
        specs.push(LayerSpec::Dropout {
            dim: width,
            rate: dropout_rate,
        });
        prev = width;
    }
    specs.push(LayerSpec::Dense {
        input_dim: prev,
        output_dim: num_classes,
        l1_coeff: 0.0,
    });
    specs
}

/// The reference stack: five Dense+BatchNorm+Dropout blocks at widths
/// 512/256/128/64/32, then an output dense layer with a softmax head.
pub fn reference_layer_specs(
    input_dim: usize,
    num_classes: usize,
    dropout_rate: f64,
    l1_coeff: f64,
) -> Vec<LayerSpec> {
    stack_layer_specs(&REFERENCE_WIDTHS, input_dim, num_classes, dropout_rate, l1_coeff)
}

/// Builds the reference architecture for the given input width and class count.
pub fn build_model(input_dim: usize, num_classes: usize, config: &TrainConfig) -> Result<Model> {
    if input_dim == 0 {
        return Err(DwflError::Config("input_dim must be >= 1".into()));
    }
    if num_classes < 2 {
        return Err(DwflError::Config(format!(
            "num_classes must be >= 2, got {num_classes}"
        )));
    }
    config.validate()?;
    let specs = reference_layer_specs(input_dim, num_classes, config.dropout_rate, config.l1_coeff);
    Model::from_specs(specs, config.seed)
}

/// Index of the largest element; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in row.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_stack_param_counts_match_closed_form() {
        let specs = reference_layer_specs(26754, 22, 0.5, 1e-5);
        let trainable: usize = specs.iter().map(LayerSpec::trainable_param_count).sum();
        let total: usize = specs.iter().map(LayerSpec::total_param_count).sum();
        assert_eq!(trainable, 13_875_830);
        // Running statistics add another 2 per batch-norm feature.
        assert_eq!(total, 13_875_830 + 2 * (512 + 256 + 128 + 64 + 32));
    }

    #[test]
    fn first_dense_layer_param_count() {
        let specs = reference_layer_specs(26754, 22, 0.5, 1e-5);
        assert_eq!(specs[0].trainable_param_count(), 13_698_560);
        let small = reference_layer_specs(4, 2, 0.5, 0.0);
        assert_eq!(small[0].trainable_param_count(), 2560);
    }

    #[test]
    fn build_model_rejects_bad_dimensions() {
        let cfg = TrainConfig::default();
        assert!(build_model(0, 3, &cfg).is_err());
        assert!(build_model(5, 1, &cfg).is_err());
    }

    #[test]
    fn train_config_range_checks() {
        let mut cfg = TrainConfig::default();
        cfg.adam_beta1 = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn argmax_lowest_index_wins_ties() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }
}
