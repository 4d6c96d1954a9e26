//! Adam optimizer with bias correction.

use crate::error::{DwflError, Result};
use crate::nn::{Gradients, Model, ParamRole, TrainConfig};

/// First/second moment estimates, aligned with the model's trainable entries.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    layout: Vec<(usize, ParamRole, usize)>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &Model, config: &TrainConfig) -> AdamState {
        let trainable: Vec<(usize, ParamRole, usize)> = model
            .weights()
            .entries
            .iter()
            .filter(|e| e.role.is_trainable())
            .map(|e| (e.layer_index, e.role, e.values.len()))
            .collect();
        AdamState {
            learning_rate: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            epsilon: config.adam_epsilon,
            m: trainable.iter().map(|&(_, _, len)| vec![0.0; len]).collect(),
            v: trainable.iter().map(|&(_, _, len)| vec![0.0; len]).collect(),
            layout: trainable,
        }
    }
}

/// Applies one bias-corrected Adam update in place. `t` is the 1-based step
/// count shared by the bias-correction terms.
pub fn adam_step(model: &mut Model, grads: &Gradients, state: &mut AdamState, t: usize) -> Result<()> {
    if t == 0 {
        return Err(DwflError::Usage("adam step count t must be >= 1".into()));
    }
    if grads.entries.len() != state.layout.len() {
        return Err(DwflError::Shape(format!(
            "gradient has {} entries, optimizer state expects {}",
            grads.entries.len(),
            state.layout.len()
        )));
    }
    for (grad, &(layer_index, role, len)) in grads.entries.iter().zip(&state.layout) {
        if grad.layer_index != layer_index || grad.role != role || grad.values.len() != len {
            return Err(DwflError::Shape(format!(
                "gradient entry {} does not match optimizer slot layer {} {}",
                grad.label(),
                layer_index,
                role.name()
            )));
        }
    }

    let bc1 = 1.0 - state.beta1.powi(t as i32);
    let bc2 = 1.0 - state.beta2.powi(t as i32);
    let params = model.trainable_params_mut();
    debug_assert_eq!(params.len(), state.layout.len());
    for (((grad, (_, _, param)), m), v) in grads
        .entries
        .iter()
        .zip(params)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for (((g, w), m), v) in grad.values.iter().zip(param).zip(m).zip(v) {
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    model.bump_version();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, WeightEntry};

    fn tiny_model() -> Model {
        Model::from_specs(
            vec![LayerSpec::Dense {
                input_dim: 1,
                output_dim: 2,
                l1_coeff: 0.0,
            }],
            7,
        )
        .unwrap()
    }

    fn grad_for(model: &Model, kernel_grad: Vec<f64>, bias_grad: Vec<f64>) -> Gradients {
        let w = model.weights();
        Gradients {
            entries: vec![
                WeightEntry {
                    layer_index: 0,
                    role: ParamRole::Kernel,
                    shape: w.entries[0].shape.clone(),
                    values: kernel_grad,
                },
                WeightEntry {
                    layer_index: 0,
                    role: ParamRole::Bias,
                    shape: w.entries[1].shape.clone(),
                    values: bias_grad,
                },
            ],
        }
    }

    #[test]
    fn first_step_moves_by_roughly_learning_rate() {
        // Single weight w=1, g=1, lr=0.1: bias correction makes the first
        // step lr * g/|g| up to epsilon, so w ends near 0.9.
        let mut model = tiny_model();
        let mut w = model.weights();
        w.entries[0].values = vec![1.0, 0.0];
        model.set_weights(&w).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut state = AdamState::new(&model, &cfg);
        let grads = grad_for(&model, vec![1.0, 0.0], vec![0.0, 0.0]);
        adam_step(&mut model, &grads, &mut state, 1).unwrap();
        let updated = model.weights();
        assert!((updated.entries[0].values[0] - 0.9).abs() < 1e-6);
        // Zero-gradient slots with zero moments stay put.
        assert_eq!(updated.entries[0].values[1], 0.0);
        assert_eq!(updated.entries[1].values, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let mut model = tiny_model();
        let before = model.weights();
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&model, &cfg);
        state.learning_rate = 0.0;
        let grads = grad_for(&model, vec![0.3, -0.7], vec![0.1, 0.2]);
        adam_step(&mut model, &grads, &mut state, 1).unwrap();
        assert_eq!(model.weights().entries, before.entries);
    }

    #[test]
    fn identical_sequences_stay_bit_identical() {
        let mut a = tiny_model();
        let mut b = a.clone();
        let cfg = TrainConfig::default();
        let mut sa = AdamState::new(&a, &cfg);
        let mut sb = AdamState::new(&b, &cfg);
        for t in 1..=5 {
            let g = grad_for(&a, vec![0.1 * t as f64, -0.2], vec![0.05, 0.0]);
            adam_step(&mut a, &g, &mut sa, t).unwrap();
            adam_step(&mut b, &g, &mut sb, t).unwrap();
        }
        assert_eq!(a.weights().entries, b.weights().entries);
    }

    #[test]
    fn step_count_and_shape_are_checked() {
        let mut model = tiny_model();
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&model, &cfg);
        let grads = grad_for(&model, vec![0.0, 0.0], vec![0.0, 0.0]);
        assert!(adam_step(&mut model, &grads, &mut state, 0).is_err());
        let bad = Gradients {
            entries: vec![grads.entries[0].clone()],
        };
        assert!(adam_step(&mut model, &bad, &mut state, 1).is_err());
    }
}
