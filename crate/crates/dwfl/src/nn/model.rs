//! Model state, forward/backward passes, and the training loss.

use rand::Rng;
use rand::SeedableRng;

use crate::error::{DwflError, Result};
use crate::nn::{
    EngineRng, LayerSpec, ModelWeights, ParamRole, WeightEntry, BN_EPSILON, BN_MOMENTUM, CE_CLAMP,
};
use crate::tensor::Matrix;

#[derive(Debug, Clone)]
enum Layer {
    Dense {
        kernel: Matrix, // input_dim x output_dim
        bias: Vec<f64>,
        l1_coeff: f64,
    },
    BatchNorm {
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
    },
    Dropout {
        rate: f64,
    },
}

/// Feed-forward network with a softmax head.
///
/// Weight mutation bumps an internal version counter; a [`ForwardCache`] is
/// only valid for the version it was produced under.
#[derive(Debug, Clone)]
pub struct Model {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    input_dim: usize,
    num_classes: usize,
    version: u64,
}

struct BnBatchCache {
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    x_hat: Matrix,
}

/// Intermediate activations retained by a train-mode forward pass.
pub struct ForwardCache {
    model_version: u64,
    layer_inputs: Vec<Matrix>,
    bn_caches: Vec<Option<BnBatchCache>>,
    dropout_masks: Vec<Option<Matrix>>,
    probs: Matrix,
}

impl ForwardCache {
    pub fn probs(&self) -> &Matrix {
        &self.probs
    }
}

/// Gradient arrays mirroring the trainable portion of [`ModelWeights`]
/// (running statistics receive no gradient).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub entries: Vec<WeightEntry>,
}

impl Model {
    /// Initializes a model from a validated layer stack: Glorot-uniform
    /// kernels drawn from a generator seeded with `seed`, zero biases,
    /// identity batch-norm state.
    pub fn from_specs(specs: Vec<LayerSpec>, seed: u64) -> Result<Model> {
        if specs.is_empty() {
            return Err(DwflError::Config("layer stack is empty".into()));
        }
        for spec in &specs {
            spec.validate()?;
        }
        for pair in specs.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(DwflError::Config(format!(
                    "layer chain mismatch: {} -> {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        match specs.last() {
            Some(LayerSpec::Dense { output_dim, .. }) if *output_dim >= 2 => {}
            _ => {
                return Err(DwflError::Config(
                    "stack must end in a dense layer with >= 2 outputs".into(),
                ))
            }
        }

        let mut rng = EngineRng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|spec| match *spec {
                LayerSpec::Dense {
                    input_dim,
                    output_dim,
                    l1_coeff,
                } => {
                    let limit = (6.0 / (input_dim + output_dim) as f64).sqrt();
                    let data = (0..input_dim * output_dim)
                        .map(|_| rng.gen_range(-limit..limit))
                        .collect();
                    Layer::Dense {
                        kernel: Matrix::from_vec(input_dim, output_dim, data)
                            .expect("init kernel shape"),
                        bias: vec![0.0; output_dim],
                        l1_coeff,
                    }
                }
                LayerSpec::BatchNorm { dim } => Layer::BatchNorm {
                    gamma: vec![1.0; dim],
                    beta: vec![0.0; dim],
                    running_mean: vec![0.0; dim],
                    running_var: vec![1.0; dim],
                },
                LayerSpec::Dropout { rate, .. } => Layer::Dropout { rate },
            })
            .collect();

        let input_dim = specs[0].input_dim();
        let num_classes = specs.last().unwrap().output_dim();
        Ok(Model {
            specs,
            layers,
            input_dim,
            num_classes,
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layer_specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn param_count_trainable(&self) -> usize {
        self.specs.iter().map(LayerSpec::trainable_param_count).sum()
    }

    pub fn param_count_total(&self) -> usize {
        self.specs.iter().map(LayerSpec::total_param_count).sum()
    }

    /// Snapshot of every parameter array, running statistics included.
    pub fn weights(&self) -> ModelWeights {
        let mut entries = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense { kernel, bias, .. } => {
                    entries.push(WeightEntry {
                        layer_index: i,
                        role: ParamRole::Kernel,
                        shape: vec![kernel.rows(), kernel.cols()],
                        values: kernel.data().to_vec(),
                    });
                    entries.push(WeightEntry {
                        layer_index: i,
                        role: ParamRole::Bias,
                        shape: vec![bias.len()],
                        values: bias.clone(),
                    });
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    for (role, values) in [
                        (ParamRole::BnGamma, gamma),
                        (ParamRole::BnBeta, beta),
                        (ParamRole::BnRunningMean, running_mean),
                        (ParamRole::BnRunningVar, running_var),
                    ] {
                        entries.push(WeightEntry {
                            layer_index: i,
                            role,
                            shape: vec![values.len()],
                            values: values.clone(),
                        });
                    }
                }
                Layer::Dropout { .. } => {}
            }
        }
        ModelWeights { entries }
    }

    /// Installs a weight snapshot. The entry list must structurally match
    /// this model's own snapshot and running variances must stay positive.
    pub fn set_weights(&mut self, weights: &ModelWeights) -> Result<()> {
        self.weights().compatible_with(weights)?;
        for entry in &weights.entries {
            if entry.role == ParamRole::BnRunningVar && entry.values.iter().any(|&v| v <= 0.0) {
                return Err(DwflError::Aggregation(format!(
                    "{} contains non-positive variance",
                    entry.label()
                )));
            }
        }
        for entry in &weights.entries {
            let layer = &mut self.layers[entry.layer_index];
            match (layer, entry.role) {
                (Layer::Dense { kernel, .. }, ParamRole::Kernel) => {
                    kernel.data_mut().copy_from_slice(&entry.values);
                }
                (Layer::Dense { bias, .. }, ParamRole::Bias) => {
                    bias.copy_from_slice(&entry.values);
                }
                (Layer::BatchNorm { gamma, .. }, ParamRole::BnGamma) => {
                    gamma.copy_from_slice(&entry.values);
                }
                (Layer::BatchNorm { beta, .. }, ParamRole::BnBeta) => {
                    beta.copy_from_slice(&entry.values);
                }
                (Layer::BatchNorm { running_mean, .. }, ParamRole::BnRunningMean) => {
                    running_mean.copy_from_slice(&entry.values);
                }
                (Layer::BatchNorm { running_var, .. }, ParamRole::BnRunningVar) => {
                    running_var.copy_from_slice(&entry.values);
                }
                (_, role) => {
                    return Err(DwflError::Aggregation(format!(
                        "entry role {} does not match layer {}",
                        role.name(),
                        entry.layer_index
                    )))
                }
            }
        }
        self.version += 1;
        Ok(())
    }

    /// Train-mode forward pass: batch-norm uses batch statistics, dropout
    /// masks activations with inverted scaling. Running statistics are not
    /// touched here; apply them afterwards via [`Model::update_running_stats`].
    pub fn forward_train(&self, x: &Matrix, rng: &mut EngineRng) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let n_layers = self.layers.len();
        let mut layer_inputs = Vec::with_capacity(n_layers);
        let mut bn_caches: Vec<Option<BnBatchCache>> = Vec::with_capacity(n_layers);
        let mut dropout_masks: Vec<Option<Matrix>> = Vec::with_capacity(n_layers);

        let mut current = x.clone();
        for layer in &self.layers {
            layer_inputs.push(current.clone());
            let mut bn_cache = None;
            let mut mask_entry = None;
            current = match layer {
                Layer::Dense { kernel, bias, .. } => dense_forward(&current, kernel, bias)?,
                Layer::BatchNorm { gamma, beta, .. } => {
                    let (out, cache) = bn_forward_train(&current, gamma, beta);
                    bn_cache = Some(cache);
                    out
                }
                Layer::Dropout { rate } => {
                    if *rate == 0.0 {
                        current
                    } else {
                        let keep_scale = 1.0 / (1.0 - rate);
                        let mut mask = Matrix::zeros(current.rows(), current.cols());
                        for v in mask.data_mut() {
                            *v = if rng.gen::<f64>() >= *rate { keep_scale } else { 0.0 };
                        }
                        let mut out = current;
                        for (o, &m) in out.data_mut().iter_mut().zip(mask.data()) {
                            *o *= m;
                        }
                        mask_entry = Some(mask);
                        out
                    }
                }
            };
            bn_caches.push(bn_cache);
            dropout_masks.push(mask_entry);
        }

        let probs = softmax_rows(&current);
        let cache = ForwardCache {
            model_version: self.version,
            layer_inputs,
            bn_caches,
            dropout_masks,
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    /// Inference forward pass: dropout is the identity, batch-norm uses
    /// running statistics. Pure in (weights, x).
    pub fn forward_infer(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.infer_activations(x, self.layers.len())?))
    }

    /// Activations entering the final dense layer in inference mode; used to
    /// export the penultimate representation.
    pub fn penultimate_activations(&self, x: &Matrix) -> Result<Matrix> {
        self.infer_activations(x, self.layers.len() - 1)
    }

    fn infer_activations(&self, x: &Matrix, upto: usize) -> Result<Matrix> {
        self.check_input(x)?;
        let mut current = x.clone();
        for layer in &self.layers[..upto] {
            current = match layer {
                Layer::Dense { kernel, bias, .. } => dense_forward(&current, kernel, bias)?,
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => bn_forward_infer(&current, gamma, beta, running_mean, running_var),
                Layer::Dropout { .. } => current,
            };
        }
        Ok(current)
    }

    /// Folds the batch statistics captured in `cache` into the running
    /// statistics with momentum [`BN_MOMENTUM`].
    pub fn update_running_stats(&mut self, cache: &ForwardCache) -> Result<()> {
        self.check_cache(cache)?;
        for (layer, bn) in self.layers.iter_mut().zip(&cache.bn_caches) {
            if let (
                Layer::BatchNorm {
                    running_mean,
                    running_var,
                    ..
                },
                Some(bn),
            ) = (layer, bn.as_ref())
            {
                for (r, &b) in running_mean.iter_mut().zip(&bn.batch_mean) {
                    *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
                }
                for (r, &b) in running_var.iter_mut().zip(&bn.batch_var) {
                    *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
                }
            }
        }
        self.version += 1;
        Ok(())
    }

    /// Backpropagates the softmax cross-entropy loss (plus the L1 subgradient
    /// on dense kernels) through the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, y_onehot: &Matrix) -> Result<Gradients> {
        self.check_cache(cache)?;
        if y_onehot.rows() != cache.probs.rows() || y_onehot.cols() != cache.probs.cols() {
            return Err(DwflError::Shape(format!(
                "labels {}x{} do not match probs {}x{}",
                y_onehot.rows(),
                y_onehot.cols(),
                cache.probs.rows(),
                cache.probs.cols()
            )));
        }
        let batch = cache.probs.rows() as f64;

        // Softmax + cross-entropy collapses to (probs - y) / batch.
        let mut upstream = cache.probs.clone();
        for (u, &t) in upstream.data_mut().iter_mut().zip(y_onehot.data()) {
            *u = (*u - t) / batch;
        }

        let mut rev_entries: Vec<WeightEntry> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            match layer {
                Layer::Dense {
                    kernel,
                    bias,
                    l1_coeff,
                } => {
                    let x_in = &cache.layer_inputs[i];
                    let mut d_kernel = x_in.matmul_transpose_self(&upstream)?;
                    if *l1_coeff > 0.0 {
                        for (g, &w) in d_kernel.data_mut().iter_mut().zip(kernel.data()) {
                            *g += l1_coeff * sign(w);
                        }
                    }
                    let mut d_bias = vec![0.0; bias.len()];
                    for r in 0..upstream.rows() {
                        for (b, &u) in d_bias.iter_mut().zip(upstream.row(r)) {
                            *b += u;
                        }
                    }
                    let next_upstream = upstream.matmul_transpose_other(kernel)?;
                    rev_entries.push(WeightEntry {
                        layer_index: i,
                        role: ParamRole::Bias,
                        shape: vec![bias.len()],
                        values: d_bias,
                    });
                    rev_entries.push(WeightEntry {
                        layer_index: i,
                        role: ParamRole::Kernel,
                        shape: vec![kernel.rows(), kernel.cols()],
                        values: d_kernel.data().to_vec(),
                    });
                    upstream = next_upstream;
                }
                Layer::BatchNorm { gamma, .. } => {
                    let bn = cache.bn_caches[i]
                        .as_ref()
                        .expect("batch-norm cache present for train-mode forward");
                    let (d_gamma, d_beta, next_upstream) = bn_backward(&upstream, gamma, bn);
                    rev_entries.push(WeightEntry {
                        layer_index: i,
                        role: ParamRole::BnBeta,
                        shape: vec![d_beta.len()],
                        values: d_beta,
                    });
                    rev_entries.push(WeightEntry {
                        layer_index: i,
                        role: ParamRole::BnGamma,
                        shape: vec![d_gamma.len()],
                        values: d_gamma,
                    });
                    upstream = next_upstream;
                }
                Layer::Dropout { .. } => {
                    if let Some(mask) = &cache.dropout_masks[i] {
                        for (u, &m) in upstream.data_mut().iter_mut().zip(mask.data()) {
                            *u *= m;
                        }
                    }
                }
            }
        }
        rev_entries.reverse();
        Ok(Gradients { entries: rev_entries })
    }

    /// Sum of `l1_coeff * sum(|kernel|)` over all dense layers.
    pub fn l1_penalty(&self) -> f64 {
        self.layers
            .iter()
            .map(|layer| match layer {
                Layer::Dense {
                    kernel, l1_coeff, ..
                } if *l1_coeff > 0.0 => {
                    l1_coeff * kernel.data().iter().map(|w| w.abs()).sum::<f64>()
                }
                _ => 0.0,
            })
            .sum()
    }

    /// Trainable parameter slices in gradient-entry order.
    pub(crate) fn trainable_params_mut(&mut self) -> Vec<(usize, ParamRole, &mut [f64])> {
        let mut out: Vec<(usize, ParamRole, &mut [f64])> = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Dense { kernel, bias, .. } => {
                    out.push((i, ParamRole::Kernel, kernel.data_mut()));
                    out.push((i, ParamRole::Bias, bias.as_mut_slice()));
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.push((i, ParamRole::BnGamma, gamma.as_mut_slice()));
                    out.push((i, ParamRole::BnBeta, beta.as_mut_slice()));
                }
                Layer::Dropout { .. } => {}
            }
        }
        out
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(DwflError::Shape(format!(
                "input has {} columns, model expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.model_version != self.version {
            return Err(DwflError::Usage(
                "forward cache is stale: model weights changed since the pass".into(),
            ));
        }
        Ok(())
    }
}

/// Mean cross-entropy of `probs` against one-hot labels plus the model's L1
/// penalty. Probabilities are clamped to `[1e-12, 1]` before the log.
pub fn loss(probs: &Matrix, y_onehot: &Matrix, model: &Model) -> Result<f64> {
    Ok(cross_entropy(probs, y_onehot)? + model.l1_penalty())
}

/// Mean row-wise cross-entropy against one-hot labels.
pub fn cross_entropy(probs: &Matrix, y_onehot: &Matrix) -> Result<f64> {
    if probs.rows() != y_onehot.rows() || probs.cols() != y_onehot.cols() {
        return Err(DwflError::Shape(format!(
            "probs {}x{} vs labels {}x{}",
            probs.rows(),
            probs.cols(),
            y_onehot.rows(),
            y_onehot.cols()
        )));
    }
    if probs.rows() == 0 {
        return Err(DwflError::Data("cross-entropy over zero rows".into()));
    }
    let mut total = 0.0;
    for r in 0..probs.rows() {
        for (p, &t) in probs.row(r).iter().zip(y_onehot.row(r)) {
            if t != 0.0 {
                total -= t * p.clamp(CE_CLAMP, 1.0).ln();
            }
        }
    }
    Ok(total / probs.rows() as f64)
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn dense_forward(x: &Matrix, kernel: &Matrix, bias: &[f64]) -> Result<Matrix> {
    let mut out = x.matmul(kernel)?;
    for r in 0..out.rows() {
        for (o, &b) in out.row_mut(r).iter_mut().zip(bias) {
            *o += b;
        }
    }
    Ok(out)
}

fn bn_forward_train(x: &Matrix, gamma: &[f64], beta: &[f64]) -> (Matrix, BnBatchCache) {
    let (n, d) = (x.rows(), x.cols());
    let m = n as f64;
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (mu, &v) in mean.iter_mut().zip(x.row(r)) {
            *mu += v;
        }
    }
    for mu in &mut mean {
        *mu /= m;
    }
    // Biased variance, as is standard for batch normalization.
    let mut var = vec![0.0; d];
    for r in 0..n {
        for ((s, &v), &mu) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            let diff = v - mu;
            *s += diff * diff;
        }
    }
    for s in &mut var {
        *s /= m;
    }
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPSILON).sqrt()).collect();

    let mut x_hat = x.clone();
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        let hat_row = x_hat.row_mut(r);
        let out_row = out.row_mut(r);
        for j in 0..d {
            let h = (hat_row[j] - mean[j]) * inv_std[j];
            hat_row[j] = h;
            out_row[j] = gamma[j] * h + beta[j];
        }
    }
    (
        out,
        BnBatchCache {
            inv_std,
            batch_mean: mean,
            batch_var: var,
            x_hat,
        },
    )
}

fn bn_forward_infer(
    x: &Matrix,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
) -> Matrix {
    let mut out = x.clone();
    let d = x.cols();
    let scale: Vec<f64> = (0..d)
        .map(|j| gamma[j] / (running_var[j] + BN_EPSILON).sqrt())
        .collect();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for j in 0..d {
            row[j] = (row[j] - running_mean[j]) * scale[j] + beta[j];
        }
    }
    out
}

fn bn_backward(
    upstream: &Matrix,
    gamma: &[f64],
    bn: &BnBatchCache,
) -> (Vec<f64>, Vec<f64>, Matrix) {
    let (n, d) = (upstream.rows(), upstream.cols());
    let m = n as f64;
    let mut d_gamma = vec![0.0; d];
    let mut d_beta = vec![0.0; d];
    // d_xhat column sums, plain and x_hat-weighted.
    let mut sum_dxhat = vec![0.0; d];
    let mut sum_dxhat_xhat = vec![0.0; d];
    for r in 0..n {
        let up = upstream.row(r);
        let hat = bn.x_hat.row(r);
        for j in 0..d {
            let dxhat = up[j] * gamma[j];
            d_gamma[j] += up[j] * hat[j];
            d_beta[j] += up[j];
            sum_dxhat[j] += dxhat;
            sum_dxhat_xhat[j] += dxhat * hat[j];
        }
    }
    let mut dx = Matrix::zeros(n, d);
    for r in 0..n {
        let up = upstream.row(r);
        let hat = bn.x_hat.row(r);
        let out = dx.row_mut(r);
        for j in 0..d {
            let dxhat = up[j] * gamma[j];
            out[j] = bn.inv_std[j] / m * (m * dxhat - sum_dxhat[j] - hat[j] * sum_dxhat_xhat[j]);
        }
    }
    (d_gamma, d_beta, dx)
}

/// Numerically stable row-wise softmax (max subtraction before exponentiation).
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
