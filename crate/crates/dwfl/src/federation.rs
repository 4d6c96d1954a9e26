//! Federated rounds: local training, validation-accuracy-based dynamic
//! weights, and the six aggregation strategies.
//!
//! Only [`ClientReport`]s cross the client/server boundary — weights and
//! scalars, never shard data.

use std::fmt;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::encoding::EncodedDataset;
use crate::error::{DwflError, Result};
use crate::nn::{
    stack_layer_specs, train, Model, ModelWeights, ParamRole, TrainConfig, TrainOutcome,
    BN_EPSILON, REFERENCE_WIDTHS,
};
use crate::seeding::derive_seed;
use crate::tensor::pairwise_sum;

/// What a client sends back to the server after local training.
#[derive(Debug, Clone)]
pub struct ClientReport {
    pub client_id: usize,
    pub weights: ModelWeights,
    pub val_accuracy: f64,
    pub n_samples: usize,
    pub train_seconds: f64,
}

/// Per-client aggregation coefficients; they sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicWeights {
    pub betas: Vec<f64>,
}

/// The six weight-combination rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationStrategy {
    FedAvg,
    FedMin,
    FedMax,
    DwflAvg,
    DwflMin,
    DwflMax,
}

impl AggregationStrategy {
    pub const ALL: [AggregationStrategy; 6] = [
        AggregationStrategy::FedAvg,
        AggregationStrategy::FedMin,
        AggregationStrategy::FedMax,
        AggregationStrategy::DwflAvg,
        AggregationStrategy::DwflMin,
        AggregationStrategy::DwflMax,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AggregationStrategy::FedAvg => "fedavg",
            AggregationStrategy::FedMin => "fedmin",
            AggregationStrategy::FedMax => "fedmax",
            AggregationStrategy::DwflAvg => "dwfl_avg",
            AggregationStrategy::DwflMin => "dwfl_min",
            AggregationStrategy::DwflMax => "dwfl_max",
        }
    }

    pub fn from_tag(tag: &str) -> Option<AggregationStrategy> {
        Self::ALL.iter().copied().find(|s| s.tag() == tag)
    }

    /// True for the strategies that scale by dynamic weights.
    pub fn is_dynamic(self) -> bool {
        matches!(
            self,
            AggregationStrategy::DwflAvg | AggregationStrategy::DwflMin | AggregationStrategy::DwflMax
        )
    }
}

impl fmt::Display for AggregationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// How the dwfl_min/dwfl_max extremum interacts with the beta scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DwflExtremumMode {
    /// Scale first, then take the elementwise extremum of the scaled arrays.
    #[default]
    ScaledValues,
    /// Take the extremum of the raw values, then scale the selected value by
    /// its owner's beta. Kept for comparison experiments.
    RawSelection,
}

/// Settings for one federated session.
#[derive(Debug, Clone)]
pub struct RoundConfig {
    pub n_rounds: usize,
    pub strategy: AggregationStrategy,
    pub client_train: TrainConfig,
    pub global_train: TrainConfig,
    /// Held-out fraction each client uses to measure validation accuracy.
    pub val_split: f64,
    /// Hidden layer widths of every model in the session.
    pub hidden_widths: Vec<usize>,
    pub dwfl_extremum_mode: DwflExtremumMode,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            n_rounds: 1,
            strategy: AggregationStrategy::DwflAvg,
            client_train: TrainConfig::default(),
            global_train: TrainConfig::default(),
            val_split: 0.1,
            hidden_widths: REFERENCE_WIDTHS.to_vec(),
            dwfl_extremum_mode: DwflExtremumMode::default(),
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(DwflError::Config("n_rounds must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_split) {
            return Err(DwflError::Config(format!(
                "val_split must be in [0,1), got {}",
                self.val_split
            )));
        }
        if self.hidden_widths.is_empty() {
            return Err(DwflError::Config("hidden_widths must be nonempty".into()));
        }
        self.client_train.validate()?;
        self.global_train.validate()
    }
}

/// Result of one client's local training.
#[derive(Debug, Clone)]
pub enum ClientOutcome {
    Report(ClientReport),
    /// Training diverged; the client is excluded from aggregation.
    Failed { client_id: usize, reason: String },
}

/// Trains a fresh or warm-started local model on one shard and reports the
/// final weights, held-out validation accuracy, and sample count. Divergence
/// becomes a failure report; contract violations are hard errors.
pub fn run_client(
    client_id: usize,
    shard: &EncodedDataset,
    init_weights: Option<&ModelWeights>,
    hidden_widths: &[usize],
    config: &TrainConfig,
    val_split: f64,
) -> Result<ClientOutcome> {
    if shard.n_samples() == 0 {
        return Err(DwflError::Data(format!("client {client_id} shard is empty")));
    }
    let specs = stack_layer_specs(
        hidden_widths,
        shard.input_dim(),
        shard.n_classes(),
        config.dropout_rate,
        config.l1_coeff,
    );
    let mut model = Model::from_specs(specs, config.seed)?;
    if let Some(weights) = init_weights {
        model.set_weights(weights)?;
    }
    let start = Instant::now();
    match train(&mut model, &shard.features, &shard.labels_onehot, config, val_split) {
        Ok(outcome) => Ok(ClientOutcome::Report(ClientReport {
            client_id,
            weights: model.weights(),
            val_accuracy: outcome.val_accuracy,
            n_samples: shard.n_samples(),
            train_seconds: start.elapsed().as_secs_f64(),
        })),
        Err(DwflError::Diverged(reason)) => {
            warn!("client {client_id} diverged and is excluded: {reason}");
            Ok(ClientOutcome::Failed { client_id, reason })
        }
        Err(other) => Err(other),
    }
}

/// Normalizes validation accuracies into aggregation coefficients:
/// `beta_i = acc_i / sum(acc)`. An all-zero accuracy list falls back to
/// uniform coefficients.
pub fn compute_dynamic_weights(reports: &[ClientReport]) -> Result<DynamicWeights> {
    if reports.is_empty() {
        return Err(DwflError::Aggregation(
            "no client reports to weight".into(),
        ));
    }
    let total: f64 = reports.iter().map(|r| r.val_accuracy).sum();
    let betas = if total == 0.0 {
        warn!("all validation accuracies are zero; falling back to uniform weights");
        vec![1.0 / reports.len() as f64; reports.len()]
    } else {
        reports.iter().map(|r| r.val_accuracy / total).collect()
    };
    Ok(DynamicWeights { betas })
}

/// Combines client weights elementwise under the given strategy (dynamic
/// strategies derive betas from the reports' validation accuracies).
pub fn aggregate(reports: &[ClientReport], strategy: AggregationStrategy) -> Result<ModelWeights> {
    aggregate_with_mode(reports, strategy, DwflExtremumMode::default())
}

/// [`aggregate`] with an explicit dwfl_min/dwfl_max interpretation.
pub fn aggregate_with_mode(
    reports: &[ClientReport],
    strategy: AggregationStrategy,
    mode: DwflExtremumMode,
) -> Result<ModelWeights> {
    if reports.is_empty() {
        return Err(DwflError::Aggregation("no client reports to aggregate".into()));
    }
    for report in &reports[1..] {
        reports[0].weights.compatible_with(&report.weights)?;
    }
    let betas = if strategy.is_dynamic() {
        compute_dynamic_weights(reports)?.betas
    } else {
        Vec::new()
    };

    let n = reports.len();
    let mut out = reports[0].weights.clone();
    let mut gathered = vec![0.0; n];
    for (entry_idx, entry) in out.entries.iter_mut().enumerate() {
        for slot in 0..entry.values.len() {
            for (g, report) in gathered.iter_mut().zip(reports) {
                *g = report.weights.entries[entry_idx].values[slot];
            }
            entry.values[slot] = match (strategy, mode) {
                (AggregationStrategy::FedAvg, _) => pairwise_sum(&gathered) / n as f64,
                (AggregationStrategy::FedMin, _) => {
                    gathered.iter().cloned().fold(f64::INFINITY, f64::min)
                }
                (AggregationStrategy::FedMax, _) => {
                    gathered.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                }
                (AggregationStrategy::DwflAvg, _) => {
                    let scaled: Vec<f64> =
                        gathered.iter().zip(&betas).map(|(v, b)| b * v).collect();
                    pairwise_sum(&scaled)
                }
                (AggregationStrategy::DwflMin, DwflExtremumMode::ScaledValues) => gathered
                    .iter()
                    .zip(&betas)
                    .map(|(v, b)| b * v)
                    .fold(f64::INFINITY, f64::min),
                (AggregationStrategy::DwflMax, DwflExtremumMode::ScaledValues) => gathered
                    .iter()
                    .zip(&betas)
                    .map(|(v, b)| b * v)
                    .fold(f64::NEG_INFINITY, f64::max),
                (AggregationStrategy::DwflMin, DwflExtremumMode::RawSelection) => {
                    let mut best = 0;
                    for (i, &v) in gathered.iter().enumerate() {
                        if v < gathered[best] {
                            best = i;
                        }
                    }
                    betas[best] * gathered[best]
                }
                (AggregationStrategy::DwflMax, DwflExtremumMode::RawSelection) => {
                    let mut best = 0;
                    for (i, &v) in gathered.iter().enumerate() {
                        if v > gathered[best] {
                            best = i;
                        }
                    }
                    betas[best] * gathered[best]
                }
            };
        }
        // Aggregation can shrink running variances (beta-scaled minima in
        // particular); keep them positive.
        if entry.role == ParamRole::BnRunningVar {
            for v in &mut entry.values {
                *v = v.max(BN_EPSILON);
            }
        }
    }
    Ok(out)
}

/// One client's line in the round log.
#[derive(Debug, Clone)]
pub struct ClientRoundLog {
    pub client_id: usize,
    pub val_accuracy: f64,
    pub beta: f64,
    pub n_samples: usize,
    pub train_seconds: f64,
    pub failed: bool,
}

/// Audit record for one federated round: per-client scalars plus the
/// checksum of the global weights at round end. No shard data ever lands
/// here.
#[derive(Debug, Clone)]
pub struct RoundLog {
    pub round: usize,
    pub strategy: AggregationStrategy,
    pub clients: Vec<ClientRoundLog>,
    pub global_checksum: String,
    pub global_fine_tuned: bool,
}

impl RoundLog {
    /// Structured text records: one `key=value` line per client, then one
    /// per-round summary line.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for c in &self.clients {
            out.push_str(&format!(
                "round={} client={} val_accuracy={} beta={} n_samples={} train_seconds={:.4} failed={}\n",
                self.round, c.client_id, c.val_accuracy, c.beta, c.n_samples, c.train_seconds, c.failed
            ));
        }
        out.push_str(&format!(
            "round={} strategy={} fine_tuned={} checksum={}\n",
            self.round, self.strategy, self.global_fine_tuned, self.global_checksum
        ));
        out
    }
}

/// Final state of a federated session.
#[derive(Debug)]
pub struct FederationOutcome {
    pub global_model: Model,
    pub rounds: Vec<RoundLog>,
    /// Fine-tuning history of the last round, when global training ran.
    pub last_fine_tune: Option<TrainOutcome>,
}

impl FederationOutcome {
    pub fn round_log_text(&self) -> String {
        self.rounds.iter().map(RoundLog::to_records).collect()
    }
}

/// Runs the federated loop: per round, every client trains on its shard
/// (round 1 from fresh per-client initialization, later rounds from the
/// current global weights), reports are collected in client order,
/// aggregated under the configured strategy, and the global model is
/// updated and then fine-tuned on the global training split when present.
pub fn run_federation(split: &crate::partition::FederatedSplit, config: &RoundConfig) -> Result<FederationOutcome> {
    config.validate()?;
    let shards = &split.client_shards;
    if shards.is_empty() {
        return Err(DwflError::Federation("no client shards".into()));
    }
    for (i, shard) in shards.iter().enumerate() {
        if shard.n_samples() == 0 {
            return Err(DwflError::Federation(format!("client {i} shard is empty")));
        }
    }

    let input_dim = shards[0].input_dim();
    let num_classes = shards[0].n_classes();
    let specs = stack_layer_specs(
        &config.hidden_widths,
        input_dim,
        num_classes,
        config.global_train.dropout_rate,
        config.global_train.l1_coeff,
    );
    let mut global_model = Model::from_specs(specs, derive_seed(config.client_train.seed, 0x610b))?;

    let mut rounds = Vec::with_capacity(config.n_rounds);
    let mut last_fine_tune = None;
    for round in 1..=config.n_rounds {
        let init = if round == 1 {
            None
        } else {
            Some(global_model.weights())
        };

        let outcomes: Vec<ClientOutcome> = shards
            .par_iter()
            .enumerate()
            .map(|(client_id, shard)| {
                let client_config = TrainConfig {
                    seed: derive_seed(
                        config.client_train.seed,
                        ((round as u64) << 32) | client_id as u64,
                    ),
                    ..config.client_train.clone()
                };
                run_client(
                    client_id,
                    shard,
                    init.as_ref(),
                    &config.hidden_widths,
                    &client_config,
                    config.val_split,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let mut reports: Vec<ClientReport> = Vec::with_capacity(shards.len());
        let mut failed: Vec<usize> = Vec::new();
        for outcome in outcomes {
            match outcome {
                ClientOutcome::Report(report) => reports.push(report),
                ClientOutcome::Failed { client_id, .. } => failed.push(client_id),
            }
        }
        if reports.is_empty() {
            return Err(DwflError::Federation(format!(
                "round {round}: all {} clients failed",
                shards.len()
            )));
        }
        // Aggregation consumes reports sorted by client id, so the result
        // does not depend on completion order.
        reports.sort_by_key(|r| r.client_id);
        let betas = compute_dynamic_weights(&reports)?;
        let aggregated = aggregate_with_mode(&reports, config.strategy, config.dwfl_extremum_mode)?;
        global_model.set_weights(&aggregated)?;

        let mut fine_tuned = false;
        if split.global_train.n_samples() > 0 {
            let global_config = TrainConfig {
                seed: derive_seed(config.global_train.seed, 0xf17e ^ round as u64),
                ..config.global_train.clone()
            };
            let outcome = train(
                &mut global_model,
                &split.global_train.features,
                &split.global_train.labels_onehot,
                &global_config,
                0.0,
            )?;
            last_fine_tune = Some(outcome);
            fine_tuned = true;
        }

        let mut clients: Vec<ClientRoundLog> = reports
            .iter()
            .zip(&betas.betas)
            .map(|(r, &beta)| ClientRoundLog {
                client_id: r.client_id,
                val_accuracy: r.val_accuracy,
                beta,
                n_samples: r.n_samples,
                train_seconds: r.train_seconds,
                failed: false,
            })
            .collect();
        for client_id in failed {
            clients.push(ClientRoundLog {
                client_id,
                val_accuracy: 0.0,
                beta: 0.0,
                n_samples: shards[client_id].n_samples(),
                train_seconds: 0.0,
                failed: true,
            });
        }
        clients.sort_by_key(|c| c.client_id);

        rounds.push(RoundLog {
            round,
            strategy: config.strategy,
            clients,
            global_checksum: global_model.weights().checksum(),
            global_fine_tuned: fine_tuned,
        });
    }

    Ok(FederationOutcome {
        global_model,
        rounds,
        last_fine_tune,
    })
}
