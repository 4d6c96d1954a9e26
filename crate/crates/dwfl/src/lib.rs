//! Dynamic weighted federated learning (DWFL) simulator for sequence
//! classification.
//!
//! The crate covers the full experiment pipeline:
//!
//! - [`encoding`]: FASTA ingestion and positional one-hot encoding.
//! - [`nn`]: a dense/batch-norm/dropout network with softmax head, trained
//!   with Adam and L1 regularization.
//! - [`partition`]: stratified train/test, local/global, and per-client
//!   splits, plus a label-poisoning harness.
//! - [`federation`]: local training rounds, validation-accuracy-based
//!   dynamic weights, and six aggregation strategies.
//! - [`metrics`]: accuracy/precision/recall/F1 and one-vs-rest ROC-AUC with
//!   multi-run averaging.
//! - [`synth`], [`config`], [`experiment`]: synthetic corpora and the
//!   experiment driver behind the `dwfl` binary.
//!
//! See the crate examples for one runnable program per capability.

pub mod config;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod partition;
pub mod synth;
pub mod tensor;

mod binio;
mod checkpoint;
mod seeding;

pub use checkpoint::{load_model, load_weights, save_model, CheckpointHeader};
pub use error::{DwflError, Result};
pub use tensor::Matrix;
