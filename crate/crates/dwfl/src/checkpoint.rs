//! Versioned binary container for model weights.
//!
//! Layout (all integers little-endian):
//! magic `DWFLCKPT`, format version, input_dim, num_classes, the layer spec
//! list, then one record per weight entry: layer index, role tag, shape,
//! and the raw f64 array.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::binio::Reader;
use crate::error::{DwflError, Result};
use crate::nn::{LayerSpec, Model, ModelWeights, ParamRole, WeightEntry};

const MAGIC: &[u8; 8] = b"DWFLCKPT";
pub const FORMAT_VERSION: u32 = 1;

const KIND_DENSE: u8 = 0;
const KIND_BATCH_NORM: u8 = 1;
const KIND_DROPOUT: u8 = 2;

/// Checkpoint metadata parsed before the weight entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub input_dim: usize,
    pub num_classes: usize,
    pub specs: Vec<LayerSpec>,
}

/// Writes the model's layer stack and full weight snapshot to `path`.
pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let file = File::create(path).map_err(|e| DwflError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| DwflError::io(path.display().to_string(), e);

    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(model.input_dim() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(model.num_classes() as u64).to_le_bytes()).map_err(io_err)?;

    let specs = model.layer_specs();
    w.write_all(&(specs.len() as u64).to_le_bytes()).map_err(io_err)?;
    for spec in specs {
        let (kind, input_dim, output_dim, rate, l1) = match *spec {
            LayerSpec::Dense {
                input_dim,
                output_dim,
                l1_coeff,
            } => (KIND_DENSE, input_dim, output_dim, 0.0, l1_coeff),
            LayerSpec::BatchNorm { dim } => (KIND_BATCH_NORM, dim, dim, 0.0, 0.0),
            LayerSpec::Dropout { dim, rate } => (KIND_DROPOUT, dim, dim, rate, 0.0),
        };
        w.write_all(&[kind]).map_err(io_err)?;
        w.write_all(&(input_dim as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(output_dim as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&rate.to_le_bytes()).map_err(io_err)?;
        w.write_all(&l1.to_le_bytes()).map_err(io_err)?;
    }

    let weights = model.weights();
    w.write_all(&(weights.entries.len() as u64).to_le_bytes()).map_err(io_err)?;
    for entry in &weights.entries {
        w.write_all(&(entry.layer_index as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&[entry.role.tag()]).map_err(io_err)?;
        w.write_all(&[entry.shape.len() as u8]).map_err(io_err)?;
        for &d in &entry.shape {
            w.write_all(&(d as u64).to_le_bytes()).map_err(io_err)?;
        }
        w.write_all(&(entry.values.len() as u64).to_le_bytes()).map_err(io_err)?;
        for v in &entry.values {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads header and weight entries, checking magic, version, and that every
/// entry's shape matches its declared value count.
pub fn load_weights(path: &Path) -> Result<(CheckpointHeader, ModelWeights)> {
    let mut r = Reader::open(path)?;

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DwflError::Format(format!(
            "{}: not a weight checkpoint (bad magic)",
            r.path
        )));
    }
    let version = r.read_u32()?;
    if version != FORMAT_VERSION {
        return Err(DwflError::Format(format!(
            "{}: unsupported checkpoint version {version}",
            r.path
        )));
    }
    let input_dim = r.read_u64()? as usize;
    let num_classes = r.read_u64()? as usize;

    let n_specs = r.read_u64()? as usize;
    let mut specs = Vec::with_capacity(n_specs);
    for _ in 0..n_specs {
        let kind = r.read_u8()?;
        let in_dim = r.read_u64()? as usize;
        let out_dim = r.read_u64()? as usize;
        let rate = r.read_f64()?;
        let l1 = r.read_f64()?;
        specs.push(match kind {
            KIND_DENSE => LayerSpec::Dense {
                input_dim: in_dim,
                output_dim: out_dim,
                l1_coeff: l1,
            },
            KIND_BATCH_NORM => LayerSpec::BatchNorm { dim: in_dim },
            KIND_DROPOUT => LayerSpec::Dropout { dim: in_dim, rate },
            other => {
                return Err(DwflError::Format(format!(
                    "{}: unknown layer kind tag {other}",
                    r.path
                )))
            }
        });
    }

    let n_entries = r.read_u64()? as usize;
    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let layer_index = r.read_u64()? as usize;
        let role_tag = r.read_u8()?;
        let role = ParamRole::from_tag(role_tag).ok_or_else(|| {
            DwflError::Format(format!("{}: unknown param role tag {role_tag}", r.path))
        })?;
        let n_dims = r.read_u8()? as usize;
        let mut shape = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            shape.push(r.read_u64()? as usize);
        }
        let n_values = r.read_u64()? as usize;
        if shape.iter().product::<usize>() != n_values {
            return Err(DwflError::Format(format!(
                "{}: layer {layer_index} {} declares shape {shape:?} but {n_values} values",
                r.path,
                role.name()
            )));
        }
        let mut values = Vec::with_capacity(n_values);
        for _ in 0..n_values {
            values.push(r.read_f64()?);
        }
        entries.push(WeightEntry {
            layer_index,
            role,
            shape,
            values,
        });
    }

    Ok((
        CheckpointHeader {
            version,
            input_dim,
            num_classes,
            specs,
        },
        ModelWeights { entries },
    ))
}

/// Loads a checkpoint and reconstructs the model, rejecting weight entries
/// that do not structurally match the stored layer stack.
pub fn load_model(path: &Path) -> Result<Model> {
    let (header, weights) = load_weights(path)?;
    let mut model = Model::from_specs(header.specs, 0)
        .map_err(|e| DwflError::Format(format!("{}: invalid layer stack: {e}", path.display())))?;
    model
        .set_weights(&weights)
        .map_err(|e| DwflError::Format(format!("{}: {e}", path.display())))?;
    Ok(model)
}
