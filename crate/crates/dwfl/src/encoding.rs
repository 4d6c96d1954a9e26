//! FASTA ingestion and positional one-hot encoding of aligned sequences.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::binio::Reader;
use crate::error::{DwflError, Result};
use crate::tensor::Matrix;

/// The 20 canonical amino acids, then 'X' (ambiguous) and '-' (gap).
pub const DEFAULT_RESIDUES: &str = "ACDEFGHIKLMNPQRSTVWYX-";

const DATASET_MAGIC: &[u8; 8] = b"DWFLDSET";
const DATASET_VERSION: u32 = 1;

/// Ordered symbol set with its inverse index map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

impl Alphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Alphabet> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(DwflError::Config(format!("duplicate alphabet symbol '{c}'")));
            }
        }
        if symbols.is_empty() {
            return Err(DwflError::Config("alphabet is empty".into()));
        }
        Ok(Alphabet { symbols, index })
    }

    /// Canonical amino acids plus ambiguity and gap symbols (22 total).
    pub fn default_protein() -> Alphabet {
        Alphabet::new(DEFAULT_RESIDUES.chars()).expect("default alphabet is well-formed")
    }

    /// Builds the alphabet from the symbols observed in `records`, sorted.
    pub fn derive_from_records(records: &[SequenceRecord]) -> Result<Alphabet> {
        let observed: BTreeSet<char> = records
            .iter()
            .flat_map(|r| r.residues.chars())
            .collect();
        Alphabet::new(observed)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }
}

/// One labeled, aligned sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub id: String,
    pub host_label: String,
    pub residues: String,
}

/// Corpus parse result: records plus a count of symbols that had to be
/// replaced with the ambiguity character.
#[derive(Debug, Clone)]
pub struct ParsedCorpus {
    pub records: Vec<SequenceRecord>,
    pub unknown_mapped: usize,
}

/// One-hot feature matrix plus one-hot label matrix; the unit every split
/// operates on. Rows of `features` are `seq_len` blocks of `alphabet` width,
/// each block summing to exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub features: Matrix,
    pub labels_onehot: Matrix,
    pub class_names: Vec<String>,
    pub seq_len: usize,
}

impl EncodedDataset {
    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    /// Class index of a sample (argmax over its one-hot label row).
    pub fn label_of(&self, row: usize) -> usize {
        crate::nn::argmax(self.labels_onehot.row(row))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for r in 0..self.n_samples() {
            counts[self.label_of(r)] += 1;
        }
        counts
    }

    /// Copies the given rows into a new dataset with the same catalog.
    pub fn select(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            features: self.features.select_rows(indices),
            labels_onehot: self.labels_onehot.select_rows(indices),
            class_names: self.class_names.clone(),
            seq_len: self.seq_len,
        }
    }
}

/// Reads a corpus manifest: one `label<TAB>path` pair per line. Relative
/// paths are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let file = File::open(path).map_err(|e| DwflError::io(path.display().to_string(), e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DwflError::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, rel) = line.split_once('\t').ok_or_else(|| {
            DwflError::Data(format!(
                "{}:{}: expected 'label<TAB>path', got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        let rel = Path::new(rel.trim());
        let resolved = if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            base.join(rel)
        };
        entries.push((label.trim().to_string(), resolved));
    }
    if entries.is_empty() {
        return Err(DwflError::Data(format!(
            "manifest {} lists no corpus files",
            path.display()
        )));
    }
    Ok(entries)
}

/// Parses one FASTA file into (id, uppercased sequence) pairs. Description
/// lines start with '>'; sequence lines may be wrapped.
pub fn parse_fasta_file(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(|e| DwflError::io(path.display().to_string(), e))?;
    let mut entries: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, String)> = None;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| DwflError::io(path.display().to_string(), e))?;
        if let Some(header) = line.strip_prefix('>') {
            if let Some(done) = current.take() {
                entries.push(done);
            }
            current = Some((header.trim().to_string(), String::new()));
        } else if let Some((_, seq)) = current.as_mut() {
            seq.push_str(line.trim());
        } else if !line.trim().is_empty() {
            return Err(DwflError::Data(format!(
                "{}: sequence data before the first '>' header",
                path.display()
            )));
        }
    }
    if let Some(done) = current.take() {
        entries.push(done);
    }
    for (id, seq) in &mut entries {
        *seq = seq.to_uppercase();
        if seq.is_empty() {
            return Err(DwflError::Data(format!(
                "{}: entry '{id}' has no sequence data",
                path.display()
            )));
        }
    }
    Ok(entries)
}

/// Parses every (label, file) pair, tags records with the file's host label,
/// and maps symbols outside the alphabet to 'X' (counted and logged).
pub fn parse_fasta_corpus(
    entries: &[(String, PathBuf)],
    alphabet: &Alphabet,
) -> Result<ParsedCorpus> {
    let mut records = Vec::new();
    let mut unknown_mapped = 0usize;
    for (label, path) in entries {
        for (id, seq) in parse_fasta_file(path)? {
            let mut residues = String::with_capacity(seq.len());
            for c in seq.chars() {
                if alphabet.contains(c) {
                    residues.push(c);
                } else if alphabet.contains('X') {
                    unknown_mapped += 1;
                    residues.push('X');
                } else {
                    return Err(DwflError::Data(format!(
                        "{}: entry '{id}' contains '{c}', which is outside the alphabet \
                         and no 'X' symbol is available to absorb it",
                        path.display()
                    )));
                }
            }
            records.push(SequenceRecord {
                id,
                host_label: label.clone(),
                residues,
            });
        }
    }
    if records.is_empty() {
        return Err(DwflError::Data("corpus contains zero records".into()));
    }
    if unknown_mapped > 0 {
        warn!("mapped {unknown_mapped} out-of-alphabet symbols to 'X'");
    }
    Ok(ParsedCorpus {
        records,
        unknown_mapped,
    })
}

/// Encodes aligned records into one-hot feature and label matrices. Class
/// names are the distinct host labels, sorted lexicographically; row order
/// follows the input records.
pub fn one_hot_encode(records: &[SequenceRecord], alphabet: &Alphabet) -> Result<EncodedDataset> {
    if records.is_empty() {
        return Err(DwflError::Data("cannot encode an empty record list".into()));
    }
    let seq_len = records[0].residues.chars().count();
    let offenders: Vec<String> = records
        .iter()
        .filter(|r| r.residues.chars().count() != seq_len)
        .map(|r| r.id.clone())
        .collect();
    if !offenders.is_empty() {
        return Err(DwflError::Alignment(offenders));
    }

    let class_names: Vec<String> = records
        .iter()
        .map(|r| r.host_label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_names.len() < 2 {
        return Err(DwflError::Data(format!(
            "corpus spans {} distinct label(s); at least 2 are required",
            class_names.len()
        )));
    }
    let class_index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();

    let width = alphabet.len();
    let mut features = Matrix::zeros(records.len(), seq_len * width);
    let mut labels = Matrix::zeros(records.len(), class_names.len());
    for (row, record) in records.iter().enumerate() {
        for (pos, c) in record.residues.chars().enumerate() {
            let sym = alphabet.index_of(c).ok_or_else(|| {
                DwflError::Data(format!(
                    "record '{}' contains '{c}', which is outside the alphabet",
                    record.id
                ))
            })?;
            features.set(row, pos * width + sym, 1.0);
        }
        labels.set(row, class_index[record.host_label.as_str()], 1.0);
    }

    Ok(EncodedDataset {
        features,
        labels_onehot: labels,
        class_names,
        seq_len,
    })
}

/// Inverse of the positional encoding; exists to property-test round trips.
pub fn decode_row(features: &[f64], alphabet: &Alphabet) -> Result<String> {
    let width = alphabet.len();
    if features.len() % width != 0 {
        return Err(DwflError::Shape(format!(
            "feature row of {} values is not a multiple of the alphabet width {width}",
            features.len()
        )));
    }
    let mut out = String::with_capacity(features.len() / width);
    for block in features.chunks(width) {
        let hot: Vec<usize> = block
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        match hot.as_slice() {
            [only] if block[*only] == 1.0 => out.push(alphabet.symbols()[*only]),
            _ => {
                return Err(DwflError::Data(
                    "feature block is not one-hot; cannot decode".into(),
                ))
            }
        }
    }
    Ok(out)
}

/// Writes the dataset in the binary container format (header: seq_len,
/// alphabet, class names; body: feature and label matrices).
pub fn save_dataset(path: &Path, ds: &EncodedDataset, alphabet: &Alphabet) -> Result<()> {
    let file = File::create(path).map_err(|e| DwflError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| DwflError::io(path.display().to_string(), e);

    w.write_all(DATASET_MAGIC).map_err(io_err)?;
    w.write_all(&DATASET_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(ds.seq_len as u64).to_le_bytes()).map_err(io_err)?;
    let alpha: String = alphabet.symbols().iter().collect();
    write_string(&mut w, &alpha).map_err(io_err)?;
    w.write_all(&(ds.class_names.len() as u64).to_le_bytes()).map_err(io_err)?;
    for name in &ds.class_names {
        write_string(&mut w, name).map_err(io_err)?;
    }
    for m in [&ds.features, &ds.labels_onehot] {
        w.write_all(&(m.rows() as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(m.cols() as u64).to_le_bytes()).map_err(io_err)?;
        for v in m.data() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Loads a dataset container, returning the dataset and its alphabet.
pub fn load_dataset(path: &Path) -> Result<(EncodedDataset, Alphabet)> {
    let mut r = Reader::open(path)?;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(DwflError::Format(format!(
            "{}: not a dataset container (bad magic)",
            r.path
        )));
    }
    let version = r.read_u32()?;
    if version != DATASET_VERSION {
        return Err(DwflError::Format(format!(
            "{}: unsupported dataset version {version}",
            r.path
        )));
    }
    let seq_len = r.read_u64()? as usize;
    let alphabet = Alphabet::new(r.read_string()?.chars())?;
    let n_classes = r.read_u64()? as usize;
    let mut class_names = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        class_names.push(r.read_string()?);
    }
    let mut matrices = Vec::with_capacity(2);
    for _ in 0..2 {
        let rows = r.read_u64()? as usize;
        let cols = r.read_u64()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.read_f64()?);
        }
        matrices.push(Matrix::from_vec(rows, cols, data)?);
    }
    let labels_onehot = matrices.pop().unwrap();
    let features = matrices.pop().unwrap();
    if features.cols() != seq_len * alphabet.len() {
        return Err(DwflError::Format(format!(
            "{}: feature width {} does not match seq_len {} x alphabet {}",
            r.path,
            features.cols(),
            seq_len,
            alphabet.len()
        )));
    }
    if labels_onehot.cols() != n_classes || labels_onehot.rows() != features.rows() {
        return Err(DwflError::Format(format!(
            "{}: label matrix shape mismatch",
            r.path
        )));
    }
    Ok((
        EncodedDataset {
            features,
            labels_onehot,
            class_names,
            seq_len,
        },
        alphabet,
    ))
}

fn write_string<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())
}
