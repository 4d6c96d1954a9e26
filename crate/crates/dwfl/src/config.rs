//! Experiment configuration: a flat, line-oriented `key = value` format with
//! bracketed section headers. Unknown keys are errors, not warnings, so
//! typos in experiment sweeps fail fast.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{DwflError, Result};
use crate::federation::{AggregationStrategy, DwflExtremumMode};
use crate::nn::TrainConfig;
use crate::partition::{PoisonMode, SplitPlan};
use crate::synth::SyntheticSpec;

/// Where the corpus comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    FastaManifest(PathBuf),
}

/// How the encoding alphabet is chosen for FASTA corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphabetMode {
    /// Canonical amino acids plus 'X' and '-'.
    #[default]
    DefaultProtein,
    /// Use exactly the symbols observed in the corpus.
    DeriveFromData,
}

/// One deliberately mislabeled client for robustness experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoisonConfig {
    pub client: usize,
    pub mode: PoisonMode,
}

/// Fully resolved experiment settings. Per-run seeds are derived from the
/// `[run] seeds` list; the seed fields inside the train configs are
/// placeholders that the driver overwrites.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub alphabet_mode: AlphabetMode,
    pub split: SplitPlan,
    pub n_rounds: usize,
    pub val_split: f64,
    pub hidden_widths: Vec<usize>,
    pub dwfl_extremum_mode: DwflExtremumMode,
    pub client_train: TrainConfig,
    pub global_train: TrainConfig,
    pub poison: Option<PoisonConfig>,
    pub strategies: Vec<AggregationStrategy>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(DwflError::Config("at least one strategy is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(DwflError::Config("at least one seed is required".into()));
        }
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
        self.split.validate()?;
        self.client_train.validate()?;
        self.global_train.validate()?;
        match &self.data {
            DataSource::Synthetic(spec) => spec.validate()?,
            DataSource::FastaManifest(path) => {
                if !path.exists() {
                    return Err(DwflError::Config(format!(
                        "manifest path does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        if let Some(poison) = &self.poison {
            if poison.client >= self.split.n_clients {
                return Err(DwflError::Config(format!(
                    "poison client {} out of range for {} clients",
                    poison.client, self.split.n_clients
                )));
            }
        }
        Ok(())
    }
}

struct RawConfig {
    entries: BTreeMap<(String, String), String>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    DwflError::Config(format!(
                        "line {}: malformed section header {line:?}",
                        lineno + 1
                    ))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DwflError::Config(format!(
                    "line {}: expected 'key = value', got {line:?}",
                    lineno + 1
                ))
            })?;
            if section.is_empty() {
                return Err(DwflError::Config(format!(
                    "line {}: key {key:?} appears before any [section]",
                    lineno + 1
                )));
            }
            let key = key.trim().to_string();
            if entries
                .insert((section.clone(), key.clone()), value.trim().to_string())
                .is_some()
            {
                return Err(DwflError::Config(format!(
                    "line {}: duplicate key [{section}] {key}",
                    lineno + 1
                )));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn take_parsed<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(value) => value.parse::<T>().map(Some).map_err(|_| {
                DwflError::Config(format!("[{section}] {key}: cannot parse {value:?}"))
            }),
        }
    }

    fn take_or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.take_parsed(section, key)?.unwrap_or(default))
    }

    fn require(&mut self, section: &str, key: &str) -> Result<String> {
        self.take(section, key)
            .ok_or_else(|| DwflError::Config(format!("missing required key [{section}] {key}")))
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.keys().any(|(s, _)| s == section)
    }

    fn finish(self) -> Result<()> {
        if let Some(((section, key), _)) = self.entries.into_iter().next() {
            return Err(DwflError::Config(format!("unknown key [{section}] {key}")));
        }
        Ok(())
    }
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|_| {
                DwflError::Config(format!("[{section}] {key}: cannot parse element {s:?}"))
            })
        })
        .collect()
}

fn train_config_from(raw: &mut RawConfig, section: &str) -> Result<TrainConfig> {
    let defaults = TrainConfig::default();
    Ok(TrainConfig {
        epochs: raw.take_or(section, "epochs", defaults.epochs)?,
        batch_size: raw.take_or(section, "batch_size", defaults.batch_size)?,
        learning_rate: raw.take_or(section, "learning_rate", defaults.learning_rate)?,
        adam_beta1: raw.take_or(section, "adam_beta1", defaults.adam_beta1)?,
        adam_beta2: raw.take_or(section, "adam_beta2", defaults.adam_beta2)?,
        adam_epsilon: raw.take_or(section, "adam_epsilon", defaults.adam_epsilon)?,
        l1_coeff: raw.take_or(section, "l1_coeff", defaults.l1_coeff)?,
        dropout_rate: raw.take_or(section, "dropout_rate", defaults.dropout_rate)?,
        seed: 0, // overwritten per run
    })
}

/// Parses a config from text. Relative paths resolve against `base_dir`
/// when given.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;

    let resolve = |p: &str| -> PathBuf {
        let path = Path::new(p);
        match (path.is_absolute(), base_dir) {
            (false, Some(base)) => base.join(path),
            _ => path.to_path_buf(),
        }
    };

    let data = match raw.require("data", "source")?.as_str() {
        "synthetic" => {
            let defaults = SyntheticSpec::default();
            DataSource::Synthetic(SyntheticSpec {
                n_samples: raw.take_or("data", "n_samples", defaults.n_samples)?,
                n_classes: raw.take_or("data", "n_classes", defaults.n_classes)?,
                seq_len: raw.take_or("data", "seq_len", defaults.seq_len)?,
                alphabet_size: raw.take_or("data", "alphabet_size", defaults.alphabet_size)?,
                separability: raw.take_or("data", "separability", defaults.separability)?,
                seed: raw.take_or("data", "data_seed", defaults.seed)?,
            })
        }
        "fasta" => DataSource::FastaManifest(resolve(&raw.require("data", "manifest")?)),
        other => {
            return Err(DwflError::Config(format!(
                "[data] source must be 'synthetic' or 'fasta', got {other:?}"
            )))
        }
    };

    let alphabet_mode = match raw.take("data", "alphabet").as_deref() {
        None | Some("default") => AlphabetMode::DefaultProtein,
        Some("derive") => AlphabetMode::DeriveFromData,
        Some(other) => {
            return Err(DwflError::Config(format!(
                "[data] alphabet must be 'default' or 'derive', got {other:?}"
            )))
        }
    };

    let split_defaults = SplitPlan::default();
    let split = SplitPlan {
        test_fraction: raw.take_or("split", "test_fraction", split_defaults.test_fraction)?,
        global_train_fraction: raw.take_or(
            "split",
            "global_train_fraction",
            split_defaults.global_train_fraction,
        )?,
        n_clients: raw.take_or("split", "n_clients", split_defaults.n_clients)?,
        stratify_shards: raw.take_or("split", "stratify_shards", split_defaults.stratify_shards)?,
        seed: 0, // overwritten per run
    };

    let n_rounds = raw.take_or("federation", "n_rounds", 1)?;
    let val_split = raw.take_or("federation", "val_split", 0.1)?;
    let hidden_widths = match raw.take("federation", "hidden_widths") {
        Some(v) => parse_list("federation", "hidden_widths", &v)?,
        None => crate::nn::REFERENCE_WIDTHS.to_vec(),
    };
    let dwfl_extremum_mode = match raw.take("federation", "dwfl_extremum").as_deref() {
        None | Some("scaled") => DwflExtremumMode::ScaledValues,
        Some("raw_selection") => DwflExtremumMode::RawSelection,
        Some(other) => {
            return Err(DwflError::Config(format!(
                "[federation] dwfl_extremum must be 'scaled' or 'raw_selection', got {other:?}"
            )))
        }
    };

    let client_train = train_config_from(&mut raw, "client_train")?;
    let global_train = train_config_from(&mut raw, "global_train")?;

    let poison = if raw.has_section("poison") {
        let client = raw.take_or("poison", "client", 0usize)?;
        let mode = match raw.require("poison", "mode")?.as_str() {
            "label_shuffle" => PoisonMode::LabelShuffle,
            "label_flip" => PoisonMode::LabelFlip,
            other => {
                return Err(DwflError::Config(format!(
                    "[poison] mode must be 'label_shuffle' or 'label_flip', got {other:?}"
                )))
            }
        };
        Some(PoisonConfig { client, mode })
    } else {
        None
    };

    let strategies: Vec<AggregationStrategy> = {
        let value = raw.require("run", "strategies")?;
        let tags: Vec<String> = parse_list("run", "strategies", &value)?;
        tags.iter()
            .map(|t| {
                AggregationStrategy::from_tag(t).ok_or_else(|| {
                    DwflError::Config(format!("[run] strategies: unknown strategy {t:?}"))
                })
            })
            .collect::<Result<_>>()?
    };
    let seeds = match raw.take("run", "seeds") {
        Some(v) => parse_list("run", "seeds", &v)?,
        None => vec![1, 2, 3, 4, 5],
    };
    let out_dir = resolve(&raw.require("run", "out_dir")?);

    raw.finish()?;

    Ok(ExperimentConfig {
        data,
        alphabet_mode,
        split,
        n_rounds,
        val_split,
        hidden_widths,
        dwfl_extremum_mode,
        client_train,
        global_train,
        poison,
        strategies,
        seeds,
        out_dir,
    })
}

/// Reads and parses a config file; relative paths inside resolve against the
/// file's directory.
pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DwflError::io(path.display().to_string(), e))?;
    parse_config_str(&text, path.parent())
}

/// Serializes the resolved config; `parse(serialize(c)) == c`.
pub fn serialize_config(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str("[data]\n");
    match &config.data {
        DataSource::Synthetic(spec) => {
            let _ = writeln!(out, "source = synthetic");
            let _ = writeln!(out, "n_samples = {}", spec.n_samples);
            let _ = writeln!(out, "n_classes = {}", spec.n_classes);
            let _ = writeln!(out, "seq_len = {}", spec.seq_len);
            let _ = writeln!(out, "alphabet_size = {}", spec.alphabet_size);
            let _ = writeln!(out, "separability = {}", spec.separability);
            let _ = writeln!(out, "data_seed = {}", spec.seed);
        }
        DataSource::FastaManifest(path) => {
            let _ = writeln!(out, "source = fasta");
            let _ = writeln!(out, "manifest = {}", path.display());
        }
    }
    let _ = writeln!(
        out,
        "alphabet = {}",
        match config.alphabet_mode {
            AlphabetMode::DefaultProtein => "default",
            AlphabetMode::DeriveFromData => "derive",
        }
    );

    out.push_str("\n[split]\n");
    let _ = writeln!(out, "test_fraction = {}", config.split.test_fraction);
    let _ = writeln!(
        out,
        "global_train_fraction = {}",
        config.split.global_train_fraction
    );
    let _ = writeln!(out, "n_clients = {}", config.split.n_clients);
    let _ = writeln!(out, "stratify_shards = {}", config.split.stratify_shards);

    out.push_str("\n[federation]\n");
    let _ = writeln!(out, "n_rounds = {}", config.n_rounds);
    let _ = writeln!(out, "val_split = {}", config.val_split);
    let widths: Vec<String> = config.hidden_widths.iter().map(|w| w.to_string()).collect();
    let _ = writeln!(out, "hidden_widths = {}", widths.join(","));
    let _ = writeln!(
        out,
        "dwfl_extremum = {}",
        match config.dwfl_extremum_mode {
            DwflExtremumMode::ScaledValues => "scaled",
            DwflExtremumMode::RawSelection => "raw_selection",
        }
    );

    for (section, cfg) in [
        ("client_train", &config.client_train),
        ("global_train", &config.global_train),
    ] {
        let _ = writeln!(out, "\n[{section}]");
        let _ = writeln!(out, "epochs = {}", cfg.epochs);
        let _ = writeln!(out, "batch_size = {}", cfg.batch_size);
        let _ = writeln!(out, "learning_rate = {}", cfg.learning_rate);
        let _ = writeln!(out, "adam_beta1 = {}", cfg.adam_beta1);
        let _ = writeln!(out, "adam_beta2 = {}", cfg.adam_beta2);
        let _ = writeln!(out, "adam_epsilon = {}", cfg.adam_epsilon);
        let _ = writeln!(out, "l1_coeff = {}", cfg.l1_coeff);
        let _ = writeln!(out, "dropout_rate = {}", cfg.dropout_rate);
    }

    if let Some(poison) = &config.poison {
        out.push_str("\n[poison]\n");
        let _ = writeln!(out, "client = {}", poison.client);
        let _ = writeln!(
            out,
            "mode = {}",
            match poison.mode {
                PoisonMode::LabelShuffle => "label_shuffle",
                PoisonMode::LabelFlip => "label_flip",
            }
        );
    }

    out.push_str("\n[run]\n");
    let tags: Vec<&str> = config.strategies.iter().map(|s| s.tag()).collect();
    let _ = writeln!(out, "strategies = {}", tags.join(","));
    let seeds: Vec<String> = config.seeds.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "seeds = {}", seeds.join(","));
    let _ = writeln!(out, "out_dir = {}", config.out_dir.display());
    out
}
