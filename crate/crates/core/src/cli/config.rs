//! `key = value` run configuration.
//!
//! Values are layered: config file, then `--set` pairs, then dedicated
//! flags; later layers win. Every key must be one the tool knows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CliError;
use crate::trainer::{AdamConfig, EncoderShape, TrainConfig};

/// Every accepted key, with a one-line description for the README and
/// `--help` style listings.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("train", "labeled training TSV"),
    ("input", "TSV to predict on"),
    ("models", "model directory for predict"),
    ("gold", "labeled gold TSV for evaluate"),
    ("predictions", "prediction TSV for evaluate"),
    ("out", "output directory"),
    ("seed", "base seed (split, member seeds, simulation, synthetic data)"),
    ("epochs", "training epochs per model"),
    ("train_fraction", "share of each class kept for training"),
    ("batch_size", "mini-batch size"),
    ("learning_rate", "Adam step size"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("epsilon", "Adam denominator offset"),
    ("seeds", "comma-separated task1 member seeds"),
    ("ensemble_size", "task1 members when seeds is not given"),
    ("max_len", "token sequence length including [CLS] and [SEP]"),
    ("split_seed", "seed of the train/dev split"),
    ("d_model", "hidden width"),
    ("n_heads", "attention heads"),
    ("n_layers", "encoder layers"),
    ("d_ff", "feed-forward width"),
    ("dropout", "dropout rate during training"),
    ("vocab_size", "vocabulary size budget per language"),
    ("min_frequency", "minimum count for vocabulary entries"),
    ("format", "report format for evaluate: text or json"),
    ("include_zero_support", "average macro-F1 over absent labels too"),
    ("k", "comma-separated odd ensemble sizes for simulate"),
    ("p", "member accuracy for simulate"),
    ("correlation", "shared-error probability for simulate"),
    ("trials", "Monte-Carlo trials per ensemble size"),
    ("per_language", "synthetic training records per language"),
    ("test_per_language", "synthetic test records per language"),
    ("ambiguity", "probability a synthetic text carries another label's cues"),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

impl Settings {
    pub fn parse(contents: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (i, raw) in contents.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if s.values.contains_key(key) {
                return Err(CliError::Input(format!("config line {}: `{key}` given twice", i + 1)));
            }
            s.set(key, value.trim())
                .map_err(|e| CliError::Input(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let contents =
            std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&contents)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !is_known(key) {
            return Err(CliError::Input(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("`--set {pair}`: expected key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| CliError::Input(format!("`{key} = {v}`: {e}"))),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|e| CliError::Input(format!("`{key} = {v}`: `{}`: {e}", item.trim())))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.raw(key)
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Input(format!("`{key}` is required (config key or --{key})")))
    }

    /// Path that must already exist.
    pub fn existing_path(&self, key: &str) -> Result<PathBuf, CliError> {
        let p = self.path(key)?;
        if !p.exists() {
            return Err(CliError::Input(format!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    /// Training settings. `base_seed` keys the split and, unless `seeds` is
    /// set, the member seeds `base_seed + 1 ..= base_seed + ensemble_size`.
    pub fn train_config(&self, base_seed: u64) -> Result<TrainConfig, CliError> {
        let d = TrainConfig::default();
        let ds = EncoderShape::default();
        let da = AdamConfig::default();
        let seeds = match self.list::<u64>("seeds")? {
            Some(s) => s,
            None => {
                let k: u64 = self.get("ensemble_size", d.seeds.len() as u64)?;
                (1..=k).map(|i| base_seed.wrapping_add(i)).collect()
            }
        };
        let config = TrainConfig {
            epochs: self.get("epochs", d.epochs)?,
            train_fraction: self.get("train_fraction", d.train_fraction)?,
            batch_size: self.get("batch_size", d.batch_size)?,
            adam: AdamConfig {
                learning_rate: self.get("learning_rate", da.learning_rate)?,
                beta1: self.get("beta1", da.beta1)?,
                beta2: self.get("beta2", da.beta2)?,
                epsilon: self.get("epsilon", da.epsilon)?,
            },
            seeds,
            max_len: self.get("max_len", d.max_len)?,
            split_seed: self.get("split_seed", base_seed)?,
            shape: EncoderShape {
                d_model: self.get("d_model", ds.d_model)?,
                n_heads: self.get("n_heads", ds.n_heads)?,
                n_layers: self.get("n_layers", ds.n_layers)?,
                d_ff: self.get("d_ff", ds.d_ff)?,
                dropout_rate: self.get("dropout", ds.dropout_rate)?,
            },
        };
        config.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(config)
    }
}

/// Fully resolved training config in the file format, written next to the
/// checkpoints so a run can be repeated.
pub fn render_train_config(c: &TrainConfig, vocab_size: usize, min_frequency: usize) -> String {
    let seeds: Vec<String> = c.seeds.iter().map(u64::to_string).collect();
    let mut s = String::new();
    for (k, v) in [
        ("epochs", c.epochs.to_string()),
        ("train_fraction", c.train_fraction.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("learning_rate", c.adam.learning_rate.to_string()),
        ("beta1", c.adam.beta1.to_string()),
        ("beta2", c.adam.beta2.to_string()),
        ("epsilon", c.adam.epsilon.to_string()),
        ("seeds", seeds.join(",")),
        ("max_len", c.max_len.to_string()),
        ("split_seed", c.split_seed.to_string()),
        ("d_model", c.shape.d_model.to_string()),
        ("n_heads", c.shape.n_heads.to_string()),
        ("n_layers", c.shape.n_layers.to_string()),
        ("d_ff", c.shape.d_ff.to_string()),
        ("dropout", c.shape.dropout_rate.to_string()),
        ("vocab_size", vocab_size.to_string()),
        ("min_frequency", min_frequency.to_string()),
    ] {
        writeln!(s, "{k} = {v}").unwrap();
    }
    s
}
