//! Flat `key = value` configuration files with `#` comments. Unknown keys
//! are rejected; command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Every key a config file may define.
pub const KNOWN_KEYS: &[&str] = &[
    // paths
    "corpus",
    "checkpoint",
    "centroids",
    "out",
    "embeddings",
    // run selection
    "preset",
    "task",
    "human_label",
    "generator_subset",
    "seed",
    // split
    "train_frac",
    "val_frac",
    // trainer
    "steps",
    "batch_size",
    "lr",
    "beta1",
    "beta2",
    "weight_decay",
    "warmup_steps",
    "grad_clip",
    "eval_every",
    // margin schedule
    "lambda_min",
    "lambda_delta",
    "delta",
    "margin_mode",
    "dynamic_margin",
    // miner
    "miner",
    "epsilon",
    // corruption
    "corruption",
    "p",
    "p_s",
    "p_span",
    // distance
    "distance",
    // encoder dims
    "ngram_n",
    "vocab_size",
    "embed_dim",
    "hidden_dim",
    "out_dim",
];

/// Parses a config file into a key/value map, validating keys.
pub fn parse_config_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected key = value", path.display(), i + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "{}:{}: unknown key {key}",
                path.display(),
                i + 1
            )));
        }
        map.insert(key, value);
    }
    Ok(map)
}

/// Typed lookup into the parsed map.
pub fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("invalid value for {key}: {raw}"))),
    }
}
