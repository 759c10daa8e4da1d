//! Run configuration: dataset defaults, overlaid by a flat dotted-key JSON
//! file, overlaid by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use spikeplast::data::DatasetId;
use spikeplast::pipeline::{NetworkSpec, TrainConfig};

/// Invalid or inconsistent configuration. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetId,
    /// Directory holding `mnist/`, `fashion/` and `cifar10/`.
    pub data_dir: Option<PathBuf>,
    pub seed: u64,
    pub conv_epochs: usize,
    pub fc_epochs: usize,
    /// Train on this many samples per class instead of the full split.
    pub per_class: Option<usize>,
    /// Train on the first `train_limit` samples.
    pub train_limit: Option<usize>,
    /// Evaluate on the first `test_limit` test samples.
    pub test_limit: Option<usize>,
    pub out: PathBuf,
    pub network: NetworkSpec,
}

impl RunConfig {
    pub fn defaults(dataset: DatasetId) -> Self {
        let train = TrainConfig::default();
        Self {
            dataset,
            data_dir: None,
            seed: train.seed,
            conv_epochs: train.conv_epochs,
            fc_epochs: train.fc_epochs,
            per_class: None,
            train_limit: None,
            test_limit: None,
            out: PathBuf::from("runs"),
            network: match dataset {
                DatasetId::Mnist => NetworkSpec::mnist(),
                DatasetId::Fashion => NetworkSpec::fashion(),
                DatasetId::Cifar10 => NetworkSpec::cifar10(),
            },
        }
    }

    /// Defaults for the dataset named by `--dataset` or the file's
    /// `dataset` key, with the file's dotted keys applied on top.
    pub fn resolve(dataset_flag: Option<DatasetId>, file: Option<&Path>) -> anyhow::Result<Self> {
        let flat = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(config_err(format!("{}: expected a JSON object", p.display()))),
                    Err(e) => return Err(config_err(format!("{}: {e}", p.display()))),
                }
            }
            None => Map::new(),
        };
        let from_file = match flat.get("dataset") {
            Some(Value::String(s)) => Some(DatasetId::parse(s).ok_or_else(|| config_err(format!("unknown dataset {s:?}")))?),
            Some(other) => return Err(config_err(format!("dataset must be a string, got {other}"))),
            None => None,
        };
        if let (Some(a), Some(b)) = (dataset_flag, from_file) {
            if a != b {
                return Err(config_err(format!("--dataset {} conflicts with config dataset {}", a.name(), b.name())));
            }
        }
        let dataset = dataset_flag.or(from_file).unwrap_or(DatasetId::Mnist);
        let mut tree = serde_json::to_value(Self::defaults(dataset))?;
        apply_dotted(&mut tree, &flat)?;
        let cfg: Self = serde_json::from_value(tree).map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.network.validate().map_err(|e| config_err(e.to_string()))?;
        if self.per_class == Some(0) {
            return Err(config_err("per_class must be at least 1"));
        }
        if self.per_class.is_some() && self.train_limit.is_some() {
            return Err(config_err("per_class and train_limit are mutually exclusive"));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            conv_epochs: self.conv_epochs,
            fc_epochs: self.fc_epochs,
            seed: self.seed,
        }
    }

    /// Explicit directory, else `SPIKEPLAST_DATA`, else `./data`, each with
    /// the dataset name appended.
    pub fn dataset_dir(&self) -> PathBuf {
        let root = self
            .data_dir
            .clone()
            .or_else(|| std::env::var_os("SPIKEPLAST_DATA").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"));
        root.join(self.dataset.name())
    }
}

/// Writes every `a.b.c` key of `flat` into `tree`. Every path must already
/// exist in `tree`, which rejects unknown keys.
fn apply_dotted(tree: &mut Value, flat: &Map<String, Value>) -> anyhow::Result<()> {
    for (key, value) in flat {
        let mut node = &mut *tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| config_err(format!("unknown key {key:?}")))?;
            if !obj.contains_key(*part) {
                return Err(config_err(format!("unknown key {key:?}")));
            }
            let child = obj.get_mut(*part).expect("checked");
            if depth + 1 == parts.len() {
                if child.is_object() {
                    return Err(config_err(format!("key {key:?} names a section, set its fields instead")));
                }
                *child = value.clone();
            }
            node = child;
        }
    }
    Ok(())
}
