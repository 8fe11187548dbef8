//! Run configuration: a TOML file with dotted sections, every key optional,
//! with command-line flags layered on top.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rnncache::device::DeviceModel;
use rnncache::engine::SimulationConfig;
use rnncache::nn::TrainConfig;
use rnncache::policies::PolicyKind;
use rnncache::trace::WorkloadCategory;
use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub capacity: Option<usize>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub device: DeviceSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub trace: Option<PathBuf>,
    pub report_csv: Option<PathBuf>,
    pub report_text: Option<PathBuf>,
    pub series_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    /// Single cache-decision model used for every category.
    pub cache: Option<PathBuf>,
    /// Category the single model is registered under.
    pub cache_category: Option<String>,
    /// Per-category cache-decision models, keyed by category name.
    #[serde(default)]
    pub categories: BTreeMap<String, PathBuf>,
    pub characterizer: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub policies: Option<Vec<String>>,
    pub monitor: Option<bool>,
    pub rcrnn_overhead_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub ssd_read_base_ms: Option<f64>,
    pub ssd_write_base_ms: Option<f64>,
    pub hdd_random_base_ms: Option<f64>,
    pub hdd_seq_mb_per_s: Option<f64>,
    pub ssd_mb_per_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub clip_norm: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("config {}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(e.to_string()))
    }

    pub fn device(&self) -> Result<DeviceModel, UsageError> {
        let d = DeviceModel::default();
        let s = &self.device;
        let model = DeviceModel {
            ssd_read_base_ms: s.ssd_read_base_ms.unwrap_or(d.ssd_read_base_ms),
            ssd_write_base_ms: s.ssd_write_base_ms.unwrap_or(d.ssd_write_base_ms),
            hdd_random_base_ms: s.hdd_random_base_ms.unwrap_or(d.hdd_random_base_ms),
            hdd_seq_mb_per_s: s.hdd_seq_mb_per_s.unwrap_or(d.hdd_seq_mb_per_s),
            ssd_mb_per_s: s.ssd_mb_per_s.unwrap_or(d.ssd_mb_per_s),
        };
        model.validate().map_err(UsageError)?;
        Ok(model)
    }

    pub fn simulation(&self, capacity: usize) -> Result<SimulationConfig, UsageError> {
        if capacity == 0 {
            return Err(UsageError("capacity: must be at least 1 page".into()));
        }
        let mut c = SimulationConfig::new(capacity);
        c.device = self.device()?;
        c.seed = self.seed.unwrap_or(0);
        if let Some(m) = self.simulation.monitor {
            c.monitor = m;
        }
        if let Some(o) = self.simulation.rcrnn_overhead_ms {
            c.rcrnn_overhead_ms = o;
        }
        c.validate()
            .map_err(|e| UsageError(format!("simulation: {e}")))?;
        Ok(c)
    }

    pub fn policies(&self) -> Result<Option<Vec<PolicyKind>>, UsageError> {
        self.simulation
            .policies
            .as_ref()
            .map(|names| parse_policies(names))
            .transpose()
    }

    pub fn train_config(&self, defaults: TrainConfig) -> Result<TrainConfig, UsageError> {
        let t = &self.train;
        let c = TrainConfig {
            epochs: t.epochs.unwrap_or(defaults.epochs),
            learning_rate: t.learning_rate.unwrap_or(defaults.learning_rate),
            batch_size: t.batch_size.unwrap_or(defaults.batch_size),
            clip_norm: t.clip_norm.unwrap_or(defaults.clip_norm),
            seed: self.seed.unwrap_or(defaults.seed),
            ..defaults
        };
        c.validate().map_err(|e| UsageError(format!("train: {e}")))?;
        Ok(c)
    }

    /// True when some cache-decision model path is configured.
    pub fn has_cache_model(&self) -> bool {
        self.models.cache.is_some() || !self.models.categories.is_empty()
    }
}

pub fn parse_policies(names: &[String]) -> Result<Vec<PolicyKind>, UsageError> {
    if names.is_empty() {
        return Err(UsageError("simulation.policies: list is empty".into()));
    }
    names
        .iter()
        .map(|n| {
            n.trim()
                .parse::<PolicyKind>()
                .map_err(|_| UsageError(format!("simulation.policies: unknown policy `{n}`")))
        })
        .collect()
}

pub fn parse_category(field: &str, name: &str) -> Result<WorkloadCategory, UsageError> {
    name.parse()
        .map_err(|_| UsageError(format!("{field}: unknown workload category `{name}`")))
}
