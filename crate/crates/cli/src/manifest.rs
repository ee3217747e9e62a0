use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use oatune::design::{FactorSpace, HyperConfig};
use oatune::pipeline::{Bounds, ScalerFit, SplitSpec};
use oatune::report::read_json;
use oatune::training::TrainSettings;
use serde::{Deserialize, Serialize};

use crate::error::{CliResult, InputContext};
use crate::options::{Common, DataArgs, DataSource};

/// Everything that determines a command's numeric output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub factor_space: FactorSpace,
    pub split: SplitSpec,
    pub scaler_fit: ScalerFit,
    pub train: TrainSettings,
    pub data: DataSource,
    pub bounds: Bounds,
    /// Configuration trained by `train-best`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<HyperConfig>,
}

impl Settings {
    pub fn from_flags(common: &Common, data: &DataArgs) -> CliResult<Self> {
        Ok(Settings {
            factor_space: common.space()?,
            split: common.split(),
            scaler_fit: common.scaler_fit(),
            train: common.train_settings()?,
            data: data.source(common.seed)?,
            bounds: data.bounds(),
            config: None,
        })
    }

    /// Settings from a manifest written by an earlier invocation.
    pub fn from_manifest(path: &Path) -> CliResult<Self> {
        let manifest: RunManifest =
            read_json(path).input_with(format!("reading manifest {}", path.display()))?;
        manifest.settings.train.validate().input()?;
        Ok(manifest.settings)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub settings: Settings,
    /// Concurrency used; results do not depend on it.
    pub workers: usize,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

impl RunManifest {
    pub fn new(command: &str, settings: Settings, workers: usize, started_unix_ms: u64) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            settings,
            workers,
            started_unix_ms,
            finished_unix_ms: now_ms(),
        }
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}
