use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use oatune::design::FactorSpace;
use oatune::pipeline::{generate_synthetic, load_dataset, Bounds, Dataset, ScalerFit, SplitSpec};
use oatune::report::read_json;
use oatune::training::{ResponseCriterion, TrainSettings};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, InputContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Five network factors at three levels, 80/15/5 split, patience 200, train-R² response.
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    #[value(name = "train-r2")]
    TrainR2,
    #[value(name = "val-r2")]
    ValR2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScalerFitArg {
    Full,
    Train,
}

/// Flags shared by every command.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Base seed for data generation, splitting, initialization and shuffling.
    #[arg(long, env = "OATUNE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Directory that receives the output files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,

    /// Built-in factor space and training protocol.
    #[arg(long, value_enum, conflicts_with_all = ["factors", "patience", "criterion", "scaler_fit"])]
    pub preset: Option<Preset>,

    /// Factor space as JSON: {"factors": [{"name": "HL", "levels": [1, 2, 3]}, ...]}.
    #[arg(long)]
    pub factors: Option<PathBuf>,

    /// Maximum number of concurrent training runs.
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,

    #[arg(long, default_value_t = 5000)]
    pub max_epochs: usize,

    /// Epochs without validation improvement before training stops.
    #[arg(long)]
    pub patience: Option<usize>,

    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// R² that scores each design run.
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,

    /// Rows the min-max scaler is fitted on.
    #[arg(long, value_enum)]
    pub scaler_fit: Option<ScalerFitArg>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Common {
    pub fn space(&self) -> CliResult<FactorSpace> {
        match &self.factors {
            Some(path) => {
                read_json(path).input_with(format!("reading factor space {}", path.display()))
            }
            None => Ok(FactorSpace::paper()),
        }
    }

    pub fn train_settings(&self) -> CliResult<TrainSettings> {
        let defaults = TrainSettings::default();
        let settings = TrainSettings {
            max_epochs: self.max_epochs,
            patience: self.patience.unwrap_or(defaults.patience),
            batch_size: self.batch_size,
            seed: self.seed,
            criterion: match self.criterion {
                Some(CriterionArg::ValR2) => ResponseCriterion::ValidationR2,
                Some(CriterionArg::TrainR2) | None => ResponseCriterion::TrainR2,
            },
        };
        settings.validate().input()?;
        Ok(settings)
    }

    pub fn scaler_fit(&self) -> ScalerFit {
        match self.scaler_fit {
            Some(ScalerFitArg::Train) => ScalerFit::Train,
            Some(ScalerFitArg::Full) | None => ScalerFit::Full,
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec::default().with_seed(self.seed)
    }

    pub fn ensure_out_dir(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| {
            CliError::input(format!("cannot create {}: {e}", self.out_dir.display()))
        })?;
        Ok(&self.out_dir)
    }
}

/// Where the samples come from.
#[derive(Args, Clone, Debug)]
pub struct DataArgs {
    /// Dataset CSV with the 12 input and 21 stiffness columns.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,

    /// Generate this many synthetic samples instead of reading a file.
    #[arg(long)]
    pub synthetic: Option<usize>,

    /// Upper bound of the three rotation angles, in radians.
    #[arg(long, default_value_t = TAU)]
    pub max_angle: f64,

    /// Reject rows that violate the input bounds.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    File { path: PathBuf, strict: bool },
    Synthetic { count: usize, seed: u64 },
}

impl DataArgs {
    pub fn source(&self, seed: u64) -> CliResult<DataSource> {
        match (&self.data, self.synthetic) {
            (Some(path), _) => Ok(DataSource::File {
                path: path.clone(),
                strict: self.strict,
            }),
            (None, Some(count)) => Ok(DataSource::Synthetic { count, seed }),
            (None, None) => Err(CliError::input(
                "no dataset: pass --data <csv> or --synthetic <n>",
            )),
        }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            max_angle: self.max_angle,
        }
    }
}

pub fn load(source: &DataSource, bounds: &Bounds) -> CliResult<Dataset> {
    match source {
        DataSource::File { path, strict } => load_dataset(path, *strict, bounds)
            .input_with(format!("reading dataset {}", path.display())),
        DataSource::Synthetic { count, seed } => generate_synthetic(*count, *seed, bounds).input(),
    }
}
