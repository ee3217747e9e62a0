//! Early-stopped training of one configuration and execution of a whole design.
//!
//! Every run derives its own seed from the base seed and its run index, so a design produces the
//! same responses whether its runs execute one after another or on a worker pool.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compute_metrics, EvaluationMetrics};
use crate::design::{decode_run, FactorSpace, HyperConfig, OrthogonalArray};
use crate::network::Mlp;
use crate::optim::Optimizer;
use crate::pipeline::{PreparedData, SplitData};
use crate::{derive_seed, Error, Result};

/// Which R² scores a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseCriterion {
    #[default]
    #[serde(rename = "train-r2")]
    TrainR2,
    #[serde(rename = "val-r2")]
    ValidationR2,
}

impl fmt::Display for ResponseCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResponseCriterion::TrainR2 => "train-r2",
            ResponseCriterion::ValidationR2 => "val-r2",
        })
    }
}

impl FromStr for ResponseCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train-r2" => Ok(ResponseCriterion::TrainR2),
            "val-r2" => Ok(ResponseCriterion::ValidationR2),
            _ => Err(Error::Construction(format!("unknown criterion `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub criterion: ResponseCriterion,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            max_epochs: 5000,
            patience: 200,
            batch_size: 32,
            seed: 0,
            criterion: ResponseCriterion::TrainR2,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Construction(format!(
                "max epochs ({}), patience ({}) and batch size ({}) must all be at least 1",
                self.max_epochs, self.patience, self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop,
}

/// Patience-based early stopping on a monitored loss. Improvement means strictly lower.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    since_improvement: usize,
    last_epoch: usize,
    best_params: Option<Vec<f64>>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience: patience.max(1),
            best_loss: f64::INFINITY,
            best_epoch: 0,
            since_improvement: 0,
            last_epoch: 0,
            best_params: None,
        }
    }

    /// Records the loss of `epoch` (1-based, consecutive). `params` is snapshotted on improvement.
    pub fn update(&mut self, epoch: usize, loss: f64, params: &[f64]) -> Result<Decision> {
        if !loss.is_finite() {
            return Err(Error::Training {
                step: epoch as u64,
                reason: format!("monitored loss is {loss}"),
            });
        }
        if epoch != self.last_epoch + 1 {
            return Err(Error::Training {
                step: epoch as u64,
                reason: format!("epoch {epoch} does not follow {}", self.last_epoch),
            });
        }
        self.last_epoch = epoch;
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.since_improvement = 0;
            match &mut self.best_params {
                Some(buf) => buf.copy_from_slice(params),
                None => self.best_params = Some(params.to_vec()),
            }
        } else {
            self.since_improvement += 1;
        }
        Ok(if self.since_improvement >= self.patience {
            Decision::Stop
        } else {
            Decision::Continue
        })
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn since_improvement(&self) -> usize {
        self.since_improvement
    }

    pub fn best_params(&self) -> Option<&[f64]> {
        self.best_params.as_deref()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub train: EvaluationMetrics,
    pub validation: Option<EvaluationMetrics>,
    pub test: Option<EvaluationMetrics>,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub config: HyperConfig,
    pub seed: u64,
    /// Restored best-epoch network.
    pub model: Mlp,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub early_stopped: bool,
    pub history: Vec<EpochLoss>,
    pub metrics: Option<SplitMetrics>,
    /// Why the run failed, if it did. Failed runs score a response of 0.
    pub failure: Option<String>,
}

impl TrainResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// R² in percent under `criterion`; 0 for failed runs or missing metrics.
    pub fn response(&self, criterion: ResponseCriterion) -> f64 {
        if self.failed() {
            return 0.0;
        }
        let r2 = self.metrics.and_then(|m| match criterion {
            ResponseCriterion::TrainR2 => Some(m.train.r2),
            ResponseCriterion::ValidationR2 => m.validation.map(|v| v.r2),
        });
        r2.filter(|v| v.is_finite()).unwrap_or(0.0)
    }
}

fn split_metrics(model: &Mlp, split: &SplitData) -> Result<Option<EvaluationMetrics>> {
    if split.len() < 2 {
        return Ok(None);
    }
    let pred = model.forward(split.inputs.view())?;
    match compute_metrics(split.targets.view(), pred.view()) {
        Ok(m) => Ok(Some(m)),
        Err(Error::UndefinedR2) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn evaluate(model: &Mlp, data: &PreparedData) -> Result<SplitMetrics> {
    let train = split_metrics(model, &data.train)?
        .ok_or_else(|| Error::Shape("training split has too few distinct rows to score".into()))?;
    Ok(SplitMetrics {
        train,
        validation: split_metrics(model, &data.validation)?,
        test: split_metrics(model, &data.test)?,
    })
}

/// Trains `config` on the prepared splits.
///
/// Divergence (a non-finite loss or gradient) does not return an error: the result carries the
/// failure and the best parameters seen before it. Errors are reserved for invalid inputs.
pub fn train_model(
    config: &HyperConfig,
    data: &PreparedData,
    settings: &TrainSettings,
    seed: u64,
) -> Result<TrainResult> {
    settings.validate()?;
    let train = &data.train;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sizes = config.layer_sizes(train.inputs.ncols(), train.targets.ncols());
    let mut model = Mlp::new(&sizes, config.activation, derive_seed(seed, 0))?;
    let mut optimizer =
        Optimizer::new(config.optimizer, config.learning_rate, model.params().len())?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    // without a validation split, the training loss is monitored instead
    let monitor = if data.validation.is_empty() {
        train
    } else {
        &data.validation
    };

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = vec![0.0; model.params().len()];
    let mut stopper = EarlyStopping::new(settings.patience);
    let mut history = Vec::new();
    let mut failure = None;
    let mut early_stopped = false;

    'epochs: for epoch in 1..=settings.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(settings.batch_size) {
            let x: Array2<f64> = train.inputs.select(Axis(0), batch);
            let y: Array2<f64> = train.targets.select(Axis(0), batch);
            let loss = model.backward_into(x.view(), y.view(), &mut grads)?;
            if !loss.is_finite() {
                failure = Some(format!("non-finite training loss in epoch {epoch}"));
                break 'epochs;
            }
            if let Err(e) = optimizer.step(model.params_mut(), &grads) {
                failure = Some(format!("epoch {epoch}: {e}"));
                break 'epochs;
            }
            total += loss * batch.len() as f64;
        }
        let val_loss = model.loss(monitor.inputs.view(), monitor.targets.view())?;
        history.push(EpochLoss {
            epoch,
            train: total / train.len() as f64,
            validation: val_loss,
        });
        match stopper.update(epoch, val_loss, model.params()) {
            Ok(Decision::Continue) => {}
            Ok(Decision::Stop) => {
                early_stopped = true;
                break;
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }

    if let Some(best) = stopper.best_params() {
        model.params_mut().copy_from_slice(best);
    }
    let metrics = if stopper.best_params().is_some() {
        match evaluate(&model, data) {
            Ok(m) => Some(m),
            Err(e) => {
                failure.get_or_insert_with(|| e.to_string());
                None
            }
        }
    } else {
        None
    };
    Ok(TrainResult {
        config: config.clone(),
        seed,
        model,
        stopped_epoch: history.len(),
        best_epoch: stopper.best_epoch(),
        best_validation_loss: stopper.best_loss(),
        early_stopped,
        history,
        metrics,
        failure,
    })
}

/// One executed run of a design.
#[derive(Clone, Debug)]
pub struct DesignRun {
    /// Zero-based position in the array.
    pub index: usize,
    pub result: TrainResult,
    pub response: f64,
    pub wall_time: Duration,
}

/// Responses in run order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseVector(pub Vec<f64>);

impl ResponseVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct DesignOutcome {
    pub runs: Vec<DesignRun>,
    pub responses: ResponseVector,
}

/// Seed of run `index` under base seed `base`.
pub fn run_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, 1_000 + index as u64)
}

/// Trains run `index` of the design in isolation.
pub fn run_single(
    array: &OrthogonalArray,
    space: &FactorSpace,
    data: &PreparedData,
    settings: &TrainSettings,
    index: usize,
) -> Result<DesignRun> {
    let config = decode_run(array, index, space)?;
    execute(index, &config, data, settings)
}

fn execute(
    index: usize,
    config: &HyperConfig,
    data: &PreparedData,
    settings: &TrainSettings,
) -> Result<DesignRun> {
    let start = Instant::now();
    let result = train_model(config, data, settings, run_seed(settings.seed, index))?;
    Ok(DesignRun {
        index,
        response: result.response(settings.criterion),
        result,
        wall_time: start.elapsed(),
    })
}

/// Trains every run of `array` with up to `workers` concurrent runs.
///
/// `workers <= 1`, or a build without the `parallel` feature, runs sequentially.
pub fn run_design(
    array: &OrthogonalArray,
    space: &FactorSpace,
    data: &PreparedData,
    settings: &TrainSettings,
    workers: usize,
) -> Result<DesignOutcome> {
    settings.validate()?;
    let configs = (0..array.runs())
        .map(|i| decode_run(array, i, space))
        .collect::<Result<Vec<_>>>()?;
    let work = |(i, c): (usize, &HyperConfig)| execute(i, c, data, settings);

    #[cfg(feature = "parallel")]
    let runs = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Construction(format!("worker pool: {e}")))?;
        pool.install(|| {
            configs
                .par_iter()
                .enumerate()
                .map(work)
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        configs
            .iter()
            .enumerate()
            .map(work)
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs = {
        let _ = workers;
        configs
            .iter()
            .enumerate()
            .map(work)
            .collect::<Result<Vec<_>>>()?
    };

    let responses = ResponseVector(runs.iter().map(|r| r.response).collect());
    Ok(DesignOutcome { runs, responses })
}
