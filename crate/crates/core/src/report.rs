//! On-disk formats: design and response CSVs, run logs, loss histories, main-effects reports,
//! metric reports and the self-contained model file.
//!
//! Floats are written in Rust's shortest round-trip form, so identical values always produce
//! identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    compute_metrics, per_component_metrics, EvaluationMetrics, MainEffectsTable,
};
use crate::design::{decode_levels, FactorSpace, HyperConfig, LevelValue, OrthogonalArray};
use crate::network::{Activation, Mlp};
use crate::pipeline::{MinMaxScaler, OUTPUT_COLUMNS};
use crate::training::{DesignRun, EpochLoss};
use crate::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: impl Write) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `run,<factor>...` with decoded level labels, one row per run in array order.
pub fn write_design<W: Write>(out: W, array: &OrthogonalArray, space: &FactorSpace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["run".to_string()];
    header.extend(space.factors().iter().map(|f| f.name().to_string()));
    w.write_record(&header)?;
    for i in 0..array.runs() {
        let levels = decode_levels(array, i, space)?;
        let mut row = vec![(i + 1).to_string()];
        row.extend(levels.iter().map(LevelValue::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<design>", e))?;
    Ok(())
}

pub fn write_design_file(path: &Path, array: &OrthogonalArray, space: &FactorSpace) -> Result<()> {
    let w = create(path)?;
    write_design(w, array, space)
}

/// `run,response,failed`.
pub fn write_responses(path: &Path, runs: &[DesignRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["run", "response", "failed"])?;
    for r in runs {
        w.write_record([
            (r.index + 1).to_string(),
            r.response.to_string(),
            r.result.failed().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a responses CSV with `run` and `response` columns (others are ignored). Runs must be
/// numbered `1..=n` in any order; the result is in run order.
pub fn read_responses(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let (run_col, resp_col) = (find("run")?, find("response")?);
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |col: usize, name: &str| -> Result<f64> {
            let cell = record.get(col).unwrap_or("");
            cell.parse::<f64>().map_err(|e| Error::Parse {
                row: i + 1,
                column: name.into(),
                reason: format!("`{cell}`: {e}"),
            })
        };
        let run = parse(run_col, "run")?;
        let response = parse(resp_col, "response")?;
        if run.fract() != 0.0 || run < 1.0 {
            return Err(Error::Parse {
                row: i + 1,
                column: "run".into(),
                reason: format!("`{run}` is not a run number"),
            });
        }
        pairs.push((run as usize, response));
    }
    pairs.sort_by_key(|p| p.0);
    for (i, (run, _)) in pairs.iter().enumerate() {
        if *run != i + 1 {
            return Err(Error::Shape(format!(
                "runs are not numbered 1..={}: found run {run} at position {}",
                pairs.len(),
                i + 1
            )));
        }
    }
    Ok(pairs.into_iter().map(|p| p.1).collect())
}

/// One line of the JSON-lines run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub config: HyperConfig,
    pub seed: u64,
    pub response: f64,
    pub failed: bool,
    pub failure: Option<String>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub early_stopped: bool,
    pub best_validation_loss: Option<f64>,
    pub wall_time_s: f64,
}

impl From<&DesignRun> for RunRecord {
    fn from(r: &DesignRun) -> Self {
        let res = &r.result;
        RunRecord {
            run: r.index + 1,
            config: res.config.clone(),
            seed: res.seed,
            response: r.response,
            failed: res.failed(),
            failure: res.failure.clone(),
            stopped_epoch: res.stopped_epoch,
            best_epoch: res.best_epoch,
            early_stopped: res.early_stopped,
            best_validation_loss: Some(res.best_validation_loss).filter(|v| v.is_finite()),
            wall_time_s: r.wall_time.as_secs_f64(),
        }
    }
}

pub fn write_run_log(path: &Path, runs: &[DesignRun]) -> Result<()> {
    let mut w = create(path)?;
    for r in runs {
        serde_json::to_writer(&mut w, &RunRecord::from(r))?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

pub fn read_run_log(path: &Path) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// `epoch,train_loss,val_loss`.
pub fn write_loss_history(path: &Path, history: &[EpochLoss]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            h.train.to_string(),
            h.validation.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `factor,level,mean_response[,sn_db]`; the S/N column appears when the table carries it.
pub fn write_main_effects(
    path: &Path,
    table: &MainEffectsTable,
    space: &FactorSpace,
) -> Result<()> {
    if table.factors.len() != space.len() {
        return Err(Error::Shape(format!(
            "{} effects for {} factors",
            table.factors.len(),
            space.len()
        )));
    }
    let with_sn = table.factors.iter().all(|f| f.level_sn_db.is_some());
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["factor", "level", "mean_response"];
    if with_sn {
        header.push("sn_db");
    }
    w.write_record(&header)?;
    for (effect, factor) in table.factors.iter().zip(space.factors()) {
        for (l, mean) in effect.level_means.iter().enumerate() {
            let mut row = vec![
                factor.name().to_string(),
                factor.levels()[l].to_string(),
                mean.to_string(),
            ];
            if let Some(sn) = effect.level_sn_db {
                row.push(sn[l].to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedLevel {
    pub factor: String,
    pub level_index: usize,
    pub value: LevelValue,
    pub mean_response: f64,
}

/// The selected configuration and the per-factor choices behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimumRecord {
    pub config: HyperConfig,
    pub levels: Vec<SelectedLevel>,
    pub grand_mean: f64,
}

impl OptimumRecord {
    pub fn new(table: &MainEffectsTable, space: &FactorSpace, config: HyperConfig) -> Self {
        let levels = table
            .factors
            .iter()
            .zip(space.factors())
            .map(|(e, f)| SelectedLevel {
                factor: f.name().to_string(),
                level_index: e.best_level,
                value: f.levels()[e.best_level].clone(),
                mean_response: e.level_means[e.best_level],
            })
            .collect();
        OptimumRecord {
            config,
            levels,
            grand_mean: table.grand_mean,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Self-contained inference bundle: network parameters plus the scaler that normalized its data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    /// Per layer, `outputs` rows of `inputs` weights.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub scaler: MinMaxScaler,
    pub config: Option<HyperConfig>,
}

impl ModelFile {
    pub fn new(model: &Mlp, scaler: &MinMaxScaler, config: Option<HyperConfig>) -> Self {
        let weights = (0..model.layer_count())
            .map(|l| {
                model
                    .weights(l)
                    .rows()
                    .into_iter()
                    .map(|r| r.to_vec())
                    .collect()
            })
            .collect();
        let biases = (0..model.layer_count())
            .map(|l| model.bias(l).to_vec())
            .collect();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: model.sizes().to_vec(),
            activation: model.activation(),
            weights,
            biases,
            scaler: scaler.clone(),
            config,
        }
    }

    pub fn network(&self) -> Result<Mlp> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(self.format_version));
        }
        let mlp = Mlp::from_layers(
            &self.layer_sizes,
            self.activation,
            &self.weights,
            &self.biases,
        )?;
        if self.scaler.inputs.columns() != mlp.input_size()
            || self.scaler.outputs.columns() != mlp.output_size()
        {
            return Err(Error::Shape(
                "scaler does not match the network's input/output sizes".into(),
            ));
        }
        Ok(mlp)
    }

    /// Predictions in original output units for raw (unnormalized) inputs.
    pub fn predict(&self, raw_inputs: ArrayView2<'_, f64>) -> Result<ndarray::Array2<f64>> {
        let mlp = self.network()?;
        let x = self.scaler.inputs.transform(&raw_inputs)?;
        let y = mlp.forward(x.view())?;
        self.scaler.outputs.inverse_transform(&y.view())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentMetrics {
    pub component: String,
    /// Absent when the component's actual values are constant in this split.
    pub metrics: Option<EvaluationMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: String,
    pub samples: usize,
    pub pooled: EvaluationMetrics,
    pub components: Vec<ComponentMetrics>,
}

impl SplitReport {
    pub fn new(
        split: &str,
        actual: ArrayView2<'_, f64>,
        predicted: ArrayView2<'_, f64>,
    ) -> Result<Self> {
        let pooled = compute_metrics(actual, predicted)?;
        let components = (0..actual.ncols())
            .map(|k| {
                let metrics = match per_component_metrics(actual, predicted, k) {
                    Ok(m) => Some(m),
                    Err(Error::UndefinedR2) => None,
                    Err(e) => return Err(e),
                };
                Ok(ComponentMetrics {
                    component: OUTPUT_COLUMNS
                        .get(k)
                        .map_or_else(|| format!("y{k}"), |s| s.to_string()),
                    metrics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SplitReport {
            split: split.to_string(),
            samples: actual.nrows(),
            pooled,
            components,
        })
    }
}

/// `split,component,r2,mae,mse,rmse`, pooled row first within each split.
pub fn write_metrics_csv(path: &Path, reports: &[SplitReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["split", "component", "r2", "mae", "mse", "rmse"])?;
    let fmt = |m: &EvaluationMetrics| {
        [
            m.r2.to_string(),
            m.mae.to_string(),
            m.mse.to_string(),
            m.rmse.to_string(),
        ]
    };
    for r in reports {
        let mut row = vec![r.split.clone(), "pooled".into()];
        row.extend(fmt(&r.pooled));
        w.write_record(&row)?;
        for c in &r.components {
            let mut row = vec![r.split.clone(), c.component.clone()];
            match &c.metrics {
                Some(m) => row.extend(fmt(m)),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
