//! Regression metrics and Taguchi main-effects analysis.

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::design::{decode_levels, FactorSpace, HyperConfig, OrthogonalArray, LEVELS};
use crate::{Error, Result};

/// R² (percent), MAE, MSE and RMSE of one prediction set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    pub r2: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

/// Pooled metrics over every output column.
///
/// The residual and total sums of squares are summed over all columns, with each column's
/// total taken about that column's own mean; for a single column this is the textbook R².
/// MAE and MSE average over every entry.
pub fn compute_metrics(
    actual: ArrayView2<'_, f64>,
    predicted: ArrayView2<'_, f64>,
) -> Result<EvaluationMetrics> {
    if actual.dim() != predicted.dim() {
        return Err(Error::Shape(format!(
            "actual values are {:?}, predictions are {:?}",
            actual.dim(),
            predicted.dim()
        )));
    }
    if actual.nrows() < 2 || actual.ncols() == 0 {
        return Err(Error::Shape(format!(
            "need at least 2 observations, got {}",
            actual.nrows()
        )));
    }
    let means = actual.mean_axis(Axis(0)).expect("nonempty");
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs = 0.0;
    for (row_y, row_p) in actual.rows().into_iter().zip(predicted.rows()) {
        for ((y, p), m) in row_y.iter().zip(row_p.iter()).zip(means.iter()) {
            let r = y - p;
            ss_res += r * r;
            abs += r.abs();
            ss_tot += (y - m) * (y - m);
        }
    }
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let n = actual.len() as f64;
    let mse = ss_res / n;
    Ok(EvaluationMetrics {
        r2: (1.0 - ss_res / ss_tot) * 100.0,
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
    })
}

/// Metrics of a single output column.
pub fn per_component_metrics(
    actual: ArrayView2<'_, f64>,
    predicted: ArrayView2<'_, f64>,
    component: usize,
) -> Result<EvaluationMetrics> {
    if component >= actual.ncols() || component >= predicted.ncols() {
        return Err(Error::Shape(format!(
            "component {component} out of range for {} outputs",
            actual.ncols()
        )));
    }
    compute_metrics(
        actual.slice(ndarray::s![.., component..component + 1]),
        predicted.slice(ndarray::s![.., component..component + 1]),
    )
}

/// Metrics of plain vectors.
pub fn vector_metrics(actual: &[f64], predicted: &[f64]) -> Result<EvaluationMetrics> {
    let a = ArrayView2::from_shape((actual.len(), 1), actual).expect("column");
    let p = ArrayView2::from_shape((predicted.len(), 1), predicted).expect("column");
    compute_metrics(a, p)
}

/// Larger-is-better signal-to-noise ratio, `-10·log10(mean(1/y²))` dB.
pub fn sn_larger_better(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("S/N ratio of no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!(
            "S/N ratio needs positive values, got {v}"
        )));
    }
    let mean_inv_sq = values.iter().map(|y| 1.0 / (y * y)).sum::<f64>() / values.len() as f64;
    Ok(-10.0 * mean_inv_sq.log10())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorEffect {
    pub column: usize,
    pub level_means: [f64; LEVELS],
    pub level_counts: [usize; LEVELS],
    /// Larger-is-better S/N of the responses at each level, when computed.
    pub level_sn_db: Option<[f64; LEVELS]>,
    /// Level with the largest mean response; ties go to the lowest index.
    pub best_level: usize,
}

impl FactorEffect {
    /// Spread between the best and worst level means.
    pub fn range(&self) -> f64 {
        let max = self
            .level_means
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self
            .level_means
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        max - min
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainEffectsTable {
    pub grand_mean: f64,
    pub factors: Vec<FactorEffect>,
}

impl MainEffectsTable {
    pub fn selected_levels(&self) -> Vec<u8> {
        self.factors.iter().map(|f| f.best_level as u8).collect()
    }
}

fn argmax_lowest(values: &[f64; LEVELS]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean response at each level of each factor.
pub fn main_effects(array: &OrthogonalArray, responses: &[f64]) -> Result<MainEffectsTable> {
    if responses.len() != array.runs() {
        return Err(Error::Shape(format!(
            "{} responses for a {}-run array",
            responses.len(),
            array.runs()
        )));
    }
    if let Some(v) = responses.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite response {v}")));
    }
    let mut factors = Vec::with_capacity(array.columns());
    for c in 0..array.columns() {
        let mut sums = [0.0; LEVELS];
        let mut counts = [0usize; LEVELS];
        for (level, &r) in array.column(c).zip(responses) {
            let l = level as usize;
            if l >= LEVELS {
                return Err(Error::MalformedArray(format!(
                    "level {level} in column {}",
                    c + 1
                )));
            }
            sums[l] += r;
            counts[l] += 1;
        }
        if let Some(l) = counts.iter().position(|&n| n == 0) {
            return Err(Error::MalformedArray(format!(
                "column {} never uses level {l}",
                c + 1
            )));
        }
        let level_means: [f64; LEVELS] = std::array::from_fn(|l| sums[l] / counts[l] as f64);
        factors.push(FactorEffect {
            column: c,
            best_level: argmax_lowest(&level_means),
            level_means,
            level_counts: counts,
            level_sn_db: None,
        });
    }
    Ok(MainEffectsTable {
        grand_mean: responses.iter().sum::<f64>() / responses.len() as f64,
        factors,
    })
}

/// Adds per-level larger-is-better S/N ratios to a table built from the same responses.
pub fn attach_sn(
    table: &mut MainEffectsTable,
    array: &OrthogonalArray,
    responses: &[f64],
) -> Result<()> {
    if responses.len() != array.runs() {
        return Err(Error::Shape(format!(
            "{} responses for a {}-run array",
            responses.len(),
            array.runs()
        )));
    }
    for effect in &mut table.factors {
        let mut sn = [0.0; LEVELS];
        for (l, slot) in sn.iter_mut().enumerate() {
            let values: Vec<f64> = array
                .column(effect.column)
                .zip(responses)
                .filter(|(level, _)| *level as usize == l)
                .map(|(_, &r)| r)
                .collect();
            *slot = sn_larger_better(&values)?;
        }
        effect.level_sn_db = Some(sn);
    }
    Ok(())
}

/// The configuration made of every factor's best level.
pub fn select_optimum(table: &MainEffectsTable, space: &FactorSpace) -> Result<HyperConfig> {
    let levels = selected_level_values(table, space)?;
    HyperConfig::from_assignment(space, &levels)
}

pub fn selected_level_values(
    table: &MainEffectsTable,
    space: &FactorSpace,
) -> Result<Vec<crate::design::LevelValue>> {
    if table.factors.len() != space.len() {
        return Err(Error::Shape(format!(
            "main-effects table has {} factors, space has {}",
            table.factors.len(),
            space.len()
        )));
    }
    let row = OrthogonalArray::from_rows(vec![table.selected_levels()])?;
    decode_levels(&row, 0, space)
}
