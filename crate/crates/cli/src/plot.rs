//! Static SVG figures.

use std::path::Path;

use anyhow::{anyhow, Result};
use oatune::analysis::MainEffectsTable;
use oatune::design::FactorSpace;
use oatune::training::EpochLoss;
use plotters::prelude::*;

const SIZE: (u32, u32) = (720, 480);

fn err(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("plot: {e}")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = ((hi - lo) * 0.05).max(1e-9 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

/// Training and validation loss per epoch on a log scale.
pub fn loss_curves(path: &Path, history: &[EpochLoss]) -> Result<()> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    let values: Vec<f64> = history
        .iter()
        .flat_map(|h| [h.train, h.validation])
        .filter(|&v| positive(v))
        .collect();
    if values.is_empty() {
        return Err(anyhow!("plot: no finite positive losses to draw"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Loss", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(
            1f64..(history.len().max(2) as f64),
            (lo * 0.9..hi * 1.1).log_scale(),
        )
        .map_err(err)?;
    chart
        .configure_mesh()
        .x_desc("epoch")
        .y_desc("MSE (normalized)")
        .draw()
        .map_err(err)?;
    for (name, color, pick) in [
        (
            "train",
            BLUE,
            (|h: &EpochLoss| h.train) as fn(&EpochLoss) -> f64,
        ),
        ("validation", RED, |h: &EpochLoss| h.validation),
    ] {
        let points = history
            .iter()
            .map(|h| (h.epoch as f64, pick(h)))
            .filter(|p| positive(p.1));
        chart
            .draw_series(LineSeries::new(points, color))
            .map_err(err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)
}

/// One panel per factor with the mean response at each level.
pub fn main_effects(path: &Path, table: &MainEffectsTable, space: &FactorSpace) -> Result<()> {
    let means: Vec<f64> = table.factors.iter().flat_map(|f| f.level_means).collect();
    let (lo, hi) = padded(
        means.iter().copied().fold(f64::INFINITY, f64::min),
        means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let width = 200 * space.len() as u32 + 40;
    let root = SVGBackend::new(path, (width, 360)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let root = root
        .titled("Main effects: mean response per level", ("sans-serif", 18))
        .map_err(err)?;
    let panels = root.split_evenly((1, space.len()));
    for ((panel, effect), factor) in panels.iter().zip(&table.factors).zip(space.factors()) {
        let labels: Vec<String> = factor.levels().iter().map(|l| l.to_string()).collect();
        let mut chart = ChartBuilder::on(panel)
            .caption(factor.name(), ("sans-serif", 16))
            .margin(8)
            .x_label_area_size(28)
            .y_label_area_size(48)
            .build_cartesian_2d(-0.3f64..2.3f64, lo..hi)
            .map_err(err)?;
        chart
            .configure_mesh()
            .x_labels(3)
            .x_label_formatter(&|x| {
                let i = x.round();
                if (x - i).abs() < 1e-6 && (0.0..3.0).contains(&i) {
                    labels[i as usize].clone()
                } else {
                    String::new()
                }
            })
            .disable_x_mesh()
            .draw()
            .map_err(err)?;
        let points: Vec<(f64, f64)> = effect
            .level_means
            .iter()
            .enumerate()
            .map(|(i, &m)| (i as f64, m))
            .collect();
        chart
            .draw_series(LineSeries::new(points.clone(), BLUE))
            .map_err(err)?;
        chart
            .draw_series(points.iter().enumerate().map(|(i, &p)| {
                let style = if i == effect.best_level {
                    RED.filled()
                } else {
                    BLUE.filled()
                };
                Circle::new(p, 4, style)
            }))
            .map_err(err)?;
        chart
            .draw_series(LineSeries::new(
                [(-0.3, table.grand_mean), (2.3, table.grand_mean)],
                BLACK.mix(0.3),
            ))
            .map_err(err)?;
    }
    root.present().map_err(err)
}

/// Predicted against actual values with the identity line.
pub fn parity(path: &Path, title: &str, actual: &[f64], predicted: &[f64]) -> Result<()> {
    let all = actual
        .iter()
        .chain(predicted)
        .copied()
        .filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        return Err(anyhow!("plot: no finite values to draw"));
    }
    let (lo, hi) = padded(lo, hi);
    let root = SVGBackend::new(path, (560, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(lo..hi, lo..hi)
        .map_err(err)?;
    chart
        .configure_mesh()
        .x_desc("actual")
        .y_desc("predicted")
        .draw()
        .map_err(err)?;
    chart
        .draw_series(LineSeries::new([(lo, lo), (hi, hi)], BLACK.mix(0.5)))
        .map_err(err)?;
    chart
        .draw_series(
            actual
                .iter()
                .zip(predicted)
                .map(|(&a, &p)| Circle::new((a, p), 2, BLUE.mix(0.4).filled())),
        )
        .map_err(err)?;
    root.present().map_err(err)
}
