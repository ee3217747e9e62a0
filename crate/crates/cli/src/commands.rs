use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use ndarray::{Array2, Axis};
use oatune::analysis::{attach_sn, main_effects, select_optimum};
use oatune::design::{build_design, verify_strength2, HyperConfig};
use oatune::pipeline::stiffness::{engineering_constants, from_components};
use oatune::pipeline::{
    aspect_ratio, col, prepare, validate_sample, Sample, INPUT_COLUMNS, N_INPUTS, N_OUTPUTS,
    OUTPUT_COLUMNS,
};
use oatune::report::{
    read_json, read_responses, write_design, write_design_file, write_json, write_loss_history,
    write_main_effects, write_metrics_csv, write_responses, write_run_log, ModelFile,
    OptimumRecord, SplitReport,
};
use oatune::training::{run_design, train_model, EpochLoss, SplitMetrics};
use serde::Serialize;

use crate::error::{CliError, CliResult, InputContext};
use crate::manifest::{now_ms, RunManifest, Settings};
use crate::options::{load, Common, DataArgs};
use crate::plot;

/// Allowed gap between a supplied a33 and 1 - a11 - a22.
const TRACE_TOLERANCE: f64 = 1e-2;

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[command(flatten)]
    common: Common,

    /// Output CSV; the design goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn design(args: DesignArgs) -> CliResult<()> {
    let space = args.common.space()?;
    let array = build_design(&space).input()?;
    let balance = verify_strength2(&array)?;
    if let Some(v) = balance.violation {
        return Err(anyhow::anyhow!("generated design is unbalanced: {v:?}").into());
    }
    match &args.out {
        Some(path) => write_design_file(path, &array, &space)?,
        None => write_design(std::io::stdout().lock(), &array, &space)?,
    }
    eprintln!(
        "{} of {} full-factorial cases",
        array.runs(),
        space.full_factorial_size()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    common: Common,

    #[command(flatten)]
    data: DataArgs,

    /// Repeat an earlier run with the settings stored in its manifest.
    #[arg(long, conflicts_with_all = ["data", "synthetic", "factors", "preset"])]
    manifest: Option<PathBuf>,
}

pub fn run(args: RunArgs) -> CliResult<()> {
    let started = now_ms();
    let settings = match &args.manifest {
        Some(path) => Settings::from_manifest(path)?,
        None => Settings::from_flags(&args.common, &args.data)?,
    };
    let out = args.common.ensure_out_dir()?;
    let space = &settings.factor_space;
    let array = build_design(space).input()?;
    let dataset = load(&settings.data, &settings.bounds)?;
    let prepared = prepare(&dataset, &settings.split, settings.scaler_fit).input()?;
    eprintln!(
        "{} runs on {} samples ({} train / {} validation / {} test), {} workers",
        array.runs(),
        dataset.len(),
        prepared.train.len(),
        prepared.validation.len(),
        prepared.test.len(),
        args.common.workers
    );

    let outcome = run_design(
        &array,
        space,
        &prepared,
        &settings.train,
        args.common.workers,
    )?;

    write_design_file(&out.join("design.csv"), &array, space)?;
    write_responses(&out.join("responses.csv"), &outcome.runs)?;
    write_run_log(&out.join("runs.jsonl"), &outcome.runs)?;
    let loss_dir = out.join("loss");
    std::fs::create_dir_all(&loss_dir)
        .with_context(|| format!("creating {}", loss_dir.display()))?;
    for run in &outcome.runs {
        write_loss_history(
            &loss_dir.join(format!("run_{:02}.csv", run.index + 1)),
            &run.result.history,
        )?;
    }

    let mut stdout = std::io::stdout().lock();
    let failed = outcome.runs.iter().filter(|r| r.result.failed()).count();
    for run in &outcome.runs {
        let note = run
            .result
            .failure
            .as_deref()
            .map_or(String::new(), |f| format!("  FAILED: {f}"));
        writeln!(
            stdout,
            "{:>3}  {:<48} {:>8.3}  epochs {:>5}{note}",
            run.index + 1,
            run.result.config.to_string(),
            run.response,
            run.result.stopped_epoch
        )
        .context("writing to stdout")?;
    }
    if failed > 0 {
        eprintln!("{failed} run(s) failed; they are flagged in runs.jsonl and score 0");
    }
    write_json(
        &out.join("manifest.json"),
        &RunManifest::new("run", settings, args.common.workers, started),
    )?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,

    /// Responses CSV with `run,response` columns, one row per design run.
    #[arg(long)]
    responses: PathBuf,

    /// Add larger-is-better signal-to-noise ratios to the report.
    #[arg(long)]
    sn: bool,

    /// Also draw main_effects.svg.
    #[arg(long)]
    plot: bool,
}

pub fn analyze(args: AnalyzeArgs) -> CliResult<()> {
    let space = args.common.space()?;
    let array = build_design(&space).input()?;
    let responses = read_responses(&args.responses)
        .input_with(format!("reading responses {}", args.responses.display()))?;
    if responses.len() != array.runs() {
        return Err(CliError::input(format!(
            "length mismatch: {} has {} responses but the design has {} runs",
            args.responses.display(),
            responses.len(),
            array.runs()
        )));
    }
    let mut table = main_effects(&array, &responses).input()?;
    if args.sn {
        attach_sn(&mut table, &array, &responses).input()?;
    }
    let config = select_optimum(&table, &space).input()?;
    let out = args.common.ensure_out_dir()?;
    write_main_effects(&out.join("main_effects.csv"), &table, &space)?;
    let record = OptimumRecord::new(&table, &space, config);
    write_json(&out.join("optimum.json"), &record)?;
    if args.plot {
        plot::main_effects(&out.join("main_effects.svg"), &table, &space)?;
    }

    let mut stdout = std::io::stdout().lock();
    for (effect, factor) in table.factors.iter().zip(space.factors()) {
        let means: Vec<String> = effect
            .level_means
            .iter()
            .map(|m| format!("{m:.3}"))
            .collect();
        writeln!(
            stdout,
            "{:<4} {}  -> {}",
            factor.name(),
            means.join("  "),
            factor.levels()[effect.best_level]
        )
        .context("writing to stdout")?;
    }
    writeln!(stdout, "optimum: {}", record.config).context("writing to stdout")?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainBestArgs {
    #[command(flatten)]
    common: Common,

    #[command(flatten)]
    data: DataArgs,

    /// optimum.json written by `analyze`.
    #[arg(long, required_unless_present = "manifest")]
    optimum: Option<PathBuf>,

    /// Repeat an earlier training with the settings stored in its manifest.
    #[arg(long, conflicts_with_all = ["data", "synthetic", "factors", "preset", "optimum"])]
    manifest: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    config: &'a HyperConfig,
    seed: u64,
    stopped_epoch: usize,
    best_epoch: usize,
    early_stopped: bool,
    best_validation_loss: f64,
    /// R² and errors on the normalized targets the network was trained on.
    normalized: Option<SplitMetrics>,
    /// Pooled and per-component metrics in the dataset's units.
    splits: Vec<SplitReport>,
}

fn raw_rows(data: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    data.select(Axis(0), rows)
}

pub fn train_best(args: TrainBestArgs) -> CliResult<()> {
    let started = now_ms();
    let settings = match (&args.manifest, &args.optimum) {
        (Some(path), _) => Settings::from_manifest(path)?,
        (None, Some(optimum)) => {
            let record: OptimumRecord =
                read_json(optimum).input_with(format!("reading optimum {}", optimum.display()))?;
            Settings {
                config: Some(record.config),
                ..Settings::from_flags(&args.common, &args.data)?
            }
        }
        (None, None) => return Err(CliError::input("pass --optimum or --manifest")),
    };
    let config = settings
        .config
        .clone()
        .ok_or_else(|| CliError::input("manifest has no trained configuration"))?;
    let out = args.common.ensure_out_dir()?;
    let dataset = load(&settings.data, &settings.bounds)?;
    let prepared = prepare(&dataset, &settings.split, settings.scaler_fit).input()?;
    eprintln!("training {config} on {} samples", dataset.len());

    let result = train_model(&config, &prepared, &settings.train, settings.train.seed)?;
    if let Some(f) = &result.failure {
        return Err(anyhow::anyhow!("training failed: {f}").into());
    }
    let model = ModelFile::new(&result.model, &prepared.scaler, Some(config.clone()));
    let (inputs, outputs) = (dataset.inputs(), dataset.outputs());
    let mut splits = Vec::new();
    for (name, rows) in [
        ("train", &prepared.indices.train),
        ("validation", &prepared.indices.validation),
        ("test", &prepared.indices.test),
    ] {
        if rows.len() < 2 {
            eprintln!("{name} split has {} rows; no metrics", rows.len());
            continue;
        }
        let predicted = model.predict(raw_rows(&inputs, rows).view())?;
        match SplitReport::new(name, raw_rows(&outputs, rows).view(), predicted.view()) {
            Ok(r) => splits.push(r),
            Err(oatune::Error::UndefinedR2) => {
                eprintln!("{name} split has constant targets; no metrics")
            }
            Err(e) => return Err(e.into()),
        }
    }

    write_json(&out.join("model.json"), &model)?;
    write_json(
        &out.join("metrics.json"),
        &TrainReport {
            config: &config,
            seed: settings.train.seed,
            stopped_epoch: result.stopped_epoch,
            best_epoch: result.best_epoch,
            early_stopped: result.early_stopped,
            best_validation_loss: result.best_validation_loss,
            normalized: result.metrics,
            splits: splits.clone(),
        },
    )?;
    write_metrics_csv(&out.join("metrics.csv"), &splits)?;
    write_loss_history(&out.join("loss_history.csv"), &result.history)?;
    plot_training(out, &result.history, &result.model, &prepared.test)?;
    write_json(
        &out.join("manifest.json"),
        &RunManifest::new("train-best", settings, args.common.workers, started),
    )?;

    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{config}: best epoch {} of {}",
        result.best_epoch, result.stopped_epoch
    )
    .context("writing to stdout")?;
    for s in &splits {
        writeln!(
            stdout,
            "{:<10} n={:<6} R2 {:>8.3}%  MAE {:.4}  RMSE {:.4}",
            s.split, s.samples, s.pooled.r2, s.pooled.mae, s.pooled.rmse
        )
        .context("writing to stdout")?;
    }
    Ok(())
}

fn plot_training(
    out: &Path,
    history: &[EpochLoss],
    model: &oatune::network::Mlp,
    test: &oatune::pipeline::SplitData,
) -> CliResult<()> {
    plot::loss_curves(&out.join("loss.svg"), history)?;
    if !test.is_empty() {
        let predicted = model.forward(test.inputs.view())?;
        let actual: Vec<f64> = test.targets.iter().copied().collect();
        let predicted: Vec<f64> = predicted.iter().copied().collect();
        plot::parity(
            &out.join("parity_test.svg"),
            "Test set, normalized components",
            &actual,
            &predicted,
        )?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// model.json written by `train-best`.
    #[arg(long)]
    model: PathBuf,

    /// CSV with the 12 input columns; `l_f` may replace `lambda_f`, and `a33` may be added.
    #[arg(long)]
    input: PathBuf,

    /// Output CSV; predictions go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Upper bound of the three rotation angles, in radians.
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    max_angle: f64,

    /// Reject rows that violate the input bounds instead of warning.
    #[arg(long)]
    strict: bool,
}

/// Column positions of an input file.
struct InputLayout {
    inputs: [Option<usize>; N_INPUTS],
    fiber_length: Option<usize>,
    a33: Option<usize>,
}

fn input_layout(header: &csv::StringRecord) -> CliResult<InputLayout> {
    let mut layout = InputLayout {
        inputs: [None; N_INPUTS],
        fiber_length: None,
        a33: None,
    };
    let mut seen = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if let Some(prev) = seen.insert(name.to_string(), i) {
            return Err(CliError::input(format!(
                "column `{name}` appears twice (positions {} and {})",
                prev + 1,
                i + 1
            )));
        }
        if let Some(c) = INPUT_COLUMNS.iter().position(|&n| n == name) {
            layout.inputs[c] = Some(i);
        } else if name == "l_f" {
            layout.fiber_length = Some(i);
        } else if name == "a33" {
            layout.a33 = Some(i);
        } else {
            return Err(CliError::input(format!(
                "unexpected column `{name}`; expected {} (with l_f allowed in place of lambda_f, and an optional a33)",
                INPUT_COLUMNS.join(",")
            )));
        }
    }
    match (layout.inputs[col::LAMBDA_F], layout.fiber_length) {
        (Some(_), Some(_)) => return Err(CliError::input("give either lambda_f or l_f, not both")),
        (None, None) => return Err(CliError::input("missing column `lambda_f` (or `l_f`)")),
        _ => {}
    }
    for (c, pos) in layout.inputs.iter().enumerate() {
        if pos.is_none() && c != col::LAMBDA_F {
            return Err(CliError::input(format!(
                "missing column `{}`",
                INPUT_COLUMNS[c]
            )));
        }
    }
    Ok(layout)
}

fn parse_row(
    record: &csv::StringRecord,
    layout: &InputLayout,
    row: usize,
) -> CliResult<[f64; N_INPUTS]> {
    let value = |pos: usize| -> CliResult<f64> {
        let cell = record.get(pos).unwrap_or("").trim();
        cell.parse::<f64>().map_err(|_| {
            CliError::input(format!(
                "row {row}, column {}: cannot parse `{cell}`",
                pos + 1
            ))
        })
    };
    let mut x = [0.0; N_INPUTS];
    for (c, pos) in layout.inputs.iter().enumerate() {
        if let Some(p) = pos {
            x[c] = value(*p)?;
        }
    }
    if let Some(p) = layout.fiber_length {
        x[col::LAMBDA_F] = aspect_ratio(value(p)?, x[col::D_F])
            .map_err(|e| CliError::input(format!("row {row}: {e}")))?;
    }
    if let Some(p) = layout.a33 {
        let a33 = value(p)?;
        let implied = 1.0 - x[col::A11] - x[col::A22];
        if (a33 - implied).abs() > TRACE_TOLERANCE {
            return Err(CliError::input(format!(
                "row {row}: a33 = {a33} but 1 - a11 - a22 = {implied}; the orientation trace must be 1"
            )));
        }
    }
    Ok(x)
}

pub fn predict(args: PredictArgs) -> CliResult<()> {
    let model: ModelFile =
        read_json(&args.model).input_with(format!("reading model {}", args.model.display()))?;
    model.network().input()?;
    if model.layer_sizes.first() != Some(&N_INPUTS) || model.layer_sizes.last() != Some(&N_OUTPUTS)
    {
        return Err(CliError::input(format!(
            "model maps {:?} -> {:?}; expected {N_INPUTS} inputs and {N_OUTPUTS} outputs",
            model.layer_sizes.first(),
            model.layer_sizes.last()
        )));
    }
    let mut reader = csv::Reader::from_path(&args.input)
        .input_with(format!("reading {}", args.input.display()))?;
    let header = reader.headers().input()?.clone();
    let layout = input_layout(&header)?;
    let bounds = oatune::pipeline::Bounds {
        max_angle: args.max_angle,
    };

    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.input_with(format!("row {row}"))?;
        if record.len() != header.len() {
            return Err(CliError::input(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let x = parse_row(&record, &layout, row)?;
        let violations = validate_sample(
            &Sample {
                inputs: x,
                outputs: [0.0; N_OUTPUTS],
            },
            &bounds,
        );
        for v in &violations {
            eprintln!("row {row}: {v}");
        }
        if args.strict && !violations.is_empty() {
            return Err(CliError::input(format!(
                "row {row} is outside the input bounds"
            )));
        }
        records.push(record);
        rows.push(x);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!(
            "{} has no data rows",
            args.input.display()
        )));
    }
    let x = Array2::from_shape_fn((rows.len(), N_INPUTS), |(i, j)| rows[i][j]);
    let y = model.predict(x.view())?;

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            std::fs::File::create(path).input_with(format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut out_header: Vec<String> = header.iter().map(str::to_string).collect();
    if layout.fiber_length.is_some() {
        out_header.push("lambda_f".into());
    }
    out_header.extend(OUTPUT_COLUMNS.iter().map(|s| s.to_string()));
    out_header.extend(["E11", "E22", "E33"].map(String::from));
    w.write_record(&out_header).context("writing predictions")?;
    for (i, record) in records.iter().enumerate() {
        let q: [f64; N_OUTPUTS] = std::array::from_fn(|k| y[[i, k]]);
        let mut fields: Vec<String> = record.iter().map(str::to_string).collect();
        if layout.fiber_length.is_some() {
            fields.push(rows[i][col::LAMBDA_F].to_string());
        }
        fields.extend(q.iter().map(f64::to_string));
        match engineering_constants(&from_components(&q)) {
            Ok(e) => fields.extend([e.e11, e.e22, e.e33].map(|v| v.to_string())),
            Err(err) => {
                eprintln!("row {}: no engineering constants: {err}", i + 1);
                fields.extend(std::iter::repeat_n(String::new(), 3));
            }
        }
        w.write_record(&fields).context("writing predictions")?;
    }
    w.flush().context("writing predictions")?;
    Ok(())
}
