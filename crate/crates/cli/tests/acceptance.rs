//! Acceptance suite: one line per criterion, nonzero exit if any criterion fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use ndarray::Array2;
use oatune::analysis::{main_effects, select_optimum, vector_metrics};
use oatune::design::{build_l27, decode_levels, verify_strength2, FactorSpace};
use oatune::network::{Activation, Mlp};
use oatune::optim::{Optimizer, OptimizerKind};
use oatune::pipeline::stiffness::{engineering_constants, from_components, isotropic};
use oatune::pipeline::{generate_synthetic, split_dataset, Bounds, ColumnScaler, SplitSpec};
use oatune::report::read_responses;
use oatune::training::{Decision, EarlyStopping};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn within(elapsed: Duration, limit: Duration) -> Check {
    ensure!(elapsed < limit, "took {elapsed:.2?}, limit {limit:?}");
    Ok(format!("{elapsed:.2?}"))
}

fn reference_analysis() -> Check {
    let start = Instant::now();
    let space = FactorSpace::paper();
    let array = build_l27(&space).map_err(|e| e.to_string())?;
    let responses =
        read_responses(&fixture("reference_responses.csv")).map_err(|e| e.to_string())?;
    ensure!(responses.len() == 27, "{} responses", responses.len());
    let table = main_effects(&array, &responses).map_err(|e| e.to_string())?;
    let best = select_optimum(&table, &space).map_err(|e| e.to_string())?;
    ensure!(
        best.hidden_layers == 3
            && best.neurons == 20
            && best.activation == Activation::Elu
            && best.optimizer == OptimizerKind::Adam
            && best.learning_rate == 0.001,
        "selected {best}"
    );
    for level in 0..3 {
        let rows: Vec<f64> = (0..27)
            .filter(|i| array.get(*i, 0) as usize == level)
            .map(|i| responses[i])
            .collect();
        let oracle = rows.iter().sum::<f64>() / rows.len() as f64;
        let got = table.factors[0].level_means[level];
        ensure!(
            (got - oracle).abs() < 1e-3,
            "HL level {level}: {got} vs oracle {oracle}"
        );
        let reference = [63.552, 79.703, 81.045][level];
        ensure!(
            (got - reference).abs() < 1e-3,
            "HL level {level}: {got} vs {reference}"
        );
    }
    let t = within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("optimum {best}; {t}"))
}

fn design_fidelity() -> Check {
    let start = Instant::now();
    let space = FactorSpace::paper();
    let array = build_l27(&space).map_err(|e| e.to_string())?;
    let mut reader =
        csv::Reader::from_path(fixture("l27_design.csv")).map_err(|e| e.to_string())?;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let levels = decode_levels(&array, i, &space).map_err(|e| e.to_string())?;
        for (c, value) in levels.iter().enumerate() {
            let cell = &record[c + 1];
            let same = match (value.as_f64(), cell.parse::<f64>()) {
                (Some(v), Ok(g)) => v == g,
                _ => value.to_string() == cell,
            };
            ensure!(
                same,
                "run {} column {}: {value} vs golden {cell}",
                i + 1,
                c + 1
            );
        }
        rows += 1;
    }
    ensure!(
        rows == 27 && array.runs() == 27 && array.columns() == 5,
        "{rows} golden rows, {}x{} array",
        array.runs(),
        array.columns()
    );
    let report = verify_strength2(&array).map_err(|e| e.to_string())?;
    ensure!(report.passed(), "balance violation {:?}", report.violation);
    for a in 0..5 {
        for b in (a + 1)..5 {
            let mut counts = [[0usize; 3]; 3];
            for row in array.rows() {
                counts[row[a] as usize][row[b] as usize] += 1;
            }
            ensure!(
                counts.iter().flatten().all(|&c| c == 3),
                "columns {a},{b}: {counts:?}"
            );
        }
    }
    let t = within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "27x5 golden match, {} column pairs balanced; {t}",
        report.pairs_checked
    ))
}

fn gradient_correctness() -> Check {
    const H: f64 = 1e-6;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for hidden in [1, 2, 3] {
        for neurons in [10, 20, 30] {
            for activation in Activation::ALL {
                let mut sizes = vec![12];
                sizes.extend(std::iter::repeat_n(neurons, hidden));
                sizes.push(21);
                let mut net =
                    Mlp::new(&sizes, activation, rng.random()).map_err(|e| e.to_string())?;
                let x = Array2::from_shape_fn((8, 12), |_| rng.random_range(0.0..1.0));
                let y = Array2::from_shape_fn((8, 21), |_| rng.random_range(0.0..1.0));
                let (_, grad) = net
                    .backward(x.view(), y.view())
                    .map_err(|e| e.to_string())?;
                for (k, &g) in grad.iter().enumerate() {
                    let orig = net.params()[k];
                    net.params_mut()[k] = orig + H;
                    let plus = net.loss(x.view(), y.view()).map_err(|e| e.to_string())?;
                    net.params_mut()[k] = orig - H;
                    let minus = net.loss(x.view(), y.view()).map_err(|e| e.to_string())?;
                    net.params_mut()[k] = orig;
                    let numeric = (plus - minus) / (2.0 * H);
                    let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-3);
                    ensure!(rel < 1e-5, "HL={hidden} NN={neurons} {activation} parameter {k}: relative error {rel:e}");
                    worst = worst.max(rel);
                }
            }
        }
    }
    let t = within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("27 cells, max relative error {worst:.2e}; {t}"))
}

fn optimizers() -> Check {
    let mut firsts = Vec::new();
    for (kind, expected) in [
        (OptimizerKind::Adam, 0.9),
        (OptimizerKind::Adamax, 0.9),
        (OptimizerKind::Rmsprop, 0.68377),
    ] {
        let mut opt = Optimizer::new(kind, 0.1, 1).map_err(|e| e.to_string())?;
        let mut w = [1.0];
        let g = [2.0 * w[0]];
        opt.step(&mut w, &g).map_err(|e| e.to_string())?;
        ensure!(
            (w[0] - expected).abs() < 1e-4,
            "{kind} first step {} vs {expected}",
            w[0]
        );
        firsts.push(format!("{kind} {:.5}", w[0]));
    }
    let mut steps = Vec::new();
    for kind in OptimizerKind::ALL {
        let mut opt = Optimizer::new(kind, 0.01, 1).map_err(|e| e.to_string())?;
        let mut w = [0.0];
        let mut reached = None;
        for step in 1..=10_000 {
            let g = [2.0 * (w[0] - 3.0)];
            opt.step(&mut w, &g).map_err(|e| e.to_string())?;
            if (w[0] - 3.0).abs() < 0.05 {
                reached = Some(step);
                break;
            }
        }
        let step = reached.ok_or_else(|| format!("{kind} did not converge, w = {}", w[0]))?;
        steps.push(format!("{kind} {step}"));
    }
    Ok(format!(
        "first steps [{}]; converged in [{}] steps",
        firsts.join(", "),
        steps.join(", ")
    ))
}

fn metric_identities() -> Check {
    let perfect = vector_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure!(
        perfect.r2 == 100.0 && perfect.mse == 0.0,
        "perfect prediction: {perfect:?}"
    );
    let flat = vector_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).map_err(|e| e.to_string())?;
    ensure!(flat.r2.abs() < 1e-12, "R2 {}", flat.r2);
    ensure!(
        (flat.mae - 2.0 / 3.0).abs() < 1e-12 && (flat.mse - 2.0 / 3.0).abs() < 1e-12,
        "{flat:?}"
    );
    ensure!((flat.rmse - 0.81650).abs() < 1e-5, "RMSE {}", flat.rmse);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let n = rng.random_range(3..100);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v + rng.random_range(-5.0..5.0)).collect();
        let m = vector_metrics(&y, &p).map_err(|e| e.to_string())?;
        ensure!(
            (m.rmse * m.rmse - m.mse).abs() <= 1e-12 * m.mse.max(1.0),
            "vector {i}: RMSE² {} vs MSE {}",
            m.rmse * m.rmse,
            m.mse
        );
        let a = rng.random_range(0.1..20.0) * if rng.random() { 1.0 } else { -1.0 };
        let b = rng.random_range(-1e3..1e3);
        let ys: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let ps: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        let ms = vector_metrics(&ys, &ps).map_err(|e| e.to_string())?;
        ensure!(
            (m.r2 - ms.r2).abs() < 1e-8,
            "vector {i}: R2 {} vs {} after affine map",
            m.r2,
            ms.r2
        );
    }
    Ok("hand examples exact; RMSE²=MSE and affine invariance on 1000 vectors".into())
}

/// Feeds `losses` to a fresh stopper; returns (stop epoch, best epoch).
fn script(losses: &[f64], patience: usize) -> Result<(Option<usize>, usize), String> {
    let mut s = EarlyStopping::new(patience);
    for (i, &l) in losses.iter().enumerate() {
        if s.update(i + 1, l, &[l]).map_err(|e| e.to_string())? == Decision::Stop {
            return Ok((Some(i + 1), s.best_epoch()));
        }
    }
    Ok((None, s.best_epoch()))
}

fn early_stopping() -> Check {
    for (losses, patience, expected) in [
        (vec![1.0, 0.9, 0.95, 0.96], 2, (Some(4), 2)),
        (vec![3.0, 2.0, 1.0, 0.5], 1, (None, 4)),
        (vec![1.0, 1.0, 1.0], 2, (Some(3), 1)),
        (vec![5.0, 4.0, 4.5, 3.9, 4.0, 4.1, 4.2], 3, (Some(7), 4)),
    ] {
        let got = script(&losses, patience)?;
        ensure!(
            got == expected,
            "{losses:?} / patience {patience}: {got:?}, expected {expected:?}"
        );
    }
    // oracle replay on random sequences
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut triggered = 0;
    for _ in 0..500 {
        let patience = rng.random_range(1..20);
        let trend: f64 = rng.random_range(0.0..1.0);
        let losses: Vec<f64> = (0..200)
            .map(|i| (-trend * i as f64).exp() + rng.random_range(0.0..1e-3))
            .collect();
        let (stop, best) = script(&losses, patience)?;
        let mut best_so_far = (f64::INFINITY, 0);
        let mut oracle_stop = None;
        for (i, &l) in losses.iter().enumerate() {
            if l < best_so_far.0 {
                best_so_far = (l, i + 1);
            } else if i + 1 - best_so_far.1 >= patience {
                oracle_stop = Some(i + 1);
                break;
            }
        }
        ensure!(
            stop == oracle_stop && best == best_so_far.1,
            "patience {patience}: {stop:?}/{best} vs {oracle_stop:?}/{}",
            best_so_far.1
        );
        if let Some(s) = stop {
            ensure!(
                s - best == patience,
                "stopped {s}, best {best}, patience {patience}"
            );
            triggered += 1;
        }
    }
    Ok(format!(
        "scripted cases exact; 500 random sequences match the oracle ({triggered} stopped early)"
    ))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_oatune"))
        .args(args)
        .env_remove("OATUNE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "`oatune {}` exited with {:?}: {}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let base = [
        "--synthetic",
        "2000",
        "--seed",
        "7",
        "--max-epochs",
        "500",
        "--patience",
        "50",
    ];
    for (workers, out) in [("1", p("seq")), ("4", p("par"))] {
        let mut args = vec!["run"];
        args.extend(base);
        args.extend(["--workers", workers, "--out-dir", &out]);
        run_cli(&args)?;
    }
    let seq = std::fs::read(dir.path().join("seq/responses.csv")).map_err(|e| e.to_string())?;
    let par = std::fs::read(dir.path().join("par/responses.csv")).map_err(|e| e.to_string())?;
    ensure!(seq == par, "responses differ between 1 and 4 workers");
    let responses =
        read_responses(&dir.path().join("seq/responses.csv")).map_err(|e| e.to_string())?;
    ensure!(responses.len() == 27, "{} responses", responses.len());
    let log =
        std::fs::read_to_string(dir.path().join("seq/runs.jsonl")).map_err(|e| e.to_string())?;
    ensure!(
        log.lines().count() == 27,
        "{} run records",
        log.lines().count()
    );

    run_cli(&[
        "analyze",
        "--responses",
        &p("seq/responses.csv"),
        "--out-dir",
        &p("analysis"),
    ])?;
    let mut args = vec!["train-best", "--optimum"];
    let optimum = p("analysis/optimum.json");
    let best_dir = p("best");
    args.push(&optimum);
    args.extend(base);
    args.extend(["--out-dir", &best_dir]);
    run_cli(&args)?;

    let metrics: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("best/metrics.json"))
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let test = metrics["splits"]
        .as_array()
        .and_then(|s| s.iter().find(|r| r["split"] == "test"))
        .ok_or("no test split in metrics.json")?;
    let r2 = test["pooled"]["r2"].as_f64().ok_or("no pooled test R2")?;
    let normalized = metrics["normalized"]["test"]["r2"]
        .as_f64()
        .unwrap_or(f64::NAN);
    let config = &metrics["config"];
    let detail = format!(
        "selected HL={} NN={} {} {} LR={}; pooled test R2 {r2:.3}% (normalized targets {normalized:.3}%)",
        config["hidden_layers"],
        config["neurons"],
        config["activation"].as_str().unwrap_or("?"),
        config["optimizer"].as_str().unwrap_or("?"),
        config["learning_rate"]
    );
    ensure!(r2 >= 90.0, "{detail} is below 90%");
    let t = within(start.elapsed(), Duration::from_secs(15 * 60))?;
    Ok(format!("27 runs, 1 vs 4 workers identical; {detail}; {t}"))
}

fn pipeline_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let n = rng.random_range(1..10_000);
        let seed: u64 = rng.random();
        let spec = SplitSpec::default().with_seed(seed);
        let s = split_dataset(n, &spec).map_err(|e| e.to_string())?;
        let total = s.train.len() + s.validation.len() + s.test.len();
        let unique: HashSet<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        ensure!(
            total == n && unique.len() == n && unique.iter().all(|&i| i < n),
            "split of {n} with seed {seed} is not a partition"
        );
    }
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (rows, cols) = (rng.random_range(2..50), rng.random_range(1..34));
        let x = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-100.0..100.0));
        let scaler = ColumnScaler::fit(&x.view()).map_err(|e| e.to_string())?;
        let back = scaler
            .inverse_transform(
                &scaler
                    .transform(&x.view())
                    .map_err(|e| e.to_string())?
                    .view(),
            )
            .map_err(|e| e.to_string())?;
        for (a, b) in x.iter().zip(back.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-12, "scaler round-trip error {worst:e}");
    let data = generate_synthetic(1000, 17, &Bounds::default()).map_err(|e| e.to_string())?;
    let mut min_eig = f64::INFINITY;
    for (i, s) in data.samples().iter().enumerate() {
        let q = from_components(&s.outputs);
        let eig = SymmetricEigen::new(q).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        ensure!(lo > 0.0, "sample {i} has eigenvalue {lo}");
        min_eig = min_eig.min(lo);
    }
    let e = engineering_constants(&isotropic(2.0, 0.3)).map_err(|e| e.to_string())?;
    for v in [e.e11, e.e22, e.e33] {
        ensure!((v - 2.0).abs() < 1e-9, "isotropic modulus {v}");
    }
    Ok(format!(
        "1000 split partitions; scaler round-trip max error {worst:.1e}; 1000 SPD samples (min eigenvalue {min_eig:.1}); E = {:.12}",
        e.e11
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "reference analysis reproduction", reference_analysis),
        (2, "design fidelity", design_fidelity),
        (3, "gradient correctness", gradient_correctness),
        (4, "optimizer unit checks", optimizers),
        (5, "metric identities", metric_identities),
        (6, "early-stopping contract", early_stopping),
        (7, "end-to-end desk-scale run", end_to_end),
        (8, "pipeline properties", pipeline_properties),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {id} PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("criterion {id} FAIL  {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
