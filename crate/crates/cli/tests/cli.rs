use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oatune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oatune"))
        .args(args)
        .env_remove("OATUNE_SEED")
        .output()
        .expect("spawn oatune")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn design_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design.csv");
    let o = oatune(&["design", "--preset", "paper", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("27 of 243 full-factorial cases"));

    let ours: Vec<Vec<String>> = csv::Reader::from_path(&out)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    let golden: Vec<Vec<String>> = csv::Reader::from_path(fixture("l27_design.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    assert_eq!(ours.len(), 27);
    for (a, b) in ours.iter().zip(&golden) {
        for (x, y) in a.iter().zip(b) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(p), Ok(q)) => assert_eq!(p, q),
                _ => assert_eq!(x, y),
            }
        }
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        oatune(&["design", "--preset", "nonesuch"]).status.code(),
        Some(2)
    );
    assert_eq!(
        oatune(&[
            "run",
            "--synthetic",
            "50",
            "--preset",
            "paper",
            "--patience",
            "5"
        ])
        .status
        .code(),
        Some(2)
    );
    let o = oatune(&["run", "--max-epochs", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--synthetic"));
    let o = oatune(&[
        "run",
        "--data",
        "/nonexistent/data.csv",
        "--out-dir",
        "/tmp",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn analyze_reference_responses() {
    let dir = tempfile::tempdir().unwrap();
    let o = oatune(&[
        "analyze",
        "--preset",
        "paper",
        "--responses",
        s(&fixture("reference_responses.csv")),
        "--out-dir",
        s(dir.path()),
        "--plot",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let opt = json(&dir.path().join("optimum.json"));
    assert_eq!(opt["config"]["hidden_layers"], 3);
    assert_eq!(opt["config"]["neurons"], 20);
    assert_eq!(opt["config"]["activation"], "elu");
    assert_eq!(opt["config"]["optimizer"], "Adam");
    assert_eq!(opt["config"]["learning_rate"], 0.001);
    let effects = std::fs::read_to_string(dir.path().join("main_effects.csv")).unwrap();
    assert_eq!(effects.lines().count(), 1 + 15);
    assert!(std::fs::read_to_string(dir.path().join("main_effects.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn analyze_constant_and_short_files() {
    let dir = tempfile::tempdir().unwrap();
    let constant = dir.path().join("constant.csv");
    let rows: String = (1..=27).map(|i| format!("{i},50\n")).collect();
    std::fs::write(&constant, format!("run,response\n{rows}")).unwrap();
    let o = oatune(&[
        "analyze",
        "--responses",
        s(&constant),
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let opt = json(&dir.path().join("optimum.json"));
    assert_eq!(opt["config"]["hidden_layers"], 1);
    assert_eq!(opt["config"]["neurons"], 10);
    assert_eq!(opt["config"]["activation"], "relu");
    assert_eq!(opt["config"]["optimizer"], "Adam");
    assert_eq!(opt["config"]["learning_rate"], 0.001);

    let short = dir.path().join("short.csv");
    let rows: String = (1..=26).map(|i| format!("{i},50\n")).collect();
    std::fs::write(&short, format!("run,response\n{rows}")).unwrap();
    let o = oatune(&[
        "analyze",
        "--responses",
        s(&short),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(
        msg.contains("26") && msg.contains("27") && msg.contains("mismatch"),
        "{msg}"
    );

    let garbled = dir.path().join("garbled.csv");
    std::fs::write(&garbled, "run,response\n1,abc\n").unwrap();
    assert_eq!(
        oatune(&["analyze", "--responses", s(&garbled)])
            .status
            .code(),
        Some(2)
    );
}

fn small_run(dir: &Path, workers: &str) -> Output {
    oatune(&[
        "run",
        "--synthetic",
        "60",
        "--seed",
        "3",
        "--max-epochs",
        "4",
        "--patience",
        "2",
        "--workers",
        workers,
        "--out-dir",
        s(dir),
    ])
}

#[test]
fn run_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_run(&a, "1").status.success());
    assert!(small_run(&b, "3").status.success());
    let responses = std::fs::read(a.join("responses.csv")).unwrap();
    assert_eq!(responses, std::fs::read(b.join("responses.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&responses).lines().count(), 28);
    assert_eq!(
        std::fs::read_to_string(a.join("runs.jsonl"))
            .unwrap()
            .lines()
            .count(),
        27
    );
    for i in 1..=27 {
        assert_eq!(
            std::fs::read(a.join(format!("loss/run_{i:02}.csv"))).unwrap(),
            std::fs::read(b.join(format!("loss/run_{i:02}.csv"))).unwrap()
        );
    }

    // rerun from the manifest into a fresh directory
    let c = dir.path().join("c");
    let o = oatune(&[
        "run",
        "--manifest",
        s(&a.join("manifest.json")),
        "--out-dir",
        s(&c),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(responses, std::fs::read(c.join("responses.csv")).unwrap());
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["settings"]["train"]["seed"], 3);
    assert_eq!(m["settings"]["data"]["kind"], "synthetic");
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_oatune"))
        .args([
            "run",
            "--synthetic",
            "40",
            "--max-epochs",
            "1",
            "--out-dir",
            s(dir.path()),
        ])
        .env("OATUNE_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        json(&dir.path().join("manifest.json"))["settings"]["train"]["seed"],
        77
    );
}

#[test]
fn train_best_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = oatune(&[
        "analyze",
        "--responses",
        s(&fixture("reference_responses.csv")),
        "--out-dir",
        s(d),
    ]);
    assert!(o.status.success());
    let o = oatune(&[
        "train-best",
        "--optimum",
        s(&d.join("optimum.json")),
        "--synthetic",
        "600",
        "--seed",
        "5",
        "--max-epochs",
        "300",
        "--patience",
        "30",
        "--out-dir",
        s(d),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "model.json",
        "metrics.json",
        "metrics.csv",
        "loss_history.csv",
        "loss.svg",
        "parity_test.svg",
        "manifest.json",
    ] {
        assert!(d.join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(d.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).collect();
    assert_eq!(rows.len(), 3 * 22);
    for split in ["train", "validation", "test"] {
        assert!(rows
            .iter()
            .any(|r| r.starts_with(&format!("{split},pooled,"))));
        assert_eq!(
            rows.iter()
                .filter(|r| r.starts_with(&format!("{split},Q")))
                .count(),
            21
        );
    }

    // a manifest rerun reproduces the model
    let again = d.join("again");
    let o = oatune(&[
        "train-best",
        "--manifest",
        s(&d.join("manifest.json")),
        "--out-dir",
        s(&again),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(d.join("model.json")).unwrap(),
        std::fs::read(again.join("model.json")).unwrap()
    );

    let preds = d.join("predictions.csv");
    let o = oatune(&[
        "predict",
        "--model",
        s(&d.join("model.json")),
        "--input",
        s(&fixture("prediction_inputs.csv")),
        "--out",
        s(&preds),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(&preds).unwrap();
    let header = reader.headers().unwrap().clone();
    let at = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][at("lambda_f")].parse::<f64>().unwrap(), 75.0);
    for r in &rows {
        let e11: f64 = r[at("E11")].parse().unwrap();
        assert!(e11.is_finite() && e11 > 0.0);
    }

    // 31 columns: the inputs plus 19 stray stiffness columns
    let wide = d.join("wide.csv");
    let mut header: Vec<String> = "E_M,nu_M,E_F,nu_F,d_f,lambda_f,phi,a11,a22,g1,g2,g3"
        .split(',')
        .map(String::from)
        .collect();
    header.extend((0..19).map(|i| format!("Q{i}")));
    let row = vec!["1"; 31].join(",");
    std::fs::write(&wide, format!("{}\n{row}\n", header.join(","))).unwrap();
    let o = oatune(&[
        "predict",
        "--model",
        s(&d.join("model.json")),
        "--input",
        s(&wide),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let bad_trace = d.join("trace.csv");
    std::fs::write(
        &bad_trace,
        "E_M,nu_M,E_F,nu_F,d_f,lambda_f,phi,a11,a22,a33,g1,g2,g3\n1600,0.4,69000,0.2,16,75,0.13,0.5,0.3,0.5,0,0,0\n",
    )
    .unwrap();
    assert_eq!(
        oatune(&[
            "predict",
            "--model",
            s(&d.join("model.json")),
            "--input",
            s(&bad_trace)
        ])
        .status
        .code(),
        Some(2)
    );
    let o = oatune(&[
        "predict",
        "--model",
        s(&d.join("model.json")),
        "--input",
        s(&fixture("prediction_inputs.csv")),
        "--strict",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
