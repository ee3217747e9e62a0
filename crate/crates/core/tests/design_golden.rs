use std::path::Path;

use oatune::design::{build_l27, decode_levels, verify_strength2, FactorSpace, LevelValue};

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn same_level(value: &LevelValue, cell: &str) -> bool {
    match (value.as_f64(), cell.parse::<f64>()) {
        (Some(v), Ok(c)) => v == c,
        _ => value.to_string() == cell,
    }
}

#[test]
fn paper_design_matches_golden_rows() {
    let space = FactorSpace::paper();
    let array = build_l27(&space).unwrap();
    let mut reader = csv::Reader::from_path(fixture("l27_design.csv")).unwrap();
    let header: Vec<String> = reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_owned)
        .collect();
    assert_eq!(header, ["run", "HL", "NN", "ACT", "OPT", "LR"]);

    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.unwrap();
        assert_eq!(record[0].parse::<usize>().unwrap(), i + 1);
        let levels = decode_levels(&array, i, &space).unwrap();
        for (c, value) in levels.iter().enumerate() {
            assert!(
                same_level(value, &record[c + 1]),
                "run {} column {}: {value} vs {}",
                i + 1,
                header[c + 1],
                &record[c + 1]
            );
        }
        rows += 1;
    }
    assert_eq!(rows, 27);
    assert_eq!(array.runs(), 27);
    assert_eq!(array.columns(), 5);
}

#[test]
fn paper_design_is_balanced() {
    let array = build_l27(&FactorSpace::paper()).unwrap();
    let report = verify_strength2(&array).unwrap();
    assert!(report.passed());
    assert_eq!(report.pairs_checked, 10);

    // independent count over every column pair
    for a in 0..5 {
        for b in (a + 1)..5 {
            let mut counts = [[0usize; 3]; 3];
            for row in array.rows() {
                counts[row[a] as usize][row[b] as usize] += 1;
            }
            assert!(
                counts.iter().flatten().all(|&c| c == 3),
                "columns {a},{b}: {counts:?}"
            );
        }
    }
}

#[test]
fn design_is_a_fraction_of_the_full_factorial() {
    let space = FactorSpace::paper();
    assert_eq!(space.full_factorial_size(), 243);
    assert_eq!(build_l27(&space).unwrap().runs(), 27);
}
