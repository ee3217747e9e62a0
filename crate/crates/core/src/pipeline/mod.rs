//! Composite-stiffness dataset: schema, CSV ingestion, validation and preparation for training.
//!
//! A sample maps 12 microstructural descriptors of a short-fiber composite to the 21 independent
//! components of its 6×6 stiffness matrix (Voigt notation, MPa).

mod scaler;
mod split;
pub mod stiffness;
mod synthetic;

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use scaler::{ColumnScaler, MinMaxScaler};
pub use split::{split_dataset, SplitIndices, SplitSpec};
pub use synthetic::{generate_synthetic, synthesize_sample};

pub const INPUT_COLUMNS: [&str; 12] = [
    "E_M", "nu_M", "E_F", "nu_F", "d_f", "lambda_f", "phi", "a11", "a22", "g1", "g2", "g3",
];

pub const OUTPUT_COLUMNS: [&str; 21] = [
    "Q11", "Q12", "Q13", "Q14", "Q15", "Q16", "Q22", "Q23", "Q24", "Q25", "Q26", "Q33", "Q34",
    "Q35", "Q36", "Q44", "Q45", "Q46", "Q55", "Q56", "Q66",
];

pub const N_INPUTS: usize = INPUT_COLUMNS.len();
pub const N_OUTPUTS: usize = OUTPUT_COLUMNS.len();

/// Input column positions.
pub mod col {
    pub const E_M: usize = 0;
    pub const NU_M: usize = 1;
    pub const E_F: usize = 2;
    pub const NU_F: usize = 3;
    pub const D_F: usize = 4;
    pub const LAMBDA_F: usize = 5;
    pub const PHI: usize = 6;
    pub const A11: usize = 7;
    pub const A22: usize = 8;
    pub const G1: usize = 9;
    pub const G2: usize = 10;
    pub const G3: usize = 11;
}

/// Full CSV header of a dataset file.
pub fn dataset_header() -> Vec<&'static str> {
    INPUT_COLUMNS
        .iter()
        .chain(OUTPUT_COLUMNS.iter())
        .copied()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub inputs: [f64; N_INPUTS],
    pub outputs: [f64; N_OUTPUTS],
}

impl Sample {
    /// Third diagonal entry of the orientation tensor, `1 - a11 - a22`.
    pub fn a33(&self) -> f64 {
        orientation_a33(self.inputs[col::A11], self.inputs[col::A22])
    }
}

pub(crate) fn orientation_a33(a11: f64, a22: f64) -> f64 {
    (1.0 - a11) - a22
}

/// Box bounds of the microstructural inputs. `a22` and the rotation angles are handled
/// separately: `a22` depends on `a11`, and the angle range is configurable.
pub const INPUT_BOUNDS: [(usize, f64, f64); 8] = [
    (col::E_M, 500.0, 20_000.0),
    (col::NU_M, 0.30, 0.49),
    (col::E_F, 10_000.0, 100_000.0),
    (col::NU_F, 0.2, 0.4),
    (col::D_F, 4.0, 20.0),
    (col::LAMBDA_F, 2.0, 100.0),
    (col::PHI, 0.05, 0.3),
    (col::A11, 0.33, 1.0),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Upper limit of the three rotation angles, radians.
    pub max_angle: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_angle: TAU }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}: {}", self.field, self.value, self.message)
    }
}

/// Checks every input interval plus the orientation-tensor constraints
/// `max(0, 1 - 2·a11) <= a22 <= a11` and `a33 = 1 - a11 - a22 >= 0`.
pub fn validate_sample(sample: &Sample, bounds: &Bounds) -> Vec<Violation> {
    let mut out = Vec::new();
    let x = &sample.inputs;
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation {
                field: INPUT_COLUMNS[i],
                value: v,
                message: "not finite".into(),
            });
        }
    }
    if let Some(i) = sample.outputs.iter().position(|v| !v.is_finite()) {
        out.push(Violation {
            field: OUTPUT_COLUMNS[i],
            value: sample.outputs[i],
            message: "not finite".into(),
        });
    }
    for &(c, lo, hi) in &INPUT_BOUNDS {
        let v = x[c];
        if v < lo {
            out.push(Violation {
                field: INPUT_COLUMNS[c],
                value: v,
                message: format!("below minimum {lo}"),
            });
        } else if v > hi {
            out.push(Violation {
                field: INPUT_COLUMNS[c],
                value: v,
                message: format!("above maximum {hi}"),
            });
        }
    }
    let (a11, a22) = (x[col::A11], x[col::A22]);
    let lower = (1.0 - 2.0 * a11).max(0.0);
    if a22 > a11 {
        out.push(Violation {
            field: "a22",
            value: a22,
            message: format!("a22 > a11 ({a11})"),
        });
    }
    if a22 < lower {
        out.push(Violation {
            field: "a22",
            value: a22,
            message: format!("below minimum max(0, 1 - 2·a11) = {lower}"),
        });
    }
    let a33 = orientation_a33(a11, a22);
    if a33 < 0.0 {
        out.push(Violation {
            field: "a22",
            value: a22,
            message: format!("a33 = 1 - a11 - a22 = {a33} is negative"),
        });
    }
    for c in [col::G1, col::G2, col::G3] {
        let v = x[c];
        if !(0.0..=bounds.max_angle).contains(&v) {
            out.push(Violation {
                field: INPUT_COLUMNS[c],
                value: v,
                message: format!("outside [0, {}]", bounds.max_angle),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    File(PathBuf),
    Synthetic { count: usize, seed: u64 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::File(p) => write!(f, "file {}", p.display()),
            Provenance::Synthetic { count, seed } => write!(f, "synthetic n={count} seed={seed}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            samples,
            provenance,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn inputs(&self) -> Array2<f64> {
        self.matrix(|s| &s.inputs[..], N_INPUTS, None)
    }

    pub fn outputs(&self) -> Array2<f64> {
        self.matrix(|s| &s.outputs[..], N_OUTPUTS, None)
    }

    fn matrix<'a>(
        &'a self,
        pick: impl Fn(&'a Sample) -> &'a [f64],
        width: usize,
        rows: Option<&[usize]>,
    ) -> Array2<f64> {
        let flat: Vec<f64> = match rows {
            Some(idx) => idx
                .iter()
                .flat_map(|&i| pick(&self.samples[i]).iter().copied())
                .collect(),
            None => self
                .samples
                .iter()
                .flat_map(|s| pick(s).iter().copied())
                .collect(),
        };
        Array2::from_shape_vec((flat.len() / width, width), flat).expect("rectangular")
    }

    fn subset(&self, rows: &[usize]) -> (Array2<f64>, Array2<f64>) {
        (
            self.matrix(|s| &s.inputs[..], N_INPUTS, Some(rows)),
            self.matrix(|s| &s.outputs[..], N_OUTPUTS, Some(rows)),
        )
    }
}

/// Reads a dataset CSV. The header must name exactly the 33 schema columns (any order).
pub fn load_dataset(path: &Path, strict: bool, bounds: &Bounds) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers()?.clone();
    let expected = dataset_header();
    for name in &header {
        if !expected.contains(&name) {
            return Err(Error::Schema(name.to_string()));
        }
    }
    let mut positions = Vec::with_capacity(expected.len());
    for name in &expected {
        let pos = header
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::Schema(name.to_string()))?;
        positions.push(pos);
    }
    if header.len() != expected.len() {
        return Err(Error::Schema(format!(
            "header has {} columns, expected 33",
            header.len()
        )));
    }

    let mut samples = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record?;
        let mut values = [0.0; N_INPUTS + N_OUTPUTS];
        for (k, &pos) in positions.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            values[k] = cell.parse::<f64>().map_err(|e| Error::Parse {
                row,
                column: expected[k].to_string(),
                reason: format!("`{cell}`: {e}"),
            })?;
        }
        let mut sample = Sample {
            inputs: [0.0; N_INPUTS],
            outputs: [0.0; N_OUTPUTS],
        };
        sample.inputs.copy_from_slice(&values[..N_INPUTS]);
        sample.outputs.copy_from_slice(&values[N_INPUTS..]);
        if strict {
            if let Some(v) = validate_sample(&sample, bounds).into_iter().next() {
                return Err(Error::Validation {
                    row,
                    violation: v.to_string(),
                });
            }
        }
        samples.push(sample);
    }
    Dataset::new(samples, Provenance::File(path.to_path_buf()))
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(dataset_header())?;
    for s in dataset.samples() {
        writer.write_record(s.inputs.iter().chain(&s.outputs).map(|v| v.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Fiber aspect ratio from fiber length and diameter (same length unit).
pub fn aspect_ratio(length: f64, diameter: f64) -> Result<f64> {
    if !(length.is_finite() && diameter.is_finite() && length > 0.0 && diameter > 0.0) {
        return Err(Error::Domain(format!(
            "fiber length {length} and diameter {diameter} must be positive"
        )));
    }
    Ok(length / diameter)
}

/// Which rows the scaler is fitted on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerFit {
    /// Every row, before splitting.
    #[default]
    Full,
    /// Training rows only.
    Train,
}

/// Normalized inputs and targets of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitData {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

/// A dataset split and normalized once, shared by every run of a design.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub scaler: MinMaxScaler,
    pub indices: SplitIndices,
    pub train: SplitData,
    pub validation: SplitData,
    pub test: SplitData,
}

pub fn prepare(dataset: &Dataset, spec: &SplitSpec, fit: ScalerFit) -> Result<PreparedData> {
    let indices = split_dataset(dataset.len(), spec)?;
    let scaler = match fit {
        ScalerFit::Full => MinMaxScaler::fit(&dataset.inputs().view(), &dataset.outputs().view())?,
        ScalerFit::Train => {
            let (x, y) = dataset.subset(&indices.train);
            MinMaxScaler::fit(&x.view(), &y.view())?
        }
    };
    let normalize = |rows: &[usize]| -> Result<SplitData> {
        let (x, y) = dataset.subset(rows);
        Ok(SplitData {
            inputs: scaler.inputs.transform(&x.view())?,
            targets: scaler.outputs.transform(&y.view())?,
        })
    };
    Ok(PreparedData {
        train: normalize(&indices.train)?,
        validation: normalize(&indices.validation)?,
        test: normalize(&indices.test)?,
        scaler,
        indices,
    })
}
