//! Three-level orthogonal arrays and the factor spaces they are decoded against.
//!
//! Arrays are built from a closed-form digit construction rather than stored tables. Run index
//! `i` of an L27 is written in base 3 as `(a, b, e)` (`a = i / 9`, `b = (i / 3) % 3`, `e = i % 3`)
//! and every column is a linear form over GF(3) of those digits. The first five forms are
//! `a`, `b`, `a + b`, `a + 2b` and `e`, which is the classic five-factor L27 assignment; the
//! remaining eight complete the 13-column array. Any two forms are linearly independent, which is
//! exactly what strength-2 balance needs.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::Activation;
use crate::optim::OptimizerKind;
use crate::{Error, Result};

/// Every factor in a design has exactly this many levels.
pub const LEVELS: usize = 3;

/// Column capacity of the 27-run array.
pub const L27_MAX_FACTORS: usize = 13;

/// Column capacity of the 9-run array.
pub const L9_MAX_FACTORS: usize = 4;

/// Coefficients of `(a, b, e)` for each L27 column, in assignment order.
const L27_FORMS: [[u8; 3]; L27_MAX_FACTORS] = [
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [1, 2, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 0, 2],
    [0, 1, 1],
    [0, 1, 2],
    [1, 1, 1],
    [1, 1, 2],
    [1, 2, 1],
    [1, 2, 2],
];

/// Coefficients of `(a, b)` for each L9 column.
const L9_FORMS: [[u8; 2]; L9_MAX_FACTORS] = [[1, 0], [0, 1], [1, 1], [1, 2]];

/// Payload of a single factor level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelValue {
    Int(i64),
    Real(f64),
    Label(String),
}

impl LevelValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            LevelValue::Int(v) => Some(v as f64),
            LevelValue::Real(v) => Some(v),
            LevelValue::Label(_) => None,
        }
    }

    /// Integral payloads (including reals with no fractional part) as a count.
    pub fn as_count(&self) -> Option<usize> {
        match *self {
            LevelValue::Int(v) if v >= 0 => Some(v as usize),
            LevelValue::Real(v) if v >= 0.0 && v.fract() == 0.0 => Some(v as usize),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            LevelValue::Label(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for LevelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelValue::Int(v) => write!(f, "{v}"),
            LevelValue::Real(v) => write!(f, "{v}"),
            LevelValue::Label(s) => f.write_str(s),
        }
    }
}

impl From<i64> for LevelValue {
    fn from(v: i64) -> Self {
        LevelValue::Int(v)
    }
}

impl From<f64> for LevelValue {
    fn from(v: f64) -> Self {
        LevelValue::Real(v)
    }
}

impl From<&str> for LevelValue {
    fn from(v: &str) -> Self {
        LevelValue::Label(v.to_string())
    }
}

/// A named factor with three distinct, ordered levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFactor", into = "RawFactor")]
pub struct Factor {
    name: String,
    levels: [LevelValue; LEVELS],
}

#[derive(Serialize, Deserialize)]
struct RawFactor {
    name: String,
    levels: Vec<LevelValue>,
}

impl TryFrom<RawFactor> for Factor {
    type Error = Error;

    fn try_from(raw: RawFactor) -> Result<Self> {
        Factor::new(raw.name, raw.levels)
    }
}

impl From<Factor> for RawFactor {
    fn from(f: Factor) -> Self {
        RawFactor {
            name: f.name,
            levels: f.levels.into(),
        }
    }
}

impl Factor {
    pub fn new(name: impl Into<String>, levels: Vec<LevelValue>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Design("factor with an empty name".into()));
        }
        let count = levels.len();
        let levels: [LevelValue; LEVELS] = levels.try_into().map_err(|_| {
            Error::Design(format!(
                "factor `{name}` has {count} levels; only 3-level factors are supported"
            ))
        })?;
        for i in 0..LEVELS {
            for j in i + 1..LEVELS {
                if levels[i] == levels[j] {
                    return Err(Error::Design(format!(
                        "factor `{name}` repeats level `{}`",
                        levels[i]
                    )));
                }
            }
        }
        Ok(Factor { name, levels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[LevelValue; LEVELS] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> Option<&LevelValue> {
        self.levels.get(index)
    }

    pub fn position(&self, value: &LevelValue) -> Option<usize> {
        self.levels.iter().position(|l| l == value)
    }
}

/// Ordered factors; column `j` of a design is assigned to factor `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct FactorSpace {
    factors: Vec<Factor>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    factors: Vec<Factor>,
}

impl TryFrom<RawSpace> for FactorSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        FactorSpace::new(raw.factors)
    }
}

impl From<FactorSpace> for RawSpace {
    fn from(s: FactorSpace) -> Self {
        RawSpace { factors: s.factors }
    }
}

impl FactorSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() || factors.len() > L27_MAX_FACTORS {
            return Err(Error::Design(format!(
                "{} factors given; a 27-run 3-level design holds 1 to {L27_MAX_FACTORS}",
                factors.len()
            )));
        }
        let mut seen = HashSet::new();
        for f in &factors {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Design(format!("duplicate factor `{}`", f.name)));
            }
        }
        Ok(FactorSpace { factors })
    }

    /// The five network hyperparameters and their levels, in column order HL, NN, ACT, OPT, LR.
    pub fn paper() -> Self {
        let f = |name: &str, levels: [LevelValue; 3]| Factor::new(name, levels.into()).unwrap();
        FactorSpace::new(vec![
            f("HL", [1.into(), 2.into(), 3.into()]),
            f("NN", [10.into(), 20.into(), 30.into()]),
            f("ACT", ["relu".into(), "elu".into(), "selu".into()]),
            f("OPT", ["Adam".into(), "Adamax".into(), "RMSprop".into()]),
            f("LR", [0.001.into(), 0.01.into(), 0.1.into()]),
        ])
        .unwrap()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn full_factorial_size(&self) -> u64 {
        (LEVELS as u64).pow(self.factors.len() as u32)
    }

    pub fn factor(&self, name: &str) -> Option<(usize, &Factor)> {
        self.factors
            .iter()
            .enumerate()
            .find(|(_, f)| f.name == name)
    }

    /// Level indices of `config` in this space, or `None` when some factor value is not a level.
    pub fn encode(&self, config: &HyperConfig) -> Option<Vec<u8>> {
        self.factors
            .iter()
            .map(|f| {
                let value = config.value_of(&f.name)?;
                f.levels
                    .iter()
                    .position(|l| level_matches(l, &value))
                    .map(|p| p as u8)
            })
            .collect()
    }
}

fn level_matches(level: &LevelValue, value: &LevelValue) -> bool {
    match (level, value) {
        (LevelValue::Label(a), LevelValue::Label(b)) => a.eq_ignore_ascii_case(b),
        _ => match (level.as_f64(), value.as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        },
    }
}

/// A run-ordered matrix of level indices, one column per factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrthogonalArray {
    runs: usize,
    columns: usize,
    cells: Vec<u8>,
}

impl OrthogonalArray {
    /// Wraps a rectangular, nonempty matrix. Cell values are checked by [`verify_strength2`] and
    /// when decoding, so malformed arrays can still be represented and diagnosed.
    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self> {
        let columns = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || columns == 0 {
            return Err(Error::MalformedArray("array has no cells".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != columns) {
            return Err(Error::MalformedArray(format!(
                "run {} has {} cells, expected {columns}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Ok(OrthogonalArray {
            runs: rows.len(),
            columns,
            cells: rows.into_iter().flatten().collect(),
        })
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn row(&self, run: usize) -> &[u8] {
        &self.cells[run * self.columns..(run + 1) * self.columns]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks_exact(self.columns)
    }

    pub fn get(&self, run: usize, column: usize) -> u8 {
        self.cells[run * self.columns + column]
    }

    pub fn set(&mut self, run: usize, column: usize, level: u8) {
        self.cells[run * self.columns + column] = level;
    }

    pub fn column(&self, column: usize) -> impl Iterator<Item = u8> + '_ {
        self.rows().map(move |r| r[column])
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.rows().map(<[u8]>::to_vec).collect()
    }
}

/// First `factors` columns of the 27-run array.
pub fn l27(factors: usize) -> Result<OrthogonalArray> {
    if factors == 0 || factors > L27_MAX_FACTORS {
        return Err(Error::Design(format!(
            "L27 holds 1 to {L27_MAX_FACTORS} factors, got {factors}"
        )));
    }
    let rows = (0..27u8)
        .map(|i| {
            let digits = [i / 9, (i / 3) % 3, i % 3];
            L27_FORMS[..factors]
                .iter()
                .map(|form| form.iter().zip(digits).map(|(c, d)| c * d).sum::<u8>() % 3)
                .collect()
        })
        .collect();
    OrthogonalArray::from_rows(rows)
}

/// First `factors` columns of the 9-run array.
pub fn l9(factors: usize) -> Result<OrthogonalArray> {
    if factors == 0 || factors > L9_MAX_FACTORS {
        return Err(Error::Design(format!(
            "L9 holds 1 to {L9_MAX_FACTORS} factors, got {factors}"
        )));
    }
    let rows = (0..9u8)
        .map(|i| {
            let digits = [i / 3, i % 3];
            L9_FORMS[..factors]
                .iter()
                .map(|form| form.iter().zip(digits).map(|(c, d)| c * d).sum::<u8>() % 3)
                .collect()
        })
        .collect();
    OrthogonalArray::from_rows(rows)
}

/// The five-factor L27 used for the network hyperparameter study.
pub fn build_l27(space: &FactorSpace) -> Result<OrthogonalArray> {
    if space.len() != 5 {
        let names: Vec<_> = space.factors.iter().map(|f| f.name.as_str()).collect();
        return Err(Error::Design(format!(
            "the five-factor L27 needs exactly 5 factors, got {} ({})",
            space.len(),
            names.join(", ")
        )));
    }
    l27(5)
}

/// Smallest supported array for `space`: L9 up to four factors, L27 up to thirteen.
pub fn build_design(space: &FactorSpace) -> Result<OrthogonalArray> {
    if space.len() <= L9_MAX_FACTORS {
        l9(space.len())
    } else {
        l27(space.len())
    }
}

/// A pair of columns whose level pairs are not equally frequent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BalanceViolation {
    pub columns: (usize, usize),
    pub levels: (u8, u8),
    pub count: usize,
    pub expected_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BalanceReport {
    /// Number of column pairs inspected.
    pub pairs_checked: usize,
    /// First violating pair in column-major scan order.
    pub violation: Option<BalanceViolation>,
}

impl BalanceReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks that every ordered level pair appears `runs / 9` times in every pair of columns.
pub fn verify_strength2(array: &OrthogonalArray) -> Result<BalanceReport> {
    if let Some(pos) = array.cells.iter().position(|&c| c as usize >= LEVELS) {
        return Err(Error::MalformedArray(format!(
            "cell (run {}, column {}) holds level {}",
            pos / array.columns + 1,
            pos % array.columns + 1,
            array.cells[pos]
        )));
    }
    let mut pairs_checked = 0;
    for c1 in 0..array.columns {
        for c2 in c1 + 1..array.columns {
            pairs_checked += 1;
            let mut counts = [[0usize; LEVELS]; LEVELS];
            for row in array.rows() {
                counts[row[c1] as usize][row[c2] as usize] += 1;
            }
            for (l1, line) in counts.iter().enumerate() {
                for (l2, &count) in line.iter().enumerate() {
                    if count * LEVELS * LEVELS != array.runs {
                        return Ok(BalanceReport {
                            pairs_checked,
                            violation: Some(BalanceViolation {
                                columns: (c1, c2),
                                levels: (l1 as u8, l2 as u8),
                                count,
                                expected_runs: array.runs,
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(BalanceReport {
        pairs_checked,
        violation: None,
    })
}

/// Level payloads of one run, in factor order.
pub fn decode_levels(
    array: &OrthogonalArray,
    index: usize,
    space: &FactorSpace,
) -> Result<Vec<LevelValue>> {
    if index >= array.runs {
        return Err(Error::RunOutOfRange {
            index,
            rows: array.runs,
        });
    }
    if array.columns != space.len() {
        return Err(Error::Design(format!(
            "array has {} columns but the factor space has {} factors",
            array.columns,
            space.len()
        )));
    }
    array
        .row(index)
        .iter()
        .zip(&space.factors)
        .map(|(&lvl, f)| {
            f.level(lvl as usize).cloned().ok_or_else(|| {
                Error::MalformedArray(format!("level {lvl} for factor `{}`", f.name))
            })
        })
        .collect()
}

/// Decodes one run into a network configuration.
pub fn decode_run(
    array: &OrthogonalArray,
    index: usize,
    space: &FactorSpace,
) -> Result<HyperConfig> {
    let levels = decode_levels(array, index, space)?;
    HyperConfig::from_assignment(space, &levels)
}

/// One trainable network configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
}

impl Default for HyperConfig {
    /// Baseline used for hyperparameters a custom factor space leaves out.
    fn default() -> Self {
        HyperConfig {
            hidden_layers: 2,
            neurons: 20,
            activation: Activation::Relu,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.001,
        }
    }
}

impl HyperConfig {
    /// Factor names understood by [`HyperConfig::from_assignment`].
    pub const FACTOR_NAMES: [&'static str; 5] = ["HL", "NN", "ACT", "OPT", "LR"];

    /// Builds a configuration from level payloads assigned to the factors of `space`. Factors
    /// the space does not mention keep their [`Default`] values.
    pub fn from_assignment(space: &FactorSpace, levels: &[LevelValue]) -> Result<Self> {
        if levels.len() != space.len() {
            return Err(Error::Design(format!(
                "{} level values for {} factors",
                levels.len(),
                space.len()
            )));
        }
        let mut config = HyperConfig::default();
        for (factor, value) in space.factors.iter().zip(levels) {
            let bad = || {
                Error::Design(format!(
                    "factor `{}` cannot take the value `{value}`",
                    factor.name
                ))
            };
            match factor.name.as_str() {
                "HL" => {
                    config.hidden_layers = value.as_count().filter(|&n| n > 0).ok_or_else(bad)?
                }
                "NN" => config.neurons = value.as_count().filter(|&n| n > 0).ok_or_else(bad)?,
                "ACT" => {
                    config.activation = value
                        .as_label()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(bad)?
                }
                "OPT" => {
                    config.optimizer = value
                        .as_label()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(bad)?
                }
                "LR" => {
                    config.learning_rate = value
                        .as_f64()
                        .filter(|lr| lr.is_finite() && *lr > 0.0)
                        .ok_or_else(bad)?
                }
                other => {
                    return Err(Error::Design(format!(
                        "unknown factor `{other}`; expected one of {}",
                        Self::FACTOR_NAMES.join(", ")
                    )))
                }
            }
        }
        Ok(config)
    }

    pub(crate) fn value_of(&self, factor: &str) -> Option<LevelValue> {
        Some(match factor {
            "HL" => LevelValue::Int(self.hidden_layers as i64),
            "NN" => LevelValue::Int(self.neurons as i64),
            "ACT" => LevelValue::Label(self.activation.to_string()),
            "OPT" => LevelValue::Label(self.optimizer.to_string()),
            "LR" => LevelValue::Real(self.learning_rate),
            _ => return None,
        })
    }

    /// Layer-size chain `inputs -> hidden... -> outputs`.
    pub fn layer_sizes(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut sizes = vec![inputs];
        sizes.extend(std::iter::repeat_n(self.neurons, self.hidden_layers));
        sizes.push(outputs);
        sizes
    }
}

impl fmt::Display for HyperConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "HL={} NN={} ACT={} OPT={} LR={}",
            self.hidden_layers, self.neurons, self.activation, self.optimizer, self.learning_rate
        )
    }
}
