//! First-order optimizers over flat parameter buffers.
//!
//! Moment decay rates and ε are fixed at their usual defaults; only the learning rate is tuned.
//! ε is added outside the square root in every denominator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const RMS_DECAY: f64 = 0.9;
pub const EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    Adamax,
    #[serde(rename = "RMSprop")]
    Rmsprop,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [
        OptimizerKind::Adam,
        OptimizerKind::Adamax,
        OptimizerKind::Rmsprop,
    ];
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "Adam",
            OptimizerKind::Adamax => "Adamax",
            OptimizerKind::Rmsprop => "RMSprop",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adamax" => Ok(OptimizerKind::Adamax),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            _ => Err(Error::Construction(format!("unknown optimizer `{s}`"))),
        }
    }
}

/// Per-parameter buffers. `second` holds the squared-gradient average for Adam and RMSprop and
/// the infinity-norm accumulator for Adamax; `first` is unused by RMSprop.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: usize) -> Self {
        OptimizerState {
            first: vec![0.0; params],
            second: vec![0.0; params],
            step: 0,
        }
    }
}

fn check(state: &OptimizerState, params: &[f64], grads: &[f64], lr: f64) -> Result<()> {
    let step = state.step + 1;
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Training {
            step,
            reason: format!("learning rate {lr} is not positive"),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training {
            step,
            reason: format!("non-finite gradient at parameter {i}"),
        });
    }
    Ok(())
}

pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
) -> Result<()> {
    check(state, params, grads, lr)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

pub fn adamax_step(
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
) -> Result<()> {
    check(state, params, grads, lr)?;
    state.step += 1;
    let rate = lr / (1.0 - BETA1.powi(state.step as i32));
    for (((p, &g), m), u) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *u = (BETA2 * *u).max(g.abs());
        *p -= rate * *m / (*u + EPSILON);
    }
    Ok(())
}

pub fn rmsprop_step(
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
) -> Result<()> {
    check(state, params, grads, lr)?;
    state.step += 1;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(&mut state.second) {
        *v = RMS_DECAY * *v + (1.0 - RMS_DECAY) * g * g;
        *p -= lr * g / (v.sqrt() + EPSILON);
    }
    Ok(())
}

/// An optimizer bound to one parameter buffer for the lifetime of a training run.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: usize) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::Construction(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            state: OptimizerState::new(params),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.state.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let step = match self.kind {
            OptimizerKind::Adam => adam_step,
            OptimizerKind::Adamax => adamax_step,
            OptimizerKind::Rmsprop => rmsprop_step,
        };
        step(&mut self.state, params, grads, self.learning_rate)
    }
}
