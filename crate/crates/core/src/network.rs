//! Dense feed-forward regression network.
//!
//! All parameters live in one flat buffer so optimizers can update them without knowing the
//! layer structure. Layer `l` stores its weight matrix row-major with shape `(out, in)`, followed
//! by its bias vector. Hidden layers share one activation; the output layer is linear.

use std::fmt;
use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const ELU_ALPHA: f64 = 1.0;
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Elu,
    Selu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Elu, Activation::Selu];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    ELU_ALPHA * x.exp_m1()
                }
            }
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
        }
    }

    /// Derivative of [`Activation::eval`]; at 0 the positive-branch slope is used.
    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x >= 0.0 {
                    1.0
                } else {
                    ELU_ALPHA * x.exp()
                }
            }
            Activation::Selu => {
                if x >= 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Selu => "selu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "elu" => Ok(Activation::Elu),
            "selu" => Ok(Activation::Selu),
            _ => Err(Error::Construction(format!("unknown activation `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerSlot {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

impl LayerSlot {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.weights..self.weights + self.inputs * self.outputs
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias..self.bias + self.outputs
    }
}

fn layout(sizes: &[usize]) -> Result<(Vec<LayerSlot>, usize)> {
    if sizes.len() < 2 {
        return Err(Error::Construction(format!(
            "a network needs at least an input and an output size, got {sizes:?}"
        )));
    }
    if let Some(pos) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Construction(format!("layer {pos} has size 0")));
    }
    let mut offset = 0;
    let slots = sizes
        .windows(2)
        .map(|w| {
            let slot = LayerSlot {
                inputs: w[0],
                outputs: w[1],
                weights: offset,
                bias: offset + w[0] * w[1],
            };
            offset = slot.bias + w[1];
            slot
        })
        .collect();
    Ok((slots, offset))
}

/// Multilayer perceptron with a shared hidden activation and a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    slots: Vec<LayerSlot>,
    params: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut mlp = Mlp::zeros(sizes, activation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in mlp.slots.clone() {
            let limit = (6.0 / (slot.inputs + slot.outputs) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for w in &mut mlp.params[slot.weight_range()] {
                *w = dist.sample(&mut rng);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        let (slots, count) = layout(sizes)?;
        Ok(Mlp {
            sizes: sizes.to_vec(),
            activation,
            slots,
            params: vec![0.0; count],
        })
    }

    /// Rebuilds a network from per-layer weight rows `(out, in)` and bias vectors.
    pub fn from_layers(
        sizes: &[usize],
        activation: Activation,
        weights: &[Vec<Vec<f64>>],
        biases: &[Vec<f64>],
    ) -> Result<Self> {
        let mut mlp = Mlp::zeros(sizes, activation)?;
        if weights.len() != mlp.slots.len() || biases.len() != mlp.slots.len() {
            return Err(Error::Shape(format!(
                "{} weight and {} bias blocks for {} layers",
                weights.len(),
                biases.len(),
                mlp.slots.len()
            )));
        }
        for (l, slot) in mlp.slots.clone().into_iter().enumerate() {
            let rows = &weights[l];
            if rows.len() != slot.outputs || rows.iter().any(|r| r.len() != slot.inputs) {
                return Err(Error::Shape(format!(
                    "layer {l} weights are not {}x{}",
                    slot.outputs, slot.inputs
                )));
            }
            if biases[l].len() != slot.outputs {
                return Err(Error::Shape(format!(
                    "layer {l} bias has {} entries, expected {}",
                    biases[l].len(),
                    slot.outputs
                )));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            mlp.params[slot.weight_range()].copy_from_slice(&flat);
            mlp.params[slot.bias_range()].copy_from_slice(&biases[l]);
        }
        if mlp.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Construction("non-finite parameter".into()));
        }
        Ok(mlp)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.slots.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let slot = self.slots[layer];
        ArrayView2::from_shape(
            (slot.outputs, slot.inputs),
            &self.params[slot.weight_range()],
        )
        .expect("layout matches buffer")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[self.slots[layer].bias_range()])
    }

    pub fn weights_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        let slot = self.slots[layer];
        ArrayViewMut2::from_shape(
            (slot.outputs, slot.inputs),
            &mut self.params[slot.weight_range()],
        )
        .expect("layout matches buffer")
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let range = self.slots[layer].bias_range();
        &mut self.params[range]
    }

    fn check_inputs(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_size() {
            return Err(Error::Shape(format!(
                "inputs have {} columns, network expects {}",
                x.ncols(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Affine map of layer `l` applied to a batch.
    fn affine(&self, layer: usize, a: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = a.dot(&self.weights(layer).t());
        z += &self.bias(layer);
        z
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_inputs(&x)?;
        let last = self.slots.len() - 1;
        let mut a = self.affine(0, &x);
        for l in 1..=last {
            a.mapv_inplace(|v| self.activation.eval(v));
            a = self.affine(l, &a.view());
        }
        Ok(a)
    }

    /// Mean-squared error over every output entry of the batch.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
        let pred = self.forward(x)?;
        check_targets(&pred, &y)?;
        Ok(mse(&pred.view(), &y))
    }

    /// Loss and its exact gradient with respect to every parameter, in [`Mlp::params`] order.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let loss = self.backward_into(x, y, &mut grads)?;
        Ok((loss, grads))
    }

    pub fn backward_into(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        grads: &mut [f64],
    ) -> Result<f64> {
        self.check_inputs(&x)?;
        if x.nrows() == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "gradient buffer has {} entries, network has {}",
                grads.len(),
                self.params.len()
            )));
        }
        let layers = self.slots.len();

        // pre-activations of every layer and the post-activations feeding each layer
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(layers - 1);
        pre.push(self.affine(0, &x));
        for l in 1..layers {
            let a = pre[l - 1].mapv(|v| self.activation.eval(v));
            pre.push(self.affine(l, &a.view()));
            post.push(a);
        }
        let pred = &pre[layers - 1];
        check_targets(pred, &y)?;
        let loss = mse(&pred.view(), &y);

        let scale = 2.0 / (pred.len() as f64);
        let mut delta = (pred - &y) * scale;
        for l in (0..layers).rev() {
            let slot = self.slots[l];
            let input = if l == 0 { x } else { post[l - 1].view() };
            let mut gw = ArrayViewMut2::from_shape(
                (slot.outputs, slot.inputs),
                &mut grads[slot.weight_range()],
            )
            .expect("layout matches buffer");
            general_mat_mul(1.0, &delta.t(), &input, 0.0, &mut gw);
            let gb: Array1<f64> = delta.sum_axis(Axis(0));
            grads[slot.bias_range()].copy_from_slice(gb.as_slice().expect("contiguous"));
            if l > 0 {
                let mut back = delta.dot(&self.weights(l));
                back.zip_mut_with(&pre[l - 1], |d, &z| *d *= self.activation.grad(z));
                delta = back;
            }
        }
        Ok(loss)
    }
}

fn check_targets(pred: &Array2<f64>, y: &ArrayView2<'_, f64>) -> Result<()> {
    if pred.dim() != y.dim() {
        return Err(Error::Shape(format!(
            "targets are {:?}, predictions are {:?}",
            y.dim(),
            pred.dim()
        )));
    }
    Ok(())
}

fn mse(pred: &ArrayView2<'_, f64>, y: &ArrayView2<'_, f64>) -> f64 {
    let sum: f64 = pred
        .iter()
        .zip(y.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    sum / pred.len() as f64
}
