use serde::{Deserialize, Serialize};

use super::Tensor;

/// Negative slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    LeakyRelu,
    /// Softmax over the last axis.
    Softmax,
}

impl Activation {
    /// Applies the activation to a plain tensor.
    pub fn apply(self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        match self {
            Activation::Sigmoid => out.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Tanh => out.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
            Activation::LeakyRelu => out.data_mut().iter_mut().for_each(|v| *v = leaky_relu(*v)),
            Activation::Softmax => {
                let w = x.last_dim().max(1);
                out.data_mut().chunks_mut(w).for_each(softmax_in_place);
            }
        }
        out
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn softmax_in_place(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in xs.iter_mut() {
        *v /= total;
    }
}
