use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

/// A contiguous slice of a layer's output with its own output function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub width: usize,
    /// Softmax over the segment when true, identity otherwise.
    pub softmax: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
    /// Mixed output head: softmax per categorical block, identity for numeric
    /// positions.
    SoftmaxBlocks { segments: Vec<Segment> },
}

impl Activation {
    pub(crate) fn apply(&self, pre: &mut Array2<f64>) {
        match self {
            Activation::Tanh => pre.mapv_inplace(f64::tanh),
            Activation::Linear => {}
            Activation::SoftmaxBlocks { segments } => {
                for mut row in pre.rows_mut() {
                    let row = row.as_slice_mut().expect("standard layout");
                    let mut offset = 0;
                    for seg in segments {
                        if seg.softmax {
                            softmax_in_place(&mut row[offset..offset + seg.width]);
                        }
                        offset += seg.width;
                    }
                }
            }
        }
    }

    /// Turn the gradient w.r.t. the activation output into the gradient w.r.t.
    /// the pre-activation, given the activation output `post`.
    pub(crate) fn backprop(&self, post: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Tanh => Zip::from(grad).and(post).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::Linear => {}
            Activation::SoftmaxBlocks { segments } => {
                for (mut g_row, y_row) in grad.rows_mut().into_iter().zip(post.rows()) {
                    let g_row = g_row.as_slice_mut().expect("standard layout");
                    let y_row = y_row.as_slice().expect("standard layout");
                    let mut offset = 0;
                    for seg in segments {
                        if seg.softmax {
                            let g = &mut g_row[offset..offset + seg.width];
                            let y = &y_row[offset..offset + seg.width];
                            let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                            for (gi, &yi) in g.iter_mut().zip(y) {
                                *gi = yi * (*gi - dot);
                            }
                        }
                        offset += seg.width;
                    }
                }
            }
        }
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Fully connected layer `y = f(W x + b)` with `W` stored out × in.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Batched forward pass over rows of `x`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights.t());
        if !y.is_standard_layout() {
            y = y.as_standard_layout().into_owned();
        }
        y += &self.bias.view().insert_axis(Axis(0));
        self.activation.apply(&mut y);
        y
    }

    pub(crate) fn check(&self) -> bool {
        let width_ok = match &self.activation {
            Activation::SoftmaxBlocks { segments } => {
                segments.iter().map(|s| s.width).sum::<usize>() == self.out_dim()
            }
            _ => true,
        };
        width_ok && self.bias.len() == self.out_dim()
    }
}
