use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer};
use crate::error::{Error, Result};

/// Feed-forward stack of dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkFile", try_from = "NetworkFile")]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Cached activations from a forward pass: `values[0]` is the input and
/// `values[l + 1]` the output of layer `l`.
#[derive(Clone, Debug)]
pub struct Tape {
    values: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.values.last().expect("tape holds the input at least")
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.values[0]
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(network: &Network) -> Self {
        Gradients {
            layers: network
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    /// Weights then bias, layer by layer, row-major.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied())
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights *= factor;
            g.bias *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|x| x.is_finite()))
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let net = Network { layers };
        net.check()?;
        Ok(net)
    }

    fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !l.check() {
                return Err(Error::InvalidArgument(format!("layer {i}: inconsistent shapes")));
            }
        }
        for w in self.layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::Dimension {
                    expected: w[0].out_dim(),
                    actual: w[1].in_dim(),
                    context: "adjacent layer dimensions",
                });
            }
        }
        Ok(())
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    /// `dims` lists the input width followed by every layer's output width;
    /// hidden layers get `hidden`, the last layer gets `output`.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer dimensions {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit));
                DenseLayer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation: if l + 1 == n { output.clone() } else { hidden.clone() },
                }
            })
            .collect();
        Network::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim()
    }

    /// Batched forward pass recording everything `backward` needs.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Tape> {
        if x.ncols() != self.in_dim() {
            return Err(Error::Dimension {
                expected: self.in_dim(),
                actual: x.ncols(),
                context: "network input",
            });
        }
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.as_standard_layout().into_owned());
        for layer in &self.layers {
            let y = layer.forward(values.last().expect("nonempty").view());
            values.push(y);
        }
        Ok(Tape { values })
    }

    /// Forward pass without a tape.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim() {
            return Err(Error::Dimension {
                expected: self.in_dim(),
                actual: x.ncols(),
                context: "network input",
            });
        }
        let mut y = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            y = layer.forward(y.view());
        }
        Ok(y)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.predict(x)?.into_raw_vec_and_offset().0)
    }

    /// Back-propagate `output_grad` (dL/d output, batch × out) through the
    /// taped forward pass. Returns parameter gradients summed over the batch
    /// and the gradient w.r.t. the input.
    pub fn backward(&self, tape: &Tape, output_grad: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        if tape.values.len() != self.layers.len() + 1 {
            return Err(Error::InvalidArgument("tape does not match network depth".into()));
        }
        if output_grad.dim() != tape.output().dim() {
            return Err(Error::Dimension {
                expected: self.out_dim(),
                actual: output_grad.ncols(),
                context: "output gradient",
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = output_grad.to_owned();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.values[l];
            let output = &tape.values[l + 1];
            if input.ncols() != layer.in_dim() || output.ncols() != layer.out_dim() {
                return Err(Error::InvalidArgument(format!("tape shape mismatch at layer {l}")));
            }
            layer.activation.backprop(output, &mut g);
            let weights = g.t().dot(input);
            let bias = g.sum_axis(Axis(0));
            let input_grad = g.dot(&layer.weights);
            grads.push(LayerGradient { weights, bias });
            g = input_grad;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, g))
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Same ordering as [`Gradients::flat`].
    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                actual: params.len(),
                context: "flat parameters",
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

/// Serialized form: dimensions, activation tags and row-major arrays.
#[derive(Serialize, Deserialize)]
struct NetworkFile {
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<Network> for NetworkFile {
    fn from(net: Network) -> Self {
        NetworkFile {
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerFile {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        let layers = file
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.out_dim, l.in_dim), l.weights).map_err(|_| Error::Dimension {
                    expected: l.out_dim * l.in_dim,
                    actual: 0,
                    context: "serialized weights",
                })?;
                Ok(DenseLayer {
                    weights,
                    bias: Array1::from(l.bias),
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers)
    }
}
