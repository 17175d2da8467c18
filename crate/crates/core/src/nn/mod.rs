//! Dense feed-forward networks with hand-written back-propagation and the
//! RMSprop optimizer. All arithmetic is `f64`.

mod layer;
mod network;
mod rmsprop;

pub use layer::{softmax, softmax_in_place, Activation, DenseLayer, Segment};
pub use network::{Gradients, LayerGradient, Network, Tape};
pub use rmsprop::{RmsProp, RmsPropConfig};

#[cfg(test)]
mod tests;
