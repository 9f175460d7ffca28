//! Dense numerics: matrices, random streams, networks and the optimizer.

mod adam;
pub mod linalg;
mod matrix;
mod mlp;
mod rng;

pub use adam::AdamConfig;
pub use matrix::Matrix;
pub use mlp::{
    clamped_sigmoid, Dropout, Gradients, HiddenActivation, Layer, Mlp, MlpSpec, NetworkParams,
    OutputActivation, Tape, PROB_EPS,
};
pub use rng::{RngStream, StreamId, ALGORITHM_ID};
